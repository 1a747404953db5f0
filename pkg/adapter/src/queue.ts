// Serialized inference queue: model calls are GPU-bound and run one at a
// time per model, while the HTTP layer stays concurrent.

export class InferenceQueue {
  private tail: Promise<unknown> = Promise.resolve();

  run<T>(task: () => Promise<T>): Promise<T> {
    const next = this.tail.then(task, task);
    this.tail = next.then(
      () => undefined,
      () => undefined,
    );
    return next;
  }
}
