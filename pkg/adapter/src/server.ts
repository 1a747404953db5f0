// HTTP surface: the three backend wire protocols plus a health check.
// Requests are stateless; each stage's model sits behind its own
// serialized inference queue. Model failures surface as HTTP 502 with a
// structured body; malformed requests as 400.

import express, { Express, Request, Response } from "express";
import { z } from "zod";

import { decodeWav, encodeWav, parseMultipart } from "./codecs";
import { Models } from "./config";
import { InferenceQueue } from "./queue";

const chatBodySchema = z.object({
  model: z.string().optional(),
  temperature: z.number().min(0).max(2).default(0),
  messages: z
    .array(
      z.object({
        role: z.string(),
        content: z.union([
          z.string(),
          z.array(z.object({ type: z.string() }).passthrough()),
        ]),
      }),
    )
    .min(1),
  response_format: z.object({ type: z.string() }).optional(),
  user: z.string().optional(),
});

const imageBodySchema = z.object({
  prompt: z.string().min(1),
  seed: z.number().int().default(0),
  size: z
    .string()
    .regex(/^\d+x\d+$/)
    .default("512x512"),
  response_format: z.string().optional(),
});

function textOf(content: string | Array<Record<string, unknown>>): string {
  if (typeof content === "string") return content;
  return content
    .map((part) => (typeof part.text === "string" ? part.text : ""))
    .join(" ")
    .trim();
}

function modelError(res: Response, stage: string, error: unknown): void {
  res.status(502).json({
    error: { stage, message: error instanceof Error ? error.message : String(error) },
  });
}

export function createApp(models: Models): Express {
  const app = express();
  app.use(express.json({ limit: "64mb" }));
  app.use(express.raw({ type: "multipart/form-data", limit: "64mb" }));

  const queues = {
    llm: new InferenceQueue(),
    image: new InferenceQueue(),
    tts: new InferenceQueue(),
  };

  app.get("/healthz", (_req: Request, res: Response) => {
    res.json({
      status: "ok",
      models: { llm: models.llm.id, image: models.image.id, tts: models.tts.id },
    });
  });

  app.post("/v1/chat/completions", async (req: Request, res: Response) => {
    const parsed = chatBodySchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: { stage: "llm", message: parsed.error.message } });
      return;
    }
    const body = parsed.data;
    const system = body.messages.find((m) => m.role === "system");
    const user = body.messages.find((m) => m.role === "user");
    try {
      const text = await queues.llm.run(() =>
        models.llm.complete({
          system: system ? textOf(system.content) : "",
          user: user ? textOf(user.content) : "",
          temperature: body.temperature,
          jsonMode: body.response_format?.type === "json_object",
        }),
      );
      res.json({
        model: models.llm.id,
        choices: [
          { index: 0, message: { role: "assistant", content: text }, finish_reason: "stop" },
        ],
      });
    } catch (error) {
      modelError(res, "llm", error);
    }
  });

  app.post("/v1/images/generations", async (req: Request, res: Response) => {
    const parsed = imageBodySchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: { stage: "image", message: parsed.error.message } });
      return;
    }
    const { prompt, seed, size } = parsed.data;
    const [width, height] = size.split("x").map(Number);
    try {
      const png = await queues.image.run(() =>
        models.image.generate(prompt, seed, width, height),
      );
      res.json({ data: [{ b64_json: png.toString("base64") }], format: "png" });
    } catch (error) {
      modelError(res, "image", error);
    }
  });

  app.post("/synthesize", async (req: Request, res: Response) => {
    if (!Buffer.isBuffer(req.body)) {
      res
        .status(400)
        .json({ error: { stage: "tts", message: "expected a multipart/form-data body" } });
      return;
    }
    let fields: Map<string, Buffer>;
    try {
      fields = parseMultipart(req.headers["content-type"] ?? "", req.body);
    } catch (error) {
      res.status(400).json({
        error: { stage: "tts", message: (error as Error).message },
      });
      return;
    }
    const text = fields.get("text")?.toString("utf-8") ?? "";
    const instruction = fields.get("instruction")?.toString("utf-8") ?? "";
    const faceCaption = fields.get("face_caption")?.toString("utf-8") ?? "";
    const mode = fields.get("mode")?.toString("utf-8") ?? "sentence_synthesis";
    const faceImage = fields.get("face_image") ?? Buffer.alloc(0);
    const voiceWav = fields.get("voice_sample");

    if (mode !== "persona_bootstrap" && mode !== "sentence_synthesis") {
      res.status(400).json({ error: { stage: "tts", message: `unknown mode ${mode}` } });
      return;
    }
    if (!faceCaption || faceImage.length === 0) {
      res.status(400).json({
        error: { stage: "tts", message: "face_image and face_caption are required" },
      });
      return;
    }
    let voicePcm: Buffer = Buffer.alloc(0);
    if (voiceWav && voiceWav.length > 0) {
      try {
        voicePcm = decodeWav(voiceWav).pcm;
      } catch (error) {
        res.status(400).json({
          error: { stage: "tts", message: `voice_sample: ${(error as Error).message}` },
        });
        return;
      }
    }
    if (mode === "sentence_synthesis" && voicePcm.length === 0) {
      res.status(400).json({
        error: { stage: "tts", message: "sentence_synthesis requires a voice_sample" },
      });
      return;
    }
    try {
      const pcm = await queues.tts.run(() =>
        models.tts.synthesize({ text, instruction, faceCaption, faceImage, voicePcm, mode }),
      );
      res.type("audio/wav").send(encodeWav(pcm));
    } catch (error) {
      modelError(res, "tts", error);
    }
  });

  app.use((_req: Request, res: Response) => {
    res.status(404).json({ error: { stage: "http", message: "unknown endpoint" } });
  });

  return app;
}
