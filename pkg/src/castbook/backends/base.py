"""Backend contracts shared by mock and HTTP implementations.

Three model stages are pluggable: LLM chat, image generation, and
multimodal TTS (plus an audio-capable judge used by evaluation). Every
implementation receives the request dataclasses below and returns
canonicalized responses: text for the LLM, encoded image bytes for the
image stage, and mono 16-bit PCM at 24 kHz for TTS.

``llm_complete`` / ``generate_image`` / ``synthesize`` are the operation
entry points: they add the retry policy (up to 3 retries with 0.5/1/2 s
backoff), response validation, and the per-backend in-flight cap.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import jsonschema

from ..audio import pcm_duration_s
from ..model import SAMPLE_RATE

VALID_IMAGE_SIZES = ((512, 512), (768, 768))
RETRY_DELAYS_S = (0.5, 1.0, 2.0)
TTS_MIN_DURATION_S = 0.2
TTS_MAX_DURATION_S = 60.0


class BackendError(RuntimeError):
    """Base class for backend failures."""


class TransportError(BackendError):
    """Network / IO / rate-limit failure; retried with backoff."""


class SchemaViolationError(BackendError):
    """LLM response did not satisfy the requested JSON schema."""


class InvalidResponseError(BackendError):
    """Backend returned content that violates the response contract."""


@dataclass(frozen=True)
class BackendIdentity:
    stage: str  # llm | image | tts | mllm_judge
    kind: str  # http | mock
    name: str  # endpoint URL or mock name
    version: str = "1"

    def __str__(self) -> str:
        return f"{self.stage}:{self.kind}:{self.name}:{self.version}"


@dataclass(frozen=True)
class LlmRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0
    response_format: str = "free_text"  # free_text | json
    json_schema: dict | None = None
    key: str = ""  # scripted-fixture tag; carried as the chat `user` field

    def __post_init__(self) -> None:
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise ValueError("LLM prompts must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.response_format not in ("free_text", "json"):
            raise ValueError(f"unknown response format {self.response_format!r}")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    finish_reason: str = "stop"


@dataclass(frozen=True)
class ImageRequest:
    caption: str
    seed: int
    size: tuple[int, int] = (512, 512)

    def __post_init__(self) -> None:
        if not self.caption.strip():
            raise ValueError("image caption must be non-empty")
        if tuple(self.size) not in VALID_IMAGE_SIZES:
            raise ValueError(f"image size {self.size} not in {VALID_IMAGE_SIZES}")


@dataclass(frozen=True)
class ImageResponse:
    image: bytes
    format: str = "png"


MODE_PERSONA_BOOTSTRAP = "persona_bootstrap"
MODE_SENTENCE_SYNTHESIS = "sentence_synthesis"


@dataclass(frozen=True)
class TtsRequest:
    text: str
    instruction: str
    face_image: bytes
    face_caption: str
    voice_sample: bytes  # mono PCM 16-bit at 24 kHz; empty in bootstrap mode
    mode: str = MODE_SENTENCE_SYNTHESIS

    def __post_init__(self) -> None:
        if self.mode not in (MODE_PERSONA_BOOTSTRAP, MODE_SENTENCE_SYNTHESIS):
            raise ValueError(f"unknown TTS mode {self.mode!r}")
        if not self.face_caption.strip() or not self.face_image:
            raise ValueError("TTS requests require a face image and caption")
        if self.mode == MODE_SENTENCE_SYNTHESIS:
            if not self.voice_sample:
                raise ValueError("sentence synthesis requires a voice sample")
            if not self.text.strip():
                raise ValueError("sentence synthesis requires target text")


@dataclass(frozen=True)
class TtsResponse:
    pcm: bytes  # mono 16-bit PCM at SAMPLE_RATE
    sample_rate: int = SAMPLE_RATE

    @property
    def duration_s(self) -> float:
        return pcm_duration_s(self.pcm, self.sample_rate)


class LlmBackend(Protocol):
    identity: BackendIdentity

    def complete(self, request: LlmRequest) -> LlmResponse: ...


class ImageBackend(Protocol):
    identity: BackendIdentity

    def generate(self, request: ImageRequest) -> ImageResponse: ...


class TtsBackend(Protocol):
    identity: BackendIdentity

    def synthesize(self, request: TtsRequest) -> TtsResponse: ...


class JudgeBackend(Protocol):
    """Audio-to-text QA: answers one question about a WAV clip."""

    identity: BackendIdentity

    def ask(self, wav_data: bytes, question: str, key: str = "") -> str: ...


@dataclass
class RetryPolicy:
    delays_s: tuple[float, ...] = RETRY_DELAYS_S
    sleep: Callable[[float], None] = field(default=time.sleep)

    def run(self, attempt: Callable[[], object], retry_on: tuple[type, ...]) -> object:
        last: Exception | None = None
        for delay in (None, *self.delays_s):
            if delay is not None:
                self.sleep(delay)
            try:
                return attempt()
            except retry_on as exc:  # type: ignore[misc]
                last = exc
        assert last is not None
        raise last


class InflightCap:
    """Bounds concurrent requests against one backend (default 4)."""

    def __init__(self, limit: int = 4) -> None:
        self._sem = threading.Semaphore(limit)

    def __enter__(self) -> None:
        self._sem.acquire()

    def __exit__(self, *exc: object) -> None:
        self._sem.release()


def llm_complete(
    backend: LlmBackend,
    request: LlmRequest,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
) -> LlmResponse:
    """Run an LLM request with retries and (optional) schema validation.

    Transport errors and schema violations are both retried; a schema
    violation that survives all retries raises ``SchemaViolationError``
    so the calling stage can apply its declared fallback.
    """
    retry = retry or RetryPolicy()

    def attempt() -> LlmResponse:
        with cap or _NULL_CAP:
            response = backend.complete(request)
        if not response.text.strip():
            raise InvalidResponseError("LLM returned empty text")
        if request.response_format == "json":
            _validate_json_response(response.text, request.json_schema)
        return response

    return retry.run(attempt, retry_on=(TransportError, SchemaViolationError))  # type: ignore[return-value]


def _validate_json_response(text: str, schema: dict | None) -> None:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolationError(f"response is not valid JSON: {exc}") from exc
    if schema is not None:
        try:
            jsonschema.validate(payload, schema)
        except jsonschema.ValidationError as exc:
            raise SchemaViolationError(f"response violates schema: {exc.message}") from exc


def generate_image(
    backend: ImageBackend,
    request: ImageRequest,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
) -> ImageResponse:
    """Run an image request with retries; verifies the payload decodes."""
    from PIL import Image
    import io

    retry = retry or RetryPolicy()

    def attempt() -> ImageResponse:
        with cap or _NULL_CAP:
            response = backend.generate(request)
        try:
            with Image.open(io.BytesIO(response.image)) as img:
                size = img.size
        except Exception as exc:
            raise InvalidResponseError(f"image payload does not decode: {exc}") from exc
        if size != tuple(request.size):
            raise InvalidResponseError(f"image size {size} != requested {request.size}")
        return response

    return retry.run(attempt, retry_on=(TransportError,))  # type: ignore[return-value]


def synthesize(
    backend: TtsBackend,
    request: TtsRequest,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
) -> TtsResponse:
    """Run a TTS request with retries; empty audio is never accepted."""
    retry = retry or RetryPolicy()

    def attempt() -> TtsResponse:
        with cap or _NULL_CAP:
            response = backend.synthesize(request)
        if not response.pcm:
            raise InvalidResponseError("TTS returned empty audio")
        duration = response.duration_s
        if not TTS_MIN_DURATION_S <= duration <= TTS_MAX_DURATION_S:
            raise InvalidResponseError(
                f"TTS duration {duration:.3f}s outside "
                f"[{TTS_MIN_DURATION_S}, {TTS_MAX_DURATION_S}]s"
            )
        return response

    return retry.run(attempt, retry_on=(TransportError,))  # type: ignore[return-value]


class _NullCap:
    def __enter__(self) -> None:
        return None

    def __exit__(self, *exc: object) -> None:
        return None


_NULL_CAP = _NullCap()
