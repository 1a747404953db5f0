"""Record/replay cassettes for live-backend reproducibility.

A cassette file is a JSON array of ``{request_sha256, stage, response}``
entries. In record mode the wrapper forwards to the inner backend and
stores each response keyed by the canonical request hash; in replay mode
it serves stored responses only and fails loudly on unknown requests, so
a replayed test run is byte-identical and fully offline.
"""

from __future__ import annotations

import base64
import json
import threading
from pathlib import Path

from ..util import fingerprint
from .base import (
    BackendError,
    BackendIdentity,
    ImageBackend,
    ImageRequest,
    ImageResponse,
    LlmBackend,
    LlmRequest,
    LlmResponse,
    TtsBackend,
    TtsRequest,
    TtsResponse,
)

MODE_RECORD = "record"
MODE_REPLAY = "replay"


class Cassette:
    def __init__(self, path: str | Path, mode: str) -> None:
        if mode not in (MODE_RECORD, MODE_REPLAY):
            raise ValueError(f"unknown cassette mode {mode!r}")
        self.path = Path(path)
        self.mode = mode
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            for entry in json.loads(self.path.read_text(encoding="utf-8")):
                self._entries[entry["request_sha256"]] = entry
        elif mode == MODE_REPLAY:
            raise BackendError(f"cassette {self.path} does not exist")

    def lookup(self, request_hash: str) -> dict | None:
        with self._lock:
            entry = self._entries.get(request_hash)
            return entry["response"] if entry else None

    def store(self, request_hash: str, stage: str, response: dict) -> None:
        with self._lock:
            self._entries[request_hash] = {
                "request_sha256": request_hash,
                "stage": stage,
                "response": response,
            }
            entries = sorted(self._entries.values(), key=lambda e: e["request_sha256"])
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")


def _llm_request_hash(request: LlmRequest) -> str:
    return fingerprint(
        {
            "stage": "llm",
            "system": request.system_prompt,
            "user": request.user_prompt,
            "temperature": request.temperature,
            "response_format": request.response_format,
            "key": request.key,
        }
    )


def _image_request_hash(request: ImageRequest) -> str:
    return fingerprint(
        {"stage": "image", "caption": request.caption, "seed": request.seed, "size": list(request.size)}
    )


def _tts_request_hash(request: TtsRequest) -> str:
    return fingerprint(
        {
            "stage": "tts",
            "text": request.text,
            "instruction": request.instruction,
            "face_caption": request.face_caption,
            "face_image_b64": base64.b64encode(request.face_image).decode("ascii"),
            "voice_sample_b64": base64.b64encode(request.voice_sample).decode("ascii"),
            "mode": request.mode,
        }
    )


class CassetteLlm:
    def __init__(self, cassette: Cassette, inner: LlmBackend | None = None) -> None:
        self.cassette = cassette
        self.inner = inner
        base = inner.identity if inner else BackendIdentity("llm", "http", "cassette")
        self.identity = BackendIdentity(base.stage, base.kind, base.name, f"{base.version}+cassette")

    def complete(self, request: LlmRequest) -> LlmResponse:
        request_hash = _llm_request_hash(request)
        stored = self.cassette.lookup(request_hash)
        if stored is not None:
            return LlmResponse(text=stored["text"], finish_reason=stored.get("finish_reason", "stop"))
        if self.cassette.mode == MODE_REPLAY or self.inner is None:
            raise BackendError(f"cassette has no entry for LLM request {request_hash[:12]}")
        response = self.inner.complete(request)
        self.cassette.store(
            request_hash, "llm", {"text": response.text, "finish_reason": response.finish_reason}
        )
        return response


class CassetteImage:
    def __init__(self, cassette: Cassette, inner: ImageBackend | None = None) -> None:
        self.cassette = cassette
        self.inner = inner
        base = inner.identity if inner else BackendIdentity("image", "http", "cassette")
        self.identity = BackendIdentity(base.stage, base.kind, base.name, f"{base.version}+cassette")

    def generate(self, request: ImageRequest) -> ImageResponse:
        request_hash = _image_request_hash(request)
        stored = self.cassette.lookup(request_hash)
        if stored is not None:
            return ImageResponse(
                image=base64.b64decode(stored["image_b64"]), format=stored.get("format", "png")
            )
        if self.cassette.mode == MODE_REPLAY or self.inner is None:
            raise BackendError(f"cassette has no entry for image request {request_hash[:12]}")
        response = self.inner.generate(request)
        self.cassette.store(
            request_hash,
            "image",
            {"image_b64": base64.b64encode(response.image).decode("ascii"), "format": response.format},
        )
        return response


class CassetteTts:
    def __init__(self, cassette: Cassette, inner: TtsBackend | None = None) -> None:
        self.cassette = cassette
        self.inner = inner
        base = inner.identity if inner else BackendIdentity("tts", "http", "cassette")
        self.identity = BackendIdentity(base.stage, base.kind, base.name, f"{base.version}+cassette")

    def synthesize(self, request: TtsRequest) -> TtsResponse:
        request_hash = _tts_request_hash(request)
        stored = self.cassette.lookup(request_hash)
        if stored is not None:
            return TtsResponse(pcm=base64.b64decode(stored["pcm_b64"]))
        if self.cassette.mode == MODE_REPLAY or self.inner is None:
            raise BackendError(f"cassette has no entry for TTS request {request_hash[:12]}")
        response = self.inner.synthesize(request)
        self.cassette.store(
            request_hash, "tts", {"pcm_b64": base64.b64encode(response.pcm).decode("ascii")}
        )
        return response
