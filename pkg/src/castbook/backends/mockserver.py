"""Serves any backend triple over the engine's wire protocols.

This is the reference server for the HTTP contracts: the conformance
suite runs the same assertions against in-process mocks and against
these endpoints, and external adapters implement the identical surface.
Endpoints: POST /v1/chat/completions, POST /v1/images/generations,
POST /synthesize (multipart), GET /healthz.
"""

from __future__ import annotations

import base64
import json
import threading
from email.parser import BytesParser
from email.policy import HTTP as HTTP_POLICY
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..audio import ingest_wav, wav_bytes
from .base import (
    BackendError,
    ImageBackend,
    ImageRequest,
    LlmBackend,
    LlmRequest,
    TtsBackend,
    TtsRequest,
)


def parse_multipart(content_type: str, body: bytes) -> dict[str, bytes]:
    """Parse a multipart/form-data body into {field name: raw bytes}."""
    header = f"Content-Type: {content_type}\r\n\r\n".encode("ascii")
    message = BytesParser(policy=HTTP_POLICY).parsebytes(header + body)
    if not message.is_multipart():
        raise ValueError("request body is not multipart/form-data")
    fields: dict[str, bytes] = {}
    for part in message.iter_parts():
        name = part.get_param("name", header="content-disposition")
        if name:
            fields[name] = part.get_payload(decode=True) or b""
    return fields


class BackendHttpServer:
    """Threaded HTTP server around (llm, image, tts) backend instances."""

    def __init__(
        self,
        llm: LlmBackend | None = None,
        image: ImageBackend | None = None,
        tts: TtsBackend | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
    ) -> None:
        self.llm = llm
        self.image = image
        self.tts = tts
        handler = self._make_handler()
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "BackendHttpServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "BackendHttpServer":
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()

    def _make_handler(self) -> type[BaseHTTPRequestHandler]:
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args: object) -> None:
                pass  # keep test output quiet

            def _send(self, status: int, body: bytes, content_type: str) -> None:
                self.send_response(status)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _send_json(self, status: int, payload: dict) -> None:
                self._send(status, json.dumps(payload).encode("utf-8"), "application/json")

            def _error(self, status: int, message: str) -> None:
                self._send_json(status, {"error": {"message": message}})

            def do_GET(self) -> None:
                if self.path != "/healthz":
                    self._error(404, f"unknown path {self.path}")
                    return
                models = {}
                for stage, backend in (
                    ("llm", outer.llm),
                    ("image", outer.image),
                    ("tts", outer.tts),
                ):
                    if backend is not None:
                        models[stage] = str(backend.identity)
                self._send_json(200, {"status": "ok", "models": models})

            def do_POST(self) -> None:
                length = int(self.headers.get("Content-Length", "0"))
                body = self.rfile.read(length)
                try:
                    if self.path == "/v1/chat/completions":
                        self._chat(body)
                    elif self.path == "/v1/images/generations":
                        self._images(body)
                    elif self.path == "/synthesize":
                        self._synthesize(body)
                    else:
                        self._error(404, f"unknown path {self.path}")
                except BackendError as exc:
                    self._error(400, str(exc))
                except Exception as exc:  # defensive: report, don't hang
                    self._error(500, f"{type(exc).__name__}: {exc}")

            def _chat(self, body: bytes) -> None:
                if outer.llm is None:
                    self._error(404, "no LLM backend configured")
                    return
                payload = json.loads(body)
                system = ""
                user = ""
                for message in payload.get("messages", []):
                    content = message.get("content", "")
                    if isinstance(content, list):  # judge-style multimodal parts
                        content = " ".join(
                            part.get("text", "") for part in content if isinstance(part, dict)
                        ).strip()
                    if message.get("role") == "system":
                        system = content
                    elif message.get("role") == "user":
                        user = content
                request = LlmRequest(
                    system_prompt=system or "(none)",
                    user_prompt=user or "(none)",
                    temperature=float(payload.get("temperature", 0.0)),
                    response_format=(
                        "json"
                        if payload.get("response_format", {}).get("type") == "json_object"
                        else "free_text"
                    ),
                    key=payload.get("user", ""),
                )
                response = outer.llm.complete(request)
                self._send_json(
                    200,
                    {
                        "choices": [
                            {
                                "message": {"role": "assistant", "content": response.text},
                                "finish_reason": response.finish_reason,
                            }
                        ]
                    },
                )

            def _images(self, body: bytes) -> None:
                if outer.image is None:
                    self._error(404, "no image backend configured")
                    return
                payload = json.loads(body)
                width, _, height = str(payload.get("size", "512x512")).partition("x")
                request = ImageRequest(
                    caption=payload["prompt"],
                    seed=int(payload.get("seed", 0)),
                    size=(int(width), int(height)),
                )
                response = outer.image.generate(request)
                self._send_json(
                    200,
                    {
                        "data": [
                            {"b64_json": base64.b64encode(response.image).decode("ascii")}
                        ],
                        "format": response.format,
                    },
                )

            def _synthesize(self, body: bytes) -> None:
                if outer.tts is None:
                    self._error(404, "no TTS backend configured")
                    return
                fields = parse_multipart(self.headers.get("Content-Type", ""), body)
                voice_wav = fields.get("voice_sample", b"")
                request = TtsRequest(
                    text=fields.get("text", b"").decode("utf-8"),
                    instruction=fields.get("instruction", b"").decode("utf-8"),
                    face_image=fields.get("face_image", b""),
                    face_caption=fields.get("face_caption", b"").decode("utf-8"),
                    voice_sample=ingest_wav(voice_wav) if voice_wav else b"",
                    mode=fields.get("mode", b"sentence_synthesis").decode("utf-8"),
                )
                response = outer.tts.synthesize(request)
                self._send(200, wav_bytes(response.pcm), "audio/wav")

        return Handler
