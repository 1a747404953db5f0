"""HTTP client implementations of the three backend contracts.

Wire protocols:

* LLM: chat-completions-compatible JSON, ``POST {base}/v1/chat/completions``.
  The request's fixture key rides in the standard ``user`` field as an
  opaque request tag; servers are free to ignore it.
* Image: ``POST {base}/v1/images/generations`` returning base64 image data.
* TTS: ``POST {base}/synthesize``, multipart/form-data with parts
  ``text``, ``instruction``, ``face_caption``, ``mode``, binary
  ``face_image``, and (when present) a WAV ``voice_sample``; the response
  body is WAV audio.

Transport failures, 429s, and 5xx responses raise ``TransportError`` so
the operation layer retries them with backoff; other HTTP errors are
terminal ``BackendError``s.
"""

from __future__ import annotations

import base64
import os

import requests

from ..audio import ingest_wav, wav_bytes
from .base import (
    BackendError,
    BackendIdentity,
    ImageRequest,
    ImageResponse,
    LlmRequest,
    LlmResponse,
    TransportError,
    TtsRequest,
    TtsResponse,
)

DEFAULT_TIMEOUT_S = 60.0


class MissingApiKeyError(BackendError):
    """Raised at construction when a required API key env var is unset."""


def _resolve_api_key(env_var: str | None, required: bool) -> str | None:
    if not env_var:
        return None
    value = os.environ.get(env_var, "").strip()
    if not value and required:
        raise MissingApiKeyError(f"environment variable {env_var} is not set")
    return value or None


class _HttpClient:
    def __init__(
        self,
        base_url: str,
        api_key_env: str | None = None,
        require_key: bool = False,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self._session = session or requests.Session()
        self._api_key = _resolve_api_key(api_key_env, require_key)

    def _headers(self) -> dict[str, str]:
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def _post(self, path: str, **kwargs) -> requests.Response:
        url = self.base_url + path
        try:
            response = self._session.post(
                url, timeout=self.timeout_s, headers=self._headers(), **kwargs
            )
        except requests.RequestException as exc:
            raise TransportError(f"POST {url} failed: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportError(f"POST {url} -> HTTP {response.status_code}")
        if response.status_code >= 400:
            raise BackendError(
                f"POST {url} -> HTTP {response.status_code}: {response.text[:200]}"
            )
        return response


class HttpLlmBackend(_HttpClient):
    def __init__(
        self,
        base_url: str,
        model: str = "default",
        api_key_env: str | None = None,
        require_key: bool = False,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        session: requests.Session | None = None,
    ) -> None:
        super().__init__(base_url, api_key_env, require_key, timeout_s, session)
        self.model = model
        self.identity = BackendIdentity(stage="llm", kind="http", name=base_url, version=model)

    def complete(self, request: LlmRequest) -> LlmResponse:
        body: dict = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
        }
        if request.response_format == "json":
            body["response_format"] = {"type": "json_object"}
        if request.key:
            body["user"] = request.key
        payload = self._post("/v1/chat/completions", json=body).json()
        try:
            choice = payload["choices"][0]
            text = choice["message"]["content"]
            finish = choice.get("finish_reason", "stop")
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed chat completion payload: {exc}") from exc
        if not isinstance(text, str):
            raise BackendError("chat completion content is not text")
        return LlmResponse(text=text, finish_reason=finish)


class HttpImageBackend(_HttpClient):
    def __init__(
        self,
        base_url: str,
        api_key_env: str | None = None,
        require_key: bool = False,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        session: requests.Session | None = None,
    ) -> None:
        super().__init__(base_url, api_key_env, require_key, timeout_s, session)
        self.identity = BackendIdentity(stage="image", kind="http", name=base_url)

    def generate(self, request: ImageRequest) -> ImageResponse:
        body = {
            "prompt": request.caption,
            "seed": request.seed,
            "size": f"{request.size[0]}x{request.size[1]}",
            "response_format": "b64_json",
        }
        payload = self._post("/v1/images/generations", json=body).json()
        try:
            b64 = payload["data"][0]["b64_json"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed image payload: {exc}") from exc
        try:
            image = base64.b64decode(b64, validate=True)
        except (ValueError, TypeError) as exc:
            raise BackendError(f"image payload is not valid base64: {exc}") from exc
        return ImageResponse(image=image, format=payload.get("format", "png"))


class HttpTtsBackend(_HttpClient):
    def __init__(
        self,
        base_url: str,
        api_key_env: str | None = None,
        require_key: bool = False,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        session: requests.Session | None = None,
    ) -> None:
        super().__init__(base_url, api_key_env, require_key, timeout_s, session)
        self.identity = BackendIdentity(stage="tts", kind="http", name=base_url)

    def synthesize(self, request: TtsRequest) -> TtsResponse:
        data = {
            "text": request.text,
            "instruction": request.instruction,
            "face_caption": request.face_caption,
            "mode": request.mode,
        }
        files = {"face_image": ("face.png", request.face_image, "image/png")}
        if request.voice_sample:
            files["voice_sample"] = ("voice.wav", wav_bytes(request.voice_sample), "audio/wav")
        response = self._post("/synthesize", data=data, files=files)
        if not response.content:
            raise BackendError("TTS endpoint returned an empty body")
        try:
            pcm = ingest_wav(response.content)
        except Exception as exc:
            raise BackendError(f"TTS endpoint returned invalid WAV: {exc}") from exc
        return TtsResponse(pcm=pcm)


class HttpJudgeBackend(_HttpClient):
    """Audio question answering over the chat-completions protocol."""

    def __init__(
        self,
        base_url: str,
        model: str = "default",
        api_key_env: str | None = None,
        require_key: bool = False,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        session: requests.Session | None = None,
    ) -> None:
        super().__init__(base_url, api_key_env, require_key, timeout_s, session)
        self.model = model
        self.identity = BackendIdentity(
            stage="mllm_judge", kind="http", name=base_url, version=model
        )

    def ask(self, wav_data: bytes, question: str, key: str = "") -> str:
        body: dict = {
            "model": self.model,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": question},
                        {
                            "type": "input_audio",
                            "input_audio": {
                                "data": base64.b64encode(wav_data).decode("ascii"),
                                "format": "wav",
                            },
                        },
                    ],
                }
            ],
            "temperature": 0.0,
        }
        if key:
            body["user"] = key
        payload = self._post("/v1/chat/completions", json=body).json()
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed judge payload: {exc}") from exc
