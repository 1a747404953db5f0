"""Wire-contract conformance, shared by every backend implementation.

The same assertions run against in-process mocks, the mocks served over
HTTP, and (when CASTBOOK_ADAPTER_URL is set) an external adapter service
with stub models. Content equality is deliberately out of scope: the
contract is about shapes, determinism, and durations, which any
conforming implementation must honor.
"""

from __future__ import annotations

import io
import json
import os

import pytest
import requests
from PIL import Image

from castbook.backends.base import (
    MODE_PERSONA_BOOTSTRAP,
    MODE_SENTENCE_SYNTHESIS,
    ImageRequest,
    LlmRequest,
    RetryPolicy,
    TtsRequest,
    llm_complete,
)
from castbook.backends.http import HttpImageBackend, HttpLlmBackend, HttpTtsBackend
from castbook.backends.mock import ProceduralImageBackend, ScriptedLlm, SyntheticVoiceBackend
from castbook.backends.mockserver import BackendHttpServer

NO_RETRY = RetryPolicy(sleep=lambda _s: None)

CONFORMANCE_FIXTURES = {
    "conformance/ping": "pong",
    "conformance/json": '{"ok": true, "speaker": "narrator"}',
}

_TARGETS = ["mock", "http"]
if os.environ.get("CASTBOOK_ADAPTER_URL"):
    _TARGETS.append("adapter")


@pytest.fixture(scope="module", params=_TARGETS)
def backend_triple(request):
    if request.param == "mock":
        yield (
            ScriptedLlm(CONFORMANCE_FIXTURES),
            ProceduralImageBackend(),
            SyntheticVoiceBackend(),
        )
        return
    if request.param == "http":
        server = BackendHttpServer(
            llm=ScriptedLlm(CONFORMANCE_FIXTURES),
            image=ProceduralImageBackend(),
            tts=SyntheticVoiceBackend(),
        ).start()
        try:
            yield (
                HttpLlmBackend(server.base_url),
                HttpImageBackend(server.base_url),
                HttpTtsBackend(server.base_url),
            )
        finally:
            server.stop()
        return
    base_url = os.environ["CASTBOOK_ADAPTER_URL"].rstrip("/")
    yield (
        HttpLlmBackend(base_url),
        HttpImageBackend(base_url),
        HttpTtsBackend(base_url),
    )


def test_llm_returns_non_empty_text(backend_triple):
    llm, _, _ = backend_triple
    response = llm_complete(
        llm,
        LlmRequest(system_prompt="You answer briefly.", user_prompt="Say anything.",
                   key="conformance/ping"),
        retry=NO_RETRY,
    )
    assert response.text.strip()


def test_llm_json_mode_yields_json_object(backend_triple):
    llm, _, _ = backend_triple
    response = llm_complete(
        llm,
        LlmRequest(
            system_prompt="You answer in JSON.",
            user_prompt="Reply with a JSON object.",
            response_format="json",
            json_schema={"type": "object"},
            key="conformance/json",
        ),
        retry=NO_RETRY,
    )
    assert isinstance(json.loads(response.text), dict)


def test_image_decodes_at_requested_size(backend_triple):
    _, image_backend, _ = backend_triple
    response = image_backend.generate(
        ImageRequest(caption="portrait photo of a sea captain", seed=5, size=(512, 512))
    )
    with Image.open(io.BytesIO(response.image)) as img:
        assert img.size == (512, 512)


def test_image_same_seed_identical_different_seed_differs(backend_triple):
    _, image_backend, _ = backend_triple
    request = ImageRequest(caption="portrait photo of a sea captain", seed=5)
    first = image_backend.generate(request).image
    second = image_backend.generate(request).image
    other = image_backend.generate(
        ImageRequest(caption="portrait photo of a sea captain", seed=6)
    ).image
    assert first == second
    assert first != other


def _sentence_request():
    return TtsRequest(
        text="A short test sentence for the synthesizer.",
        instruction="Read in an even tone.",
        face_image=b"conformance-face-bytes",
        face_caption="portrait photo of a test speaker",
        voice_sample=b"\x01\x00" * 24_000,
        mode=MODE_SENTENCE_SYNTHESIS,
    )


def test_tts_sentence_synthesis_contract(backend_triple):
    _, _, tts = backend_triple
    response = tts.synthesize(_sentence_request())
    assert response.pcm
    assert 0.2 <= response.duration_s <= 60.0


def test_tts_determinism(backend_triple):
    _, _, tts = backend_triple
    first = tts.synthesize(_sentence_request())
    second = tts.synthesize(_sentence_request())
    assert first.pcm == second.pcm


def test_tts_bootstrap_accepts_masked_voice(backend_triple):
    _, _, tts = backend_triple
    response = tts.synthesize(
        TtsRequest(
            text="",
            instruction="",
            face_image=b"conformance-face-bytes",
            face_caption="portrait photo of a test speaker",
            voice_sample=b"",
            mode=MODE_PERSONA_BOOTSTRAP,
        )
    )
    assert response.duration_s >= 1.0


@pytest.fixture(scope="module", params=[t for t in _TARGETS if t != "mock"])
def wire_base_url(request):
    if request.param == "http":
        server = BackendHttpServer(
            llm=ScriptedLlm(CONFORMANCE_FIXTURES),
            image=ProceduralImageBackend(),
            tts=SyntheticVoiceBackend(),
        ).start()
        try:
            yield server.base_url
        finally:
            server.stop()
        return
    yield os.environ["CASTBOOK_ADAPTER_URL"].rstrip("/")


def test_healthz_names_models(wire_base_url):
    payload = requests.get(wire_base_url + "/healthz", timeout=10).json()
    assert payload["status"] == "ok"
    assert set(payload["models"]) >= {"llm", "image", "tts"}
