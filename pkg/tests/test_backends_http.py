from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from castbook.backends.base import (
    BackendError,
    LlmRequest,
    RetryPolicy,
    TransportError,
    llm_complete,
)
from castbook.backends.http import HttpLlmBackend, MissingApiKeyError


class _FlakyThenOkHandler(BaseHTTPRequestHandler):
    """Replies 429, then 503, then a valid chat completion."""

    attempts = 0
    seen_auth: list[str] = []

    def log_message(self, *args):
        pass

    def do_POST(self):
        cls = type(self)
        cls.attempts += 1
        cls.seen_auth.append(self.headers.get("Authorization", ""))
        self.rfile.read(int(self.headers.get("Content-Length", "0")))
        if cls.attempts == 1:
            self.send_response(429)
            self.end_headers()
            return
        if cls.attempts == 2:
            self.send_response(503)
            self.end_headers()
            return
        body = json.dumps(
            {"choices": [{"message": {"content": "finally"}, "finish_reason": "stop"}]}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture()
def flaky_server():
    _FlakyThenOkHandler.attempts = 0
    _FlakyThenOkHandler.seen_auth = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), _FlakyThenOkHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


def test_rate_limit_and_5xx_retried_with_backoff(flaky_server, monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "sk-test")
    backend = HttpLlmBackend(flaky_server, api_key_env="TEST_LLM_KEY", require_key=True)
    sleeps: list[float] = []
    response = llm_complete(
        backend,
        LlmRequest(system_prompt="s", user_prompt="u"),
        retry=RetryPolicy(sleep=sleeps.append),
    )
    assert response.text == "finally"
    assert sleeps == [0.5, 1.0]
    assert _FlakyThenOkHandler.attempts == 3
    assert all(a == "Bearer sk-test" for a in _FlakyThenOkHandler.seen_auth)


def test_connection_refused_is_transport_error():
    backend = HttpLlmBackend("http://127.0.0.1:1")
    with pytest.raises(TransportError):
        backend.complete(LlmRequest(system_prompt="s", user_prompt="u"))


def test_missing_required_key_raises_at_construction(monkeypatch):
    monkeypatch.delenv("ENGINE_LLM_API_KEY", raising=False)
    with pytest.raises(MissingApiKeyError, match="ENGINE_LLM_API_KEY"):
        HttpLlmBackend("http://x", api_key_env="ENGINE_LLM_API_KEY", require_key=True)


def test_4xx_is_terminal_backend_error(flaky_server):
    class Always400(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_POST(self):
            self.rfile.read(int(self.headers.get("Content-Length", "0")))
            self.send_response(400)
            self.end_headers()

    server = ThreadingHTTPServer(("127.0.0.1", 0), Always400)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        backend = HttpLlmBackend(f"http://127.0.0.1:{server.server_address[1]}")
        with pytest.raises(BackendError) as info:
            backend.complete(LlmRequest(system_prompt="s", user_prompt="u"))
        assert not isinstance(info.value, TransportError)
    finally:
        server.shutdown()
        server.server_close()
