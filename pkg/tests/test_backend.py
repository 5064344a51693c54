"""Backend clients against a local canned HTTP server, plus mock semantics."""

import json
import math
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from hiersum.backend import (
    BackendConfig,
    BackendError,
    ChatRequest,
    ChatResponse,
    HttpBackend,
    MockBackend,
    ProtocolError,
)


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        self.server.requests.append(
            {"path": self.path, "body": body, "headers": dict(self.headers)}
        )
        if self.server.delay_s:
            time.sleep(self.server.delay_s)
        status, payload = self.server.respond(self.path, body)
        raw = payload.encode() if isinstance(payload, str) else json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)


@pytest.fixture
def server():
    httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    httpd.daemon_threads = True
    httpd.requests = []
    httpd.delay_s = 0.0
    httpd.respond = lambda path, body: (200, {"choices": []})
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    httpd.url = f"http://127.0.0.1:{httpd.server_address[1]}"
    try:
        yield httpd
    finally:
        httpd.shutdown()
        httpd.server_close()


def make_backend(server, **overrides):
    settings = dict(
        base_url=server.url,
        model_id="test-model",
        embedding_model_id="test-embed",
        timeout_s=5.0,
        max_retries=3,
    )
    settings.update(overrides)
    return HttpBackend(BackendConfig(**settings), backoff_s=0.001)


CANNED = {
    "choices": [{"message": {"content": "A canned answer.\nLine two."}}],
    "usage": {"prompt_tokens": 41, "completion_tokens": 7},
    "model": "served-model",
}


# --- chat completions ------------------------------------------------------


def test_complete_posts_protocol_payload_and_returns_content(server):
    server.respond = lambda path, body: (200, CANNED)
    backend = make_backend(server)
    response = backend.complete(
        ChatRequest(system_text="sys text", user_text="user text", max_output_tokens=99)
    )
    assert response.text == "A canned answer.\nLine two."
    assert response.prompt_tokens == 41 and response.completion_tokens == 7
    assert response.model_id == "served-model"
    assert response.latency_ms >= 0.0

    (req,) = server.requests
    assert req["path"] == "/v1/chat/completions"
    assert req["body"]["model"] == "test-model"
    assert req["body"]["temperature"] == 0.0
    assert req["body"]["max_tokens"] == 99
    assert req["body"]["messages"] == [
        {"role": "system", "content": "sys text"},
        {"role": "user", "content": "user text"},
    ]
    assert backend.completion_calls == 1


def test_api_key_becomes_bearer_header(server):
    server.respond = lambda path, body: (200, CANNED)
    with_key = make_backend(server, api_key="sk-local-123")
    with_key.complete(ChatRequest(system_text="", user_text="hi"))
    assert server.requests[-1]["headers"]["Authorization"] == "Bearer sk-local-123"

    without = make_backend(server)
    without.complete(ChatRequest(system_text="", user_text="hi"))
    assert "Authorization" not in server.requests[-1]["headers"]


def test_empty_system_text_sends_single_message(server):
    server.respond = lambda path, body: (200, CANNED)
    make_backend(server).complete(ChatRequest(system_text="", user_text="hi"))
    assert [m["role"] for m in server.requests[-1]["body"]["messages"]] == ["user"]


def test_transient_500_is_retried_until_success(server):
    def flaky(path, body):
        if len(server.requests) < 3:
            return 500, {"error": "busy"}
        return 200, CANNED

    server.respond = flaky
    response = make_backend(server).complete(ChatRequest(system_text="", user_text="x"))
    assert response.text == CANNED["choices"][0]["message"]["content"]
    assert len(server.requests) == 3


def test_persistent_500_fails_after_exactly_max_retries_plus_one(server):
    server.respond = lambda path, body: (500, {"error": "down"})
    backend = make_backend(server, max_retries=3)
    with pytest.raises(BackendError):
        backend.complete(ChatRequest(system_text="", user_text="x"))
    assert len(server.requests) == 4


def test_4xx_is_not_retried_and_quotes_the_body(server):
    server.respond = lambda path, body: (404, {"error": "no such model"})
    with pytest.raises(BackendError, match="no such model"):
        make_backend(server).complete(ChatRequest(system_text="", user_text="x"))
    assert len(server.requests) == 1


def test_timeout_is_retried_then_fails(server):
    server.delay_s = 0.3
    server.respond = lambda path, body: (200, CANNED)
    backend = make_backend(server, timeout_s=0.05, max_retries=1)
    with pytest.raises(BackendError, match="after 2 attempts"):
        backend.complete(ChatRequest(system_text="", user_text="x"))


def test_empty_choices_is_a_protocol_error(server):
    server.respond = lambda path, body: (200, {"choices": []})
    with pytest.raises(ProtocolError):
        make_backend(server).complete(ChatRequest(system_text="", user_text="x"))


def test_non_json_body_is_a_protocol_error(server):
    server.respond = lambda path, body: (200, "<html>oops</html>")
    with pytest.raises(ProtocolError):
        make_backend(server).complete(ChatRequest(system_text="", user_text="x"))


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(system_text="s", user_text="")
    with pytest.raises(ValueError):
        ChatRequest(system_text="s", user_text="u", max_output_tokens=0)
    with pytest.raises(ValueError):
        BackendConfig(base_url="http://x", model_id="m", temperature=3.0)
    with pytest.raises(ValueError):
        BackendConfig(base_url="http://x", model_id="m", timeout_s=0)


# --- embeddings ------------------------------------------------------------


def test_embed_preserves_input_order_by_index(server):
    server.respond = lambda path, body: (
        200,
        {
            "data": [
                {"index": 1, "embedding": [0.3, 0.4]},
                {"index": 0, "embedding": [0.1, 0.2]},
            ],
            "model": "test-embed",
        },
    )
    vectors = make_backend(server).embed(["first", "second"])
    assert vectors == [[0.1, 0.2], [0.3, 0.4]]
    (req,) = server.requests
    assert req["path"] == "/v1/embeddings"
    assert req["body"] == {"model": "test-embed", "input": ["first", "second"]}


def test_embed_dimension_mismatch_is_a_protocol_error(server):
    server.respond = lambda path, body: (
        200,
        {"data": [{"index": 0, "embedding": [0.1]}, {"index": 1, "embedding": [0.1, 0.2]}]},
    )
    with pytest.raises(ProtocolError, match="dimensions differ"):
        make_backend(server).embed(["a", "b"])


def test_embed_count_mismatch_is_a_protocol_error(server):
    server.respond = lambda path, body: (200, {"data": [{"index": 0, "embedding": [1.0]}]})
    with pytest.raises(ProtocolError):
        make_backend(server).embed(["a", "b"])


def test_embed_rejects_bad_inputs_before_any_request(server):
    backend = make_backend(server)
    with pytest.raises(ValueError):
        backend.embed([])
    with pytest.raises(ValueError):
        backend.embed(["ok", ""])
    assert server.requests == []


# --- mock backend ----------------------------------------------------------


def test_mock_completion_echoes_the_user_text():
    mock = MockBackend()
    response = mock.complete(ChatRequest(system_text="sys", user_text="hello\nworld"))
    assert response.text == "ECHO:\nhello\nworld"
    assert isinstance(response, ChatResponse)
    assert mock.completion_calls == 1


def test_mock_is_deterministic():
    req = ChatRequest(system_text="s", user_text="same input")
    assert MockBackend().complete(req) == MockBackend().complete(req)
    assert MockBackend().embed(["a b c"]) == MockBackend().embed(["a b c"])


def test_mock_echo_preserves_every_substring():
    user_text = "fillProductPrices reads tariffs from the PRICES table"
    text = MockBackend().complete(ChatRequest(system_text="", user_text=user_text)).text
    assert user_text in text
    for word in user_text.split():
        assert word in text


def test_mock_embeddings_are_unit_vectors_of_fixed_dimension():
    vectors = MockBackend().embed(["alpha beta", "alpha beta", "gamma delta"])
    assert all(len(v) == 8 for v in vectors)
    assert vectors[0] == vectors[1]
    assert vectors[0] != vectors[2]
    assert math.isclose(sum(x * x for x in vectors[0]), 1.0, rel_tol=1e-9)


def test_counters_are_thread_safe():
    mock = MockBackend()
    req = ChatRequest(system_text="", user_text="x")

    def worker():
        for _ in range(25):
            mock.complete(req)
            mock.embed(["x"])

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert mock.completion_calls == 200
    assert mock.embedding_calls == 200
