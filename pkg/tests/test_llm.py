import http.server
import json
import math
import threading

import pytest
from hypothesis import given, strategies as st

from pandora.llm import (
    BackendUnavailable,
    DimensionMismatch,
    EmbeddingVector,
    FallbackEmbedder,
    GenerationRequest,
    RemoteLLM,
    ResponseTooLong,
    ScriptExhausted,
    ScriptedLLM,
    cosine,
)
from conftest import write_script


class TestFallbackEmbedder:
    def test_empty_text_is_zero_vector(self):
        vec = FallbackEmbedder().embed("")
        assert vec.dims == 256
        assert all(x == 0.0 for x in vec.components)

    def test_repetition_preserves_direction(self):
        e = FallbackEmbedder()
        assert cosine(e.embed("book book"), e.embed("book")) == pytest.approx(1.0)

    def test_identity_cosine(self):
        e = FallbackEmbedder()
        assert cosine(e.embed("list all battles"), e.embed("list all battles")) == 1.0

    def test_deterministic(self):
        a = FallbackEmbedder().embed("São Paulo, 2021!")
        b = FallbackEmbedder().embed("São Paulo, 2021!")
        assert a.components == b.components

    def test_normalized(self):
        vec = FallbackEmbedder().embed("some words here")
        assert math.sqrt(sum(x * x for x in vec.components)) == pytest.approx(1.0)


class TestCosine:
    def test_orthogonal_basis(self):
        a = EmbeddingVector((1.0, 0.0))
        b = EmbeddingVector((0.0, 1.0))
        assert cosine(a, b) == 0.0

    def test_hand_value(self):
        a = EmbeddingVector((1.0, 1.0, 0.0))
        b = EmbeddingVector((1.0, 0.0, 0.0))
        assert abs(cosine(a, b) - 1 / math.sqrt(2)) < 1e-9

    def test_zero_norm_defined_as_zero(self):
        assert cosine(EmbeddingVector((0.0, 0.0)), EmbeddingVector((1.0, 2.0))) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine(EmbeddingVector((1.0,)), EmbeddingVector((1.0, 2.0)))

    @given(
        st.lists(st.floats(-10, 10), min_size=1, max_size=8),
        st.lists(st.floats(-10, 10), min_size=1, max_size=8),
    )
    def test_symmetry_and_range(self, xs, ys):
        size = min(len(xs), len(ys))
        a = EmbeddingVector(tuple(xs[:size]))
        b = EmbeddingVector(tuple(ys[:size]))
        assert cosine(a, b) == cosine(b, a)
        assert -1.0 - 1e-12 <= cosine(a, b) <= 1.0 + 1e-12


class TestScriptedLLM:
    def test_fifo_per_key(self, tmp_path):
        path = write_script(
            tmp_path / "s.jsonl", [("q1", "first"), ("q1", "second"), ("q2", "other")]
        )
        llm = ScriptedLLM.from_file(path)
        assert llm.complete(GenerationRequest(prompt="x", tag="q1")) == "first"
        assert llm.complete(GenerationRequest(prompt="x", tag="q2")) == "other"
        assert llm.complete(GenerationRequest(prompt="x", tag="q1")) == "second"

    def test_exhaustion_fails_loudly(self):
        llm = ScriptedLLM([("q1", "only")])
        llm.complete(GenerationRequest(prompt="x", tag="q1"))
        with pytest.raises(ScriptExhausted):
            llm.complete(GenerationRequest(prompt="x", tag="q1"))

    def test_wildcard_fallback(self):
        llm = ScriptedLLM([("*", "generic")])
        assert llm.complete(GenerationRequest(prompt="x", tag="anything")) == "generic"

    def test_request_validation(self):
        llm = ScriptedLLM([("*", "r")])
        with pytest.raises(ValueError):
            llm.complete(GenerationRequest(prompt="x", max_tokens=0))


class _Handler(http.server.BaseHTTPRequestHandler):
    responses: list = []

    def do_POST(self):
        status, body = self.responses.pop(0) if self.responses else (500, "exhausted")
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_stub():
    server = http.server.HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Handler.responses = []
    yield f"http://127.0.0.1:{server.server_port}", _Handler.responses
    server.shutdown()


def _chat_body(text):
    return json.dumps({"choices": [{"message": {"content": text}}]})


class TestRemoteLLM:
    def test_dead_endpoint_raises_after_retries(self):
        llm = RemoteLLM(base_url="http://127.0.0.1:1", model="m", retries=1, timeout_s=0.5)
        with pytest.raises(BackendUnavailable):
            llm.complete(GenerationRequest(prompt="x"))

    def test_success(self, http_stub):
        base, responses = http_stub
        responses.append((200, _chat_body("hello")))
        llm = RemoteLLM(base_url=base, model="m", retries=0)
        assert llm.complete(GenerationRequest(prompt="x")) == "hello"

    def test_retries_transient_then_succeeds(self, http_stub):
        base, responses = http_stub
        responses.append((503, "down"))
        responses.append((200, _chat_body("recovered")))
        llm = RemoteLLM(base_url=base, model="m", retries=1)
        assert llm.complete(GenerationRequest(prompt="x")) == "recovered"

    def test_response_too_long(self, http_stub):
        base, responses = http_stub
        responses.append((200, _chat_body("y" * 1000)))
        llm = RemoteLLM(base_url=base, model="m", retries=0)
        with pytest.raises(ResponseTooLong):
            llm.complete(GenerationRequest(prompt="x", max_tokens=10))
