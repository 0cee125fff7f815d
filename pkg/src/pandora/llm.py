"""Text-generation and embedding backends behind two small interfaces.

Generation: a remote chat-completions endpoint, or a scripted backend that
replays canned responses keyed by a caller-supplied tag (FIFO per key) so the
whole engine runs reproducibly offline. Embedding: a remote endpoint, or a
deterministic hashed bag-of-words fallback. The fallback makes retrieval
testable everywhere; it makes no claim to match a real encoder's quality.
"""

from __future__ import annotations

import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

FALLBACK_DIMS = 256
_TOKEN_SPLIT_RE = re.compile(r"[^a-z0-9]+")

LLM_BASE_URL_VAR = "PANDORA_LLM_BASE_URL"
LLM_MODEL_VAR = "PANDORA_LLM_MODEL"
LLM_API_KEY_VAR = "PANDORA_LLM_API_KEY"
EMBED_BASE_URL_VAR = "PANDORA_EMBED_BASE_URL"
EMBED_MODEL_VAR = "PANDORA_EMBED_MODEL"
EMBED_API_KEY_VAR = "PANDORA_EMBED_API_KEY"


class BackendUnavailable(RuntimeError):
    """The configured backend could not serve the request."""


class ScriptExhausted(RuntimeError):
    """The scripted backend has no response left for a key."""


class ResponseTooLong(RuntimeError):
    """The response exceeded the transport-level size cap."""


class DimensionMismatch(ValueError):
    """Two embedding vectors of different dimensionality were combined."""


@dataclass
class GenerationRequest:
    prompt: str
    max_tokens: int = 2048
    temperature: float = 0.0
    tag: str = "*"  # script key for the scripted backend; ignored remotely

    def validate(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class EmbeddingVector:
    components: tuple[float, ...]

    @property
    def dims(self) -> int:
        return len(self.components)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity clamped to [-1, 1]; 0 when either norm is zero."""
    if a.dims != b.dims:
        raise DimensionMismatch(f"{a.dims} vs {b.dims}")
    dot = sum(x * y for x, y in zip(a.components, b.components))
    norm_a = math.sqrt(sum(x * x for x in a.components))
    norm_b = math.sqrt(sum(y * y for y in b.components))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return max(-1.0, min(1.0, dot / (norm_a * norm_b)))


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) % (1 << 64)
    return h


class FallbackEmbedder:
    """Deterministic hashed bag-of-words embedding, identical on every platform.

    Lowercase, split on non-alphanumeric runs, FNV-1a 64-bit each token into
    one of 256 buckets, then L2-normalize (the zero vector stays zero).
    """

    embedder_id = "fallback-fnv1a-256"

    def embed(self, text: str) -> EmbeddingVector:
        buckets = [0.0] * FALLBACK_DIMS
        for token in _TOKEN_SPLIT_RE.split(text.lower()):
            if token:
                buckets[_fnv1a64(token.encode("utf-8")) % FALLBACK_DIMS] += 1.0
        norm = math.sqrt(sum(x * x for x in buckets))
        if norm > 0.0:
            buckets = [x / norm for x in buckets]
        return EmbeddingVector(components=tuple(buckets))


class ScriptedLLM:
    """Replays canned responses FIFO per key; fails loudly when exhausted.

    The script is a JSONL file of ``{"key": str, "response": str}``. A
    request consumes the next response under its tag; key ``*`` is a
    wildcard queue used when the tag has no responses left.
    """

    def __init__(self, script: list[tuple[str, str]]):
        self._queues: dict[str, list[str]] = {}
        for key, response in script:
            self._queues.setdefault(key, []).append(response)
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedLLM":
        entries = []
        with open(path, encoding="utf-8") as fp:
            for line in fp:
                if line.strip():
                    obj = json.loads(line)
                    entries.append((obj["key"], obj["response"]))
        return cls(entries)

    def complete(self, request: GenerationRequest) -> str:
        request.validate()
        with self._lock:
            queue = self._queues.get(request.tag)
            if not queue:
                queue = self._queues.get("*")
            if not queue:
                raise ScriptExhausted(f"no scripted response left for key {request.tag!r}")
            return queue.pop(0)


class RemoteLLM:
    """Chat-completions-style HTTP backend with bounded retries."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        retries: int = 2,
        timeout_s: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.retries = retries
        self.timeout_s = timeout_s

    @classmethod
    def from_env(cls) -> "RemoteLLM":
        base_url = os.environ.get(LLM_BASE_URL_VAR)
        if not base_url:
            raise BackendUnavailable(f"{LLM_BASE_URL_VAR} is not set")
        return cls(
            base_url=base_url,
            model=os.environ.get(LLM_MODEL_VAR, "gpt-4o-mini"),
            api_key=os.environ.get(LLM_API_KEY_VAR),
        )

    def _endpoint(self) -> str:
        if self.base_url.endswith("/chat/completions"):
            return self.base_url
        return self.base_url + "/chat/completions"

    def complete(self, request: GenerationRequest) -> str:
        request.validate()
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(
                    self._endpoint(), json=payload, headers=headers, timeout=self.timeout_s
                )
                if resp.status_code >= 500:
                    raise requests.RequestException(f"server error {resp.status_code}")
                if resp.status_code != 200:
                    raise BackendUnavailable(
                        f"generation endpoint returned {resp.status_code}: {resp.text[:200]}"
                    )
                text = resp.json()["choices"][0]["message"]["content"]
                # Transport-level size cap, not a tokenizer: 8 bytes/token is
                # a generous upper bound.
                if len(text.encode("utf-8")) > request.max_tokens * 8:
                    raise ResponseTooLong(f"response exceeds {request.max_tokens} token budget")
                return text
            except (requests.RequestException, KeyError, ValueError) as e:
                last_error = e
                if attempt < self.retries:
                    time.sleep(0.5 * 2**attempt)
        raise BackendUnavailable(f"generation backend failed after retries: {last_error}")


class RemoteEmbedder:
    """Embedding HTTP backend returning the service vector verbatim."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        retries: int = 2,
        timeout_s: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.retries = retries
        self.timeout_s = timeout_s
        self.embedder_id = f"remote-{model}"

    @classmethod
    def from_env(cls) -> "RemoteEmbedder":
        base_url = os.environ.get(EMBED_BASE_URL_VAR)
        if not base_url:
            raise BackendUnavailable(f"{EMBED_BASE_URL_VAR} is not set")
        return cls(
            base_url=base_url,
            model=os.environ.get(EMBED_MODEL_VAR, "text-embedding-3-small"),
            api_key=os.environ.get(EMBED_API_KEY_VAR),
        )

    def _endpoint(self) -> str:
        if self.base_url.endswith("/embeddings"):
            return self.base_url
        return self.base_url + "/embeddings"

    def embed(self, text: str) -> EmbeddingVector:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "input": text}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(
                    self._endpoint(), json=payload, headers=headers, timeout=self.timeout_s
                )
                if resp.status_code >= 500:
                    raise requests.RequestException(f"server error {resp.status_code}")
                if resp.status_code != 200:
                    raise BackendUnavailable(
                        f"embedding endpoint returned {resp.status_code}: {resp.text[:200]}"
                    )
                vector = resp.json()["data"][0]["embedding"]
                return EmbeddingVector(components=tuple(float(x) for x in vector))
            except (requests.RequestException, KeyError, ValueError) as e:
                last_error = e
                if attempt < self.retries:
                    time.sleep(0.5 * 2**attempt)
        raise BackendUnavailable(f"embedding backend failed after retries: {last_error}")
