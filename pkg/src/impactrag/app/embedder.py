"""Query/document embedding clients. The index never embeds; the app does, through these."""

from __future__ import annotations

import hashlib
import os
from typing import Mapping, Sequence

import httpx
import numpy as np

from ..corpus import tokenize
from ..index.dense import DEFAULT_DIMENSION
from ..index.embfile import read_embeddings


class Embedder:
    dimension: int = DEFAULT_DIMENSION

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        raise NotImplementedError


class HashEmbedder(Embedder):
    """Signed feature hashing of tokens; deterministic and offline, for tests and demos."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            vec = np.zeros(self.dimension)
            for tok in tokenize(text):
                h = int.from_bytes(hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest(), "little")
                vec[h % self.dimension] += 1.0 if (h >> 63) & 1 else -1.0
            if not vec.any():
                vec[0] = 1.0
            out.append(vec / np.linalg.norm(vec))
        return out


class LookupEmbedder(Embedder):
    """Precomputed query vectors from an EMB1 file keyed by the exact query text."""

    def __init__(self, path: str):
        self.vectors, self.dimension = read_embeddings(path)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        missing = [t for t in texts if t not in self.vectors]
        if missing:
            raise KeyError(f"no precomputed embedding for {missing[0]!r}")
        return [self.vectors[t] for t in texts]


class OpenAIEmbedder(Embedder):
    """``POST {base_url}/embeddings`` with the OpenAI request/response shape."""

    def __init__(self, base_url: str, model: str = "all-MiniLM-L6-v2", dimension: int = DEFAULT_DIMENSION,
                 api_key_env: str | None = "OPENAI_API_KEY", timeout: float = 60.0,
                 client: httpx.Client | None = None):
        self.url = base_url.rstrip("/") + "/embeddings"
        self.model = model
        self.dimension = dimension
        self.api_key_env = api_key_env
        self._client = client or httpx.Client(timeout=timeout)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        headers = {}
        key = os.environ.get(self.api_key_env or "", "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        resp = self._client.post(self.url, json={"model": self.model, "input": list(texts)}, headers=headers)
        resp.raise_for_status()
        data = sorted(resp.json()["data"], key=lambda d: d["index"])
        return [np.asarray(d["embedding"], dtype=np.float64) for d in data]


def make_embedder(spec: Mapping) -> Embedder | None:
    kind = spec.get("kind", "none")
    if kind == "none":
        return None
    if kind == "hash":
        return HashEmbedder(int(spec.get("dimension", DEFAULT_DIMENSION)))
    if kind == "lookup":
        return LookupEmbedder(spec["path"])
    if kind == "openai":
        return OpenAIEmbedder(spec["base_url"], spec.get("model", "all-MiniLM-L6-v2"),
                              int(spec.get("dimension", DEFAULT_DIMENSION)), spec.get("api_key_env"))
    raise ValueError(f"unknown embedder kind {kind!r}")
