"""Two-channel text encoding: a sparse TF-IDF vector over code tokens plus
a dense hashed character-trigram histogram.

The dense channel sits behind the Embedder interface so an external
embedding service can replace the built-in hash without touching any of
the ranking math; both channels stay deterministic by default.
"""

from __future__ import annotations

import json
import math
import re
import urllib.request
import zlib
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

SEMANTIC_DIM = 256

_TOKEN = re.compile(r"[a-z_]\w*|\d+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Split code or prose into lowercase identifier, number, and symbol tokens."""
    return _TOKEN.findall(text.lower())


@dataclass
class CorpusStats:
    """Document-frequency table the keyword channel weights against."""

    n_docs: int = 0
    df: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "CorpusStats":
        df: dict[str, int] = {}
        n = 0
        for text in texts:
            n += 1
            for tok in set(tokenize(text)):
                df[tok] = df.get(tok, 0) + 1
        return cls(n_docs=n, df=df)

    def idf(self, token: str) -> float:
        return math.log((1 + self.n_docs) / (1 + self.df.get(token, 0)))


def keyword_vector(text: str, stats: CorpusStats) -> dict[str, float]:
    """Sparse tf * log((1+N)/(1+df)) weights; tf is the raw token count."""
    counts: dict[str, int] = {}
    for tok in tokenize(text):
        counts[tok] = counts.get(tok, 0) + 1
    return {tok: tf * stats.idf(tok) for tok, tf in counts.items()}


def semantic_vector(text: str) -> np.ndarray:
    """Dense hashed character-trigram histogram, L2-normalized.

    Texts shorter than three characters embed to the zero vector.
    """
    vec = np.zeros(SEMANTIC_DIM, dtype=np.float64)
    low = text.lower()
    for i in range(len(low) - 2):
        vec[zlib.crc32(low[i:i + 3].encode("utf-8")) % SEMANTIC_DIM] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm:
        vec /= norm
    return vec


@dataclass
class EmbeddingPair:
    """Both channels of one text: sparse keyword weights, dense semantic vector."""

    keyword: dict[str, float]
    semantic: np.ndarray


class Embedder:
    """Semantic-channel encoder; the keyword channel is always TF-IDF."""

    def encode(self, text: str) -> np.ndarray:
        raise NotImplementedError


class HashedNgramEmbedder(Embedder):
    """Default embedder: the trigram histogram above."""

    def encode(self, text: str) -> np.ndarray:
        return semantic_vector(text)


class HttpEmbedder(Embedder):
    """Client for an external embedding service.

    POSTs {"text": ...} as JSON and expects {"vector": [...]} back. The
    vector is L2-normalized on receipt so scores stay bounded regardless
    of what the service returns.
    """

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def encode(self, text: str) -> np.ndarray:
        body = json.dumps({"text": text}).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            payload = json.load(resp)
        if "vector" not in payload:
            raise ValueError(f"embedding service returned no vector: {payload!r}")
        vec = np.asarray(payload["vector"], dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm else vec


def embed(text: str, stats: CorpusStats,
          embedder: Embedder | None = None) -> EmbeddingPair:
    """Encode one text against the corpus stats. Deterministic by default."""
    semantic = embedder.encode(text) if embedder is not None else semantic_vector(text)
    return EmbeddingPair(keyword=keyword_vector(text, stats), semantic=semantic)
