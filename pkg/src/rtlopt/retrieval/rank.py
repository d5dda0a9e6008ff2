"""Hybrid similarity, two-stage relevance-plus-diversity ranking, and
link-following join queries.

Similarity blends a keyword cosine and a semantic cosine, shifted into
[0, 2]. Stage 1 is a straight relevance sort; stage 2 picks k of the N
candidates to maximize total relevance plus average dissimilarity, by
exhaustive enumeration when the subset count is small enough and by
greedy marginal gain otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptyPath
from .db import DOC_TYPES, Database
from .embed import EmbeddingPair

EXACT_SUBSET_BUDGET = 10_000


def _clamp(value: float) -> float:
    return min(1.0, max(-1.0, value))


def _cosine_sparse(a: dict[str, float], b: dict[str, float]) -> float:
    # canonical key order keeps the sum, and hence symmetry, exact
    common = sorted(a.keys() & b.keys())
    dot = sum(a[t] * b[t] for t in common)
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return _clamp(dot / (na * nb))


def _cosine_dense(a, b) -> float:
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return _clamp(float(np.dot(av, bv)) / (na * nb))


def similarity(a: EmbeddingPair, b: EmbeddingPair, lam: float = 0.5) -> float:
    """Keyword/semantic cosine blend in [0, 2]; a zero vector scores cosine 0."""
    ck = _cosine_sparse(a.keyword, b.keyword)
    cs = _cosine_dense(a.semantic, b.semantic)
    return lam * ck + (1.0 - lam) * cs + 1.0


@dataclass
class RankedHit:
    doc_id: str
    score: float
    rank: int

    def to_json(self) -> dict:
        return {"id": self.doc_id, "score": self.score, "rank": self.rank}


def rank_stage1(db: Database, text: str, doc_type: str, lam: float = 0.5,
                n: int | None = None) -> list[RankedHit]:
    """Score every same-type document, highest first, ties by lowest id."""
    docs = db.by_type(doc_type)
    db.ensure_index()
    query = db.embed_query(text)
    scored = sorted(((-similarity(query, db.pair(d.id), lam), d.id)
                     for d in docs))
    if n is not None:
        scored = scored[:n]
    return [RankedHit(doc_id=did, score=-neg, rank=i + 1)
            for i, (neg, did) in enumerate(scored)]


def stage2_objective(chosen: Sequence[int], qsims: Sequence[float],
                     pair, k: int | None = None) -> float:
    """Relevance sum plus (1/k)-weighted dissimilarity of the chosen set.

    The dissimilarity of an item is its smallest gap (2 - sim) to the rest
    of the set; a lone item contributes 0 (min over an empty set), which
    makes k=1 reduce to pure relevance.
    """
    if not chosen:
        return 0.0
    size = k if k is not None else len(chosen)
    rel = sum(qsims[i] for i in chosen)
    div = 0.0
    for i in chosen:
        gaps = [2.0 - pair[i][j] for j in chosen if j != i]
        div += min(gaps) if gaps else 0.0
    return rel + div / size


def exact_stage2(qsims: Sequence[float], pair, k: int) -> tuple[list[int], float]:
    """Exhaustive max over every k-subset; first subset wins ties."""
    best: tuple[int, ...] = ()
    best_obj = -math.inf
    for combo in itertools.combinations(range(len(qsims)), k):
        obj = stage2_objective(combo, qsims, pair, k)
        if obj > best_obj:
            best, best_obj = combo, obj
    return list(best), best_obj


def greedy_stage2(qsims: Sequence[float], pair, k: int) -> tuple[list[int], float]:
    """Marginal-gain selection scored against the final (1/k) weight."""
    chosen: list[int] = []
    for _ in range(k):
        rest = [i for i in range(len(qsims)) if i not in chosen]
        best = max(rest, key=lambda i: (
            stage2_objective(sorted(chosen + [i]), qsims, pair, k), -i))
        chosen.append(best)
        chosen.sort()
    return chosen, stage2_objective(chosen, qsims, pair, k)


def rank_stage2(qsims: Sequence[float], pair, k: int) -> tuple[list[int], float, str]:
    """Pick k of N candidates; returns (indices, objective, mode)."""
    n = len(qsims)
    if k > n:
        raise ValueError(f"k={k} exceeds candidate count {n}")
    if math.comb(n, k) <= EXACT_SUBSET_BUDGET:
        chosen, obj = exact_stage2(qsims, pair, k)
        return chosen, obj, "exact"
    chosen, obj = greedy_stage2(qsims, pair, k)
    return chosen, obj, "greedy"


@dataclass
class RetrievalResult:
    """Final hits plus the stage-2 objective they achieved."""

    hits: list[RankedHit]
    objective: float
    mode: str

    def to_json(self) -> dict:
        return {"hits": [h.to_json() for h in self.hits],
                "objective": self.objective, "mode": self.mode}


def retrieve(db: Database, text: str, doc_type: str, k: int,
             lam: float = 0.5, n: int | None = None) -> RetrievalResult:
    """Stage-1 relevance cut to n candidates, then stage-2 diverse pick of k."""
    stage1 = rank_stage1(db, text, doc_type, lam=lam, n=n)
    if k > len(stage1):
        raise ValueError(f"k={k} exceeds candidate count {len(stage1)}")
    qsims = [h.score for h in stage1]
    pairs = [db.pair(h.doc_id) for h in stage1]
    m = len(stage1)
    mat = [[2.0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            mat[i][j] = mat[j][i] = similarity(pairs[i], pairs[j], lam)
    chosen, obj, mode = rank_stage2(qsims, mat, k)
    # chosen is ascending by stage-1 index, so scores stay non-increasing
    hits = [RankedHit(doc_id=stage1[i].doc_id, score=stage1[i].score, rank=r + 1)
            for r, i in enumerate(chosen)]
    return RetrievalResult(hits=hits, objective=obj, mode=mode)


def join_query(db: Database, text: str, path: Sequence[str], lam: float = 0.5,
               n: int | None = None, k: int | None = None) -> list[RankedHit]:
    """Rank the first type, then hop along document links through the rest
    of the path, deduplicating targets and keeping each one's best source
    score.
    """
    if len(path) < 2:
        raise EmptyPath(
            f"join path needs at least two doc types, got {list(path)!r}")
    for doc_type in path:
        if doc_type not in DOC_TYPES:
            raise ValueError(
                f"unknown doc_type {doc_type!r}; expected one of {DOC_TYPES}")
    scores = {h.doc_id: h.score
              for h in rank_stage1(db, text, path[0], lam=lam, n=n)}
    for doc_type in path[1:]:
        hop: dict[str, float] = {}
        for source_id, score in scores.items():
            for target in db.get(source_id).links:
                if db.get(target).doc_type != doc_type:
                    continue
                if target not in hop or score > hop[target]:
                    hop[target] = score
        scores = hop
    ordered = sorted((-s, did) for did, s in scores.items())
    if k is not None:
        ordered = ordered[:k]
    return [RankedHit(doc_id=did, score=-neg, rank=i + 1)
            for i, (neg, did) in enumerate(ordered)]
