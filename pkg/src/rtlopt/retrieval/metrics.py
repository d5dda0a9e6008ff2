"""Hit ratio and mean average precision over top-k retrieval."""

from __future__ import annotations

from typing import Mapping, Sequence

from .db import Database
from .rank import rank_stage1


def eval_metrics(rows: Sequence[tuple[str, Sequence[str]]],
                 k: int) -> tuple[float, float]:
    """Score ranked category hits against their ground truth.

    Each row is (true category, hit categories in rank order). The hit
    ratio averages per-rank correctness over the top k; average precision
    weights each correct rank by the correct count within its prefix over
    its rank. Both are divided by k per query, then averaged over queries.
    """
    if not rows:
        return 0.0, 0.0
    h_total = 0.0
    m_total = 0.0
    for idx, (truth, hit_cats) in enumerate(rows):
        if len(hit_cats) < k:
            raise ValueError(
                f"query {idx} returned {len(hit_cats)} hits, need at least {k}")
        flags = [1.0 if cat == truth else 0.0 for cat in hit_cats[:k]]
        h_total += sum(flags) / k
        prefix = 0
        ap = 0.0
        for rank, flag in enumerate(flags, start=1):
            prefix += int(flag)
            ap += flag * prefix / rank
        m_total += ap / k
    n = len(rows)
    return h_total / n, m_total / n


def evaluate_retrieval(db: Database, queries: Sequence[Mapping[str, str]],
                       k: int, lam: float = 0.5) -> dict:
    """Run top-k relevance retrieval per query row and score the categories.

    Query rows carry text, doc_type, and category keys.
    """
    rows = []
    for query in queries:
        hits = rank_stage1(db, query["text"], query["doc_type"], lam=lam, n=k)
        rows.append((query["category"],
                     [db.get(h.doc_id).category for h in hits]))
    h_at_k, map_at_k = eval_metrics(rows, k)
    return {"h_at_k": h_at_k, "map_at_k": map_at_k, "queries": len(rows)}
