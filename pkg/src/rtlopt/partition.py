"""Instance-tree partitioning: predict per-node synthesis time, cut edges
to minimize C = L + lambda*E, and schedule groups onto workers first-fit.

The predictor is linear least squares over operator/width-bucket counts.
The greedy partitioner starts from the root's edges and keeps cutting
inside the heaviest remaining component while the objective improves,
with forced cuts if the lower bound on the cut count is not yet met.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleBounds
from .frontend import ast as A
from .frontend import annotate_module

_BUCKETS = ((4, 4), (16, 16), (64, 64), (None, 128))


def _bucket(width: int) -> int:
    for bound, rep in _BUCKETS:
        if bound is None or width <= bound:
            return rep
    raise AssertionError


@dataclass
class FeatureVector:
    """Operator counts keyed "op:widthbucket"; one entry per operator node."""
    counts: dict[str, int] = field(default_factory=dict)

    def bump(self, kind: str, width: int) -> None:
        key = f"{kind}:{_bucket(max(1, width))}"
        self.counts[key] = self.counts.get(key, 0) + 1

    def total(self) -> int:
        return sum(self.counts.values())


def extract_features(module: A.ModuleAst) -> FeatureVector:
    probe = next(A.module_exprs(module), None)
    if probe is not None and probe.width is None:
        annotate_module(module)
    v = FeatureVector()
    for node in A.module_exprs(module):
        if isinstance(node, A.Binary):
            v.bump(node.op, node.width or 1)
        elif isinstance(node, A.Unary):
            v.bump("u" + node.op, node.width or 1)
        elif isinstance(node, A.Index):
            v.bump("select", node.width or 1)
        elif isinstance(node, A.Ternary):
            v.bump("mux", node.width or 1)
    return v


@dataclass
class CostPredictor:
    weights: dict[str, float]
    intercept: float

    def predict(self, v: FeatureVector) -> float:
        total = self.intercept
        for key, n in v.counts.items():
            total += self.weights.get(key, 0.0) * n
        return max(0.0, total)

    def to_json(self) -> str:
        return json.dumps({"weights": self.weights,
                           "intercept": self.intercept}, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "CostPredictor":
        data = json.loads(text)
        return CostPredictor(dict(data["weights"]), float(data["intercept"]))


def fit_predictor(samples: list[tuple[FeatureVector, float]]) -> CostPredictor:
    """Ridge least squares (delta=1e-6).  Degenerate data (no features, or
    a single sample) falls back to a constant predictor."""
    if not samples:
        raise ValueError("need at least one sample")
    keys = sorted({k for v, _ in samples for k in v.counts})
    y = np.array([t for _, t in samples], dtype=float)
    if not keys or len(samples) == 1:
        return CostPredictor({}, float(y.mean()))
    X = np.zeros((len(samples), len(keys) + 1))
    X[:, 0] = 1.0
    for i, (v, _) in enumerate(samples):
        for j, k in enumerate(keys):
            X[i, j + 1] = v.counts.get(k, 0)
    if np.linalg.matrix_rank(X) == X.shape[1]:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    else:
        # ridge term only when the normal equations would be singular
        delta = 1e-6
        gram = X.T @ X + delta * np.eye(len(keys) + 1)
        beta = np.linalg.solve(gram, X.T @ y)
    return CostPredictor({k: float(beta[j + 1]) for j, k in enumerate(keys)},
                         float(beta[0]))


def schedule_first_fit(group_times: list[float], workers: int) -> float:
    """First-fit-decreasing onto the least-loaded worker; returns makespan."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    loads = [0.0] * workers
    for t in sorted(group_times, reverse=True):
        i = min(range(workers), key=lambda k: loads[k])
        loads[i] += t
    return max(loads)


@dataclass
class PartitionPlan:
    cut_set: list[tuple[int, int]]        # (parent id, child id)
    groups: list[list[int]]               # node ids per component
    L: float
    E: float
    C: float
    lam: float

    def to_json(self) -> str:
        return json.dumps({
            "cuts": [list(c) for c in self.cut_set],
            "groups": self.groups,
            "L": self.L, "E": self.E, "C": self.C, "lambda": self.lam,
        }, sort_keys=True)


def _components(node_ids: list[int], edges: list[tuple[int, int]],
                cut: set[tuple[int, int]]) -> list[list[int]]:
    adj: dict[int, list[int]] = {n: [] for n in node_ids}
    for p, c in edges:
        if (p, c) in cut:
            continue
        adj[p].append(c)
        adj[c].append(p)
    seen: set[int] = set()
    comps = []
    for start in node_ids:
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            n = stack.pop()
            comp.append(n)
            for m in adj[n]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        comps.append(sorted(comp))
    return comps


def evaluate_cut(tree, cut: set[tuple[int, int]], lam: float,
                 workers: int) -> PartitionPlan:
    node_w = {nid: w for nid, _, _, w in tree.nodes}
    edge_w = {(p, c): w for p, c, _, w in tree.edges}
    node_ids = sorted(node_w)
    edges = [(p, c) for p, c, _, _ in tree.edges]
    groups = _components(node_ids, edges, cut)
    times = [sum(node_w[n] for n in g) for g in groups]
    L = schedule_first_fit(times, workers)
    E = sum(edge_w[e] for e in cut)
    return PartitionPlan(sorted(cut), groups, L, E, L + lam * E, lam)


def partition(tree, lam: float, n_min: int, n_max: int,
              workers: int) -> PartitionPlan:
    """Greedy top-down edge cutting; |cut_set| lands within [n_min, n_max]."""
    edges = [(p, c) for p, c, _, _ in tree.edges]
    if n_min > len(edges):
        raise InfeasibleBounds(
            f"n_min={n_min} exceeds the tree's {len(edges)} edges")
    if n_min > n_max:
        raise InfeasibleBounds(f"n_min={n_min} > n_max={n_max}")
    node_w = {nid: w for nid, _, _, w in tree.nodes}
    root = tree.root
    cut: set[tuple[int, int]] = set()
    current = evaluate_cut(tree, cut, lam, workers)
    best: PartitionPlan | None = current if n_min == 0 else None

    def candidates() -> list[tuple[int, int]]:
        if not cut:
            return sorted(e for e in edges if e[0] == root)
        groups = _components(sorted(node_w), edges, cut)
        by_weight = sorted(groups, key=lambda g: (-sum(node_w[n] for n in g),
                                                  g[0]))
        for g in by_weight:
            members = set(g)
            inner = sorted(e for e in edges
                           if e not in cut and e[0] in members and
                           e[1] in members)
            if inner:
                return inner
        return []

    def best_candidate(cands):
        scored = [(evaluate_cut(tree, cut | {e}, lam, workers), e)
                  for e in cands]
        scored.sort(key=lambda t: (t[0].C, t[1]))
        return scored[0]

    # a cut that leaves C unchanged still counts as progress; stop only
    # when the objective strictly degrades (and the lower bound is met)
    while len(cut) < n_max:
        cands = candidates()
        if not cands:
            break
        plan, edge = best_candidate(cands)
        if plan.C <= current.C or len(cut) < n_min:
            cut.add(edge)
            current = plan
            if len(cut) >= n_min and (best is None or current.C <= best.C):
                best = current
        else:
            break
    # force cuts in the heaviest component if the greedy stopped early
    while len(cut) < n_min:
        cands = candidates() or sorted(e for e in edges if e not in cut)
        current, edge = best_candidate(cands)
        cut.add(edge)
        if len(cut) >= n_min and (best is None or current.C <= best.C):
            best = current
    assert best is not None
    return best
