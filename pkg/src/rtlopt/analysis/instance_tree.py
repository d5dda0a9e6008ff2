"""Instance tree construction with direct/combinational/sequential edges.

One node per instantiation (not per module definition).  An edge is
classified by how the parent drives the child's input ports: pure wiring
is direct, anything passing through operators or comb-assigned nets is
combinational, and nets produced by edge-triggered blocks are sequential.
When several ports disagree the heaviest kind wins (comb > seq > direct).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import CycleError, UnknownModule
from ..frontend import ast as A
from .. import partition as _partition

DEFAULT_EDGE_WEIGHTS = {"direct": 0.1, "combinational": 1.0,
                        "sequential": 0.3}

_PRIORITY = {"direct": 0, "sequential": 1, "combinational": 2}


@dataclass
class InstanceTree:
    nodes: list[tuple[int, str, str, float]]  # (id, module, path, weight)
    edges: list[tuple[int, int, str, float]]  # (parent, child, kind, weight)
    root: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "nodes": [{"id": n, "module": m, "path": p, "weight": w}
                      for n, m, p, w in self.nodes],
            "edges": [{"parent": p, "child": c, "kind": k, "weight": w}
                      for p, c, k, w in self.edges],
            "root": self.root,
        }, sort_keys=True)


def _expr_classifier(module: A.ModuleAst, design: A.DesignAst):
    """Build a classifier mapping a connection expression to the kind of
    logic producing it within `module`."""
    base: dict[str, str] = {}
    forward: dict[str, A.Expr] = {}
    for p in module.ports:
        if p.direction == "input":
            base[p.name] = "direct"
    for item in module.items:
        if isinstance(item, A.Always):
            kind = "combinational" if item.sens.star else "sequential"
            for st in A.walk(item.body):
                if isinstance(st, A.Assign):
                    name = _lvalue_name(st.lhs)
                    if name:
                        base[name] = _max_kind(base.get(name), kind)
        elif isinstance(item, A.ContAssign):
            name = _lvalue_name(item.lhs)
            if name:
                forward[name] = item.rhs
        elif isinstance(item, A.Instance):
            child = design.module(item.module)
            if child is None:
                continue
            dirs = {p.name: p.direction for p in child.ports}
            for port, expr in _named_conns(item, child):
                if (dirs.get(port) == "output" and
                        isinstance(expr, A.Ident)):
                    base.setdefault(expr.name, "direct")
    params = {p.name for p in module.params}
    memo: dict[str, str] = {}

    def resolve(name: str, busy: frozenset[str]) -> str:
        if name in memo:
            return memo[name]
        if name in busy or name in params:
            return "direct"
        if name in base and name not in forward:
            memo[name] = base[name]
            return base[name]
        if name in forward:
            k = _expr_kind(forward[name], busy | {name})
            if name in base:
                k = _max_kind(base[name], k)
            memo[name] = k
            return k
        return "direct"

    def _expr_kind(e: A.Expr, busy: frozenset[str]) -> str:
        if e is None or isinstance(e, A.Literal):
            return "direct"
        if isinstance(e, A.Ident):
            return resolve(e.name, busy)
        if isinstance(e, A.PartSelect):
            return _expr_kind(e.base, busy)
        if isinstance(e, A.Repl):
            return _expr_kind(e.part, busy)
        if isinstance(e, A.Concat):
            k = "direct"
            for part in e.parts:
                k = _max_kind(k, _expr_kind(part, busy))
            return k
        if isinstance(e, A.Index) and isinstance(e.index, A.Literal):
            return _expr_kind(e.base, busy)
        return "combinational"

    def classify(e: A.Expr) -> str:
        return _expr_kind(e, frozenset())

    return classify


def _max_kind(a: str | None, b: str) -> str:
    if a is None:
        return b
    return a if _PRIORITY[a] >= _PRIORITY[b] else b


def _lvalue_name(lhs: A.Expr) -> str | None:
    while isinstance(lhs, (A.Index, A.PartSelect)):
        lhs = lhs.base
    return lhs.name if isinstance(lhs, A.Ident) else None


def _named_conns(inst: A.Instance,
                 child: A.ModuleAst) -> list[tuple[str, A.Expr]]:
    if inst.conns and inst.conns[0][0] is None:
        pairs = []
        for port, (_, expr) in zip(child.ports, inst.conns):
            pairs.append((port.name, expr))
        return pairs
    return [(name, expr) for name, expr in inst.conns if name is not None]


def classify_edge(parent: A.ModuleAst, inst: A.Instance,
                  design: A.DesignAst) -> str:
    """Aggregate kind over the child's input connections."""
    child = design.module(inst.module)
    dirs = {p.name: p.direction for p in child.ports}
    expr_kind = _expr_classifier(parent, design)
    kind = "direct"
    for port, expr in _named_conns(inst, child):
        if dirs.get(port) != "input" or expr is None:
            continue
        kind = _max_kind(kind, expr_kind(expr))
    return kind


def build_instance_tree(design: A.DesignAst, top: str,
                        predictor=None,
                        edge_weights: dict[str, float] | None = None,
                        ) -> InstanceTree:
    ew = dict(DEFAULT_EDGE_WEIGHTS)
    if edge_weights:
        ew.update(edge_weights)
    top_mod = design.module(top)
    if top_mod is None:
        raise UnknownModule(f"top module '{top}' not found")

    feat_cache: dict[str, float] = {}

    def weight(m: A.ModuleAst) -> float:
        if m.name not in feat_cache:
            v = _partition.extract_features(m)
            if predictor is None:
                feat_cache[m.name] = float(v.total())
            else:
                feat_cache[m.name] = float(predictor.predict(v))
        return feat_cache[m.name]

    nodes: list[tuple[int, str, str, float]] = []
    edges: list[tuple[int, int, str, float]] = []

    def visit(m: A.ModuleAst, path: str, stack: tuple[str, ...]) -> int:
        if m.name in stack:
            chain = " -> ".join(stack + (m.name,))
            raise CycleError(f"instantiation recurses: {chain}")
        nid = len(nodes)
        nodes.append((nid, m.name, path, weight(m)))
        for item in m.items:
            if not isinstance(item, A.Instance):
                continue
            child = design.module(item.module)
            if child is None:
                raise UnknownModule(
                    f"module '{item.module}' instantiated by '{m.name}' "
                    f"is not defined")
            kind = classify_edge(m, item, design)
            cid = visit(child, f"{path}.{item.name}", stack + (m.name,))
            edges.append((nid, cid, kind, ew[kind]))
        return nid

    visit(top_mod, top, ())
    return InstanceTree(nodes, sorted(edges), 0)
