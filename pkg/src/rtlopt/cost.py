"""Synthesis-proxy cost model: Wires, Cells, Area, Delay from the AST.

Nothing here claims absolute accuracy against a real flow; the weights
exist so that rewrites that remove or weaken operators always move the
estimate in the right direction.  Weight ordering that the rewrite suite
relies on: multiply > add > mux > shift-by-constant (= 0, wiring only).

Delay is the longest weighted path through combinational logic; registers
cut paths.  Per the report convention, design totals are the sums of the
per-module breakdowns for all four metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import LengthMismatch
from .frontend import ast as A
from .frontend import annotate_module, symbol_table

# width buckets: (upper bound inclusive, representative width)
_BUCKETS = ((4, 4), (16, 16), (64, 64), (None, 128))

_KINDS = ("add", "sub", "mul", "div", "mod", "shift_const", "shift_var",
          "bitwise", "bitnot", "eq", "rel", "logical", "reduce", "mux",
          "register", "dynamic_select", "neg")


def bucket_rep(width: int) -> int:
    for bound, rep in _BUCKETS:
        if bound is None or width <= bound:
            return rep
    raise AssertionError


def _default_entry(kind: str, r: int) -> tuple[float, float, float]:
    barrel = r * max(1, math.ceil(math.log2(max(r, 2))))
    cells = {
        "add": 2 * r, "sub": 2 * r, "neg": 2 * r,
        "mul": 20 * r,
        "div": 25 * r, "mod": 25 * r,
        "shift_const": 0,
        "shift_var": barrel,
        "bitwise": r, "bitnot": r, "reduce": r,
        "eq": r, "rel": 2 * r,
        "logical": 1,
        "mux": r,
        "register": 1,          # per bit
        "dynamic_select": r,
    }[kind]
    delay = {
        "add": 2, "sub": 2, "neg": 2,
        "mul": 6,
        "div": 8, "mod": 8,
        "shift_const": 0,
        "shift_var": 3,
        "bitwise": 1, "bitnot": 1, "reduce": 1,
        "eq": 2, "rel": 2,
        "logical": 1,
        "mux": 1,
        "register": 0,
        "dynamic_select": 1,
    }[kind]
    return float(cells), float(cells), float(delay)


@dataclass
class CostWeights:
    """(cells, area_units, delay_units) per (operator kind, width bucket)."""
    table: dict[tuple[str, int], tuple[float, float, float]]

    @staticmethod
    def default() -> "CostWeights":
        table = {}
        for kind in _KINDS:
            for _, rep in _BUCKETS:
                table[(kind, rep)] = _default_entry(kind, rep)
        return CostWeights(table)

    @staticmethod
    def from_json(path: str) -> "CostWeights":
        """Partial override of the defaults: {"add": {"4": [c, a, d]}}."""
        w = CostWeights.default()
        with open(path) as f:
            data = json.load(f)
        for kind, per_bucket in data.items():
            if kind not in _KINDS:
                raise ValueError(f"unknown cost kind {kind!r}")
            for rep_s, triple in per_bucket.items():
                rep = int(rep_s)
                if rep not in [r for _, r in _BUCKETS]:
                    raise ValueError(f"unknown width bucket {rep}")
                c, a, d = triple
                w.table[(kind, rep)] = (float(c), float(a), float(d))
        return w

    def lookup(self, kind: str, width: int) -> tuple[float, float, float]:
        return self.table[(kind, bucket_rep(max(1, width)))]


@dataclass
class CostReport:
    wires: float = 0.0
    cells: float = 0.0
    area: float = 0.0
    delay: float = 0.0
    modules: dict[str, dict[str, float]] = field(default_factory=dict)

    def metrics(self) -> dict[str, float]:
        return {"wires": self.wires, "cells": self.cells,
                "area": self.area, "delay": self.delay}

    def delta(self, other: "CostReport") -> dict[str, float]:
        """self - other, per metric (negative = this report is cheaper)."""
        m, o = self.metrics(), other.metrics()
        return {k: m[k] - o[k] for k in m}


_REL_OPS = {"<", "<=", ">", ">="}
_BITWISE = {"&", "|", "^"}


class _ModuleCoster:
    def __init__(self, module: A.ModuleAst, weights: CostWeights):
        probe = next(A.module_exprs(module), None)
        if probe is not None and probe.width is None:
            annotate_module(module)
        self.m = module
        self.w = weights
        self.syms = symbol_table(module)
        self.cells = 0.0
        self.area = 0.0
        # nets assigned under an edge-sensitive always block
        self.seq_nets: set[str] = set()
        for item in module.items:
            if isinstance(item, A.Always) and not item.sens.star:
                for name in _assigned_names(item.body):
                    self.seq_nets.add(name)

    # -- cells ---------------------------------------------------------------

    def _add(self, kind: str, width: int, times: float = 1.0) -> None:
        c, a, _ = self.w.lookup(kind, width)
        self.cells += c * times
        self.area += a * times

    def _is_const(self, e: A.Expr) -> bool:
        if isinstance(e, A.Literal):
            return True
        if isinstance(e, A.Ident):
            s = self.syms.get(e.name)
            return s is not None and s.kind == "param"
        return False

    def expr_cells(self, e: A.Expr) -> None:
        for node in A.walk(e):
            if isinstance(node, A.Binary):
                self._binary_cells(node)
            elif isinstance(node, A.Unary):
                self._unary_cells(node)
            elif isinstance(node, A.Ternary):
                self._add("mux", node.width or 1)
            elif isinstance(node, A.Index):
                base = node.base
                if isinstance(base, A.Ident):
                    s = self.syms.get(base.name)
                    if s is not None and s.depth is not None:
                        # memory read port: address decode
                        self._add("dynamic_select", s.width)
                        continue
                if not self._is_const(node.index):
                    base_w = base.width or 1
                    self._add("dynamic_select", base_w)

    def _binary_cells(self, node: A.Binary) -> None:
        op = node.op
        w = node.width or 1
        opw = max(node.left.width or 1, node.right.width or 1)
        if op == "+":
            self._add("add", w)
        elif op == "-":
            self._add("sub", w)
        elif op == "*":
            self._add("mul", w)
        elif op == "/":
            self._add("div", w)
        elif op == "%":
            self._add("mod", w)
        elif op in ("<<", ">>"):
            kind = "shift_const" if self._is_const(node.right) else "shift_var"
            self._add(kind, w)
        elif op in _BITWISE:
            self._add("bitwise", w)
        elif op in ("==", "!="):
            self._add("eq", opw)
        elif op in _REL_OPS:
            self._add("rel", opw)
        elif op in ("&&", "||"):
            self._add("logical", 1)

    def _unary_cells(self, node: A.Unary) -> None:
        opw = node.operand.width or 1
        if node.op == "~":
            self._add("bitnot", node.width or 1)
        elif node.op == "-":
            self._add("neg", node.width or 1)
        elif node.op == "!":
            self._add("logical", 1)
        elif node.op in ("&", "|", "^"):
            self._add("reduce", opw)

    def _lvalue_cells(self, lhs: A.Expr) -> None:
        if isinstance(lhs, A.Index):
            base = lhs.base
            if isinstance(base, A.Ident):
                s = self.syms.get(base.name)
                if s is not None and s.depth is not None:
                    self._add("dynamic_select", s.width)
                    return
            if not self._is_const(lhs.index):
                self._add("dynamic_select", base.width or 1)

    def stmt_cells(self, st: A.Stmt) -> None:
        if isinstance(st, A.Begin):
            for s in st.stmts:
                self.stmt_cells(s)
        elif isinstance(st, A.Assign):
            self.expr_cells(st.rhs)
            self._lvalue_cells(st.lhs)
        elif isinstance(st, A.If):
            self.expr_cells(st.cond)
            self.stmt_cells(st.then)
            if st.other is not None:
                self.stmt_cells(st.other)
            for name in sorted(_assigned_names(st)):
                self._add("mux", self._net_width(name))
        elif isinstance(st, A.Case):
            self.expr_cells(st.subject)
            for arm in st.arms:
                # labels decode for free; arm bodies are real logic
                self.stmt_cells(arm.body)
            n_arms = len(st.arms)
            for name in sorted(_assigned_names(st)):
                self._add("mux", self._net_width(name), times=max(0, n_arms - 1))

    def _net_width(self, name: str) -> int:
        s = self.syms.get(name)
        return s.width if s is not None else 1

    def run(self) -> dict[str, float]:
        m = self.m
        wires = len(m.ports) + len(m.nets)
        for item in m.items:
            if isinstance(item, A.ContAssign):
                self.expr_cells(item.rhs)
                self._lvalue_cells(item.lhs)
            elif isinstance(item, A.Always):
                self.stmt_cells(item.body)
            elif isinstance(item, A.Instance):
                for _, e in item.conns:
                    if e is not None:
                        self.expr_cells(e)
        # register bits for every sequentially assigned net / memory word
        reg_done = set()
        for name in sorted(self.seq_nets):
            if name in reg_done:
                continue
            reg_done.add(name)
            s = self.syms.get(name)
            if s is None:
                continue
            unit = self.w.lookup("register", s.width)[0]
            bits = s.width * (s.depth if s.depth is not None else 1)
            self.cells += unit * bits
            self.area += unit * bits
        delay = _module_delay(m, self.w, self.syms, self.seq_nets,
                              self._is_const)
        return {"wires": float(wires), "cells": self.cells,
                "area": self.area, "delay": delay}


def _assigned_names(st: A.Stmt) -> set[str]:
    out: set[str] = set()
    def go(s):
        if isinstance(s, A.Begin):
            for x in s.stmts:
                go(x)
        elif isinstance(s, A.Assign):
            lhs = s.lhs
            while isinstance(lhs, (A.Index, A.PartSelect)):
                lhs = lhs.base
            if isinstance(lhs, A.Ident):
                out.add(lhs.name)
        elif isinstance(s, A.If):
            go(s.then)
            if s.other is not None:
                go(s.other)
        elif isinstance(s, A.Case):
            for arm in s.arms:
                go(arm.body)
    go(st)
    return out


# -- delay ----------------------------------------------------------------------


def _op_delay(w: CostWeights, kind: str, width: int) -> float:
    return w.lookup(kind, width)[2]


def _module_delay(m: A.ModuleAst, w: CostWeights, syms, seq_nets,
                  is_const) -> float:
    drivers: dict[str, tuple] = {}
    for item in m.items:
        if isinstance(item, A.ContAssign):
            lhs = item.lhs
            while isinstance(lhs, (A.Index, A.PartSelect)):
                lhs = lhs.base
            if isinstance(lhs, A.Ident):
                drivers[lhs.name] = ("expr", item.rhs)
        elif isinstance(item, A.Always) and item.sens.star:
            for name in _assigned_names(item.body):
                drivers[name] = ("block", item.body)

    memo: dict[str, float] = {}
    busy: set[str] = set()

    def net_delay(name: str) -> float:
        if name in memo:
            return memo[name]
        if name in busy or name in seq_nets or name not in drivers:
            return 0.0
        busy.add(name)
        kind, payload = drivers[name]
        if kind == "expr":
            d = expr_delay(payload)
        else:
            d = block_delay(payload, {}).get(name, 0.0)
        busy.discard(name)
        memo[name] = d
        return d

    def expr_delay(e: A.Expr, env: dict[str, float] | None = None) -> float:
        env = env or {}
        if isinstance(e, A.Ident):
            if e.name in env:
                return env[e.name]
            return net_delay(e.name)
        if isinstance(e, A.Literal):
            return 0.0
        if isinstance(e, A.Unary):
            opd = expr_delay(e.operand, env)
            kind = {"~": "bitnot", "-": "neg", "!": "logical"}.get(
                e.op, "reduce")
            width = e.operand.width or 1 if kind == "reduce" else e.width or 1
            return opd + _op_delay(w, kind, width)
        if isinstance(e, A.Binary):
            dl = expr_delay(e.left, env)
            dr = expr_delay(e.right, env)
            base = max(dl, dr)
            op = e.op
            width = e.width or 1
            opw = max(e.left.width or 1, e.right.width or 1)
            if op == "+":
                return base + _op_delay(w, "add", width)
            if op == "-":
                return base + _op_delay(w, "sub", width)
            if op == "*":
                return base + _op_delay(w, "mul", width)
            if op in ("/", "%"):
                return base + _op_delay(w, "div", width)
            if op in ("<<", ">>"):
                kind = "shift_const" if is_const(e.right) else "shift_var"
                return base + _op_delay(w, kind, width)
            if op in _BITWISE:
                return base + _op_delay(w, "bitwise", width)
            if op in ("==", "!="):
                return base + _op_delay(w, "eq", opw)
            if op in _REL_OPS:
                return base + _op_delay(w, "rel", opw)
            return base + _op_delay(w, "logical", 1)
        if isinstance(e, A.Ternary):
            d = max(expr_delay(e.cond, env), expr_delay(e.then, env),
                    expr_delay(e.other, env))
            return d + _op_delay(w, "mux", e.width or 1)
        if isinstance(e, A.Index):
            d = max(expr_delay(e.base, env), expr_delay(e.index, env))
            if is_const(e.index):
                return d
            return d + _op_delay(w, "dynamic_select", e.base.width or 1)
        if isinstance(e, A.PartSelect):
            return expr_delay(e.base, env)
        if isinstance(e, A.Concat):
            return max((expr_delay(p, env) for p in e.parts), default=0.0)
        if isinstance(e, A.Repl):
            return expr_delay(e.part, env)
        return 0.0

    def block_delay(st: A.Stmt, env: dict[str, float]) -> dict[str, float]:
        """Delays of nets assigned by st, honoring blocking order via env."""
        if isinstance(st, A.Begin):
            for s in st.stmts:
                env = block_delay(s, env)
            return env
        if isinstance(st, A.Assign):
            lhs = st.lhs
            while isinstance(lhs, (A.Index, A.PartSelect)):
                lhs = lhs.base
            if isinstance(lhs, A.Ident):
                env = dict(env)
                env[lhs.name] = expr_delay(st.rhs, env)
            return env
        if isinstance(st, A.If):
            dc = expr_delay(st.cond, env)
            e1 = block_delay(st.then, env)
            e2 = block_delay(st.other, env) if st.other is not None else env
            out = dict(env)
            for name in _assigned_names(st):
                arm = max(e1.get(name, env.get(name, 0.0)),
                          e2.get(name, env.get(name, 0.0)))
                out[name] = max(dc, arm) + _op_delay(
                    w, "mux", syms[name].width if name in syms else 1)
            return out
        if isinstance(st, A.Case):
            ds = expr_delay(st.subject, env)
            arm_envs = [block_delay(arm.body, env) for arm in st.arms]
            levels = max(1, math.ceil(math.log2(max(2, len(st.arms)))))
            out = dict(env)
            for name in _assigned_names(st):
                arm = max((e.get(name, env.get(name, 0.0)) for e in arm_envs),
                          default=0.0)
                width = syms[name].width if name in syms else 1
                out[name] = max(ds, arm) + levels * _op_delay(w, "mux", width)
            return out
        return env

    best = 0.0
    for name in drivers:
        best = max(best, net_delay(name))
    # paths ending at register D inputs
    for item in m.items:
        if isinstance(item, A.Always) and not item.sens.star:
            env = block_delay(item.body, {})
            if env:
                best = max(best, max(env.values()))
    return best


# -- public API -------------------------------------------------------------------


def estimate(ast, weights: CostWeights | None = None) -> CostReport:
    """Cost report for a design or a single module."""
    weights = weights or CostWeights.default()
    modules = ast.modules if isinstance(ast, A.DesignAst) else [ast]
    report = CostReport()
    for m in modules:
        stats = _ModuleCoster(m, weights).run()
        report.modules[m.name] = stats
        report.wires += stats["wires"]
        report.cells += stats["cells"]
        report.area += stats["area"]
        report.delay += stats["delay"]
    return report


def compare(before: CostReport, after: CostReport) -> str:
    """Lexicographic verdict: cells, then area, then delay."""
    for metric in ("cells", "area", "delay"):
        b, a = getattr(before, metric), getattr(after, metric)
        if a < b:
            return "improved"
        if a > b:
            return "worse"
    return "equal"


def geomean(values: list[float]) -> float:
    """Geometric mean; zero entries are replaced by 1 so empty modules do
    not zero out a whole row."""
    if not values:
        return 0.0
    acc = 0.0
    for v in values:
        acc += math.log(v if v > 0 else 1.0)
    return math.exp(acc / len(values))


def aggregate(reports: list[CostReport],
              baseline: list[CostReport]) -> tuple[dict, dict]:
    """Per-metric geometric means of `reports` and ratios vs `baseline`."""
    if len(reports) != len(baseline):
        raise LengthMismatch(
            f"{len(reports)} reports vs {len(baseline)} baselines")
    means: dict[str, float] = {}
    ratios: dict[str, float] = {}
    for metric in ("wires", "cells", "area", "delay"):
        ours = geomean([getattr(r, metric) for r in reports])
        base = geomean([getattr(r, metric) for r in baseline])
        means[metric] = ours
        ratios[metric] = ours / base if base else 0.0
    return means, ratios
