"""Structural pattern recognition driving rewrite-rule selection.

Every detector is a deterministic AST scan; the result names which rule
families are worth attempting, never whether they will succeed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..frontend import ast as A
from .defuse import build_def_use
from .fsm import FsmSpec, extract_fsm

_ARITH = {"+", "-", "*", "/", "%", "<<", ">>"}

PATTERN_ORDER = ("datapath", "mux", "fsm", "memory", "basic")

HINT_ORDER = (
    "constant-propagation",
    "dead-code-elimination",
    "subexpression-elimination",
    "strength-reduction",
    "multiple-constant-multiplication",
    "mux-reduction",
    "mux-restructuring",
    "resource-sharing",
    "state-minimization",
    "state-assignment",
)


@dataclass
class AnalysisResult:
    optimization_patterns: list[str]
    sub_hints: list[str]
    verification_pattern: str               # "combinational" | "sequential"
    fsm_extractions: list[FsmSpec] = field(default_factory=list)
    advisories: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "patterns": self.optimization_patterns,
            "sub_hints": self.sub_hints,
            "verification_pattern": self.verification_pattern,
            "advisories": self.advisories,
        }, sort_keys=True)


def _is_const(e: A.Expr, params: dict[str, int]) -> bool:
    if isinstance(e, A.Literal):
        return True
    return isinstance(e, A.Ident) and e.name in params


def _stmts(module: A.ModuleAst):
    for item in module.items:
        if isinstance(item, A.Always):
            stack = [item.body]
            while stack:
                st = stack.pop()
                yield st
                if isinstance(st, A.Begin):
                    stack.extend(st.stmts)
                elif isinstance(st, A.If):
                    stack.append(st.then)
                    if st.other is not None:
                        stack.append(st.other)
                elif isinstance(st, A.Case):
                    stack.extend(arm.body for arm in st.arms)


def _expr_key(e: A.Expr) -> tuple:
    if isinstance(e, A.Ident):
        return ("id", e.name)
    if isinstance(e, A.Literal):
        return ("lit", e.value, e.size)
    if isinstance(e, A.Unary):
        return ("un", e.op, _expr_key(e.operand))
    if isinstance(e, A.Binary):
        return ("bin", e.op, _expr_key(e.left), _expr_key(e.right))
    if isinstance(e, A.Ternary):
        return ("tern", _expr_key(e.cond), _expr_key(e.then),
                _expr_key(e.other))
    if isinstance(e, A.Index):
        return ("idx", _expr_key(e.base), _expr_key(e.index))
    if isinstance(e, A.PartSelect):
        return ("ps", _expr_key(e.base), e.msb, e.lsb)
    if isinstance(e, A.Concat):
        return ("cat",) + tuple(_expr_key(p) for p in e.parts)
    if isinstance(e, A.Repl):
        return ("rep", e.count, _expr_key(e.part))
    return ("?",)


def _eq_chain_len(st: A.If, params: dict[str, int]) -> tuple[int, str | None]:
    """Length of an if/else-if chain of equality tests on one subject."""
    subject = None
    n = 0
    cur: A.Stmt | None = st
    while isinstance(cur, A.If):
        c = cur.cond
        if not (isinstance(c, A.Binary) and c.op == "=="):
            break
        if not (isinstance(c.left, A.Ident) and _is_const(c.right, params)):
            break
        if subject is None:
            subject = c.left.name
        elif c.left.name != subject:
            break
        n += 1
        cur = cur.other
    return n, subject


def _branch_assign_ops(st: A.Stmt) -> dict[str, str]:
    """Net -> binary op for single-assignment branches, else empty."""
    stmts = st.stmts if isinstance(st, A.Begin) else [st]
    out = {}
    for s in stmts:
        if not (isinstance(s, A.Assign) and isinstance(s.lhs, A.Ident) and
                isinstance(s.rhs, A.Binary)):
            return {}
        out[s.lhs.name] = s.rhs.op
    return out


def analyze(module: A.ModuleAst) -> AnalysisResult:
    params = {p.name: p.value for p in module.params}
    exprs = list(A.module_exprs(module))
    stmts = list(_stmts(module))
    fsms = extract_fsm(module)

    seq_always = any(isinstance(it, A.Always) and not it.sens.star
                     for it in module.items)
    has_nba = any(isinstance(s, A.Assign) and not s.blocking for s in stmts)
    verification = "sequential" if (seq_always or has_nba) else "combinational"

    arrays = {n.name: n for n in module.nets if n.depth is not None}
    addressed = {e.base.name for e in exprs
                 if isinstance(e, A.Index) and isinstance(e.base, A.Ident)
                 and e.base.name in arrays}

    patterns = set()
    if any(isinstance(e, A.Binary) and e.op in _ARITH for e in exprs):
        patterns.add("datapath")
    if any(isinstance(e, A.Ternary) for e in exprs) or \
            any(isinstance(s, A.Case) for s in stmts):
        patterns.add("mux")
    if fsms:
        patterns.add("fsm")
    if addressed:
        patterns.add("memory")
    if not patterns:
        patterns.add("basic")

    hints = set()
    graph = build_def_use(module)
    if graph.unread:
        hints.add("dead-code-elimination")

    # nets tied to a literal and read elsewhere, or foldable const operators
    const_nets = {it.lhs.name for it in module.items
                  if isinstance(it, A.ContAssign) and
                  isinstance(it.lhs, A.Ident) and _is_const(it.rhs, params)}
    folds = any(isinstance(e, (A.Binary, A.Unary)) and
                all(_is_const(x, params) for x in
                    ((e.left, e.right) if isinstance(e, A.Binary)
                     else (e.operand,)))
                for e in exprs)
    if folds or any(n in graph.uses for n in const_nets):
        hints.add("constant-propagation")

    counts: dict[tuple, int] = {}
    for e in exprs:
        if isinstance(e, (A.Binary, A.Ternary)):
            k = _expr_key(e)
            counts[k] = counts.get(k, 0) + 1
    if any(v >= 2 for v in counts.values()):
        hints.add("subexpression-elimination")

    const_mults: dict[str, set[int]] = {}
    for e in exprs:
        if isinstance(e, A.Binary) and e.op in ("*", "/", "%"):
            for var, const in ((e.left, e.right), (e.right, e.left)):
                if isinstance(var, A.Ident) and _is_const(const, params):
                    hints.add("strength-reduction")
                    if e.op == "*":
                        v = (const.value if isinstance(const, A.Literal)
                             else params[const.name])
                        const_mults.setdefault(var.name, set()).add(v)
    if any(len(v) >= 2 for v in const_mults.values()):
        hints.add("multiple-constant-multiplication")

    for e in exprs:
        if not isinstance(e, A.Ternary):
            continue
        if _expr_key(e.then) == _expr_key(e.other):
            hints.add("mux-reduction")
        elif (isinstance(e.then, A.Binary) and isinstance(e.other, A.Binary)
              and e.then.op == e.other.op and
              (_expr_key(e.then.left) == _expr_key(e.other.left) or
               _expr_key(e.then.right) == _expr_key(e.other.right))):
            hints.add("mux-reduction")

    for s in stmts:
        if isinstance(s, A.If):
            n, _ = _eq_chain_len(s, params)
            if n >= 3:
                hints.add("mux-restructuring")
        if isinstance(s, A.Case):
            labeled = sum(1 for arm in s.arms if arm.labels is not None)
            if labeled > 8:
                hints.add("mux-restructuring")

    for s in stmts:
        if not (isinstance(s, A.If) and s.other is not None):
            continue
        a = _branch_assign_ops(s.then)
        b = _branch_assign_ops(s.other)
        shared = {n for n in a if n in b and a[n] == b[n] and
                  a[n] in ("+", "-", "*")}
        if shared:
            hints.add("resource-sharing")

    if fsms:
        hints.add("state-minimization")
        hints.add("state-assignment")

    advisories = []
    for name in sorted(addressed):
        net = arrays[name]
        advisories.append(
            f"memory {name} ({net.depth} x {net.width} bits): consider "
            f"sharing one physical array across exclusive accesses, or "
            f"folding to a narrower array with packed words, if the "
            f"schedule allows")

    return AnalysisResult(
        optimization_patterns=[p for p in PATTERN_ORDER if p in patterns],
        sub_hints=[h for h in HINT_ORDER if h in hints],
        verification_pattern=verification,
        fsm_extractions=fsms,
        advisories=advisories,
    )
