"""Mux simplification, case restructuring, and operator sharing."""

from __future__ import annotations

import copy

from ..frontend import ast as A
from .base import clone_module, lit, map_read_exprs, reannotate

_FACTOR_OPS = {"+", "-", "*", "/", "%", "&", "|", "^", "<<", ">>"}
_COMMUTATIVE = {"+", "*", "&", "|", "^"}


def _ternary(cond: A.Expr, then: A.Expr, other: A.Expr) -> A.Ternary:
    node = A.Ternary(cond, then, other)
    node.width = max(then.width, other.width)
    return node


def reduce_mux(module: A.ModuleAst) -> A.ModuleAst | None:
    """Collapse redundant selectors and factor shared mux operands."""
    before = A.structural_hash(module)
    out = clone_module(module)

    def simplify(e: A.Expr) -> A.Expr:
        if not isinstance(e, A.Ternary):
            return e
        if A.structural_eq(e.then, e.other) and e.then.width == e.width:
            return e.then
        # sel ? (sel ? a : b) : c  keeps only the reachable inner arm
        if isinstance(e.then, A.Ternary) and A.structural_eq(e.cond, e.then.cond):
            if max(e.then.then.width, e.other.width) == e.width:
                return _ternary(e.cond, e.then.then, e.other)
        if isinstance(e.other, A.Ternary) and A.structural_eq(e.cond, e.other.cond):
            if max(e.then.width, e.other.other.width) == e.width:
                return _ternary(e.cond, e.then, e.other.other)
        t, o = e.then, e.other
        if isinstance(t, A.Binary) and isinstance(o, A.Binary) and t.op == o.op \
                and t.op in _FACTOR_OPS:
            pairs = [((t.right, o.right), (t.left, o.left), "right"),
                     ((t.left, o.left), (t.right, o.right), "left")]
            for (c1, c2), (a, b), side in pairs:
                if not A.structural_eq(c1, c2):
                    continue
                inner = _ternary(e.cond, a, b)
                node = A.Binary(t.op, inner, c1) if side == "right" \
                    else A.Binary(t.op, c1, inner)
                node.width = inner.width if t.op in ("<<", ">>") and side == "right" \
                    else (c1.width if t.op in ("<<", ">>")
                          else max(inner.width, c1.width))
                if node.width == e.width:
                    return node
            if t.op in _COMMUTATIVE:
                for c1, c2, a, b in ((t.right, o.left, t.left, o.right),
                                     (t.left, o.right, t.right, o.left)):
                    if not A.structural_eq(c1, c2):
                        continue
                    inner = _ternary(e.cond, a, b)
                    node = A.Binary(t.op, inner, c1)
                    node.width = max(inner.width, c1.width)
                    if node.width == e.width:
                        return node
        return e

    map_read_exprs(out, simplify)
    reannotate(out)
    if A.structural_hash(out) == before:
        return None
    return out


def _eq_link(cond: A.Expr) -> tuple[A.Ident, A.Literal] | None:
    if not isinstance(cond, A.Binary) or cond.op != "==":
        return None
    if isinstance(cond.left, A.Ident) and isinstance(cond.right, A.Literal):
        return cond.left, cond.right
    if isinstance(cond.right, A.Ident) and isinstance(cond.left, A.Literal):
        return cond.right, cond.left
    return None


def _chain_to_case(st: A.If) -> A.Case | None:
    first = _eq_link(st.cond)
    if first is None:
        return None
    subject = first[0]
    arms: list[A.CaseArm] = []
    cur: A.Stmt | None = st
    links = 0
    while isinstance(cur, A.If):
        link = _eq_link(cur.cond)
        if link is None or link[0].name != subject.name:
            break
        arms.append(A.CaseArm([link[1]], cur.then))
        links += 1
        cur = cur.other
    if links < 2:
        return None
    if cur is not None:
        arms.append(A.CaseArm(None, cur))
    subj = A.Ident(subject.name)
    subj.width = subject.width
    return A.Case("case", subj, arms)


def _split_case(st: A.Case, threshold: int) -> A.Case | None:
    if st.kind != "case" or not isinstance(st.subject, A.Ident):
        return None
    labeled = [a for a in st.arms if a.labels is not None]
    if len(labeled) <= threshold:
        return None
    ws = st.subject.width
    if ws < 2:
        return None
    default = next((a for a in st.arms if a.labels is None), None)
    entries: list[tuple[int, A.CaseArm]] = []
    for arm in labeled:
        for lab in arm.labels:
            if not isinstance(lab, A.Literal) or lab.value >= (1 << ws):
                return None
            entries.append((lab.value, arm))
    lo = ws // 2
    hi = ws - lo
    groups: dict[int, list[tuple[int, A.CaseArm]]] = {}
    for value, arm in entries:
        groups.setdefault(value >> lo, []).append((value, arm))

    def sel(msb: int, lsb: int) -> A.PartSelect:
        base = A.Ident(st.subject.name)
        base.width = ws
        node = A.PartSelect(base, msb, lsb)
        node.width = msb - lsb + 1
        return node

    outer_arms = []
    for g in sorted(groups):
        inner_arms = [A.CaseArm([lit(v & ((1 << lo) - 1), lo)],
                                copy.deepcopy(arm.body))
                      for v, arm in groups[g]]
        if default is not None:
            inner_arms.append(A.CaseArm(None, copy.deepcopy(default.body)))
        outer_arms.append(
            A.CaseArm([lit(g, hi)],
                      A.Case("case", sel(lo - 1, 0), inner_arms)))
    if default is not None:
        outer_arms.append(A.CaseArm(None, copy.deepcopy(default.body)))
    return A.Case("case", sel(ws - 1, lo), outer_arms)


def restructure_mux(module: A.ModuleAst,
                    case_threshold: int = 8) -> A.ModuleAst | None:
    """Turn equality chains into cases and split oversized cases in two."""
    before = A.structural_hash(module)
    out = clone_module(module)

    def walk(st: A.Stmt) -> A.Stmt:
        if isinstance(st, A.If):
            converted = _chain_to_case(st)
            if converted is not None:
                return walk(converted)
            st.then = walk(st.then)
            if st.other is not None:
                st.other = walk(st.other)
            return st
        if isinstance(st, A.Case):
            for arm in st.arms:
                arm.body = walk(arm.body)
            split = _split_case(st, case_threshold)
            return split if split is not None else st
        if isinstance(st, A.Begin):
            st.stmts = [walk(s) for s in st.stmts]
            return st
        return st

    for item in out.items:
        if isinstance(item, A.Always):
            item.body = walk(item.body)
    reannotate(out)
    if A.structural_hash(out) == before:
        return None
    return out


def _single_assign(st: A.Stmt) -> A.Assign | None:
    stmts = st.stmts if isinstance(st, A.Begin) else [st]
    if len(stmts) == 1 and isinstance(stmts[0], A.Assign):
        return stmts[0]
    return None


_SHARE_OPS = {"+", "-", "*"}


def _share_if(st: A.If) -> A.Assign | None:
    if st.other is None:
        return None
    a1 = _single_assign(st.then)
    a2 = _single_assign(st.other)
    if a1 is None or a2 is None or a1.blocking != a2.blocking:
        return None
    if not A.structural_eq(a1.lhs, a2.lhs):
        return None
    r1, r2 = a1.rhs, a2.rhs
    if not (isinstance(r1, A.Binary) and isinstance(r2, A.Binary)):
        return None
    if r1.op != r2.op or r1.op not in _SHARE_OPS:
        return None
    if r1.left.width != r2.left.width or r1.right.width != r2.right.width:
        return None
    left = _ternary(copy.deepcopy(st.cond), r1.left, r2.left)
    right = _ternary(copy.deepcopy(st.cond), r1.right, r2.right)
    node = A.Binary(r1.op, left, right)
    node.width = max(left.width, right.width)
    return A.Assign(a1.lhs, node, blocking=a1.blocking)


def _label_cond(subject: A.Expr, labels: list[A.Expr]) -> A.Expr:
    conds = []
    for lab in labels:
        c = A.Binary("==", copy.deepcopy(subject), copy.deepcopy(lab))
        c.width = 1
        conds.append(c)
    cond = conds[0]
    for extra in conds[1:]:
        cond = A.Binary("||", cond, extra)
        cond.width = 1
    return cond


def _share_case(st: A.Case) -> A.Assign | None:
    if st.kind != "case" or len(st.arms) < 2:
        return None
    assigns = []
    for arm in st.arms:
        a = _single_assign(arm.body)
        if a is None:
            return None
        assigns.append(a)
    first = assigns[0]
    if not isinstance(first.rhs, A.Binary) or first.rhs.op not in _SHARE_OPS:
        return None
    op = first.rhs.op
    for a in assigns:
        if a.blocking != first.blocking:
            return None
        if not A.structural_eq(a.lhs, first.lhs):
            return None
        if not isinstance(a.rhs, A.Binary) or a.rhs.op != op:
            return None
        if a.rhs.left.width != first.rhs.left.width \
                or a.rhs.right.width != first.rhs.right.width:
            return None

    # a value escaping every arm would leave the target holding, which a
    # plain assignment cannot reproduce; require a default or full coverage
    default_idx = next((i for i, arm in enumerate(st.arms)
                        if arm.labels is None), None)
    if default_idx is None:
        ws = st.subject.width
        if ws > 12:
            return None
        values = set()
        for arm in st.arms:
            for lab in arm.labels:
                if not isinstance(lab, A.Literal):
                    return None
                values.add(lab.value)
        if not all(v in values for v in range(1 << ws)):
            return None

    if default_idx is not None:
        fallback = assigns[default_idx]
        rest = [(arm, a) for arm, a in zip(st.arms, assigns)
                if arm.labels is not None]
    else:
        fallback = assigns[-1]
        rest = list(zip(st.arms, assigns))[:-1]
    left = fallback.rhs.left
    right = fallback.rhs.right
    for arm, a in reversed(rest):
        left = _ternary(_label_cond(st.subject, arm.labels), a.rhs.left, left)
        right = _ternary(_label_cond(st.subject, arm.labels), a.rhs.right, right)
    node = A.Binary(op, left, right)
    node.width = max(left.width, right.width)
    return A.Assign(first.lhs, node, blocking=first.blocking)


def share_resources(module: A.ModuleAst) -> A.ModuleAst | None:
    """Merge per-branch copies of one arithmetic operator behind muxes."""
    before = A.structural_hash(module)
    out = clone_module(module)

    def walk(st: A.Stmt) -> A.Stmt:
        if isinstance(st, A.If):
            shared = _share_if(st)
            if shared is not None:
                return shared
            st.then = walk(st.then)
            if st.other is not None:
                st.other = walk(st.other)
            return st
        if isinstance(st, A.Case):
            shared = _share_case(st)
            if shared is not None:
                return shared
            for arm in st.arms:
                arm.body = walk(arm.body)
            return st
        if isinstance(st, A.Begin):
            st.stmts = [walk(s) for s in st.stmts]
            return st
        return st

    for item in out.items:
        if isinstance(item, A.Always):
            item.body = walk(item.body)
    reannotate(out)
    if A.structural_hash(out) == before:
        return None
    return out
