"""Strength reduction and multiple-constant-multiplication sharing."""

from __future__ import annotations

import copy
from dataclasses import dataclass

from ..errors import NotApplicable
from ..frontend import ast as A
from ..frontend.width import symbol_table
from .base import (FreshNames, add_wire, blocking_assigned_names,
                   clone_module, eval_width_map, lit, map_read_exprs,
                   reannotate)


@dataclass(frozen=True)
class AOperation:
    """Fundamental add/shift step: |2^l1*u + (-1)^s * 2^l2*v| >> r."""

    l1: int = 0
    l2: int = 0
    r: int = 0
    s: int = 0
    u: int = 1
    v: int = 1

    def value(self) -> int:
        t = (self.u << self.l1) + ((-1) ** self.s) * (self.v << self.l2)
        return abs(t) >> self.r


# beyond this many set bits the adder chain costs more than the multiply
_MAX_SHIFT_TERMS = 4


def _is_pow2(c: int) -> bool:
    return c > 0 and c & (c - 1) == 0


def _shift_terms(c: int) -> list[int]:
    """Shift amounts whose powers of two sum to c (binary decomposition)."""
    return [i for i in range(c.bit_length()) if (c >> i) & 1]


def _const_mul(e: A.Expr) -> tuple[A.Expr, A.Literal] | None:
    if not isinstance(e, A.Binary) or e.op != "*":
        return None
    if isinstance(e.right, A.Literal):
        return e.left, e.right
    if isinstance(e.left, A.Literal):
        return e.right, e.left
    return None


def _mcm_candidates(module: A.ModuleAst) -> dict[str, set[int]]:
    """Variables multiplied by two or more distinct non-power constants."""
    per_var: dict[str, set[int]] = {}
    for e in A.module_exprs(module):
        cm = _const_mul(e)
        if cm is None:
            continue
        x, c = cm
        if isinstance(x, A.Ident) and c.value > 1 and not _is_pow2(c.value):
            per_var.setdefault(x.name, set()).add(c.value)
    return {k: v for k, v in per_var.items() if len(v) >= 2}


def _shift_of(x: A.Expr, amount: int) -> A.Expr:
    if amount == 0:
        return x
    node = A.Binary("<<", x, lit(amount, max(1, amount.bit_length())))
    node.width = x.width
    return node


def _shift_add(x: A.Ident, c: int) -> A.Expr:
    terms = _shift_terms(c)
    expr = _shift_of(copy.deepcopy(x), terms[0])
    for amount in terms[1:]:
        node = A.Binary("+", expr, _shift_of(copy.deepcopy(x), amount))
        node.width = x.width
        expr = node
    return expr


def _all_ones(width: int) -> A.Expr:
    node = A.Unary("~", lit(0, width))
    node.width = width
    return node


def reduce_strength(module: A.ModuleAst) -> A.ModuleAst | None:
    """Replace expensive operators with cheaper width-exact equivalents."""
    before = A.structural_hash(module)
    out = clone_module(module)
    deferred = _mcm_candidates(out)

    def simplify(e: A.Expr) -> A.Expr:
        if isinstance(e, A.Unary):
            if e.op == "~" and isinstance(e.operand, A.Unary) \
                    and e.operand.op == "~":
                return e.operand.operand
            return e
        if not isinstance(e, A.Binary):
            return e
        op, left, right = e.op, e.left, e.right
        if op == "*":
            cm = _const_mul(e)
            if cm is None:
                return e
            x, c = cm
            if c.value == 0:
                return lit(0, e.width)
            if x.width < c.width:
                return e
            if c.value == 1:
                return x
            if _is_pow2(c.value):
                return _shift_of(x, c.value.bit_length() - 1)
            if isinstance(x, A.Ident) and x.name not in deferred \
                    and len(_shift_terms(c.value)) <= _MAX_SHIFT_TERMS:
                return _shift_add(x, c.value)
            return e
        if op == "/" and isinstance(right, A.Literal):
            if left.width < right.width:
                return e
            if right.value == 1:
                return left
            if _is_pow2(right.value):
                node = A.Binary(">>", left,
                                lit(right.value.bit_length() - 1, right.width))
                node.width = left.width
                return node
            return e
        if op == "%" and isinstance(right, A.Literal):
            if right.value == 1:
                return lit(0, e.width)
            if _is_pow2(right.value):
                node = A.Binary("&", left, lit(right.value - 1, right.width))
                node.width = e.width
                return node
            return e
        if op in ("<<", ">>") and isinstance(right, A.Literal) \
                and right.value == 0:
            return left
        if op == "+":
            if isinstance(right, A.Literal) and right.value == 0 \
                    and left.width == e.width:
                return left
            if isinstance(left, A.Literal) and left.value == 0 \
                    and right.width == e.width:
                return right
            return e
        if op == "-":
            if isinstance(right, A.Literal) and right.value == 0 \
                    and left.width == e.width:
                return left
            if A.structural_eq(left, right):
                return lit(0, e.width)
            return e
        if op == "|":
            if isinstance(right, A.Literal) and right.value == 0 \
                    and left.width == e.width:
                return left
            if isinstance(left, A.Literal) and left.value == 0 \
                    and right.width == e.width:
                return right
            if A.structural_eq(left, right):
                return left
            if _complement_pair(left, right):
                return _all_ones(e.width)
            return e
        if op == "^":
            if isinstance(right, A.Literal) and right.value == 0 \
                    and left.width == e.width:
                return left
            if isinstance(left, A.Literal) and left.value == 0 \
                    and right.width == e.width:
                return right
            if A.structural_eq(left, right):
                return lit(0, e.width)
            if _complement_pair(left, right):
                return _all_ones(e.width)
            return e
        if op == "&":
            if (isinstance(right, A.Literal) and right.value == 0) \
                    or (isinstance(left, A.Literal) and left.value == 0):
                return lit(0, e.width)
            if A.structural_eq(left, right):
                return left
            if _complement_pair(left, right):
                return lit(0, e.width)
            for const, other in ((right, left), (left, right)):
                if isinstance(const, A.Literal) \
                        and const.width == other.width \
                        and const.value == (1 << other.width) - 1:
                    return other
            return e
        return e

    map_read_exprs(out, simplify)
    _reduce_whole_rhs(out, deferred)
    reannotate(out)
    if A.structural_hash(out) == before:
        return None
    return out


def _walk_assigns(st: A.Stmt, visit) -> None:
    if isinstance(st, A.Begin):
        for s in st.stmts:
            _walk_assigns(s, visit)
    elif isinstance(st, A.If):
        _walk_assigns(st.then, visit)
        if st.other is not None:
            _walk_assigns(st.other, visit)
    elif isinstance(st, A.Case):
        for arm in st.arms:
            _walk_assigns(arm.body, visit)
    elif isinstance(st, A.Assign):
        visit(st)


def _reduce_whole_rhs(out: A.ModuleAst, deferred: dict[str, set[int]]) -> None:
    """Shift forms for multiplies the expression pass had to leave alone.

    Mid-expression, ``x * c`` with a constant wider than x cannot shrink
    (enclosing division or shift contexts would wrap differently).  When
    the product is the entire right side of an assignment to a plain
    net, the statement masks the value to the target's width L anyway,
    so a shift-add rebuilt at width L is exact; operands narrower than L
    go through a zero-extending wire first.
    """
    syms = symbol_table(out)
    fresh = FreshNames(out, "sr")
    blocked = blocking_assigned_names(out)
    pending: list[A.ContAssign] = []

    def widen(x: A.Expr, width: int) -> A.Ident | None:
        if any(isinstance(n, A.Ident) and n.name in blocked
               for n in A.walk_exprs(x)):
            return None  # a settled wire cannot see mid-block values
        name = fresh.take()
        add_wire(out, name, width)
        pending.append(A.ContAssign(A.Ident(name), copy.deepcopy(x)))
        src = A.Ident(name)
        src.width = width
        return src

    def rebuild(rhs: A.Expr, lhs_width: int) -> A.Expr | None:
        cm = _const_mul(rhs)
        if cm is not None:
            x, c = cm
            if c.value == 0 or x.width >= c.width:
                return None  # constant folding / expression pass territory
            if not _is_pow2(c.value):
                if isinstance(x, A.Ident) and x.name in deferred:
                    return None
                if len(_shift_terms(c.value)) > _MAX_SHIFT_TERMS:
                    return None
            src = x if x.width == lhs_width and isinstance(x, A.Ident) \
                else widen(x, lhs_width)
            if src is None:
                return None
            if _is_pow2(c.value):
                return _shift_of(src, c.value.bit_length() - 1)
            return _shift_add(src, c.value)
        if isinstance(rhs, A.Binary) and rhs.op == "/" \
                and isinstance(rhs.right, A.Literal) \
                and isinstance(rhs.left, A.Ident) \
                and _is_pow2(rhs.right.value) and rhs.right.value > 1 \
                and rhs.left.width < rhs.right.width \
                and rhs.left.width <= lhs_width:
            # quotient fits the operand, which fits the target
            node = A.Binary(">>", copy.deepcopy(rhs.left),
                            lit(rhs.right.value.bit_length() - 1,
                                rhs.right.width))
            node.width = rhs.left.width
            return node
        return None

    def visit(st: A.Assign) -> None:
        if not isinstance(st.lhs, A.Ident) or st.lhs.name not in syms:
            return
        new = rebuild(st.rhs, syms[st.lhs.name].width)
        if new is not None:
            st.rhs = new

    for item in out.items:
        if isinstance(item, A.ContAssign) and isinstance(item.lhs, A.Ident) \
                and item.lhs.name in syms:
            new = rebuild(item.rhs, syms[item.lhs.name].width)
            if new is not None:
                item.rhs = new
        elif isinstance(item, A.Always):
            _walk_assigns(item.body, visit)
    out.items.extend(pending)


def _complement_pair(a: A.Expr, b: A.Expr) -> bool:
    if isinstance(b, A.Unary) and b.op == "~" and A.structural_eq(a, b.operand):
        return True
    if isinstance(a, A.Unary) and a.op == "~" and A.structural_eq(b, a.operand):
        return True
    return False


def optimize_mcm(module: A.ModuleAst) -> A.ModuleAst:
    """Share shifted copies of one variable across its constant multiplies.

    The constants are decomposed into powers of two, one wire is emitted per
    distinct shift amount, and each multiply becomes a chain of adds over
    the shared wires.
    """
    candidates = _mcm_candidates(module)
    if not candidates:
        raise NotApplicable("no variable is multiplied by two or more "
                            "distinct non-power-of-two constants")
    var = sorted(candidates, key=lambda v: (-len(candidates[v]), v))[0]

    out = clone_module(module)
    widths = eval_width_map(out)
    fresh = FreshNames(out, "mcm")
    syms_width = None
    for p in out.ports:
        if p.name == var:
            syms_width = p.width
    for n in out.nets:
        if n.name == var:
            syms_width = n.width
    if syms_width is None:
        raise NotApplicable(f"{var} has no accessible declaration")

    sites: list[A.Binary] = []
    for e in A.module_exprs(out):
        cm = _const_mul(e)
        if cm is None:
            continue
        x, c = cm
        if isinstance(x, A.Ident) and x.name == var and c.value >= 2:
            sites.append(e)
    amounts = sorted({i for s in sites
                      for i in _shift_terms(_const_mul(s)[1].value)})
    shared_w = syms_width + max(amounts)
    wire_of: dict[int, str] = {}
    new_items: list = []
    for amount in amounts:
        name = fresh.take()
        wire_of[amount] = name
        add_wire(out, name, shared_w)
        src = A.Ident(var)
        src.width = syms_width
        shift = A.Binary("<<", src, lit(amount, max(1, amount.bit_length())))
        shift.width = syms_width
        new_items.append(A.ContAssign(A.Ident(name), shift))

    def sum_of(c: int) -> A.Expr:
        terms = _shift_terms(c)
        expr: A.Expr = A.Ident(wire_of[terms[0]])
        expr.width = shared_w
        for amount in terms[1:]:
            rd = A.Ident(wire_of[amount])
            rd.width = shared_w
            node = A.Binary("+", expr, rd)
            node.width = shared_w
            expr = node
        return expr

    site_ids = {id(s) for s in sites}
    replaced: set[int] = set()

    def top_replace(holder, attr) -> None:
        rhs = getattr(holder, attr)
        if id(rhs) in site_ids:
            setattr(holder, attr, sum_of(_const_mul(rhs)[1].value))
            replaced.add(id(rhs))

    def top_stmt(st: A.Stmt) -> None:
        if isinstance(st, A.Assign):
            top_replace(st, "rhs")
        elif isinstance(st, A.If):
            top_stmt(st.then)
            if st.other is not None:
                top_stmt(st.other)
        elif isinstance(st, A.Case):
            for arm in st.arms:
                top_stmt(arm.body)
        elif isinstance(st, A.Begin):
            for s in st.stmts:
                top_stmt(s)

    for item in out.items:
        if isinstance(item, A.ContAssign):
            top_replace(item, "rhs")
        elif isinstance(item, A.Always):
            top_stmt(item.body)

    nested = {id(s): s for s in sites if id(s) not in replaced}
    if nested:
        site_wire: dict[int, str] = {}
        for sid, node in nested.items():
            name = fresh.take()
            site_wire[sid] = name
            add_wire(out, name, widths[sid])
            new_items.append(
                A.ContAssign(A.Ident(name), sum_of(_const_mul(node)[1].value)))

        def swap(e: A.Expr) -> A.Expr:
            if id(e) in site_wire:
                rd = A.Ident(site_wire[id(e)])
                rd.width = widths[id(e)]
                return rd
            return e

        map_read_exprs(out, swap)

    out.items.extend(new_items)
    reannotate(out)
    return out
