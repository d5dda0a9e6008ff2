"""Shared plumbing for rewrite rules: patches, fresh names, declarations."""

from __future__ import annotations

import copy
from dataclasses import dataclass

from .. import cost
from ..errors import RewriteError
from ..frontend import ast as A
from ..frontend.width import annotate_module, symbol_table

RULE_IDS = (
    "const-fold",
    "const-prop",
    "copy-prop",
    "cse",
    "dce",
    "strength-reduce",
    "mcm",
    "mux-reduce",
    "mux-restructure",
    "resource-share",
    "fsm-minimize",
    "fsm-assign",
)


@dataclass
class RewritePatch:
    """One applied rewrite: which rule, on what, with what predicted effect."""

    rule_id: str
    target_module: str
    before_hash: str
    after_hash: str
    new_module: A.ModuleAst
    predicted_delta: dict[str, float]

    def to_json(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "module": self.target_module,
            "before_hash": self.before_hash,
            "after_hash": self.after_hash,
            "delta": self.predicted_delta,
        }


def used_names(module: A.ModuleAst) -> set[str]:
    names = {p.name for p in module.ports}
    names |= {n.name for n in module.nets}
    names |= {p.name for p in module.params}
    for item in module.items:
        if isinstance(item, A.Instance):
            names.add(item.name)
    for e in A.module_exprs(module):
        if isinstance(e, A.Ident):
            names.add(e.name)
    return names


class FreshNames:
    """Collision-checked name supply for nets introduced by a rule."""

    def __init__(self, module: A.ModuleAst, tag: str):
        self._used = used_names(module)
        self._tag = tag
        self._n = 0

    def take(self) -> str:
        while True:
            name = f"_rw{self._tag}{self._n}"
            self._n += 1
            if name not in self._used:
                self._used.add(name)
                return name


def clone_module(module: A.ModuleAst) -> A.ModuleAst:
    return copy.deepcopy(module)


def reannotate(module: A.ModuleAst) -> A.ModuleAst:
    annotate_module(module, f"<rewrite:{module.name}>")
    return module


def _port_shape(module: A.ModuleAst) -> list[tuple[str, str, int]]:
    return [(p.name, p.direction, p.width) for p in module.ports]


def make_patch(original: A.ModuleAst, new_module: A.ModuleAst,
               rule_id: str) -> RewritePatch:
    """Package a rewritten module, enforcing the patch invariants."""
    if _port_shape(original) != _port_shape(new_module):
        raise RewriteError(
            f"{rule_id} changed the port list of {original.name}")
    before = A.structural_hash(original)
    after = A.structural_hash(new_module)
    if before == after:
        raise RewriteError(
            f"{rule_id} produced a structurally identical module")
    delta = cost.estimate(new_module).delta(cost.estimate(original))
    return RewritePatch(
        rule_id=rule_id,
        target_module=original.name,
        before_hash=before,
        after_hash=after,
        new_module=new_module,
        predicted_delta=delta,
    )


def add_wire(module: A.ModuleAst, name: str, width: int) -> None:
    module.nets.append(A.Net(name, "wire", width=width))


def blocking_assigned_names(module: A.ModuleAst) -> set[str]:
    """Targets of ``=`` inside always blocks; their readers are
    position-dependent and must not be hoisted to continuous assigns."""
    names: set[str] = set()
    for item in module.items:
        if not isinstance(item, A.Always):
            continue
        for node in A.walk(item.body):
            if isinstance(node, A.Assign) and node.blocking:
                lhs = node.lhs
                while isinstance(lhs, (A.Index, A.PartSelect)):
                    lhs = lhs.base
                if isinstance(lhs, A.Ident):
                    names.add(lhs.name)
    return names


def net_width(module: A.ModuleAst, name: str) -> int:
    for sym_name, sym in symbol_table(module).items():
        if sym_name == name:
            return sym.width
    return 1


def lit(value: int, width: int) -> A.Literal:
    node = A.Literal(value & ((1 << width) - 1), width)
    node.width = width
    return node


_CMP = {"<", "<=", ">", ">=", "==", "!="}
_BOOL = {"&&", "||"}


def _expr_eval_widths(e: A.Expr, w: int, out: dict[int, int]) -> None:
    out[id(e)] = w
    if isinstance(e, A.Unary):
        cw = w if e.op in ("~", "-") else e.operand.width
        _expr_eval_widths(e.operand, cw, out)
    elif isinstance(e, A.Binary):
        if e.op in ("<<", ">>"):
            _expr_eval_widths(e.left, w, out)
            _expr_eval_widths(e.right, e.right.width, out)
        elif e.op in _CMP:
            wc = max(e.left.width, e.right.width)
            _expr_eval_widths(e.left, wc, out)
            _expr_eval_widths(e.right, wc, out)
        elif e.op in _BOOL:
            _expr_eval_widths(e.left, e.left.width, out)
            _expr_eval_widths(e.right, e.right.width, out)
        else:
            _expr_eval_widths(e.left, w, out)
            _expr_eval_widths(e.right, w, out)
    elif isinstance(e, A.Ternary):
        _expr_eval_widths(e.cond, e.cond.width, out)
        _expr_eval_widths(e.then, w, out)
        _expr_eval_widths(e.other, w, out)
    elif isinstance(e, A.Concat):
        for p in e.parts:
            _expr_eval_widths(p, p.width, out)
    elif isinstance(e, A.Repl):
        _expr_eval_widths(e.part, e.part.width, out)
    elif isinstance(e, A.Index):
        _expr_eval_widths(e.index, e.index.width, out)


def _stmt_eval_widths(st: A.Stmt, syms, out: dict[int, int]) -> None:
    if isinstance(st, A.Assign):
        if isinstance(st.lhs, A.Index):
            _expr_eval_widths(st.lhs.index, st.lhs.index.width, out)
            sym = syms[st.lhs.base.name]
            if sym.depth is None:
                _expr_eval_widths(st.rhs, st.rhs.width, out)
                return
            _expr_eval_widths(st.rhs, max(sym.width, st.rhs.width), out)
            return
        if isinstance(st.lhs, A.PartSelect):
            fw = st.lhs.msb - st.lhs.lsb + 1
            _expr_eval_widths(st.rhs, max(fw, st.rhs.width), out)
            return
        w = max(syms[st.lhs.name].width, st.rhs.width)
        _expr_eval_widths(st.rhs, w, out)
    elif isinstance(st, A.If):
        _expr_eval_widths(st.cond, st.cond.width, out)
        _stmt_eval_widths(st.then, syms, out)
        if st.other is not None:
            _stmt_eval_widths(st.other, syms, out)
    elif isinstance(st, A.Case):
        wc = st.subject.width
        for arm in st.arms:
            for lab in arm.labels or []:
                wc = max(wc, lab.width)
        _expr_eval_widths(st.subject, wc, out)
        for arm in st.arms:
            for lab in arm.labels or []:
                _expr_eval_widths(lab, wc, out)
            _stmt_eval_widths(arm.body, syms, out)
    elif isinstance(st, A.Begin):
        for s in st.stmts:
            _stmt_eval_widths(s, syms, out)


def eval_width_map(module: A.ModuleAst) -> dict[int, int]:
    """id(expr) -> the width the simulator evaluates that node at."""
    syms = symbol_table(module)
    out: dict[int, int] = {}
    for item in module.items:
        if isinstance(item, A.ContAssign):
            _stmt_eval_widths(A.Assign(item.lhs, item.rhs), syms, out)
        elif isinstance(item, A.Always):
            _stmt_eval_widths(item.body, syms, out)
    return out


def map_read_exprs(module: A.ModuleAst, fn) -> None:
    """Apply fn post-order to every read-position expression in module."""

    def rec(e: A.Expr) -> A.Expr:
        if isinstance(e, A.Unary):
            e.operand = rec(e.operand)
        elif isinstance(e, A.Binary):
            e.left = rec(e.left)
            e.right = rec(e.right)
        elif isinstance(e, A.Ternary):
            e.cond = rec(e.cond)
            e.then = rec(e.then)
            e.other = rec(e.other)
        elif isinstance(e, A.Concat):
            e.parts = [rec(p) for p in e.parts]
        elif isinstance(e, A.Repl):
            e.part = rec(e.part)
        elif isinstance(e, A.Index):
            e.index = rec(e.index)
        return fn(e)

    def stmt(st: A.Stmt) -> None:
        if isinstance(st, A.Assign):
            if isinstance(st.lhs, A.Index):
                st.lhs.index = rec(st.lhs.index)
            st.rhs = rec(st.rhs)
        elif isinstance(st, A.If):
            st.cond = rec(st.cond)
            stmt(st.then)
            if st.other is not None:
                stmt(st.other)
        elif isinstance(st, A.Case):
            st.subject = rec(st.subject)
            for arm in st.arms:
                if arm.labels is not None:
                    arm.labels = [rec(lab) for lab in arm.labels]
                stmt(arm.body)
        elif isinstance(st, A.Begin):
            for s in st.stmts:
                stmt(s)

    for item in module.items:
        if isinstance(item, A.ContAssign):
            if isinstance(item.lhs, A.Index):
                item.lhs.index = rec(item.lhs.index)
            item.rhs = rec(item.rhs)
        elif isinstance(item, A.Always):
            stmt(item.body)
