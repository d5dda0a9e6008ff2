"""Dead code elimination: branch pruning plus liveness mark-sweep."""

from __future__ import annotations

from ..frontend import ast as A
from .base import clone_module, reannotate
from .fold import _fold_module, _param_env


def _expr_reads(e: A.Expr | None, out: set[str]) -> None:
    if e is None:
        return
    for node in A.walk_exprs(e):
        if isinstance(node, A.Ident):
            out.add(node.name)


def _target_name(lhs: A.Expr) -> str | None:
    base = lhs.base if isinstance(lhs, (A.Index, A.PartSelect)) else lhs
    return base.name if isinstance(base, A.Ident) else None


def _mark_stmt(st: A.Stmt, guards: list[A.Expr], live: set[str],
               grew: list[bool]) -> None:
    if isinstance(st, A.Assign):
        t = _target_name(st.lhs)
        if t is None or t not in live:
            return
        reads: set[str] = set()
        st_reads = [st.rhs]
        if isinstance(st.lhs, A.Index):
            st_reads.append(st.lhs.index)
        for e in st_reads + guards:
            _expr_reads(e, reads)
        if not reads <= live:
            live |= reads
            grew[0] = True
    elif isinstance(st, A.If):
        _mark_stmt(st.then, guards + [st.cond], live, grew)
        if st.other is not None:
            _mark_stmt(st.other, guards + [st.cond], live, grew)
    elif isinstance(st, A.Case):
        for arm in st.arms:
            gs = guards + [st.subject] + list(arm.labels or [])
            _mark_stmt(arm.body, gs, live, grew)
    elif isinstance(st, A.Begin):
        for s in st.stmts:
            _mark_stmt(s, guards, live, grew)


def _sweep_stmt(st: A.Stmt, live: set[str]) -> A.Stmt | None:
    if isinstance(st, A.Assign):
        t = _target_name(st.lhs)
        return st if t in live else None
    if isinstance(st, A.If):
        then = _sweep_stmt(st.then, live)
        other = _sweep_stmt(st.other, live) if st.other is not None else None
        if then is None and other is None:
            return None
        st.then = then if then is not None else A.Begin([])
        st.other = other
        return st
    if isinstance(st, A.Case):
        swept = []
        default_alive = False
        for arm in st.arms:
            body = _sweep_stmt(arm.body, live)
            swept.append((arm, body))
            if arm.labels is None and body is not None:
                default_alive = True
        arms = []
        for arm, body in swept:
            if body is None:
                # an empty labeled arm still shields its values from the
                # default, so it can only go once the default is gone
                if arm.labels is not None and default_alive:
                    arms.append(A.CaseArm(arm.labels, A.Begin([])))
                continue
            arms.append(A.CaseArm(arm.labels, body))
        if not any(not isinstance(a.body, A.Begin) or a.body.stmts
                   for a in arms):
            return None
        st.arms = arms
        return st
    if isinstance(st, A.Begin):
        kept = [s for s in (_sweep_stmt(s, live) for s in st.stmts)
                if s is not None]
        if not kept:
            return None
        st.stmts = kept
        return st
    return st


def _referenced_names(module: A.ModuleAst) -> set[str]:
    names: set[str] = set()
    for e in A.module_exprs(module):
        if isinstance(e, A.Ident):
            names.add(e.name)
    for item in module.items:
        if isinstance(item, A.Always):
            for _, sig in item.sens.edges:
                names.add(sig)
    return names


def eliminate_dead(module: A.ModuleAst) -> A.ModuleAst | None:
    """Prune constant branches, then drop writes no output can observe."""
    before = A.structural_hash(module)
    out = clone_module(module)
    _fold_module(out, _param_env(out))

    live: set[str] = set()
    for p in out.ports:
        if p.direction in ("output", "inout"):
            live.add(p.name)
    for item in out.items:
        if isinstance(item, A.Instance):
            for _, conn in item.conns:
                _expr_reads(conn, live)

    grew = [True]
    while grew[0]:
        grew[0] = False
        for item in out.items:
            if isinstance(item, A.ContAssign):
                _mark_stmt(A.Assign(item.lhs, item.rhs), [], live, grew)
            elif isinstance(item, A.Always):
                _mark_stmt(item.body, [], live, grew)

    new_items = []
    for item in out.items:
        if isinstance(item, A.ContAssign):
            if _target_name(item.lhs) in live:
                new_items.append(item)
        elif isinstance(item, A.Always):
            body = _sweep_stmt(item.body, live)
            if body is not None:
                item.body = body
                new_items.append(item)
        else:
            new_items.append(item)
    out.items = new_items

    used = _referenced_names(out) | {p.name for p in out.ports}
    out.nets = [n for n in out.nets if n.name in used]
    reannotate(out)
    if A.structural_hash(out) == before:
        return None
    return out
