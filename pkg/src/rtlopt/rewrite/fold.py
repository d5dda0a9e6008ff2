"""Constant folding, constant propagation, and copy propagation.

The evaluator here mirrors the simulator's width discipline exactly: every
expression is evaluated at a context width w >= its self-determined width,
sub-contexts follow the same rules the bytecode compiler uses, and a node is
only replaced by a literal when the folded value fits its self-determined
width (so no surrounding width computation can shift).
"""

from __future__ import annotations

from ..frontend import ast as A
from ..frontend.width import symbol_table
from .base import clone_module, lit, reannotate

_CMP_OPS = {"<", "<=", ">", ">=", "==", "!="}
_BOOL_OPS = {"&&", "||"}

# lattice marker: absent from env = unknown, _BOT = proven varying
_BOT = object()


def _mask(w: int) -> int:
    return (1 << w) - 1


def eval_expr(e: A.Expr, w: int, env: dict[str, int]) -> int | None:
    """Evaluate e at context width w; None when any input is unknown."""
    m = _mask(w)
    if isinstance(e, A.Literal):
        return e.value & m
    if isinstance(e, A.Ident):
        v = env.get(e.name)
        if v is None or v is _BOT:
            return None
        return v & m
    if isinstance(e, A.Unary):
        if e.op in ("~", "-"):
            a = eval_expr(e.operand, w, env)
            if a is None:
                return None
            return (~a if e.op == "~" else -a) & m
        ow = e.operand.width
        a = eval_expr(e.operand, ow, env)
        if a is None:
            return None
        if e.op == "!":
            return 0 if a else 1
        if e.op == "&":
            return 1 if a == _mask(ow) else 0
        if e.op == "|":
            return 1 if a else 0
        if e.op == "^":
            return bin(a).count("1") & 1
        return None
    if isinstance(e, A.Binary):
        op = e.op
        if op in ("<<", ">>"):
            a = eval_expr(e.left, w, env)
            b = eval_expr(e.right, e.right.width, env)
            if a is None or b is None:
                return None
            if op == ">>":
                return (a >> b) & m if b < w else 0
            return (a << b) & m if b < w else 0
        if op in _CMP_OPS:
            wc = max(e.left.width, e.right.width)
            a = eval_expr(e.left, wc, env)
            b = eval_expr(e.right, wc, env)
            if a is None or b is None:
                return None
            return int({"<": a < b, "<=": a <= b, ">": a > b,
                        ">=": a >= b, "==": a == b, "!=": a != b}[op])
        if op in _BOOL_OPS:
            a = eval_expr(e.left, e.left.width, env)
            if op == "&&" and a == 0:
                return 0
            if op == "||" and a is not None and a != 0:
                return 1
            b = eval_expr(e.right, e.right.width, env)
            if a is None or b is None:
                return None
            if op == "&&":
                return int(bool(a) and bool(b))
            return int(bool(a) or bool(b))
        a = eval_expr(e.left, w, env)
        b = eval_expr(e.right, w, env)
        if a is None or b is None:
            return None
        if op == "+":
            return (a + b) & m
        if op == "-":
            return (a - b) & m
        if op == "*":
            return (a * b) & m
        if op == "/":
            return (a // b) & m if b else m
        if op == "%":
            return (a % b) & m if b else m
        if op == "&":
            return a & b
        if op == "|":
            return a | b
        if op == "^":
            return a ^ b
        return None
    if isinstance(e, A.Ternary):
        c = eval_expr(e.cond, e.cond.width, env)
        if c is None:
            t = eval_expr(e.then, w, env)
            o = eval_expr(e.other, w, env)
            return t if t is not None and t == o else None
        return eval_expr(e.then if c else e.other, w, env)
    if isinstance(e, A.Concat):
        v = 0
        for part in e.parts:
            pv = eval_expr(part, part.width, env)
            if pv is None:
                return None
            v = (v << part.width) | pv
        return v & m
    if isinstance(e, A.Repl):
        pv = eval_expr(e.part, e.part.width, env)
        if pv is None:
            return None
        v = 0
        for _ in range(e.count):
            v = (v << e.part.width) | pv
        return v & m
    if isinstance(e, A.PartSelect):
        if not isinstance(e.base, A.Ident):
            return None
        bv = env.get(e.base.name)
        if bv is None or bv is _BOT:
            return None
        return (bv >> e.lsb) & _mask(e.msb - e.lsb + 1) & m
    if isinstance(e, A.Index):
        if not isinstance(e.base, A.Ident):
            return None
        bv = env.get(e.base.name)
        if bv is None or bv is _BOT:
            return None
        idx = eval_expr(e.index, e.index.width, env)
        if idx is None:
            return None
        return (bv >> idx) & 1 & m
    return None


def _fold(e: A.Expr, w: int, env: dict[str, int]) -> A.Expr:
    """Fold e at context width w, rebuilding children in their own contexts."""
    if isinstance(e, A.Literal):
        return e
    v = eval_expr(e, w, env)
    if v is not None and v <= _mask(e.width):
        return lit(v, e.width)
    if isinstance(e, A.Unary):
        cw = w if e.op in ("~", "-") else e.operand.width
        e.operand = _fold(e.operand, cw, env)
    elif isinstance(e, A.Binary):
        if e.op in ("<<", ">>"):
            e.left = _fold(e.left, w, env)
            e.right = _fold(e.right, e.right.width, env)
        elif e.op in _CMP_OPS:
            wc = max(e.left.width, e.right.width)
            e.left = _fold(e.left, wc, env)
            e.right = _fold(e.right, wc, env)
        elif e.op in _BOOL_OPS:
            e.left = _fold(e.left, e.left.width, env)
            e.right = _fold(e.right, e.right.width, env)
        else:
            e.left = _fold(e.left, w, env)
            e.right = _fold(e.right, w, env)
    elif isinstance(e, A.Ternary):
        c = eval_expr(e.cond, e.cond.width, env)
        if c is not None:
            arm = e.then if c else e.other
            # dropping the mux narrows the node's self width unless the
            # surviving arm already carries it, which would let enclosing
            # div/mod/shift contexts wrap differently
            if arm.width == e.width:
                return _fold(arm, w, env)
            e.cond = lit(1 if c else 0, e.cond.width)
        else:
            e.cond = _fold(e.cond, e.cond.width, env)
        e.then = _fold(e.then, w, env)
        e.other = _fold(e.other, w, env)
    elif isinstance(e, A.Concat):
        e.parts = [_fold(p, p.width, env) for p in e.parts]
    elif isinstance(e, A.Repl):
        e.part = _fold(e.part, e.part.width, env)
    elif isinstance(e, A.Index):
        e.index = _fold(e.index, e.index.width, env)
    return e


def _lhs_width(lhs: A.Expr, syms) -> int:
    if isinstance(lhs, A.Ident):
        return syms[lhs.name].width
    if isinstance(lhs, A.Index):
        sym = syms[lhs.base.name]
        return sym.width if sym.depth is not None else 1
    if isinstance(lhs, A.PartSelect):
        return lhs.msb - lhs.lsb + 1
    return 1


def _rhs_context_width(lhs: A.Expr, rhs: A.Expr, syms) -> int:
    if isinstance(lhs, A.Index) and syms[lhs.base.name].depth is None:
        return rhs.width
    return max(_lhs_width(lhs, syms), rhs.width)


def fold_stmt(st: A.Stmt, env: dict[str, int], syms) -> A.Stmt:
    """Fold every expression in st (in place), pruning constant branches."""
    if isinstance(st, A.Assign):
        if isinstance(st.lhs, A.Index):
            st.lhs.index = _fold(st.lhs.index, st.lhs.index.width, env)
        st.rhs = _fold(st.rhs, _rhs_context_width(st.lhs, st.rhs, syms), env)
        return st
    if isinstance(st, A.If):
        c = eval_expr(st.cond, st.cond.width, env)
        if c is not None:
            taken = st.then if c else st.other
            if taken is None:
                return A.Begin([])
            return fold_stmt(taken, env, syms)
        st.cond = _fold(st.cond, st.cond.width, env)
        st.then = fold_stmt(st.then, env, syms)
        if st.other is not None:
            st.other = fold_stmt(st.other, env, syms)
        return st
    if isinstance(st, A.Case):
        wc = st.subject.width
        for arm in st.arms:
            for lab in arm.labels or []:
                wc = max(wc, lab.width)
        sv = eval_expr(st.subject, wc, env)
        if sv is not None:
            chosen = None
            default = None
            resolved = True
            for arm in st.arms:
                if arm.labels is None:
                    if default is None:
                        default = arm
                    continue
                vals = [eval_expr(lab, wc, env) for lab in arm.labels]
                if any(lv is None for lv in vals):
                    resolved = False
                    break
                if sv in vals:
                    chosen = arm
                    break
            if resolved:
                target = chosen if chosen is not None else default
                if target is None:
                    return A.Begin([])
                return fold_stmt(target.body, env, syms)
        st.subject = _fold(st.subject, wc, env)
        for arm in st.arms:
            if arm.labels is not None:
                arm.labels = [_fold(lab, wc, env) for lab in arm.labels]
            arm.body = fold_stmt(arm.body, env, syms)
        return st
    if isinstance(st, A.Begin):
        st.stmts = [fold_stmt(s, env, syms) for s in st.stmts]
        return st
    return st


def _param_env(module: A.ModuleAst) -> dict[str, int]:
    env: dict[str, int] = {}
    for name, sym in symbol_table(module).items():
        if sym.kind == "param" and sym.value is not None:
            env[name] = sym.value & _mask(sym.width)
    return env


def _fold_module(module: A.ModuleAst, env: dict[str, int]) -> None:
    syms = symbol_table(module)
    for item in module.items:
        if isinstance(item, A.ContAssign):
            if isinstance(item.lhs, A.Index):
                item.lhs.index = _fold(item.lhs.index, item.lhs.index.width, env)
            item.rhs = _fold(item.rhs,
                             _rhs_context_width(item.lhs, item.rhs, syms), env)
        elif isinstance(item, A.Always):
            item.body = fold_stmt(item.body, env, syms)
        elif isinstance(item, A.Instance):
            item.conns = [
                (n, _fold(c, c.width, env)
                 if c is not None and not isinstance(c, A.Ident) else c)
                for n, c in item.conns]


def const_fold(module: A.ModuleAst) -> A.ModuleAst | None:
    """Fold expressions whose operands are literals or parameters."""
    before = A.structural_hash(module)
    out = clone_module(module)
    _fold_module(out, _param_env(out))
    reannotate(out)
    if A.structural_hash(out) == before:
        return None
    return out


def _meet(a, b):
    if a is None:
        return b
    if b is None:
        return a
    if a is _BOT or b is _BOT or a != b:
        return _BOT
    return a


def _assign_targets(st: A.Stmt, out: set[str]) -> None:
    if isinstance(st, A.Assign):
        base = st.lhs.base if isinstance(st.lhs, (A.Index, A.PartSelect)) else st.lhs
        if isinstance(base, A.Ident):
            out.add(base.name)
    elif isinstance(st, A.If):
        _assign_targets(st.then, out)
        if st.other is not None:
            _assign_targets(st.other, out)
    elif isinstance(st, A.Case):
        for arm in st.arms:
            _assign_targets(arm.body, out)
    elif isinstance(st, A.Begin):
        for s in st.stmts:
            _assign_targets(s, out)


def _fully_assigns(st: A.Stmt, name: str) -> bool:
    """True when every path through st writes the whole of name."""
    if isinstance(st, A.Assign):
        return isinstance(st.lhs, A.Ident) and st.lhs.name == name
    if isinstance(st, A.If):
        return (st.other is not None and _fully_assigns(st.then, name)
                and _fully_assigns(st.other, name))
    if isinstance(st, A.Case):
        if not any(arm.labels is None for arm in st.arms):
            return False
        return all(_fully_assigns(arm.body, name) for arm in st.arms)
    if isinstance(st, A.Begin):
        return any(_fully_assigns(s, name) for s in st.stmts)
    return False


def _conn_idents(conn: A.Expr | None, out: set[str]) -> None:
    if conn is None:
        return
    for node in A.walk_exprs(conn):
        if isinstance(node, A.Ident):
            out.add(node.name)


def _abstract_values(module: A.ModuleAst) -> dict[str, int]:
    """Nets proven to hold a single value in every observable state."""
    syms = symbol_table(module)
    env: dict = dict(_param_env(module))
    fixed = set(env)
    for p in module.ports:
        if p.direction in ("input", "inout"):
            env[p.name] = _BOT
            fixed.add(p.name)
    conn_nets: set[str] = set()
    for item in module.items:
        if isinstance(item, A.Instance):
            for _, conn in item.conns:
                _conn_idents(conn, conn_nets)
    for name in conn_nets:
        env[name] = _BOT
        fixed.add(name)

    driven: set[str] = set()
    for item in module.items:
        if isinstance(item, A.ContAssign):
            base = item.lhs.base if isinstance(item.lhs, (A.Index, A.PartSelect)) \
                else item.lhs
            if isinstance(base, A.Ident):
                driven.add(base.name)
        elif isinstance(item, A.Always):
            _assign_targets(item.body, driven)
    for name, sym in syms.items():
        if sym.kind == "param" or sym.depth is not None:
            continue
        if name not in driven and name not in fixed:
            env[name] = 0
            fixed.add(name)

    def visit(st: A.Stmt, acc: dict) -> None:
        if isinstance(st, A.Assign):
            if isinstance(st.lhs, A.Ident):
                name = st.lhs.name
                w = max(syms[name].width, st.rhs.width)
                v = eval_expr(st.rhs, w, env)
                cur = v & _mask(syms[name].width) if v is not None else _BOT
                acc[name] = _meet(acc.get(name), cur)
            else:
                base = st.lhs.base
                if isinstance(base, A.Ident):
                    acc[base.name] = _BOT
        elif isinstance(st, A.If):
            c = eval_expr(st.cond, st.cond.width, env)
            if c is None:
                visit(st.then, acc)
                if st.other is not None:
                    visit(st.other, acc)
            elif c:
                visit(st.then, acc)
            elif st.other is not None:
                visit(st.other, acc)
        elif isinstance(st, A.Case):
            for arm in st.arms:
                visit(arm.body, acc)
        elif isinstance(st, A.Begin):
            for s in st.stmts:
                visit(s, acc)

    stable = False
    for _ in range(16):
        acc: dict = {}
        for item in module.items:
            if isinstance(item, A.ContAssign):
                visit(A.Assign(item.lhs, item.rhs), acc)
            elif isinstance(item, A.Always):
                targets: set[str] = set()
                _assign_targets(item.body, targets)
                visit(item.body, acc)
                # storage starts at zero: registers expose it before the
                # first edge, comb targets on any unassigned path
                for t in targets:
                    if t in fixed or t not in acc:
                        continue
                    if item.sens.star and _fully_assigns(item.body, t):
                        continue
                    acc[t] = _meet(acc[t], 0)
        changed = False
        for name, v in acc.items():
            if name in fixed:
                continue
            if env.get(name) != v:
                env[name] = v
                changed = True
        if not changed:
            stable = True
            break
    if not stable:
        return {k: v for k, v in env.items() if k in fixed and v is not _BOT}
    return {k: v for k, v in env.items() if v is not _BOT}


def constant_propagate(module: A.ModuleAst) -> A.ModuleAst | None:
    """Propagate nets proven constant into their readers, then fold."""
    before = A.structural_hash(module)
    out = clone_module(module)
    _fold_module(out, _abstract_values(out))
    reannotate(out)
    if A.structural_hash(out) == before:
        return None
    return out


def copy_propagate(module: A.ModuleAst) -> A.ModuleAst | None:
    """Replace reads of pure alias wires (b = a with compatible widths)."""
    before = A.structural_hash(module)
    out = clone_module(module)
    syms = symbol_table(out)
    written: dict[str, int] = {}

    def bump(name: str) -> None:
        written[name] = written.get(name, 0) + 1

    for item in out.items:
        if isinstance(item, A.ContAssign):
            base = item.lhs.base if isinstance(item.lhs, (A.Index, A.PartSelect)) \
                else item.lhs
            if isinstance(base, A.Ident):
                bump(base.name)
        elif isinstance(item, A.Always):
            targets: set[str] = set()
            _assign_targets(item.body, targets)
            for t in targets:
                bump(t)
        elif isinstance(item, A.Instance):
            conn_nets: set[str] = set()
            for _, conn in item.conns:
                _conn_idents(conn, conn_nets)
            for t in conn_nets:
                bump(t)

    aliases: dict[str, str] = {}
    for item in out.items:
        if not isinstance(item, A.ContAssign):
            continue
        if not isinstance(item.lhs, A.Ident) or not isinstance(item.rhs, A.Ident):
            continue
        dst, src = item.lhs.name, item.rhs.name
        if written.get(dst, 0) != 1 or dst == src:
            continue
        if dst not in syms or src not in syms:
            continue
        if syms[dst].kind == "param" or syms[dst].depth is not None:
            continue
        if syms[src].kind == "param" or syms[src].depth is not None:
            continue
        # the alias holds src zero-extended; reads see the same value only
        # when the alias is at least as wide
        if syms[src].width > syms[dst].width:
            continue
        aliases[dst] = src

    def resolve(name: str) -> str:
        seen = set()
        while name in aliases and name not in seen:
            seen.add(name)
            name = aliases[name]
        return name

    flat = {}
    for dst in aliases:
        src = resolve(dst)
        if src != dst:
            flat[dst] = src
    if not flat:
        return None

    def repl(e: A.Expr) -> A.Expr:
        if isinstance(e, A.Ident) and e.name in flat:
            sub = A.Ident(flat[e.name])
            sub.width = syms[flat[e.name]].width
            return sub
        if isinstance(e, A.Unary):
            e.operand = repl(e.operand)
        elif isinstance(e, A.Binary):
            e.left = repl(e.left)
            e.right = repl(e.right)
        elif isinstance(e, A.Ternary):
            e.cond = repl(e.cond)
            e.then = repl(e.then)
            e.other = repl(e.other)
        elif isinstance(e, A.Concat):
            e.parts = [repl(p) for p in e.parts]
        elif isinstance(e, A.Repl):
            e.part = repl(e.part)
        elif isinstance(e, A.Index):
            e.index = repl(e.index)
        return e

    def repl_stmt(st: A.Stmt) -> None:
        if isinstance(st, A.Assign):
            if isinstance(st.lhs, A.Index):
                st.lhs.index = repl(st.lhs.index)
            st.rhs = repl(st.rhs)
        elif isinstance(st, A.If):
            st.cond = repl(st.cond)
            repl_stmt(st.then)
            if st.other is not None:
                repl_stmt(st.other)
        elif isinstance(st, A.Case):
            st.subject = repl(st.subject)
            for arm in st.arms:
                if arm.labels is not None:
                    arm.labels = [repl(lab) for lab in arm.labels]
                repl_stmt(arm.body)
        elif isinstance(st, A.Begin):
            for s in st.stmts:
                repl_stmt(s)

    for item in out.items:
        if isinstance(item, A.ContAssign):
            if isinstance(item.lhs, A.Index):
                item.lhs.index = repl(item.lhs.index)
            item.rhs = repl(item.rhs)
        elif isinstance(item, A.Always):
            repl_stmt(item.body)
    reannotate(out)
    if A.structural_hash(out) == before:
        return None
    return out
