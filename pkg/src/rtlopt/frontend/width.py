"""Self-determined width inference and static constant evaluation.

Width rules follow the standard unsigned sizing discipline:

* identifiers carry their declared width (array reads: element width),
* sized literals their size, unsized literals 32,
* ``+ - * / % & | ^`` take max of operand widths,
* shifts take the left operand's width (shift amount is self-determined),
* comparisons, logical ops, and reductions are 1 bit wide,
* concat sums part widths, replication multiplies,
* the conditional takes max of its arms.

Inference is total on well-formed trees; it never fails on a width
"mismatch" because the language resolves those by implicit zero-extension
and truncation.  Evaluation-time context widths are derived separately by
the bytecode compiler and the constant folder.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import ParseError
from . import ast as A


@dataclass
class Sym:
    name: str
    kind: str  # "input" | "output" | "inout" | "wire" | "reg" | "param"
    width: int
    depth: Optional[int] = None  # reg arrays
    value: Optional[int] = None  # params


def symbol_table(module: A.ModuleAst) -> dict[str, Sym]:
    table: dict[str, Sym] = {}
    for p in module.params:
        table[p.name] = Sym(p.name, "param", p.size or 32, None, p.value)
    for p in module.ports:
        table[p.name] = Sym(p.name, p.direction, p.width)
    for n in module.nets:
        table[n.name] = Sym(n.name, n.kind, n.width, n.depth)
    return table


def _err(msg: str, node: A.Node, filename: str) -> ParseError:
    line, col = node.pos or (0, 0)
    return ParseError(msg, filename, line, col)


def annotate_expr(e: A.Expr, table: dict[str, Sym], filename: str = "<input>",
                  parent: Optional[A.Expr] = None) -> int:
    """Set ``e.width`` (self-determined) recursively; returns it."""
    if isinstance(e, A.Ident):
        sym = table.get(e.name)
        if sym is None:
            raise _err(f"undeclared identifier {e.name!r}", e, filename)
        if sym.depth is not None and not (isinstance(parent, A.Index) and parent.base is e):
            raise _err(f"array {e.name!r} used without an index", e, filename)
        e.width = sym.width
    elif isinstance(e, A.Literal):
        e.width = e.size if e.size is not None else 32
    elif isinstance(e, A.Index):
        if not isinstance(e.base, A.Ident):
            raise _err("select base must be an identifier", e, filename)
        annotate_expr(e.base, table, filename, e)
        annotate_expr(e.index, table, filename, e)
        sym = table[e.base.name]
        if sym.kind == "param":
            raise _err(f"cannot select bits of parameter {e.base.name!r}", e, filename)
        e.width = sym.width if sym.depth is not None else 1
    elif isinstance(e, A.PartSelect):
        if not isinstance(e.base, A.Ident):
            raise _err("part-select base must be an identifier", e, filename)
        annotate_expr(e.base, table, filename, e)
        sym = table[e.base.name]
        if sym.kind == "param" or sym.depth is not None:
            raise _err(f"part-select on {e.base.name!r} is not supported", e, filename)
        if e.msb < e.lsb:
            raise _err("part-select bounds reversed", e, filename)
        if e.msb >= sym.width:
            raise _err(f"part-select [{e.msb}:{e.lsb}] exceeds width of "
                       f"{e.base.name!r}", e, filename)
        e.width = e.msb - e.lsb + 1
    elif isinstance(e, A.Concat):
        if not e.parts:
            raise _err("empty concatenation", e, filename)
        e.width = sum(annotate_expr(p, table, filename, e) for p in e.parts)
    elif isinstance(e, A.Repl):
        if e.count <= 0:
            raise _err("replication count must be positive", e, filename)
        e.width = e.count * annotate_expr(e.part, table, filename, e)
    elif isinstance(e, A.Unary):
        w = annotate_expr(e.operand, table, filename, e)
        e.width = 1 if e.op in ("!", "&", "|", "^") else w
    elif isinstance(e, A.Binary):
        wl = annotate_expr(e.left, table, filename, e)
        wr = annotate_expr(e.right, table, filename, e)
        if e.op in ("<<", ">>"):
            e.width = wl
        elif e.op in ("&&", "||", "==", "!=", "<", "<=", ">", ">="):
            e.width = 1
        else:
            e.width = max(wl, wr)
    elif isinstance(e, A.Ternary):
        annotate_expr(e.cond, table, filename, e)
        wt = annotate_expr(e.then, table, filename, e)
        we = annotate_expr(e.other, table, filename, e)
        e.width = max(wt, we)
    else:
        raise _err(f"unexpected expression node {type(e).__name__}", e, filename)
    return e.width


def annotate_module(module: A.ModuleAst, filename: str = "<input>") -> dict[str, Sym]:
    """Annotate every expression in the module; returns the symbol table."""
    table = symbol_table(module)
    for item in module.items:
        if isinstance(item, A.ContAssign):
            annotate_expr(item.lhs, table, filename)
            annotate_expr(item.rhs, table, filename)
        elif isinstance(item, A.Always):
            _annotate_stmt(item.body, table, filename)
        elif isinstance(item, A.Instance):
            for _, expr in item.conns:
                if expr is not None:
                    annotate_expr(expr, table, filename)
    return table


def _annotate_stmt(s: A.Stmt, table: dict[str, Sym], filename: str) -> None:
    if isinstance(s, A.Assign):
        annotate_expr(s.lhs, table, filename)
        annotate_expr(s.rhs, table, filename)
    elif isinstance(s, A.If):
        annotate_expr(s.cond, table, filename)
        _annotate_stmt(s.then, table, filename)
        if s.other is not None:
            _annotate_stmt(s.other, table, filename)
    elif isinstance(s, A.Case):
        annotate_expr(s.subject, table, filename)
        for arm in s.arms:
            if arm.labels is not None:
                for lab in arm.labels:
                    annotate_expr(lab, table, filename)
            _annotate_stmt(arm.body, table, filename)
    elif isinstance(s, A.Begin):
        for sub in s.stmts:
            _annotate_stmt(sub, table, filename)
    else:
        raise _err(f"unexpected statement node {type(s).__name__}", s, filename)


# --------------------------------------------------------------------------
# static constant evaluation (parameter values, ranges, case labels)


def eval_const(e: A.Expr, params: dict[str, int]) -> Optional[int]:
    """Evaluate a constant expression with plain integer arithmetic.

    Returns None when the expression references anything non-constant.
    Used for declaration ranges and parameter definitions, where values are
    small positive integers; runtime folding with full width semantics
    lives in the rewrite engine.
    """
    if isinstance(e, A.Literal):
        return e.value
    if isinstance(e, A.Ident):
        return params.get(e.name)
    if isinstance(e, A.Unary):
        v = eval_const(e.operand, params)
        if v is None:
            return None
        if e.op == "-":
            return -v
        if e.op == "~":
            return ~v
        if e.op == "!":
            return int(v == 0)
        return None
    if isinstance(e, A.Binary):
        a = eval_const(e.left, params)
        b = eval_const(e.right, params)
        if a is None or b is None:
            return None
        try:
            return {
                "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
                "/": lambda: a // b if b else None,
                "%": lambda: a % b if b else None,
                "<<": lambda: a << b, ">>": lambda: a >> b,
                "&": lambda: a & b, "|": lambda: a | b, "^": lambda: a ^ b,
                "==": lambda: int(a == b), "!=": lambda: int(a != b),
                "<": lambda: int(a < b), "<=": lambda: int(a <= b),
                ">": lambda: int(a > b), ">=": lambda: int(a >= b),
                "&&": lambda: int(bool(a) and bool(b)),
                "||": lambda: int(bool(a) or bool(b)),
            }[e.op]()
        except KeyError:
            return None
    if isinstance(e, A.Ternary):
        c = eval_const(e.cond, params)
        if c is None:
            return None
        return eval_const(e.then if c else e.other, params)
    return None
