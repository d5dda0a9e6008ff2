"""Pretty-printer.

Emits canonical ANSI-style source that parses back to a structurally equal
tree: parse . print . parse == parse.  Parenthesization follows the
precedence table; sized literals print in decimal.
"""

from __future__ import annotations

from . import ast as A

_PREC = {
    "||": 2, "&&": 3,
    "|": 4, "^": 5, "&": 6,
    "==": 7, "!=": 7,
    "<": 8, "<=": 8, ">": 8, ">=": 8,
    "<<": 9, ">>": 9,
    "+": 10, "-": 10,
    "*": 11, "/": 11, "%": 11,
}
_TERNARY_PREC = 1
_UNARY_PREC = 12


def expr_to_str(e: A.Expr) -> str:
    return _expr(e, 0)


def _expr(e: A.Expr, parent_prec: int, right_operand: bool = False) -> str:
    if isinstance(e, A.Ident):
        return e.name
    if isinstance(e, A.Literal):
        if e.size is not None:
            return f"{e.size}'d{e.value}"
        return str(e.value)
    if isinstance(e, A.Index):
        return f"{_expr(e.base, _UNARY_PREC)}[{_expr(e.index, 0)}]"
    if isinstance(e, A.PartSelect):
        return f"{_expr(e.base, _UNARY_PREC)}[{e.msb}:{e.lsb}]"
    if isinstance(e, A.Concat):
        return "{" + ", ".join(_expr(p, 0) for p in e.parts) + "}"
    if isinstance(e, A.Repl):
        return "{" + str(e.count) + "{" + _expr(e.part, 0) + "}}"
    if isinstance(e, A.Unary):
        inner = _expr(e.operand, _UNARY_PREC)
        if isinstance(e.operand, (A.Binary, A.Ternary, A.Unary)):
            inner = f"({_expr(e.operand, 0)})"
        return f"{e.op}{inner}"
    if isinstance(e, A.Binary):
        prec = _PREC[e.op]
        left = _expr(e.left, prec, False)
        right = _expr(e.right, prec, True)
        # same-precedence right children parenthesize (left associativity)
        if isinstance(e.right, A.Binary) and _PREC[e.right.op] == prec:
            right = f"({_expr(e.right, 0)})"
        s = f"{left} {e.op} {right}"
        if prec < parent_prec or (prec == parent_prec and right_operand):
            return f"({s})"
        return s
    if isinstance(e, A.Ternary):
        cond = _expr(e.cond, _TERNARY_PREC + 1)
        then = _expr(e.then, _TERNARY_PREC + 1)
        other = _expr(e.other, _TERNARY_PREC)  # right-associative
        s = f"{cond} ? {then} : {other}"
        if parent_prec > _TERNARY_PREC:
            return f"({s})"
        return s
    raise TypeError(f"cannot print {type(e).__name__}")


def _stmt(s: A.Stmt, indent: str) -> list[str]:
    if isinstance(s, A.Assign):
        op = "=" if s.blocking else "<="
        return [f"{indent}{expr_to_str(s.lhs)} {op} {expr_to_str(s.rhs)};"]
    if isinstance(s, A.Begin):
        lines = [f"{indent}begin"]
        for sub in s.stmts:
            lines.extend(_stmt(sub, indent + "  "))
        lines.append(f"{indent}end")
        return lines
    if isinstance(s, A.If):
        lines = [f"{indent}if ({expr_to_str(s.cond)})"]
        lines.extend(_stmt(s.then, indent + "  "))
        node = s.other
        while node is not None:
            if isinstance(node, A.If):
                lines.append(f"{indent}else if ({expr_to_str(node.cond)})")
                lines.extend(_stmt(node.then, indent + "  "))
                node = node.other
            else:
                lines.append(f"{indent}else")
                lines.extend(_stmt(node, indent + "  "))
                node = None
        return lines
    if isinstance(s, A.Case):
        lines = [f"{indent}{s.kind} ({expr_to_str(s.subject)})"]
        for arm in s.arms:
            if arm.labels is None:
                head = "default"
            else:
                head = ", ".join(expr_to_str(lab) for lab in arm.labels)
            body = _stmt(arm.body, indent + "    ")
            lines.append(f"{indent}  {head}:")
            lines.extend(body)
        lines.append(f"{indent}endcase")
        return lines
    raise TypeError(f"cannot print {type(s).__name__}")


def print_module(m: A.ModuleAst) -> str:
    lines: list[str] = []
    if m.params and any(not p.local for p in m.params):
        plist = ", ".join(f"parameter {p.name} = {_param_value(p)}"
                          for p in m.params if not p.local)
        lines.append(f"module {m.name} #({plist}) (")
    else:
        lines.append(f"module {m.name} (")
    for i, p in enumerate(m.ports):
        decl = p.direction
        if p.reg:
            decl += " reg"
        if p.width > 1:
            decl += f" [{p.width - 1}:0]"
        comma = "," if i < len(m.ports) - 1 else ""
        lines.append(f"  {decl} {p.name}{comma}")
    lines.append(");")

    for p in m.params:
        if p.local:
            lines.append(f"  localparam {p.name} = {_param_value(p)};")
    for n in m.nets:
        decl = n.kind
        if n.width > 1:
            decl += f" [{n.width - 1}:0]"
        decl += f" {n.name}"
        if n.depth is not None:
            decl += f" [{n.depth - 1}:0]"
        lines.append(f"  {decl};")

    for item in m.items:
        if isinstance(item, A.ContAssign):
            lines.append(f"  assign {expr_to_str(item.lhs)} = "
                         f"{expr_to_str(item.rhs)};")
        elif isinstance(item, A.Always):
            if item.sens.star:
                head = "always @*"
            else:
                sens = " or ".join(f"{edge} {sig}" for edge, sig in item.sens.edges)
                head = f"always @({sens})"
            body = _stmt(item.body, "    ")
            if isinstance(item.body, A.Begin):
                # fold "begin" onto the header line
                lines.append(f"  {head} begin")
                for sub in item.body.stmts:
                    lines.extend(_stmt(sub, "    "))
                lines.append("  end")
            else:
                lines.append(f"  {head}")
                lines.extend(body)
        elif isinstance(item, A.Instance):
            conns = ", ".join(
                f".{pname}({expr_to_str(expr) if expr is not None else ''})"
                if pname is not None else expr_to_str(expr)
                for pname, expr in item.conns)
            lines.append(f"  {item.module} {item.name} ({conns});")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def _param_value(p: A.Param) -> str:
    if p.size is not None:
        return f"{p.size}'d{p.value}"
    return str(p.value)


def print_design(d: A.DesignAst) -> str:
    return "\n".join(print_module(m) for m in d.modules)
