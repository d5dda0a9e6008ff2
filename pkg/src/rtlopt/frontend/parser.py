"""Recursive-descent parser for the Verilog subset.

Accepts both ANSI headers (``module m(input [3:0] a, output reg y);``) and
the older split form (port name list plus body declarations); both produce
the same AST, which is what the printer emits in ANSI form.

Outside the subset (named by the error message): generate, functions,
tasks, initial blocks, delays, event controls, x/z literals, signed
arithmetic, for/while loops, multi-dimensional arrays.
"""

from __future__ import annotations

from typing import Optional

from ..errors import ParseError
from . import ast as A
from .lexer import Token, tokenize
from .width import annotate_module, eval_const

# binding powers; ternary handled separately below everything
_BIN_BP = {
    "||": (2, 3), "&&": (3, 4),
    "|": (4, 5), "^": (5, 6), "&": (6, 7),
    "==": (7, 8), "!=": (7, 8),
    "<": (8, 9), "<=": (8, 9), ">": (8, 9), ">=": (8, 9),
    "<<": (9, 10), ">>": (9, 10),
    "+": (10, 11), "-": (10, 11),
    "*": (11, 12), "/": (11, 12), "%": (11, 12),
}
_UNARY = {"~", "!", "&", "|", "^", "-"}


class _Parser:
    def __init__(self, text: str, filename: str):
        self.filename = filename
        self.toks = tokenize(text, filename)
        self.i = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            raise self.error(f"expected {text!r}, found {t.text!r}" if t.text
                             else f"expected {text!r}, found end of input")
        return self.next()

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise self.error(f"expected identifier, found {t.text!r}")
        return self.next()

    def error(self, msg: str, tok: Optional[Token] = None) -> ParseError:
        t = tok or self.peek()
        return ParseError(msg, self.filename, t.line, t.col)

    def _mark(self, node: A.Node, tok: Token) -> A.Node:
        node.pos = (tok.line, tok.col)
        return node

    # -- top level ----------------------------------------------------------

    def parse_design(self) -> A.DesignAst:
        design = A.DesignAst(filename=self.filename)
        while self.peek().kind != "eof":
            if not self.at("module"):
                raise self.error(f"expected 'module', found {self.peek().text!r}")
            design.modules.append(self.parse_module())
        if not design.modules:
            raise self.error("empty input: no module definitions")
        seen = set()
        for m in design.modules:
            if m.name in seen:
                raise ParseError(f"duplicate module {m.name!r}", self.filename,
                                 *(m.pos or (0, 0)))
            seen.add(m.name)
        return design

    def parse_module(self) -> A.ModuleAst:
        t0 = self.expect("module")
        name = self.expect_ident().text
        mod = A.ModuleAst(name=name)
        self._mark(mod, t0)
        self._params: dict[str, int] = {}
        port_order: list[str] = []
        declared_ports: dict[str, A.Port] = {}

        if self.accept("#"):
            self.expect("(")
            while True:
                self.expect("parameter")
                self._parse_param_decl(mod, local=False)
                if not self.accept(","):
                    break
            self.expect(")")

        if self.accept("("):
            if not self.at(")"):
                if self.peek().kind == "ident" and self.peek(1).text in (",", ")"):
                    # old-style: bare name list, directions declared in body
                    while True:
                        port_order.append(self.expect_ident().text)
                        if not self.accept(","):
                            break
                else:
                    while True:
                        for p in self._parse_ansi_port():
                            declared_ports[p.name] = p
                            port_order.append(p.name)
                        if not self.accept(","):
                            break
            self.expect(")")
        self.expect(";")

        body_ports: dict[str, A.Port] = {}
        while not self.at("endmodule"):
            self._parse_item(mod, body_ports)
        self.expect("endmodule")

        # merge old-style body declarations into the port list
        for pname in port_order:
            if pname in declared_ports:
                mod.ports.append(declared_ports[pname])
            elif pname in body_ports:
                mod.ports.append(body_ports.pop(pname))
            else:
                raise ParseError(f"port {pname!r} has no direction declaration",
                                 self.filename, *(mod.pos or (0, 0)))
        if body_ports:
            stray = sorted(body_ports)[0]
            raise ParseError(f"direction declared for non-port {stray!r}",
                             self.filename, *(mod.pos or (0, 0)))

        self._check_module(mod)
        annotate_module(mod, self.filename)
        return mod

    def _parse_range(self) -> int:
        """``[msb:lsb]`` with constant bounds and lsb == 0; returns width."""
        t = self.expect("[")
        msb_e = self.parse_expr()
        self.expect(":")
        lsb_e = self.parse_expr()
        self.expect("]")
        msb = eval_const(msb_e, self._params)
        lsb = eval_const(lsb_e, self._params)
        if msb is None or lsb is None:
            raise self.error("range bounds must be constant", t)
        if lsb != 0:
            raise self.error("unsupported construct: declaration range with "
                             "non-zero LSB", t)
        if msb < 0:
            raise self.error("negative range bound", t)
        return msb + 1

    def _parse_ansi_port(self) -> list[A.Port]:
        t = self.peek()
        if t.text not in ("input", "output", "inout"):
            raise self.error(f"expected port direction, found {t.text!r}")
        direction = self.next().text
        is_reg = self.accept("reg")
        width = self._parse_range() if self.at("[") else 1
        ports = [A.Port(self.expect_ident().text, direction, width, is_reg)]
        ports[0].pos = (t.line, t.col)
        # `input a, b` shares the declaration until a new direction appears
        while self.at(",") and self.peek(1).kind == "ident" and \
                self.peek(2).text in (",", ")"):
            self.next()
            p = A.Port(self.expect_ident().text, direction, width, is_reg)
            p.pos = (t.line, t.col)
            ports.append(p)
        return ports

    def _parse_param_decl(self, mod: A.ModuleAst, local: bool) -> None:
        t = self.peek()
        name = self.expect_ident().text
        self.expect("=")
        expr = self.parse_expr()
        value = eval_const(expr, self._params)
        if value is None:
            raise self.error(f"parameter {name!r} must have a constant value", t)
        if value < 0:
            raise self.error(f"parameter {name!r} has a negative value "
                             "(arithmetic is unsigned)", t)
        size = expr.size if isinstance(expr, A.Literal) else None
        p = A.Param(name, value, size, local)
        p.pos = (t.line, t.col)
        mod.params.append(p)
        self._params[name] = value

    def _parse_item(self, mod: A.ModuleAst, body_ports: dict[str, A.Port]) -> None:
        t = self.peek()
        if t.text in ("parameter", "localparam"):
            local = self.next().text == "localparam"
            while True:
                self._parse_param_decl(mod, local)
                if not self.accept(","):
                    break
            self.expect(";")
        elif t.text in ("input", "output", "inout"):
            direction = self.next().text
            is_reg = self.accept("reg")
            width = self._parse_range() if self.at("[") else 1
            while True:
                nt = self.peek()
                name = self.expect_ident().text
                p = A.Port(name, direction, width, is_reg)
                p.pos = (nt.line, nt.col)
                body_ports[name] = p
                if not self.accept(","):
                    break
            self.expect(";")
        elif t.text in ("wire", "reg"):
            kind = self.next().text
            width = self._parse_range() if self.at("[") else 1
            while True:
                nt = self.peek()
                name = self.expect_ident().text
                depth = None
                if self.at("["):
                    if kind != "reg":
                        raise self.error("only reg declarations may be arrays", nt)
                    tb = self.expect("[")
                    hi = eval_const(self.parse_expr(), self._params)
                    self.expect(":")
                    lo = eval_const(self.parse_expr(), self._params)
                    self.expect("]")
                    # both [N-1:0] and [0:N-1] declare N words addressed from 0
                    if hi is not None and lo is not None and hi == 0 and lo > 0:
                        hi, lo = lo, hi
                    if hi is None or lo is None or lo != 0 or hi < 0:
                        raise self.error("array bounds must be constant with a "
                                         "zero index at one end", tb)
                    if self.at("["):
                        raise self.error("unsupported construct: "
                                         "multi-dimensional array", tb)
                    depth = hi + 1
                if name in body_ports:
                    # e.g. `output y; reg y;`
                    if depth is not None:
                        raise self.error(f"port {name!r} cannot be an array", nt)
                    body_ports[name].reg = body_ports[name].reg or kind == "reg"
                    if width != 1 and body_ports[name].width == 1:
                        body_ports[name].width = width
                else:
                    n = A.Net(name, kind, width, depth)
                    n.pos = (nt.line, nt.col)
                    mod.nets.append(n)
                if self.accept("="):
                    if kind != "wire":
                        raise self.error("initializer only allowed on wire "
                                         "declarations", nt)
                    lhs = A.Ident(name)
                    lhs.pos = (nt.line, nt.col)
                    item = A.ContAssign(lhs, self.parse_expr())
                    item.pos = (nt.line, nt.col)
                    mod.items.append(item)
                if not self.accept(","):
                    break
            self.expect(";")
        elif t.text == "assign":
            self.next()
            lhs = self.parse_lvalue()
            self.expect("=")
            rhs = self.parse_expr()
            self.expect(";")
            item = A.ContAssign(lhs, rhs)
            mod.items.append(self._mark(item, t))
        elif t.text == "always":
            self.next()
            sens = self._parse_sens()
            body = self.parse_stmt()
            item = A.Always(sens, body)
            mod.items.append(self._mark(item, t))
        elif t.kind == "ident":
            mod.items.append(self._parse_instance())
        else:
            raise self.error(f"unexpected token {t.text!r} in module body")

    def _parse_sens(self) -> A.SensList:
        t = self.expect("@")
        if self.accept("*"):
            return A.SensList(star=True)
        self.expect("(")
        if self.accept("*"):
            self.expect(")")
            return A.SensList(star=True)
        edges: list[tuple[str, str]] = []
        plain = False
        while True:
            if self.at("posedge") or self.at("negedge"):
                edge = self.next().text
                edges.append((edge, self.expect_ident().text))
            else:
                self.expect_ident()
                plain = True
            if not (self.accept("or") or self.accept(",")):
                break
        self.expect(")")
        if plain:
            if edges:
                raise self.error("mixed edge and level sensitivity", t)
            # level-sensitive lists normalize to @* (two-state cycle model)
            return A.SensList(star=True)
        return A.SensList(star=False, edges=edges)

    def _parse_instance(self) -> A.Instance:
        t = self.peek()
        module = self.expect_ident().text
        if self.at("#"):
            raise self.error("unsupported construct: parameter override on "
                             "instance (set parameters in the child module)",
                             self.peek())
        name = self.expect_ident().text
        self.expect("(")
        conns: list[tuple[Optional[str], Optional[A.Expr]]] = []
        if not self.at(")"):
            named = self.at(".")
            while True:
                if named:
                    self.expect(".")
                    pname = self.expect_ident().text
                    self.expect("(")
                    expr = None if self.at(")") else self.parse_expr()
                    self.expect(")")
                    conns.append((pname, expr))
                else:
                    conns.append((None, self.parse_expr()))
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect(";")
        inst = A.Instance(module, name, conns)
        self._mark(inst, t)
        return inst

    # -- statements ----------------------------------------------------------

    def parse_stmt(self) -> A.Stmt:
        t = self.peek()
        if self.at("#"):
            raise self.error("unsupported construct: delay control '#'", t)
        if self.accept("begin"):
            stmts = []
            while not self.at("end"):
                stmts.append(self.parse_stmt())
            self.expect("end")
            return self._mark(A.Begin(stmts), t)
        if self.accept("if"):
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self.parse_stmt()
            other = self.parse_stmt() if self.accept("else") else None
            return self._mark(A.If(cond, then, other), t)
        if self.at("case") or self.at("casez"):
            kind = self.next().text
            self.expect("(")
            subject = self.parse_expr()
            self.expect(")")
            arms: list[A.CaseArm] = []
            while not self.at("endcase"):
                at = self.peek()
                if self.accept("default"):
                    self.accept(":")
                    arm = A.CaseArm(None, self.parse_stmt())
                else:
                    labels = [self.parse_expr()]
                    while self.accept(","):
                        labels.append(self.parse_expr())
                    self.expect(":")
                    arm = A.CaseArm(labels, self.parse_stmt())
                arms.append(self._mark(arm, at))
            self.expect("endcase")
            if not arms:
                raise self.error("case statement with no arms", t)
            return self._mark(A.Case(kind, subject, arms), t)
        # assignment
        lhs = self.parse_lvalue()
        if self.accept("="):
            blocking = True
        elif self.accept("<="):
            blocking = False
        else:
            raise self.error(f"expected '=' or '<=', found {self.peek().text!r}")
        rhs = self.parse_expr()
        self.expect(";")
        return self._mark(A.Assign(lhs, rhs, blocking), t)

    def parse_lvalue(self) -> A.Expr:
        t = self.peek()
        name = self.expect_ident().text
        base = A.Ident(name)
        self._mark(base, t)
        if self.at("["):
            self.expect("[")
            first = self.parse_expr()
            if self.accept(":"):
                second = self.parse_expr()
                self.expect("]")
                msb = eval_const(first, self._params)
                lsb = eval_const(second, self._params)
                if msb is None or lsb is None:
                    raise self.error("part-select bounds must be constant", t)
                return self._mark(A.PartSelect(base, msb, lsb), t)
            self.expect("]")
            return self._mark(A.Index(base, first), t)
        return base

    # -- expressions ----------------------------------------------------------

    def parse_expr(self) -> A.Expr:
        return self._parse_ternary()

    def _parse_ternary(self) -> A.Expr:
        t = self.peek()
        cond = self._parse_binary(0)
        if self.accept("?"):
            then = self._parse_ternary()
            self.expect(":")
            other = self._parse_ternary()
            return self._mark(A.Ternary(cond, then, other), t)
        return cond

    def _parse_binary(self, min_bp: int) -> A.Expr:
        t = self.peek()
        lhs = self._parse_unary()
        while True:
            op = self.peek()
            bp = _BIN_BP.get(op.text) if op.kind == "op" else None
            if bp is None or bp[0] < min_bp:
                return lhs
            self.next()
            rhs = self._parse_binary(bp[1])
            lhs = self._mark(A.Binary(op.text, lhs, rhs), t)

    def _parse_unary(self) -> A.Expr:
        t = self.peek()
        if t.kind == "op" and t.text in _UNARY:
            self.next()
            return self._mark(A.Unary(t.text, self._parse_unary()), t)
        return self._parse_primary()

    def _parse_primary(self) -> A.Expr:
        t = self.peek()
        if t.kind == "number":
            self.next()
            return self._mark(A.Literal(t.value, t.size), t)
        if t.kind == "ident":
            self.next()
            base = A.Ident(t.text)
            self._mark(base, t)
            expr: A.Expr = base
            if self.at("["):
                self.expect("[")
                first = self.parse_expr()
                if self.accept(":"):
                    second = self.parse_expr()
                    self.expect("]")
                    msb = eval_const(first, self._params)
                    lsb = eval_const(second, self._params)
                    if msb is None or lsb is None:
                        raise self.error("part-select bounds must be constant", t)
                    expr = self._mark(A.PartSelect(base, msb, lsb), t)
                else:
                    self.expect("]")
                    expr = self._mark(A.Index(base, first), t)
            return expr
        if self.accept("("):
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.text == "{":
            self.next()
            first = self.parse_expr()
            if self.at("{"):
                # replication {n{...}} with a constant count
                count = eval_const(first, self._params)
                if count is None:
                    raise self.error("replication count must be constant", t)
                if count <= 0:
                    raise self.error("replication count must be positive", t)
                self.expect("{")
                parts = [self.parse_expr()]
                while self.accept(","):
                    parts.append(self.parse_expr())
                self.expect("}")
                self.expect("}")
                inner = parts[0] if len(parts) == 1 else A.Concat(parts)
                if len(parts) > 1:
                    self._mark(inner, t)
                return self._mark(A.Repl(count, inner), t)
            parts = [first]
            while self.accept(","):
                parts.append(self.parse_expr())
            self.expect("}")
            return self._mark(A.Concat(parts), t)
        raise self.error(f"expected expression, found {t.text!r}" if t.text
                         else "expected expression, found end of input")

    # -- module-level semantic checks ----------------------------------------

    def _check_module(self, mod: A.ModuleAst) -> None:
        names: dict[str, A.Node] = {}
        for group in (mod.params, mod.ports, mod.nets):
            for d in group:
                if d.name in names:
                    raise ParseError(f"duplicate declaration of {d.name!r}",
                                     self.filename, *(d.pos or (0, 0)))
                names[d.name] = d

        kinds = {p.name: ("reg" if p.reg else "wire", p.direction)
                 for p in mod.ports}
        for n in mod.nets:
            kinds[n.name] = (n.kind, None)

        drivers: dict[str, A.Item] = {}

        def lhs_name(lhs: A.Expr) -> str:
            if isinstance(lhs, A.Ident):
                return lhs.name
            if isinstance(lhs, (A.Index, A.PartSelect)) and isinstance(lhs.base, A.Ident):
                return lhs.base.name
            raise ParseError("assignment target must be a net, bit, or slice",
                             self.filename, *(lhs.pos or (0, 0)))

        def claim(name: str, item: A.Item, procedural: bool, node: A.Node) -> None:
            if name not in kinds:
                raise ParseError(f"assignment to undeclared net {name!r}",
                                 self.filename, *(node.pos or (0, 0)))
            kind, direction = kinds[name]
            if direction == "input":
                raise ParseError(f"assignment to input port {name!r}",
                                 self.filename, *(node.pos or (0, 0)))
            if procedural and kind != "reg":
                raise ParseError(f"procedural assignment to wire {name!r} "
                                 "(declare it reg)", self.filename,
                                 *(node.pos or (0, 0)))
            if not procedural and kind != "wire":
                raise ParseError(f"continuous assignment to reg {name!r}",
                                 self.filename, *(node.pos or (0, 0)))
            prev = drivers.get(name)
            if prev is not None and prev is not item:
                raise ParseError(f"net {name!r} has multiple drivers",
                                 self.filename, *(node.pos or (0, 0)))
            drivers[name] = item

        def claim_stmt(s: A.Stmt, item: A.Item) -> None:
            if isinstance(s, A.Assign):
                claim(lhs_name(s.lhs), item, True, s)
            elif isinstance(s, A.If):
                claim_stmt(s.then, item)
                if s.other is not None:
                    claim_stmt(s.other, item)
            elif isinstance(s, A.Case):
                for arm in s.arms:
                    claim_stmt(arm.body, item)
            elif isinstance(s, A.Begin):
                for sub in s.stmts:
                    claim_stmt(sub, item)

        for item in mod.items:
            if isinstance(item, A.ContAssign):
                claim(lhs_name(item.lhs), item, False, item)
            elif isinstance(item, A.Always):
                claim_stmt(item.body, item)
                self._check_always(item)
            elif isinstance(item, A.Instance):
                seen_conn = set()
                for pname, _ in item.conns:
                    if pname is not None:
                        if pname in seen_conn:
                            raise ParseError(
                                f"duplicate connection to port {pname!r}",
                                self.filename, *(item.pos or (0, 0)))
                        seen_conn.add(pname)

    def _check_always(self, item: A.Always) -> None:
        """Blocking in comb blocks, nonblocking in edge blocks."""
        seq = not item.sens.star

        def visit(s: A.Stmt) -> None:
            if isinstance(s, A.Assign):
                if not seq and not s.blocking:
                    raise ParseError("nonblocking assignment in a "
                                     "combinational always block",
                                     self.filename, *(s.pos or (0, 0)))
            elif isinstance(s, A.If):
                visit(s.then)
                if s.other is not None:
                    visit(s.other)
            elif isinstance(s, A.Case):
                for arm in s.arms:
                    visit(arm.body)
            elif isinstance(s, A.Begin):
                for sub in s.stmts:
                    visit(sub)

        visit(item.body)


def parse(text: str, filename: str = "<input>") -> A.DesignAst:
    """Parse source text into a design; raises ParseError on any problem."""
    design = _Parser(text, filename).parse_design()
    _resolve_positional(design)
    A.renumber(design)
    return design


def _resolve_positional(design: A.DesignAst) -> None:
    """Fill in port names for positional instance connections.

    Connections to modules not defined in this design are left as-is; the
    instance is then treated as external by later passes.
    """
    by_name = {m.name: m for m in design.modules}
    for m in design.modules:
        for item in m.items:
            if not isinstance(item, A.Instance):
                continue
            target = by_name.get(item.module)
            if target is None:
                continue
            port_names = {p.name for p in target.ports}
            if item.conns and item.conns[0][0] is None:
                if any(p is not None for p, _ in item.conns):
                    raise ParseError(
                        f"instance {item.name!r} mixes positional and named "
                        "connections", design.filename, *(item.pos or (0, 0)))
                if len(item.conns) > len(target.ports):
                    raise ParseError(
                        f"instance {item.name!r} has more connections than "
                        f"{item.module!r} has ports", design.filename,
                        *(item.pos or (0, 0)))
                item.conns = [(target.ports[k].name, e)
                              for k, (_, e) in enumerate(item.conns)]
            else:
                for pname, _ in item.conns:
                    if pname is not None and pname not in port_names:
                        raise ParseError(
                            f"instance {item.name!r} connects unknown port "
                            f"{pname!r} of {item.module!r}", design.filename,
                            *(item.pos or (0, 0)))
