"""Abstract syntax tree for the synthesizable Verilog subset.

Nodes are plain dataclasses with identity equality; structural comparison
goes through :func:`structural_eq`, which ignores node ids, source
positions, and derived width annotations.  ``width`` on expression nodes is
the self-determined width and is filled in by :mod:`rtlopt.frontend.width`
after parsing or after a rewrite builds new trees.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field, fields
from typing import Iterator, Optional, Union


@dataclass(eq=False)
class Node:
    nid: Optional[int] = field(default=None, init=False, repr=False)
    pos: Optional[tuple[int, int]] = field(default=None, init=False, repr=False)


# --------------------------------------------------------------------------
# expressions


@dataclass(eq=False)
class Expr(Node):
    width: Optional[int] = field(default=None, init=False, repr=False)


@dataclass(eq=False)
class Ident(Expr):
    name: str


@dataclass(eq=False)
class Literal(Expr):
    """Integer literal; ``size`` is None for unsized (32-bit) literals."""

    value: int
    size: Optional[int] = None


@dataclass(eq=False)
class Index(Expr):
    """``base[index]``: bit-select on a scalar net, element read on an array."""

    base: Expr
    index: Expr


@dataclass(eq=False)
class PartSelect(Expr):
    """``base[msb:lsb]`` with constant bounds."""

    base: Expr
    msb: int
    lsb: int


@dataclass(eq=False)
class Concat(Expr):
    parts: list[Expr]


@dataclass(eq=False)
class Repl(Expr):
    """``{count{part}}``."""

    count: int
    part: Expr


UNARY_OPS = ("~", "!", "&", "|", "^", "-")
BINARY_OPS = (
    "+", "-", "*", "/", "%",
    "<<", ">>",
    "&", "|", "^",
    "&&", "||",
    "==", "!=", "<", "<=", ">", ">=",
)


@dataclass(eq=False)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(eq=False)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(eq=False)
class Ternary(Expr):
    cond: Expr
    then: Expr
    other: Expr


# --------------------------------------------------------------------------
# statements


@dataclass(eq=False)
class Stmt(Node):
    pass


@dataclass(eq=False)
class Assign(Stmt):
    """Procedural assignment; ``blocking`` False means nonblocking (<=)."""

    lhs: Expr
    rhs: Expr
    blocking: bool = True


@dataclass(eq=False)
class If(Stmt):
    cond: Expr
    then: Stmt
    other: Optional[Stmt] = None


@dataclass(eq=False)
class CaseArm(Node):
    """One case item; ``labels`` is None for the default arm."""

    labels: Optional[list[Expr]]
    body: Stmt


@dataclass(eq=False)
class Case(Stmt):
    kind: str  # "case" | "casez"
    subject: Expr
    arms: list[CaseArm]


@dataclass(eq=False)
class Begin(Stmt):
    stmts: list[Stmt]


# --------------------------------------------------------------------------
# module items and declarations


@dataclass(eq=False)
class Item(Node):
    pass


@dataclass(eq=False)
class ContAssign(Item):
    lhs: Expr
    rhs: Expr


@dataclass(eq=False)
class SensList(Node):
    star: bool
    edges: list[tuple[str, str]] = field(default_factory=list)  # (edge, signal)


@dataclass(eq=False)
class Always(Item):
    sens: SensList
    body: Stmt


@dataclass(eq=False)
class Instance(Item):
    module: str
    name: str
    conns: list[tuple[Optional[str], Optional[Expr]]] = field(default_factory=list)


@dataclass(eq=False)
class Port(Node):
    name: str
    direction: str  # "input" | "output" | "inout"
    width: int = 1
    reg: bool = False


@dataclass(eq=False)
class Net(Node):
    name: str
    kind: str  # "wire" | "reg"
    width: int = 1
    depth: Optional[int] = None  # reg arrays


@dataclass(eq=False)
class Param(Node):
    name: str
    value: int
    size: Optional[int] = None
    local: bool = False


@dataclass(eq=False)
class ModuleAst(Node):
    name: str
    ports: list[Port] = field(default_factory=list)
    params: list[Param] = field(default_factory=list)
    nets: list[Net] = field(default_factory=list)
    items: list[Item] = field(default_factory=list)


@dataclass(eq=False)
class DesignAst(Node):
    modules: list[ModuleAst] = field(default_factory=list)
    source_map: dict[int, tuple[str, int, int]] = field(default_factory=dict)
    filename: str = "<input>"

    def module(self, name: str) -> Optional[ModuleAst]:
        for m in self.modules:
            if m.name == name:
                return m
        return None


# --------------------------------------------------------------------------
# traversal helpers

_SKIP_FIELDS = {"nid", "pos", "width"}


def children(node: Node) -> Iterator[Node]:
    for f in fields(node):
        if f.name in _SKIP_FIELDS:
            continue
        v = getattr(node, f.name)
        if isinstance(v, Node):
            yield v
        elif isinstance(v, list):
            for x in v:
                if isinstance(x, Node):
                    yield x
                elif isinstance(x, tuple):
                    for y in x:
                        if isinstance(y, Node):
                            yield y


def walk(node: Node) -> Iterator[Node]:
    yield node
    for c in children(node):
        yield from walk(c)


def walk_exprs(node: Node) -> Iterator[Expr]:
    for n in walk(node):
        if isinstance(n, Expr):
            yield n


def module_exprs(module: ModuleAst) -> Iterator[Expr]:
    """Every expression in the module's items (not declarations)."""
    for item in module.items:
        yield from walk_exprs(item)


def canonical(node: Union[Node, None]):
    """Nested-tuple form ignoring ids, positions, and width annotations.

    Used for structural equality, hashing, and subexpression keys.
    """
    if node is None:
        return None
    parts = [type(node).__name__]
    for f in fields(node):
        if f.name in _SKIP_FIELDS:
            continue
        v = getattr(node, f.name)
        if isinstance(v, Node):
            parts.append(canonical(v))
        elif isinstance(v, list):
            parts.append(tuple(
                canonical(x) if isinstance(x, Node)
                else tuple(canonical(y) if isinstance(y, Node) else y for y in x)
                if isinstance(x, tuple) else x
                for x in v
            ))
        elif isinstance(v, dict):
            parts.append(tuple(sorted(v.items())))
        else:
            parts.append(v)
    return tuple(parts)


def structural_eq(a: Node, b: Node) -> bool:
    """True when the trees are identical up to node ids and positions."""
    return canonical(a) == canonical(b)


def structural_hash(node: Node) -> str:
    return hashlib.sha256(repr(canonical(node)).encode()).hexdigest()


def renumber(design: DesignAst) -> None:
    """Assign unique, dense node ids across the whole design.

    Rebuilds the source map from node positions recorded by the parser;
    nodes created by rewrites carry no position and get no map entry.
    """
    counter = itertools.count()
    source_map: dict[int, tuple[str, int, int]] = {}
    for m in design.modules:
        for n in walk(m):
            n.nid = next(counter)
            if n.pos is not None:
                source_map[n.nid] = (design.filename, n.pos[0], n.pos[1])
    design.source_map = source_map


def clone(node):
    """Deep copy of a subtree (fresh node objects, no ids/positions)."""
    if node is None:
        return None
    kwargs = {}
    for f in fields(node):
        if f.name in _SKIP_FIELDS:
            continue
        v = getattr(node, f.name)
        if isinstance(v, Node):
            kwargs[f.name] = clone(v)
        elif isinstance(v, list):
            out = []
            for x in v:
                if isinstance(x, Node):
                    out.append(clone(x))
                elif isinstance(x, tuple):
                    out.append(tuple(clone(y) if isinstance(y, Node) else y for y in x))
                else:
                    out.append(x)
            kwargs[f.name] = out
        else:
            kwargs[f.name] = v
    return type(node)(**kwargs)
