"""Inline a design's instance hierarchy into one flat module.

Needed because the simulator runs single modules.  Child declarations are
renamed ``<instance>__<name>``; parameters are substituted by value.  Input
ports become wires driven by the connection expression; output ports
connect back through a continuous assignment (so output connections must
be plain identifiers, bits, or slices on the parent side).
"""

from __future__ import annotations

from ..errors import CycleError, ElaborationError, UnknownModule
from ..frontend import ast as A
from ..frontend.width import annotate_module


def flatten(design: A.DesignAst, top: str) -> A.ModuleAst:
    by_name = {m.name: m for m in design.modules}
    if top not in by_name:
        raise UnknownModule(f"top module {top!r} not found")
    _check_acyclic(by_name, top)
    flat = _flatten_module(by_name, by_name[top], prefix="")
    flat.name = top
    seen: set[str] = set()
    for name in ([p.name for p in flat.ports] + [n.name for n in flat.nets]):
        if name in seen:
            raise ElaborationError(f"flattening produced duplicate name {name!r}")
        seen.add(name)
    annotate_module(flat)
    return flat


def _check_acyclic(by_name: dict[str, A.ModuleAst], top: str) -> None:
    state: dict[str, int] = {}

    def visit(name: str, chain: list[str]) -> None:
        if state.get(name) == 2 or name not in by_name:
            return
        if state.get(name) == 1:
            raise CycleError("instantiation cycle: " + " -> ".join(chain + [name]))
        state[name] = 1
        for item in by_name[name].items:
            if isinstance(item, A.Instance):
                visit(item.module, chain + [name])
        state[name] = 2

    visit(top, [])


def _subst(expr: A.Expr, rename: dict[str, str], params: dict[str, int]) -> A.Expr:
    expr = A.clone(expr)

    def rec(e: A.Expr) -> A.Expr:
        if isinstance(e, A.Ident):
            if e.name in params:
                return A.Literal(params[e.name])
            if e.name in rename:
                e.name = rename[e.name]
            return e
        for f in ("base", "index", "part", "operand", "left", "right",
                  "cond", "then", "other"):
            if hasattr(e, f):
                setattr(e, f, rec(getattr(e, f)))
        if isinstance(e, A.Concat):
            e.parts = [rec(p) for p in e.parts]
        return e

    return rec(expr)


def _subst_stmt(s: A.Stmt, rename: dict[str, str], params: dict[str, int]) -> A.Stmt:
    if isinstance(s, A.Assign):
        return A.Assign(_subst(s.lhs, rename, params),
                        _subst(s.rhs, rename, params), s.blocking)
    if isinstance(s, A.If):
        return A.If(_subst(s.cond, rename, params),
                    _subst_stmt(s.then, rename, params),
                    _subst_stmt(s.other, rename, params)
                    if s.other is not None else None)
    if isinstance(s, A.Case):
        arms = [A.CaseArm(
            [_subst(lab, rename, params) for lab in arm.labels]
            if arm.labels is not None else None,
            _subst_stmt(arm.body, rename, params)) for arm in s.arms]
        return A.Case(s.kind, _subst(s.subject, rename, params), arms)
    if isinstance(s, A.Begin):
        return A.Begin([_subst_stmt(x, rename, params) for x in s.stmts])
    raise ElaborationError(f"cannot flatten statement {type(s).__name__}")


def _flatten_module(by_name: dict[str, A.ModuleAst], mod: A.ModuleAst,
                    prefix: str) -> A.ModuleAst:
    """Returns a copy of mod with all instances inlined; nested names get
    the instance path as a prefix."""
    out = A.ModuleAst(name=mod.name)
    if not prefix:
        out.ports = [A.Port(p.name, p.direction, p.width, p.reg)
                     for p in mod.ports]
        out.params = [A.Param(p.name, p.value, p.size, p.local)
                      for p in mod.params]
    for n in mod.nets:
        out.nets.append(A.Net(prefix + n.name if prefix else n.name,
                              n.kind, n.width, n.depth))

    rename: dict[str, str] = {}
    params: dict[str, int] = {}
    if prefix:
        for p in mod.ports:
            rename[p.name] = prefix + p.name
        for n in mod.nets:
            rename[n.name] = prefix + n.name
        for p in mod.params:
            params[p.name] = p.value

    for item in mod.items:
        if isinstance(item, A.ContAssign):
            out.items.append(A.ContAssign(_subst(item.lhs, rename, params),
                                          _subst(item.rhs, rename, params)))
        elif isinstance(item, A.Always):
            sens = A.SensList(item.sens.star,
                              [(e, rename.get(s, s)) for e, s in item.sens.edges])
            out.items.append(A.Always(sens, _subst_stmt(item.body, rename, params)))
        elif isinstance(item, A.Instance):
            child = by_name.get(item.module)
            if child is None:
                raise UnknownModule(
                    f"cannot flatten: module {item.module!r} (instance "
                    f"{item.name!r}) is not defined in this design")
            child_prefix = (prefix + item.name + "__")
            # port shells
            child_ports = {p.name: p for p in child.ports}
            for pname, expr in item.conns:
                if pname is None:
                    raise ElaborationError(
                        f"instance {item.name!r}: unresolved positional "
                        "connection")
                port = child_ports.get(pname)
                if port is None:
                    raise ElaborationError(
                        f"instance {item.name!r}: no port {pname!r} on "
                        f"{item.module!r}")
                if port.direction == "inout":
                    raise ElaborationError(
                        f"instance {item.name!r}: inout port {pname!r} "
                        "cannot be flattened")
            inlined = _flatten_module(by_name, child, child_prefix)
            # child ports become nets of the flat module
            for p in child.ports:
                out.nets.append(A.Net(child_prefix + p.name,
                                      "reg" if p.reg else "wire", p.width))
            out.nets.extend(inlined.nets)
            out.items.extend(inlined.items)
            for pname, expr in item.conns:
                port = child_ports[pname]
                shell = A.Ident(child_prefix + pname)
                if expr is None:
                    continue  # unconnected port: input reads 0, output unused
                pexpr = _subst(expr, rename, params)
                if port.direction == "input":
                    out.items.append(A.ContAssign(shell, pexpr))
                else:
                    if not isinstance(pexpr, (A.Ident, A.Index, A.PartSelect)):
                        raise ElaborationError(
                            f"instance {item.name!r}: output port {pname!r} "
                            "must connect to a net, bit, or slice")
                    out.items.append(A.ContAssign(pexpr, shell))
        else:
            raise ElaborationError(f"cannot flatten {type(item).__name__}")
    return out
