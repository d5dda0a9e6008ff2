"""Per-module def-use chains with explicit join nodes.

Each use site gets exactly one join node; a chain def -> join -> use exists
for every definition the use can observe without passing another definition
of the same net.  Within an always block, blocking assignments shadow
earlier definitions along straight-line paths; branch arms merge by union.
Non-blocking definitions reach every use of the reg (the read sees the
previous cycle's commit, which is the same site).

Instance connections are module-external dataflow and are deliberately
left out of the chains; nets wired to instances are exempted from the
undriven/unread flags instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..frontend import ast as A


@dataclass(frozen=True)
class DefSite:
    id: int
    net: str
    kind: str          # "input" | "cont" | "blocking" | "nonblocking"
    item: int          # index into module.items; -1 for ports


@dataclass(frozen=True)
class UseSite:
    id: int
    net: str
    item: int          # index into module.items; -1 for output ports


@dataclass
class DefUseGraph:
    defs: dict[str, list[DefSite]] = field(default_factory=dict)
    uses: dict[str, list[UseSite]] = field(default_factory=dict)
    # one join node per use site; join id == use id
    def_join: list[tuple[int, int]] = field(default_factory=list)
    join_use: list[tuple[int, int]] = field(default_factory=list)
    undriven: set[str] = field(default_factory=set)
    unread: set[str] = field(default_factory=set)

    def chains(self) -> list[tuple[int, int, int]]:
        return sorted((d, j, j) for d, j in self.def_join)

    def defs_reaching(self, use_id: int) -> list[int]:
        return sorted(d for d, j in self.def_join if j == use_id)


def _lvalue_name(lhs: A.Expr) -> str | None:
    while isinstance(lhs, (A.Index, A.PartSelect)):
        lhs = lhs.base
    return lhs.name if isinstance(lhs, A.Ident) else None


def _lvalue_reads(lhs: A.Expr):
    """Index expressions inside an lvalue are reads (e.g. mem[addr])."""
    while isinstance(lhs, (A.Index, A.PartSelect)):
        if isinstance(lhs, A.Index):
            yield from A.walk_exprs(lhs.index)
        lhs = lhs.base


def build_def_use(module: A.ModuleAst) -> DefUseGraph:
    g = DefUseGraph()
    declared = {p.name for p in module.ports} | {n.name for n in module.nets}
    params = {p.name for p in module.params}
    instance_nets: set[str] = set()
    next_def = 0
    next_use = 0
    # defs visible outside their defining statement, keyed by net
    global_defs: dict[str, list[int]] = {}
    pending_uses: list[tuple[UseSite, dict[str, set[int]] | None]] = []

    def new_def(net: str, kind: str, item: int) -> int:
        nonlocal next_def
        d = DefSite(next_def, net, kind, item)
        next_def += 1
        g.defs.setdefault(net, []).append(d)
        global_defs.setdefault(net, [])
        return d.id

    def new_use(net: str, item: int, env: dict[str, set[int]] | None) -> None:
        nonlocal next_use
        if net in params or net not in declared:
            return
        u = UseSite(next_use, net, item)
        next_use += 1
        g.uses.setdefault(net, []).append(u)
        # env is a snapshot of in-scope blocking defs at the read point;
        # resolution against global defs happens once all items are walked
        snapshot = {k: set(v) for k, v in env.items()} if env else None
        pending_uses.append((u, snapshot))

    def record_expr(e: A.Expr, item: int,
                    env: dict[str, set[int]] | None) -> None:
        for n in A.walk_exprs(e):
            if isinstance(n, A.Ident):
                new_use(n.name, item, env)

    for p in module.ports:
        if p.direction == "input":
            d = new_def(p.name, "input", -1)
            global_defs[p.name].append(d)

    def walk_stmt(st: A.Stmt, item: int,
                  env: dict[str, set[int]]) -> dict[str, set[int]]:
        if isinstance(st, A.Begin):
            for s in st.stmts:
                env = walk_stmt(s, item, env)
            return env
        if isinstance(st, A.Assign):
            record_expr(st.rhs, item, env)
            for r in _lvalue_reads(st.lhs):
                if isinstance(r, A.Ident):
                    new_use(r.name, item, env)
            net = _lvalue_name(st.lhs)
            if net is None:
                return env
            if st.blocking:
                d = new_def(net, "blocking", item)
                env = dict(env)
                env[net] = {d}
            else:
                d = new_def(net, "nonblocking", item)
                global_defs[net].append(d)
            return env
        if isinstance(st, A.If):
            record_expr(st.cond, item, env)
            env_t = walk_stmt(st.then, item, env)
            env_f = walk_stmt(st.other, item, env) if st.other else env
            return _merge_envs(env_t, env_f)
        if isinstance(st, A.Case):
            record_expr(st.subject, item, env)
            outs = []
            has_default = False
            for arm in st.arms:
                if arm.labels is None:
                    has_default = True
                else:
                    for lab in arm.labels:
                        record_expr(lab, item, env)
                outs.append(walk_stmt(arm.body, item, env))
            if not has_default:
                outs.append(env)
            merged = outs[0]
            for o in outs[1:]:
                merged = _merge_envs(merged, o)
            return merged
        return env

    for idx, item in enumerate(module.items):
        if isinstance(item, A.ContAssign):
            record_expr(item.rhs, idx, None)
            for r in _lvalue_reads(item.lhs):
                if isinstance(r, A.Ident):
                    new_use(r.name, idx, None)
            net = _lvalue_name(item.lhs)
            if net is not None:
                d = new_def(net, "cont", idx)
                global_defs[net].append(d)
        elif isinstance(item, A.Always):
            for _, sig in item.sens.edges:
                new_use(sig, idx, None)
            env_out = walk_stmt(item.body, idx, {})
            for net, ids in env_out.items():
                global_defs[net].extend(sorted(ids))
        elif isinstance(item, A.Instance):
            for _, expr in item.conns:
                if expr is None:
                    continue
                for n in A.walk_exprs(expr):
                    if isinstance(n, A.Ident):
                        instance_nets.add(n.name)

    for p in module.ports:
        if p.direction == "output":
            new_use(p.name, -1, None)

    for u, snapshot in pending_uses:
        reaching: set[int]
        if snapshot and u.net in snapshot:
            reaching = set(snapshot[u.net])
        else:
            reaching = set(global_defs.get(u.net, ()))
        for d in sorted(reaching):
            g.def_join.append((d, u.id))
        g.join_use.append((u.id, u.id))

    for name in sorted(declared - params - instance_nets):
        if name not in g.defs:
            g.undriven.add(name)
        if name not in g.uses:
            g.unread.add(name)
    g.def_join.sort()
    return g


def _merge_envs(a: dict[str, set[int]],
                b: dict[str, set[int]]) -> dict[str, set[int]]:
    out = {k: set(v) for k, v in a.items()}
    for k, v in b.items():
        out.setdefault(k, set()).update(v)
    return out
