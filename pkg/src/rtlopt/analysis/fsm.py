"""FSM extraction from the registered-case idiom, plus re-emission.

Detected shapes:

  one-process:  always @(posedge clk) begin
                  if (rst) state <= C0;
                  else case (state) ... endcase
                end
  two-process:  the sequential block assigns `state <= next` and a
                combinational block dispatches `case (state)` writing only
                constant codes to `next`.

Case arms may carry nested if/else or ternary next-state selection; the
extracted transitions keep chain order, so a None guard means "any input"
at that priority.  Unconditional constant assignments to other registers
inside an arm (or a separate combinational case on the state register)
become per-state outputs.  Any read of the state register outside the
recognized structure marks the spec observable, which blocks state
merging downstream.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from itertools import product

from ..frontend import ast as A
from ..frontend.width import eval_const, symbol_table


@dataclass
class FsmSpec:
    state_reg: str
    width: int
    states: list[int]
    # ordered (from-state, guard, to-state); guard None fires unconditionally
    transitions: list[tuple[int, A.Expr | None, int]]
    outputs: dict[int, dict[str, int]]
    reset_state: int | None = None
    inputs: dict[str, int] = field(default_factory=dict)
    output_widths: dict[str, int] = field(default_factory=dict)
    clock: str = "clk"
    reset: tuple[str, bool] | None = None     # (net, active_low)
    observable: bool = False
    carrier: str | None = None                # next-state net, if 2-process
    # indices into module.items claimed by this machine, and which output
    # nets are written inside the sequential arms (registered) as opposed
    # to a combinational output case
    item_indices: list[int] = field(default_factory=list)
    registered_outputs: set[str] = field(default_factory=set)

    def arcs_from(self, state: int) -> list[tuple[A.Expr | None, int]]:
        return [(g, t) for f, g, t in self.transitions if f == state]


def _flat(st: A.Stmt) -> list[A.Stmt]:
    return list(st.stmts) if isinstance(st, A.Begin) else [st]


def _const(e: A.Expr, params: dict[str, int]) -> int | None:
    return eval_const(e, params) if e is not None else None


def _reset_shape(cond: A.Expr) -> tuple[str, bool] | None:
    if isinstance(cond, A.Ident):
        return cond.name, False
    if (isinstance(cond, A.Unary) and cond.op in ("!", "~") and
            isinstance(cond.operand, A.Ident)):
        return cond.operand.name, True
    return None


class _NotFsm(Exception):
    pass


class _ArmParse:
    """Collects transitions and outputs from one case arm body."""

    def __init__(self, carrier: str, params: dict[str, int],
                 allowed_reads: list[int]):
        self.carrier = carrier
        self.params = params
        self.allowed = allowed_reads
        self.arcs: list[tuple[A.Expr | None, int | str]] = []
        self.outs: dict[str, int] = {}
        self.observable = False

    def walk(self, st: A.Stmt) -> None:
        for s in _flat(st):
            self._one(s)

    def _one(self, s: A.Stmt) -> None:
        if isinstance(s, A.Assign):
            name = s.lhs.name if isinstance(s.lhs, A.Ident) else None
            if name == self.carrier:
                self._carrier_assign(s.rhs)
            elif name is not None:
                c = _const(s.rhs, self.params)
                if c is None:
                    self.observable = True
                else:
                    self.outs[name] = c
            else:
                self.observable = True
        elif isinstance(s, A.If):
            branches = [s.then] + ([s.other] if s.other is not None else [])
            for i, br in enumerate(branches):
                sub = _ArmParse(self.carrier, self.params, self.allowed)
                sub.walk(br)
                if i == 0:
                    self.arcs.extend((self._conj(s.cond, g), t)
                                     for g, t in sub.arcs)
                else:
                    self.arcs.extend(sub.arcs)
                self.observable |= sub.observable
                if sub.outs:
                    # conditionally assigned outputs are input-dependent
                    self.observable = True
        elif isinstance(s, A.Begin):
            self.walk(s)
        else:
            raise _NotFsm

    def _carrier_assign(self, rhs: A.Expr) -> None:
        c = _const(rhs, self.params)
        if c is not None:
            self.arcs.append((None, c))
            return
        if isinstance(rhs, A.Ident) and rhs.name == self.carrier:
            self.allowed.append(id(rhs))
            return                          # explicit hold; implicit self-loop
        if isinstance(rhs, A.Ternary):
            a = _const(rhs.then, self.params)
            b = _const(rhs.other, self.params)
            if a is not None and b is not None:
                self.arcs.append((rhs.cond, a))
                self.arcs.append((None, b))
                return
        raise _NotFsm

    @staticmethod
    def _conj(c: A.Expr, g: A.Expr | None) -> A.Expr:
        return c if g is None else A.Binary("&&", c, g)


def _parse_case(case: A.Case, carrier: str, params: dict[str, int],
                allowed_reads: list[int]):
    """Returns (per-arm list of (labels|None, arcs, outs), observable)."""
    arms = []
    observable = False
    for arm in case.arms:
        labels: list[int] | None
        if arm.labels is None:
            labels = None
        else:
            labels = []
            for lab in arm.labels:
                v = _const(lab, params)
                if v is None:
                    raise _NotFsm
                labels.append(v)
        p = _ArmParse(carrier, params, allowed_reads)
        p.walk(arm.body)
        observable |= p.observable
        arms.append((labels, p.arcs, p.outs))
    return arms, observable


def _case_in(stmts: list[A.Stmt]) -> A.Case | None:
    cases = [s for s in stmts if isinstance(s, A.Case)]
    return cases[0] if len(cases) == 1 and all(
        isinstance(s, A.Case) for s in stmts) else None


def extract_fsm(module: A.ModuleAst) -> list[FsmSpec]:
    params = {p.name: p.value for p in module.params}
    syms = symbol_table(module)
    specs = []
    seq_blocks = [(i, it) for i, it in enumerate(module.items)
                  if isinstance(it, A.Always) and not it.sens.star]
    comb_blocks = [(i, it) for i, it in enumerate(module.items)
                   if isinstance(it, A.Always) and it.sens.star]
    for idx, blk in seq_blocks:
        try:
            spec = _extract_one(module, idx, blk, comb_blocks, params, syms)
        except _NotFsm:
            continue
        if spec is not None:
            specs.append(spec)
    return specs


def _extract_one(module, blk_idx, blk, comb_blocks, params, syms):
    stmts = _flat(blk.body)
    reset = None
    reset_state = None
    dispatch = stmts
    allowed_reads: list[int] = []

    if len(stmts) == 1 and isinstance(stmts[0], A.If):
        top = stmts[0]
        shape = _reset_shape(top.cond)
        if shape is None or top.other is None:
            raise _NotFsm
        then = _flat(top.then)
        if len(then) != 1 or not isinstance(then[0], A.Assign):
            raise _NotFsm
        tgt = then[0].lhs
        if not isinstance(tgt, A.Ident):
            raise _NotFsm
        rc = _const(then[0].rhs, params)
        if rc is None:
            raise _NotFsm
        state_reg = tgt.name
        reset = shape
        reset_state = rc
        dispatch = _flat(top.other)
    else:
        state_reg = None

    case = _case_in(dispatch)
    used_comb_idx: set[int] = set()
    if case is not None:
        # one-process: the case lives in the sequential block
        if not isinstance(case.subject, A.Ident):
            raise _NotFsm
        subj = case.subject.name
        if state_reg is not None and subj != state_reg:
            raise _NotFsm
        state_reg = subj
        carrier = subj
        allowed_reads.append(id(case.subject))
        arms, observable = _parse_case(case, carrier, params, allowed_reads)
    else:
        # two-process: sequential block must be `state <= next`
        if len(dispatch) != 1 or not isinstance(dispatch[0], A.Assign):
            raise _NotFsm
        upd = dispatch[0]
        if not (isinstance(upd.lhs, A.Ident) and
                isinstance(upd.rhs, A.Ident)):
            raise _NotFsm
        if state_reg is not None and upd.lhs.name != state_reg:
            raise _NotFsm
        state_reg = upd.lhs.name
        carrier = upd.rhs.name
        allowed_reads.append(id(upd.rhs))
        case = None
        for ci, cblk in comb_blocks:
            found = _next_case(cblk, state_reg, carrier, params,
                               allowed_reads)
            if found is not None:
                case, arms, observable = found
                used_comb_idx.add(ci)
                break
        if case is None:
            raise _NotFsm

    if state_reg not in syms:
        raise _NotFsm

    # resolve default arm and build the transition list
    labeled: dict[int, tuple[list, dict]] = {}
    default: tuple[list, dict] | None = None
    for labels, arcs, outs in arms:
        if labels is None:
            default = (arcs, outs)
        else:
            for lab in labels:
                labeled[lab] = (arcs, outs)
    states = set(labeled)
    if reset_state is not None:
        states.add(reset_state)
    for arcs, _ in list(labeled.values()) + ([default] if default else []):
        for _, t in arcs:
            states.add(t)
    states = sorted(states)
    transitions = []
    outputs: dict[int, dict[str, int]] = {}
    registered: set[str] = set()
    for s in states:
        arcs, outs = labeled.get(s, default or ([], {}))
        transitions.extend((s, g, t) for g, t in arcs)
        if outs:
            outputs[s] = dict(outs)
            registered |= set(outs)

    # Moore outputs from separate combinational case-on-state blocks
    for ci, cblk in comb_blocks:
        if ci in used_comb_idx:
            continue
        got = _output_case(cblk, state_reg, params, allowed_reads)
        if got is None:
            continue
        used_comb_idx.add(ci)
        base, default_outs, per_state = got
        for s in states:
            vals = dict(base)
            vals.update(per_state.get(s, default_outs))
            if vals:
                outputs.setdefault(s, {}).update(vals)

    observable |= _foreign_reads(module, state_reg, carrier, allowed_reads)

    guards = [g for _, g, _ in transitions if g is not None]
    inputs: dict[str, int] = {}
    for g in guards:
        for e in A.walk_exprs(g):
            if isinstance(e, A.Ident) and e.name not in params:
                if e.name in (state_reg, carrier):
                    observable = True
                elif e.name in syms:
                    inputs[e.name] = syms[e.name].width
    out_widths = {}
    for vals in outputs.values():
        for name in vals:
            if name in syms:
                out_widths[name] = syms[name].width

    clock = next((sig for edge, sig in blk.sens.edges if edge == "posedge"),
                 None)
    if clock is None:
        raise _NotFsm
    return FsmSpec(
        state_reg=state_reg, width=syms[state_reg].width, states=states,
        transitions=transitions, outputs=outputs, reset_state=reset_state,
        inputs=inputs, output_widths=out_widths, clock=clock, reset=reset,
        observable=observable,
        carrier=carrier if carrier != state_reg else None,
        item_indices=sorted({blk_idx} | used_comb_idx),
        registered_outputs=registered)


def _next_case(cblk: A.Always, state_reg: str, carrier: str,
               params: dict[str, int], allowed_reads: list[int]):
    """Match a combinational block computing the next-state carrier."""
    stmts = _flat(cblk.body)
    case = None
    for s in stmts:
        if isinstance(s, A.Case):
            if case is not None:
                return None
            case = s
        elif isinstance(s, A.Assign) and isinstance(s.lhs, A.Ident) \
                and s.lhs.name == carrier \
                and isinstance(s.rhs, A.Ident) \
                and s.rhs.name == state_reg:
            allowed_reads.append(id(s.rhs))   # default-hold prologue
        else:
            return None
    if case is None or not isinstance(case.subject, A.Ident) \
            or case.subject.name != state_reg:
        return None
    allowed_reads.append(id(case.subject))
    try:
        arms, observable = _parse_case(case, carrier, params, allowed_reads)
    except _NotFsm:
        return None
    if not any(arcs for _, arcs, _ in arms):
        return None
    return case, arms, observable


def _output_case(cblk: A.Always, state_reg: str, params: dict[str, int],
                 allowed_reads: list[int]):
    """Match a combinational Moore-output block: optional constant
    prologue assignments, then case (state) with constant arm bodies."""
    stmts = _flat(cblk.body)
    base: dict[str, int] = {}
    case = None
    for s in stmts:
        if isinstance(s, A.Case):
            if case is not None:
                return None
            case = s
        elif isinstance(s, A.Assign) and isinstance(s.lhs, A.Ident):
            c = _const(s.rhs, params)
            if c is None or case is not None:
                return None
            base[s.lhs.name] = c
        else:
            return None
    if case is None or not isinstance(case.subject, A.Ident) \
            or case.subject.name != state_reg:
        return None
    per_state: dict[int, dict[str, int]] = {}
    default_outs: dict[str, int] = {}
    for arm in case.arms:
        outs: dict[str, int] = {}
        for s in _flat(arm.body):
            if not (isinstance(s, A.Assign) and isinstance(s.lhs, A.Ident)):
                return None
            c = _const(s.rhs, params)
            if c is None:
                return None
            outs[s.lhs.name] = c
        if arm.labels is None:
            default_outs = outs
            continue
        for lab in arm.labels:
            v = _const(lab, params)
            if v is None:
                return None
            per_state[v] = outs
    allowed_reads.append(id(case.subject))
    return base, default_outs, per_state


def _read_positions(module: A.ModuleAst):
    """Ident nodes in read position (lvalue bases excluded)."""

    def lvalue_reads(lhs):
        while isinstance(lhs, (A.Index, A.PartSelect)):
            if isinstance(lhs, A.Index):
                yield from A.walk_exprs(lhs.index)
            lhs = lhs.base

    def stmt_reads(st):
        if isinstance(st, A.Assign):
            yield from A.walk_exprs(st.rhs)
            yield from lvalue_reads(st.lhs)
        elif isinstance(st, A.If):
            yield from A.walk_exprs(st.cond)
            yield from stmt_reads(st.then)
            if st.other is not None:
                yield from stmt_reads(st.other)
        elif isinstance(st, A.Case):
            yield from A.walk_exprs(st.subject)
            for arm in st.arms:
                for lab in arm.labels or ():
                    yield from A.walk_exprs(lab)
                yield from stmt_reads(arm.body)
        elif isinstance(st, A.Begin):
            for s in st.stmts:
                yield from stmt_reads(s)

    for item in module.items:
        if isinstance(item, A.ContAssign):
            yield from A.walk_exprs(item.rhs)
            yield from lvalue_reads(item.lhs)
        elif isinstance(item, A.Always):
            yield from stmt_reads(item.body)
        elif isinstance(item, A.Instance):
            for _, expr in item.conns:
                if expr is not None:
                    yield from A.walk_exprs(expr)


def _foreign_reads(module, state_reg: str, carrier: str,
                   allowed: list[int]) -> bool:
    allowed_set = set(allowed)
    for e in _read_positions(module):
        if isinstance(e, A.Ident) and e.name in (state_reg, carrier):
            if id(e) not in allowed_set:
                return True
    return False


# --------------------------------------------------------------------------
# re-emission


def _lit(value: int, width: int) -> A.Literal:
    return A.Literal(value, width)


def _chain(spec: FsmSpec, arcs, hold: A.Stmt) -> A.Stmt:
    """Ordered arcs to an if/else chain; arcs after a None guard are dead."""
    w = spec.width
    chain: A.Stmt = hold
    cut = len(arcs)
    for i, (g, _) in enumerate(arcs):
        if g is None:
            cut = i + 1
            break
    live = arcs[:cut]
    for g, t in reversed(live):
        assign = A.Assign(A.Ident(spec.state_reg), _lit(t, w), blocking=False)
        if g is None:
            chain = assign
        else:
            chain = A.If(copy.deepcopy(g), assign, chain)
    return chain


def emit_fsm_module(spec: FsmSpec, name: str = "fsm") -> A.ModuleAst:
    """Build a one-process module realizing the spec.  Extraction of the
    result reproduces the spec's states and transitions."""
    w = spec.width
    m = A.ModuleAst(name=name)
    m.ports.append(A.Port(spec.clock, "input", 1))
    if spec.reset_state is not None:
        rname = spec.reset[0] if spec.reset else "rst"
        m.ports.append(A.Port(rname, "input", 1))
    for iname in sorted(spec.inputs):
        m.ports.append(A.Port(iname, "input", spec.inputs[iname]))
    out_names = sorted({n for vals in spec.outputs.values() for n in vals})
    for oname in out_names:
        m.ports.append(A.Port(oname, "output",
                              spec.output_widths.get(oname, 1), reg=True))
    m.nets.append(A.Net(spec.state_reg, "reg", w))

    arms = []
    for s in spec.states:
        hold = A.Assign(A.Ident(spec.state_reg), A.Ident(spec.state_reg),
                        blocking=False)
        arms.append(A.CaseArm([_lit(s, w)],
                              _chain(spec, spec.arcs_from(s), hold)))
    case = A.Case("case", A.Ident(spec.state_reg), arms)
    if spec.reset_state is not None:
        rname = spec.reset[0] if spec.reset else "rst"
        active_low = spec.reset[1] if spec.reset else False
        cond: A.Expr = A.Ident(rname)
        if active_low:
            cond = A.Unary("!", cond)
        body: A.Stmt = A.If(
            cond,
            A.Assign(A.Ident(spec.state_reg), _lit(spec.reset_state, w),
                     blocking=False),
            case)
    else:
        body = case
    m.items.append(A.Always(
        A.SensList(star=False, edges=[("posedge", spec.clock)]), body))

    if out_names:
        prologue = [A.Assign(A.Ident(n), _lit(0, spec.output_widths.get(n, 1)))
                    for n in out_names]
        oarms = []
        for s in spec.states:
            vals = spec.outputs.get(s, {})
            body_stmts = [A.Assign(A.Ident(n),
                                   _lit(v, spec.output_widths.get(n, 1)))
                          for n, v in sorted(vals.items())]
            if body_stmts:
                oarms.append(A.CaseArm([_lit(s, w)], A.Begin(body_stmts)))
        ocase = A.Case("case", A.Ident(spec.state_reg), oarms)
        m.items.append(A.Always(A.SensList(star=True),
                                A.Begin(prologue + [ocase])))
    return m


# --------------------------------------------------------------------------
# guard enumeration (used by state minimization)

MAX_GUARD_BITS = 12


def transition_table(spec: FsmSpec):
    """Enumerate guard-input valuations and tabulate the step function.

    Returns (letters, delta) where letters is the list of input valuations
    (tuples in sorted-input order) and delta maps (state, letter index) to
    the successor, implicit self-loops included.
    """
    names = sorted(spec.inputs)
    widths = [spec.inputs[n] for n in names]
    total = sum(widths)
    if total > MAX_GUARD_BITS:
        raise ValueError(
            f"guard input space of {total} bits exceeds {MAX_GUARD_BITS}")
    guards = []
    seen: dict[int, int] = {}
    for _, g, _ in spec.transitions:
        if g is not None and id(g) not in seen:
            seen[id(g)] = len(guards)
            guards.append(g)
    letters = list(product(*[range(1 << w) for w in widths]))
    if guards:
        fire = _evaluate_guards(guards, names, widths, letters)
    else:
        fire = [[True] * len(letters)]
    delta: dict[tuple[int, int], int] = {}
    for s in spec.states:
        arcs = spec.arcs_from(s)
        for li in range(len(letters)):
            nxt = s
            for g, t in arcs:
                if g is None or fire[seen[id(g)]][li]:
                    nxt = t
                    break
            delta[(s, li)] = nxt
    return letters, delta


def _evaluate_guards(guards, names, widths, letters):
    from ..sim import Engine

    probe = A.ModuleAst(name="_guards")
    for n, w in zip(names, widths):
        probe.ports.append(A.Port(n, "input", w))
    for i, g in enumerate(guards):
        probe.ports.append(A.Port(f"g{i}", "output", 1))
        probe.items.append(A.ContAssign(
            A.Ident(f"g{i}"),
            A.Ternary(copy.deepcopy(g), _lit(1, 1), _lit(0, 1))))
    eng = Engine(probe)
    rows = [list(v) for v in letters]
    out = eng.run_comb_rows(rows)
    fire = [[bool(out[r][i]) for r in range(len(letters))]
            for i in range(len(guards))]
    return fire
