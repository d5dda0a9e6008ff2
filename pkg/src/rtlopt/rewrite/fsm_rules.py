"""State machine rewrites: minimization and re-encoding.

``minimize_fsm`` and ``assign_states`` transform an extracted machine
description; ``apply_minimize`` and ``apply_assign`` run them against a
module by extracting, transforming, and splicing a one-process
re-emission over the items the original machine occupied.

Storage zero-initializes, so the state holding code 0 is the de-facto
power-up state: the module-level appliers keep code 0's behavior
bit-identical, either by preserving that state's code or, when the new
encoding leaves code 0 unused, by emitting default arms that mirror it.
"""

from __future__ import annotations

import copy
from dataclasses import replace

from ..frontend import ast as A
from ..analysis.fsm import FsmSpec, extract_fsm, transition_table
from .base import clone_module, lit, reannotate

ENCODING_STYLES = ("binary", "gray", "onehot", "frequency")


# ---------------------------------------------------------------- pure ops

def minimize_fsm(spec: FsmSpec) -> FsmSpec:
    """Drop unreachable states, then merge behaviorally equivalent ones.

    Reachability starts from the reset state and from code 0 (the
    power-up value) when the machine has such a state; a machine with
    neither keeps all states.  Equivalence is the coarsest partition
    refinement over the complete input alphabet, seeded by output
    signatures.  Returns the input spec unchanged when already minimal.
    """
    letters, delta = transition_table(spec)

    start = set()
    if spec.reset_state is not None:
        start.add(spec.reset_state)
    if 0 in spec.states:
        start.add(0)
    if not start:
        reach = set(spec.states)
    else:
        reach = set(start)
        frontier = list(start)
        while frontier:
            s = frontier.pop()
            for li in range(len(letters)):
                t = delta[(s, li)]
                if t not in reach:
                    reach.add(t)
                    frontier.append(t)

    def out_sig(s: int) -> tuple:
        return tuple(sorted(spec.outputs.get(s, {}).items()))

    sigs = {sig: i for i, sig in enumerate(sorted({out_sig(s) for s in reach}))}
    block = {s: sigs[out_sig(s)] for s in reach}
    while True:
        keys = {s: (block[s],) + tuple(block[delta[(s, li)]]
                                       for li in range(len(letters)))
                for s in reach}
        ids = {k: i for i, k in enumerate(sorted(set(keys.values())))}
        nxt = {s: ids[keys[s]] for s in reach}
        if nxt == block:
            break
        block = nxt

    rep_of = {}
    for s in reach:
        rep_of[s] = min(t for t in reach if block[t] == block[s])
    reps = sorted(set(rep_of.values()))
    if len(reps) == len(spec.states):
        return spec

    transitions = []
    for s in reps:
        for g, t in spec.arcs_from(s):
            if t not in reach:
                # the exhaustive table proved this arc never fires
                continue
            transitions.append((s, copy.deepcopy(g) if g is not None else None,
                                rep_of[t]))
    return replace(
        spec,
        states=reps,
        transitions=transitions,
        outputs={s: dict(spec.outputs[s]) for s in reps if s in spec.outputs},
        reset_state=(rep_of[spec.reset_state]
                     if spec.reset_state is not None else None),
        carrier=None, item_indices=[])


def _frequency_codes(spec: FsmSpec) -> dict[int, int]:
    """Pack the most frequently linked state pairs into adjacent codes."""
    freq: dict[tuple[int, int], int] = {}
    for f, _, t in spec.transitions:
        if f == t:
            continue
        pair = (f, t) if f < t else (t, f)
        freq[pair] = freq.get(pair, 0) + 1
    codes: dict[int, int] = {}
    counter = 0
    for pair in sorted(freq, key=lambda p: (-freq[p], p)):
        a, b = pair
        if a not in codes and b not in codes:
            codes[a] = counter
            codes[b] = counter + 1
            counter += 2
        elif (a in codes) != (b in codes):
            missing = b if a in codes else a
            codes[missing] = counter
            counter += 1
    for s in spec.states:
        if s not in codes:
            codes[s] = counter
            counter += 1
    return codes


def assign_states(spec: FsmSpec, style: str = "binary") -> dict[int, int]:
    """Map each state to its code under the requested encoding style."""
    if style not in ENCODING_STYLES:
        raise ValueError(f"unknown encoding style {style!r}")
    order = {s: i for i, s in enumerate(spec.states)}
    if style == "binary":
        return dict(order)
    if style == "gray":
        return {s: i ^ (i >> 1) for s, i in order.items()}
    if style == "onehot":
        return {s: 1 << i for s, i in order.items()}
    return _frequency_codes(spec)


def code_width(n_states: int, style: str) -> int:
    if style == "onehot":
        return max(1, n_states)
    return max(1, (n_states - 1).bit_length())


# ---------------------------------------------------- module-level appliers

def _eligible(spec: FsmSpec, module: A.ModuleAst) -> bool:
    if spec.observable:
        return False
    if 0 not in spec.states:
        return False
    port_names = {p.name for p in module.ports}
    if spec.state_reg in port_names:
        return False
    if spec.carrier is not None and spec.carrier in port_names:
        return False
    # a name driven from both the sequential arms and a combinational
    # output block would collapse into one assignment on re-emission
    comb_assigned: set[str] = set()
    for i in spec.item_indices:
        item = module.items[i]
        if isinstance(item, A.Always) and item.sens.star:
            for node in A.walk(item.body):
                if isinstance(node, A.Assign) and isinstance(node.lhs, A.Ident):
                    comb_assigned.add(node.lhs.name)
    if comb_assigned & spec.registered_outputs:
        return False
    # combinational outputs must be pinned in every state, otherwise the
    # original block latches where the re-emission would drive zero
    all_names = {n for vals in spec.outputs.values() for n in vals}
    comb_names = all_names - spec.registered_outputs
    if comb_names and any(not comb_names <= spec.outputs.get(s, {}).keys()
                          for s in spec.states):
        return False
    return True


def _first_eligible(module: A.ModuleAst) -> FsmSpec | None:
    for spec in extract_fsm(module):
        if _eligible(spec, module):
            return spec
    return None


def _arm_body(spec: FsmSpec, state: int) -> A.Stmt:
    """Sequential arm: registered outputs, then the transition chain."""
    stmts: list[A.Stmt] = []
    for name, value in sorted(spec.outputs.get(state, {}).items()):
        if name in spec.registered_outputs:
            stmts.append(A.Assign(A.Ident(name),
                                  lit(value, spec.output_widths.get(name, 1)),
                                  blocking=False))
    arcs = spec.arcs_from(state)
    cut = len(arcs)
    for i, (g, _) in enumerate(arcs):
        if g is None:
            cut = i + 1
            break
    chain: A.Stmt | None = None
    for g, t in reversed(arcs[:cut]):
        assign = A.Assign(A.Ident(spec.state_reg), lit(t, spec.width),
                          blocking=False)
        if g is None:
            chain = assign
        elif chain is None:
            chain = A.If(copy.deepcopy(g), assign)
        else:
            chain = A.If(copy.deepcopy(g), assign, chain)
    if chain is not None:
        stmts.append(chain)
    return A.Begin(stmts)


def _emit_items(spec: FsmSpec, sens: A.SensList,
                default_state: int | None) -> list:
    """One-process machine plus an @* output case for comb outputs."""
    arms = []
    for s in spec.states:
        arms.append(A.CaseArm([lit(s, spec.width)], _arm_body(spec, s)))
    if default_state is not None:
        arms.append(A.CaseArm(None, _arm_body(spec, default_state)))
    case: A.Stmt = A.Case("case", A.Ident(spec.state_reg), arms)
    if spec.reset is not None and spec.reset_state is not None:
        rname, active_low = spec.reset
        cond: A.Expr = A.Ident(rname)
        if active_low:
            cond = A.Unary("!", cond)
        case = A.If(cond,
                    A.Assign(A.Ident(spec.state_reg),
                             lit(spec.reset_state, spec.width),
                             blocking=False),
                    case)
    items = [A.Always(copy.deepcopy(sens), case)]

    comb_outs = sorted({n for vals in spec.outputs.values() for n in vals
                        if n not in spec.registered_outputs})
    if comb_outs:
        prologue = [A.Assign(A.Ident(n),
                             lit(0, spec.output_widths.get(n, 1)))
                    for n in comb_outs]

        def out_stmts(state: int) -> list[A.Stmt]:
            vals = spec.outputs.get(state, {})
            return [A.Assign(A.Ident(n),
                             lit(v, spec.output_widths.get(n, 1)))
                    for n, v in sorted(vals.items()) if n in comb_outs]

        oarms = []
        for s in spec.states:
            stmts = out_stmts(s)
            if stmts:
                oarms.append(A.CaseArm([lit(s, spec.width)], A.Begin(stmts)))
        if default_state is not None:
            stmts = out_stmts(default_state)
            if stmts:
                oarms.append(A.CaseArm(None, A.Begin(stmts)))
        if oarms:
            ocase = A.Case("case", A.Ident(spec.state_reg), oarms)
            items.append(A.Always(A.SensList(star=True),
                                  A.Begin(prologue + [ocase])))
    return items


def _splice(module: A.ModuleAst, old: FsmSpec, new: FsmSpec,
            default_state: int | None = None) -> A.ModuleAst:
    out = clone_module(module)
    consumed = set(old.item_indices)
    sens = None
    for i in old.item_indices:
        item = out.items[i]
        if isinstance(item, A.Always) and not item.sens.star:
            sens = item.sens
            break
    assert sens is not None
    emitted = _emit_items(new, sens, default_state)
    at = min(consumed)
    items = []
    for i, item in enumerate(out.items):
        if i == at:
            items.extend(emitted)
        if i not in consumed:
            items.append(item)
    out.items = items

    nets = []
    for n in out.nets:
        if old.carrier is not None and n.name == old.carrier:
            continue
        if n.name == old.state_reg and n.width != new.width:
            n = A.Net(n.name, n.kind, new.width)
        nets.append(n)
    out.nets = nets
    reannotate(out)
    return out


def apply_minimize(module: A.ModuleAst) -> A.ModuleAst | None:
    spec = _first_eligible(module)
    if spec is None:
        return None
    try:
        new = minimize_fsm(spec)
    except ValueError:
        return None
    if len(new.states) == len(spec.states):
        return None
    return _splice(module, spec, new)


def apply_assign(module: A.ModuleAst,
                 style: str = "binary") -> A.ModuleAst | None:
    if style not in ENCODING_STYLES:
        raise ValueError(f"unknown encoding style {style!r}")
    spec = _first_eligible(module)
    if spec is None:
        return None
    codes = assign_states(spec, style)
    width = code_width(len(spec.states), style)
    if width == spec.width and set(codes.values()) == set(spec.states):
        # same register width, same code set: a bare permutation is
        # invisible to the cost model and re-application would never settle
        return None
    default_state = None
    if codes[0] != 0:
        if 0 in codes.values():
            # another state captured code 0; power-up would impersonate it
            return None
        default_state = codes[0]

    transitions = [(codes[f], copy.deepcopy(g) if g is not None else None,
                    codes[t]) for f, g, t in spec.transitions]
    new = replace(
        spec,
        width=width,
        states=sorted(codes.values()),
        transitions=transitions,
        outputs={codes[s]: dict(v) for s, v in spec.outputs.items()},
        reset_state=(codes[spec.reset_state]
                     if spec.reset_state is not None else None),
        carrier=None, item_indices=[])
    return _splice(module, spec, new, default_state=default_state)
