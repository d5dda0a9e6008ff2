"""Equivalence checking between an original module and a rewritten candidate.

Three strategies, picked by ``select_solver``:

* ``exhaustive``   - both modules combinational and the total input width
                     fits the enumeration budget; a pass is a proof.
* ``fuzz``         - combinational but too wide to enumerate; a pass is
                     provisional (no mismatch within the vector budget).
* ``bounded-sequential`` - clocked designs; co-simulate several runs from
                     reset for a bounded number of cycles.

Every verdict records the seed that produced it so a failure replays
exactly.  ``Counterexample.replay`` re-simulates both modules and renders
the disagreement as text.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PatternMismatch, PortMismatch, SimulationError
from .frontend import ast as A
from .rng import SplitMix64
from .sim import Engine

_CLOCK_NAMES = ("clk", "clock")
_RESET_HIGH = ("rst", "reset")
_RESET_LOW = ("rst_n", "rstn", "resetn", "reset_n")


@dataclass
class Stimulus:
    """Per-cycle input values.  For combinational modules `cycles` counts
    independent vectors and `clock` stays None."""
    inputs: dict[str, list[int]]
    cycles: int
    clock: str | None = None


@dataclass
class SimTrace:
    outputs: dict[str, list[int]]
    cycles: int


@dataclass
class Counterexample:
    stimulus: Stimulus
    port: str
    cycle: int
    got_a: int
    got_b: int

    def replay(self, a: A.ModuleAst, b: A.ModuleAst) -> str:
        """Re-run both modules on the stored stimulus and format the diff."""
        ta = simulate(a, self.stimulus)
        tb = simulate(b, self.stimulus)
        lines = [f"mismatch on port {self.port!r} at cycle {self.cycle}:"]
        for name, vals in sorted(self.stimulus.inputs.items()):
            lines.append(f"  in  {name} = {vals[self.cycle]}")
        for name in sorted(ta.outputs):
            va = ta.outputs[name][self.cycle]
            vb = tb.outputs[name][self.cycle]
            flag = "  <-- differs" if va != vb else ""
            lines.append(f"  out {name}: {a.name}={va} {b.name}={vb}{flag}")
        return "\n".join(lines)


@dataclass
class EquivalenceResult:
    verdict: str                 # equivalent | not_equivalent | provisional
    method: str                  # exhaustive | fuzz | bounded-sequential
    vectors: int                 # vectors (or total cycles) simulated
    seed: int | None = None
    counterexample: Counterexample | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.verdict != "not_equivalent"

    @property
    def proven(self) -> bool:
        return self.verdict == "equivalent"


# -- clock / reset discovery --------------------------------------------------

def clock_of(module: A.ModuleAst) -> str | None:
    """Name of the clock input, or None for combinational modules."""
    from .sim import compile_module
    p = compile_module(module)
    if not p.seq_segments:
        return None
    inputs = {q.name for q in module.ports if q.direction == "input"}
    for cand in _CLOCK_NAMES:
        if cand in inputs:
            return cand
    guard_names = [set(n for _, _, n in seg.guards) for seg in p.seq_segments]
    common = set.intersection(*guard_names) if guard_names else set()
    every = set().union(*guard_names) if guard_names else set()
    pick = common if len(common) == 1 else every
    if len(pick) == 1:
        (name,) = pick
        if name in inputs:
            return name
    raise SimulationError(
        f"{module.name}: cannot identify the clock input")


def reset_of(module: A.ModuleAst) -> tuple[str, bool] | None:
    """(port, active_low) for a recognized reset input, if present."""
    inputs = {q.name for q in module.ports if q.direction == "input"}
    for cand in _RESET_HIGH:
        if cand in inputs:
            return cand, False
    for cand in _RESET_LOW:
        if cand in inputs:
            return cand, True
    return None


def simulate(module: A.ModuleAst, stim: Stimulus) -> SimTrace:
    eng = Engine(module)
    if stim.clock is not None:
        outs = eng.run_cycles(stim.inputs, stim.cycles, clock=stim.clock)
        return SimTrace(outs, stim.cycles)
    vecs = [{k: v[t] for k, v in stim.inputs.items()}
            for t in range(stim.cycles)]
    rows = eng.run_comb_vectors(vecs)
    outs = {name: [r[name] for r in rows] for name in (rows[0] if rows else {})}
    return SimTrace(outs, stim.cycles)


# -- strategy selection --------------------------------------------------------

def port_signature(module: A.ModuleAst) -> tuple[tuple, tuple]:
    ins = tuple(sorted((q.name, q.width) for q in module.ports
                       if q.direction == "input"))
    outs = tuple(sorted((q.name, q.width) for q in module.ports
                        if q.direction == "output"))
    return ins, outs


def _check_ports(a: A.ModuleAst, b: A.ModuleAst) -> None:
    sa, sb = port_signature(a), port_signature(b)
    if sa != sb:
        raise PortMismatch(
            f"{a.name} and {b.name} expose different ports: {sa} vs {sb}")


def select_solver(a_comb: bool, b_comb: bool, input_bits: int,
                  exhaustive_limit: int = 20) -> str:
    if a_comb != b_comb:
        # a rewrite must not change a module's clocking discipline
        raise PatternMismatch(
            "one module is combinational and the other is clocked")
    if a_comb:
        return "exhaustive" if input_bits <= exhaustive_limit else "fuzz"
    return "bounded-sequential"


# -- vector construction --------------------------------------------------------

def _input_fields(module: A.ModuleAst, skip: set[str]) -> list[tuple[str, int]]:
    return [(q.name, q.width) for q in module.ports
            if q.direction == "input" and q.name not in skip]


def _columns_for(engine: Engine, by_name: dict[str, np.ndarray],
                 n: int) -> np.ndarray:
    names = [name for name, _, _ in engine.program.inputs]
    if not names:
        return np.zeros((n, 0), dtype=np.uint64)
    return np.stack([by_name[name] for name in names], axis=1)


def _first_mismatch(rows_a, rows_b) -> int | None:
    a = np.asarray(rows_a, dtype=np.uint64)
    b = np.asarray(rows_b, dtype=np.uint64)
    if a.shape != b.shape:
        raise PortMismatch(f"output shapes differ: {a.shape} vs {b.shape}")
    neq = a != b
    if not neq.any():
        return None
    return int(np.nonzero(neq.any(axis=1))[0][0])


def _comb_counterexample(vec: dict[str, int], outs_a: dict[str, int],
                         outs_b: dict[str, int]) -> Counterexample:
    port = next(n for n in sorted(outs_a) if outs_a[n] != outs_b[n])
    stim = Stimulus({k: [v] for k, v in vec.items()}, 1, None)
    return Counterexample(stim, port, 0, outs_a[port], outs_b[port])


def _run_comb_check(a: A.ModuleAst, b: A.ModuleAst, ea: Engine, eb: Engine,
                    by_name: dict[str, np.ndarray], n: int, method: str,
                    seed: int | None) -> EquivalenceResult:
    rows_a = ea.run_comb_rows(_columns_for(ea, by_name, n))
    rows_b = eb.run_comb_rows(_columns_for(eb, by_name, n))
    names_a = [x for x, _, _ in ea.program.outputs]
    names_b = [x for x, _, _ in eb.program.outputs]
    order = [names_b.index(x) for x in names_a]
    arr_b = np.asarray(rows_b, dtype=np.uint64)
    if arr_b.ndim == 1:
        arr_b = arr_b.reshape(0, len(names_b))
    idx = _first_mismatch(rows_a, arr_b[:, order])
    if idx is None:
        verdict = "equivalent" if method == "exhaustive" else "provisional"
        return EquivalenceResult(verdict, method, n, seed)
    vec = {k: int(v[idx]) for k, v in by_name.items()}
    (oa,) = ea.run_comb_vectors([vec])
    (ob,) = eb.run_comb_vectors([vec])
    cex = _comb_counterexample(vec, oa, ob)
    return EquivalenceResult("not_equivalent", method, idx + 1, seed, cex)


def _exhaustive_columns(fields: list[tuple[str, int]], lo: int,
                        hi: int) -> dict[str, np.ndarray]:
    idx = np.arange(lo, hi, dtype=np.uint64)
    cols = {}
    shift = 0
    for name, w in fields:
        cols[name] = (idx >> np.uint64(shift)) & np.uint64((1 << w) - 1)
        shift += w
    return cols


def _random_columns(fields: list[tuple[str, int]], n: int,
                    rng: SplitMix64) -> dict[str, np.ndarray]:
    """Boundary rows (all zeros, all ones) first, then uniform random."""
    cols = {name: np.zeros(n, dtype=np.uint64) for name, _ in fields}
    for name, w in fields:
        col = cols[name]
        if n > 1:
            col[1] = (1 << w) - 1
        for i in range(2, n):
            col[i] = rng.next_bits(w)
    return cols


# -- public checks --------------------------------------------------------------

def check_equivalence(a: A.ModuleAst, b: A.ModuleAst, *, seed: int = 0,
                      exhaustive_limit: int = 20, max_vectors: int = 1000,
                      cycles: int = 64, runs: int = 32,
                      method: str | None = None) -> EquivalenceResult:
    """Compare two modules per the strategy table above."""
    _check_ports(a, b)
    ea, eb = Engine(a), Engine(b)
    a_comb = ea.program.is_combinational
    b_comb = eb.program.is_combinational
    fields = _input_fields(a, set())
    bits = sum(w for _, w in fields)
    if method is None:
        method = select_solver(a_comb, b_comb, bits, exhaustive_limit)

    if method == "exhaustive":
        total = 1 << bits
        chunk = 1 << 16
        done = 0
        for lo in range(0, total, chunk):
            hi = min(lo + chunk, total)
            cols = _exhaustive_columns(fields, lo, hi)
            r = _run_comb_check(a, b, ea, eb, cols, hi - lo, method, None)
            done += hi - lo
            if not r.ok:
                return EquivalenceResult(r.verdict, method,
                                         done - (hi - lo) + r.vectors, None,
                                         r.counterexample)
        return EquivalenceResult("equivalent", method, total, None)

    if method == "fuzz":
        rng = SplitMix64(seed)
        cols = _random_columns(fields, max_vectors, rng)
        return _run_comb_check(a, b, ea, eb, cols, max_vectors, method, seed)

    if method == "bounded-sequential":
        return _sequential_check(a, b, ea, eb, seed=seed, cycles=cycles,
                                 runs=runs)
    raise ValueError(f"unknown method {method!r}")


def _sequential_check(a: A.ModuleAst, b: A.ModuleAst, ea: Engine, eb: Engine,
                      *, seed: int, cycles: int, runs: int) -> EquivalenceResult:
    clock = clock_of(a)
    if clock is None:
        clock = clock_of(b)
    reset = reset_of(a)
    skip = {clock} if clock else set()
    fields = _input_fields(a, skip)
    rng = SplitMix64(seed)
    total = 0
    for run in range(runs):
        child = rng.split()
        inputs: dict[str, list[int]] = {}
        for name, w in fields:
            if reset and name == reset[0]:
                active, inactive = (0, 1) if reset[1] else (1, 0)
                inputs[name] = [active] + [inactive] * (cycles - 1)
            else:
                inputs[name] = [child.next_bits(w) for _ in range(cycles)]
        stim = Stimulus(inputs, cycles, clock)
        ta = simulate(a, stim)
        tb = simulate(b, stim)
        total += cycles
        for t in range(cycles):
            for port in sorted(ta.outputs):
                va, vb = ta.outputs[port][t], tb.outputs[port][t]
                if va != vb:
                    cex = Counterexample(stim, port, t, va, vb)
                    return EquivalenceResult("not_equivalent",
                                             "bounded-sequential", total,
                                             seed, cex)
    return EquivalenceResult("provisional", "bounded-sequential", total, seed)


def fuzz_filter(original: A.ModuleAst, candidate: A.ModuleAst,
                n_vectors: int = 1000, seed: int = 0) -> EquivalenceResult:
    """Cheap screen before full verification: random vectors for
    combinational modules, short co-simulated runs for clocked ones."""
    _check_ports(original, candidate)
    ea, eb = Engine(original), Engine(candidate)
    if ea.program.is_combinational and eb.program.is_combinational:
        fields = _input_fields(original, set())
        rng = SplitMix64(seed)
        cols = _random_columns(fields, n_vectors, rng)
        return _run_comb_check(original, candidate, ea, eb, cols,
                               n_vectors, "fuzz", seed)
    runs = max(1, n_vectors // 64)
    return _sequential_check(original, candidate, ea, eb, seed=seed,
                             cycles=64, runs=runs)


def fast_verify(original: A.ModuleAst, candidate: A.ModuleAst,
                seed: int = 0) -> EquivalenceResult:
    """Budgeted check used inside the search loop: exhaustive when small,
    otherwise the fuzz screen."""
    _check_ports(original, candidate)
    ea, eb = Engine(original), Engine(candidate)
    a_comb = ea.program.is_combinational
    b_comb = eb.program.is_combinational
    bits = sum(w for _, w in _input_fields(original, set()))
    method = select_solver(a_comb, b_comb, bits, exhaustive_limit=16)
    if method == "exhaustive":
        return check_equivalence(original, candidate, method="exhaustive")
    if method == "fuzz":
        return fuzz_filter(original, candidate, n_vectors=512, seed=seed)
    return _sequential_check(original, candidate, ea, eb, seed=seed,
                             cycles=32, runs=8)
