"""Two-state cycle-based simulator.

``Engine`` compiles a module once and runs it many times.  Two backends
execute the same bytecode: the Cython kernel (widths <= 64) and the pure
Python interpreter (any width).  Selection happens at import: the kernel is
used when it imported successfully and the program fits, unless the
RTLOPT_SIM_BACKEND environment variable ("native" | "python" | "auto")
forces a choice.
"""

from __future__ import annotations

import os

from ..errors import SimulationError, WidthMismatch
from ..frontend import ast as A
from . import interp
from .flatten import flatten
from .program import Program, compile_module

try:
    from . import _kernel  # type: ignore[attr-defined]
    NATIVE_AVAILABLE = True
except ImportError:
    _kernel = None
    NATIVE_AVAILABLE = False

_FORCED = os.environ.get("RTLOPT_SIM_BACKEND", "auto")
if _FORCED == "native" and not NATIVE_AVAILABLE:
    raise ImportError("RTLOPT_SIM_BACKEND=native but the compiled kernel "
                      "is not importable")

__all__ = ["Engine", "NATIVE_AVAILABLE", "Program", "compile_module",
           "flatten", "backend_name"]


def backend_name() -> str:
    if _FORCED == "python" or not NATIVE_AVAILABLE:
        return "python"
    return "native"


class Engine:
    """Compiled simulation of one module."""

    def __init__(self, module: A.ModuleAst, backend: str | None = None):
        self.module = module
        self.program = compile_module(module)
        choice = backend or _FORCED
        if choice == "auto":
            choice = "native" if NATIVE_AVAILABLE and \
                self.program.max_width <= 64 else "python"
        if choice == "native":
            if not NATIVE_AVAILABLE:
                raise SimulationError("native backend requested but not built")
            if self.program.max_width > 64:
                raise SimulationError(
                    "native backend cannot run designs wider than 64 bits")
        self.backend = choice
        self._native = None
        if choice == "native":
            self._native = _NativeProgram(self.program)

    # -- combinational -------------------------------------------------------

    def run_comb_vectors(self, vectors: list[dict[str, int]]) -> list[dict[str, int]]:
        """Evaluate input vectors independently (state zeroed per vector)."""
        p = self.program
        in_ports = p.inputs
        for vec in vectors:
            self._check_inputs(vec, in_ports)
        in_slots = [s for _, s, _ in in_ports]
        rows = [[vec.get(name, 0) for name, _, _ in in_ports] for vec in vectors]
        outs = self.run_comb_rows(rows)
        return [
            {name: int(row[j]) for j, (name, _, _) in enumerate(p.outputs)}
            for row in outs
        ]

    def run_comb_rows(self, rows):
        """Row-based batch: rows follow program.inputs order, result rows
        follow program.outputs order.  Native backend returns a uint64
        ndarray; pure Python returns a list of int lists."""
        p = self.program
        if self._native is not None:
            return self._native.run_comb_batch(rows)
        if not isinstance(rows, list):
            rows = [[int(x) for x in row] for row in rows]
        return interp.run_comb_batch(p, [s for _, s, _ in p.inputs], rows,
                                     [s for _, s, _ in p.outputs])

    # -- clocked -------------------------------------------------------------

    def run_cycles(self, inputs: dict[str, list[int]], cycles: int,
                   clock: str | None = None) -> dict[str, list[int]]:
        """Run `cycles` clock cycles; returns output values sampled at the
        end of each cycle.  Inputs are per-cycle value lists; the clock
        port (if any) is driven implicitly and must not appear in inputs."""
        p = self.program
        clock_slot = -1
        if clock is not None:
            if clock not in p.slot_of:
                raise SimulationError(f"clock port {clock!r} not found")
            if clock in inputs:
                raise SimulationError(f"clock {clock!r} must not be driven "
                                      "explicitly")
            clock_slot = p.slot_of[clock]
        elif p.seq_segments:
            raise SimulationError(
                f"{p.module_name}: clocked module needs a clock name")
        in_ports = [(n, s, w) for n, s, w in p.inputs if s != clock_slot]
        for name, _, w in in_ports:
            seq = inputs.get(name)
            if seq is None:
                continue
            if len(seq) != cycles:
                raise WidthMismatch(
                    f"input {name!r} has {len(seq)} values for {cycles} cycles")
            for v in seq:
                if v < 0 or v >> w:
                    raise WidthMismatch(
                        f"value {v} does not fit input {name!r} ({w} bits)")
        for name in inputs:
            if name not in {n for n, _, _ in in_ports}:
                raise SimulationError(f"{name!r} is not an input port")
        rows = [[inputs.get(name, [0] * cycles)[t] for name, _, _ in in_ports]
                for t in range(cycles)]
        out_slots = [s for _, s, _ in p.outputs]
        if self._native is not None:
            outs = self._native.run_cycles(rows, clock_slot,
                                           [s for _, s, _ in in_ports])
        else:
            outs = _run_cycles_py(p, rows, clock_slot,
                                  [s for _, s, _ in in_ports], out_slots)
        return {name: [int(outs[t][j]) for t in range(cycles)]
                for j, (name, _, _) in enumerate(p.outputs)}

    @staticmethod
    def _check_inputs(vec: dict[str, int], ports: list[tuple[str, int, int]]) -> None:
        names = {n for n, _, _ in ports}
        for k in vec:
            if k not in names:
                raise SimulationError(f"{k!r} is not an input port")
        for name, _, w in ports:
            v = vec.get(name, 0)
            if v < 0 or v >> w:
                raise WidthMismatch(
                    f"value {v} does not fit input {name!r} ({w} bits)")


def _run_cycles_py(p: Program, rows: list[list[int]], clock_slot: int,
                   in_slots_names: list[int], out_slots: list[int]) -> list[list[int]]:
    state = interp.PyState(p)
    in_slots = in_slots_names
    guards = []  # (seg_idx, slot, edge, is_clk)
    has_neg_clk = False
    for si, seg in enumerate(p.seq_segments):
        for slot, edge, _name in seg.guards:
            is_clk = slot == clock_slot
            if is_clk and edge == 1:
                has_neg_clk = True
            guards.append((si, slot, edge, is_clk))
    prev = {gi: 0 for gi, g in enumerate(guards) if not g[3]}
    outs = []
    for row in rows:
        for slot, v in zip(in_slots, row):
            state.slots[slot] = v
        interp.run_comb(state)
        if clock_slot >= 0:
            state.slots[clock_slot] = 1
        fired = False
        for si, seg in enumerate(p.seq_segments):
            fire = False
            for gi, (gsi, slot, edge, is_clk) in enumerate(guards):
                if gsi != si:
                    continue
                if is_clk:
                    if edge == 0:
                        fire = True
                else:
                    cur = 1 if state.slots[slot] else 0
                    if edge == 0 and prev[gi] == 0 and cur == 1:
                        fire = True
                    if edge == 1 and prev[gi] == 1 and cur == 0:
                        fire = True
            if fire:
                interp.run_segment(state, seg.start, seg.end)
                fired = True
        if fired:
            state.commit_nba()
            interp.run_comb(state)
        if has_neg_clk:
            if clock_slot >= 0:
                state.slots[clock_slot] = 0
            fired = False
            for si, seg in enumerate(p.seq_segments):
                if any(gsi == si and is_clk and edge == 1
                       for gsi, _slot, edge, is_clk in guards):
                    interp.run_segment(state, seg.start, seg.end)
                    fired = True
            if fired:
                state.commit_nba()
                interp.run_comb(state)
        elif clock_slot >= 0:
            state.slots[clock_slot] = 0
        for gi, (gsi, slot, edge, is_clk) in enumerate(guards):
            if not is_clk:
                prev[gi] = 1 if state.slots[slot] else 0
        outs.append([state.slots[s] for s in out_slots])
    return outs


class _NativeProgram:
    """Program arrays staged for the Cython kernel."""

    def __init__(self, p: Program):
        import numpy as np

        self.p = p
        n = len(p.insns)
        self.op = np.array([i.op for i in p.insns], dtype=np.int32)
        self.dst = np.array([i.dst for i in p.insns], dtype=np.int32)
        self.a = np.array([i.a for i in p.insns], dtype=np.int32)
        self.b = np.array([i.b for i in p.insns], dtype=np.int32)
        self.imm = np.array([i.imm for i in p.insns], dtype=np.int64)
        self.mask = np.array([i.mask for i in p.insns], dtype=np.uint64)
        self.aux = np.array([i.aux for i in p.insns], dtype=np.uint64)
        self.pool = np.array(p.pool or [0], dtype=np.uint64)
        if n == 0:
            # degenerate: empty tape still needs valid array pointers
            self.op = np.array([40], dtype=np.int32)  # END
            self.dst = np.zeros(1, dtype=np.int32)
            self.a = np.zeros(1, dtype=np.int32)
            self.b = np.zeros(1, dtype=np.int32)
            self.imm = np.zeros(1, dtype=np.int64)
            self.mask = np.zeros(1, dtype=np.uint64)
            self.aux = np.zeros(1, dtype=np.uint64)
        self.tape = (self.op, self.dst, self.a, self.b, self.imm,
                     self.mask, self.aux, self.pool)
        total_mem = sum(depth for _, depth, _ in p.mems)
        self.mem_base = np.zeros(len(p.mems), dtype=np.int64)
        off = 0
        for k, (_, depth, _) in enumerate(p.mems):
            self.mem_base[k] = off
            off += depth
        self.total_mem = total_mem
        self.np = np

    def run_comb_batch(self, rows):
        np = self.np
        p = self.p
        n = len(rows)
        in_vals = np.ascontiguousarray(
            np.asarray(rows, dtype=np.uint64)).reshape(n, len(p.inputs))
        in_slots = np.array([s for _, s, _ in p.inputs], dtype=np.int64)
        out_slots = np.array([s for _, s, _ in p.outputs], dtype=np.int64)
        out_vals = np.zeros((n, len(p.outputs)), dtype=np.uint64)
        mem = np.zeros(max(1, self.total_mem), dtype=np.uint64)
        _kernel.run_comb_batch(self.tape, p.comb[0], p.comb[1], p.n_slots,
                               mem if self.total_mem else np.zeros(0, np.uint64),
                               self.mem_base, in_slots, in_vals, out_slots,
                               out_vals)
        return out_vals

    def run_cycles(self, rows: list[list[int]], clock_slot: int,
                   in_slot_list: list[int]):
        np = self.np
        p = self.p
        cycles = len(rows)
        slots = np.zeros(p.n_slots, dtype=np.uint64)
        mem = np.zeros(max(1, self.total_mem), dtype=np.uint64)
        seg_table = np.array([[s.start, s.end] for s in p.seq_segments],
                             dtype=np.int64).reshape(len(p.seq_segments), 2)
        guard_rows = []
        has_neg_clk = 0
        for si, seg in enumerate(p.seq_segments):
            for slot, edge, _name in seg.guards:
                is_clk = 1 if slot == clock_slot else 0
                if is_clk and edge == 1:
                    has_neg_clk = 1
                guard_rows.append([si, slot, edge, is_clk])
        guard_table = np.array(guard_rows, dtype=np.int64).reshape(
            len(guard_rows), 4)
        guard_prev = np.zeros(max(1, len(guard_rows)), dtype=np.uint64)
        cap = max(1, p.nba_capacity)
        in_vals = np.array(rows, dtype=np.uint64).reshape(cycles, len(in_slot_list))
        out_vals = np.zeros((cycles, len(p.outputs)), dtype=np.uint64)
        _kernel.run_cycles(
            self.tape, p.comb[0], p.comb[1], slots,
            mem if self.total_mem else np.zeros(0, np.uint64), self.mem_base,
            seg_table, guard_table, clock_slot, has_neg_clk,
            np.zeros(cap, dtype=np.int64), np.zeros(cap, dtype=np.uint64),
            np.zeros(cap, dtype=np.uint64), np.zeros(cap, dtype=np.int64),
            np.zeros(cap, dtype=np.uint64),
            np.array(in_slot_list, dtype=np.int64), in_vals,
            np.array([s for _, s, _ in p.outputs], dtype=np.int64), out_vals,
            guard_prev)
        return out_vals
