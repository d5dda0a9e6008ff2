"""Pure-Python tape interpreter.

Reference implementation of the bytecode semantics; handles any width.
The Cython kernel in ``_kernel.pyx`` executes the same tapes for designs
whose widths all fit in 64 bits, and the two are differentially tested.
"""

from __future__ import annotations

from .program import (
    ADD, BAND, BITSEL, BOR, BXOR, CONST, DIV, END, EQ, GE, GT, JMP, JZ, LAND,
    LE, LNOT, LOR, LT, MEMRD, MEMWR, MOD, MOV, MUL, NBA, NBA_BIT, NBA_MEMWR,
    NBA_RANGE, NE, NEG, NOT, PARTSEL, Program, RAND, ROR, RXOR, SHL, SHLI,
    SHR, STBIT, STRANGE, SUB, TERN,
)


class PyState:
    """Mutable simulation state: slot values, memories, pending NBA writes."""

    def __init__(self, program: Program):
        self.program = program
        self.slots = [0] * program.n_slots
        self.mems = [[0] * depth for _, depth, _ in program.mems]
        self.nba_slots: list[tuple[int, int, int]] = []  # slot, clear, or-value
        self.nba_mems: list[tuple[int, int, int]] = []  # mem, addr, value

    def reset(self) -> None:
        self.slots = [0] * self.program.n_slots
        self.mems = [[0] * depth for _, depth, _ in self.program.mems]
        self.nba_slots.clear()
        self.nba_mems.clear()

    def commit_nba(self) -> None:
        for slot, clear, orv in self.nba_slots:
            self.slots[slot] = (self.slots[slot] & ~clear) | orv
        for mem, addr, value in self.nba_mems:
            self.mems[mem][addr] = value
        self.nba_slots.clear()
        self.nba_mems.clear()


def run_segment(state: PyState, start: int, end: int) -> None:
    insns = state.program.insns
    pool = state.program.pool
    slots = state.slots
    mems = state.mems
    pc = start
    while pc < end:
        i = insns[pc]
        op = i.op
        if op == CONST:
            slots[i.dst] = pool[i.imm]
        elif op == MOV:
            slots[i.dst] = slots[i.a] & i.mask
        elif op == ADD:
            slots[i.dst] = (slots[i.a] + slots[i.b]) & i.mask
        elif op == SUB:
            slots[i.dst] = (slots[i.a] - slots[i.b]) & i.mask
        elif op == MUL:
            slots[i.dst] = (slots[i.a] * slots[i.b]) & i.mask
        elif op == DIV:
            b = slots[i.b]
            slots[i.dst] = (slots[i.a] // b) & i.mask if b else i.mask
        elif op == MOD:
            b = slots[i.b]
            slots[i.dst] = (slots[i.a] % b) & i.mask if b else i.mask
        elif op == SHL:
            sh = slots[i.b]
            slots[i.dst] = (slots[i.a] << sh) & i.mask \
                if sh <= i.mask.bit_length() else 0
        elif op == SHR:
            sh = slots[i.b]
            slots[i.dst] = (slots[i.a] >> sh) & i.mask \
                if sh <= i.mask.bit_length() else 0
        elif op == BAND:
            slots[i.dst] = (slots[i.a] & slots[i.b]) & i.mask
        elif op == BOR:
            slots[i.dst] = (slots[i.a] | slots[i.b]) & i.mask
        elif op == BXOR:
            slots[i.dst] = (slots[i.a] ^ slots[i.b]) & i.mask
        elif op == LAND:
            slots[i.dst] = int(bool(slots[i.a]) and bool(slots[i.b]))
        elif op == LOR:
            slots[i.dst] = int(bool(slots[i.a]) or bool(slots[i.b]))
        elif op == EQ:
            slots[i.dst] = int(slots[i.a] == slots[i.b])
        elif op == NE:
            slots[i.dst] = int(slots[i.a] != slots[i.b])
        elif op == LT:
            slots[i.dst] = int(slots[i.a] < slots[i.b])
        elif op == LE:
            slots[i.dst] = int(slots[i.a] <= slots[i.b])
        elif op == GT:
            slots[i.dst] = int(slots[i.a] > slots[i.b])
        elif op == GE:
            slots[i.dst] = int(slots[i.a] >= slots[i.b])
        elif op == NOT:
            slots[i.dst] = ~slots[i.a] & i.mask
        elif op == NEG:
            slots[i.dst] = -slots[i.a] & i.mask
        elif op == LNOT:
            slots[i.dst] = int(slots[i.a] == 0)
        elif op == RAND:
            slots[i.dst] = int(slots[i.a] == i.aux)
        elif op == ROR:
            slots[i.dst] = int(slots[i.a] != 0)
        elif op == RXOR:
            slots[i.dst] = slots[i.a].bit_count() & 1
        elif op == BITSEL:
            idx = slots[i.b]
            slots[i.dst] = (slots[i.a] >> idx) & 1 if idx < i.aux else 0
        elif op == PARTSEL:
            slots[i.dst] = (slots[i.a] >> i.imm) & i.mask
        elif op == TERN:
            slots[i.dst] = slots[i.a] if slots[i.imm] else slots[i.b]
        elif op == MEMRD:
            addr = slots[i.b]
            slots[i.dst] = mems[i.a][addr] if addr < i.aux else 0
        elif op == MEMWR:
            addr = slots[i.b]
            if addr < i.aux:
                mems[i.a][addr] = slots[i.dst] & i.mask
        elif op == JMP:
            pc = i.imm
            continue
        elif op == JZ:
            if slots[i.a] == 0:
                pc = i.imm
                continue
        elif op == NBA:
            state.nba_slots.append((i.dst, i.mask, slots[i.a] & i.mask))
        elif op == NBA_MEMWR:
            addr = slots[i.b]
            if addr < i.aux:
                state.nba_mems.append((i.a, addr, slots[i.dst] & i.mask))
        elif op == STBIT:
            idx = slots[i.a]
            if idx < i.aux:
                slots[i.dst] = (slots[i.dst] & ~(1 << idx)) | \
                    ((slots[i.b] & 1) << idx)
        elif op == NBA_BIT:
            idx = slots[i.a]
            if idx < i.aux:
                state.nba_slots.append(
                    (i.dst, 1 << idx, (slots[i.b] & 1) << idx))
        elif op == STRANGE:
            slots[i.dst] = (slots[i.dst] & ~(i.aux << i.imm)) | \
                ((slots[i.a] & i.aux) << i.imm)
        elif op == NBA_RANGE:
            state.nba_slots.append(
                (i.dst, i.aux << i.imm, (slots[i.a] & i.aux) << i.imm))
        elif op == SHLI:
            slots[i.dst] = (slots[i.a] << i.imm) & i.mask
        elif op == END:
            return
        else:
            raise RuntimeError(f"bad opcode {op}")
        pc += 1


def run_comb(state: PyState) -> None:
    start, end = state.program.comb
    run_segment(state, start, end)


def run_comb_batch(program: Program, in_slots: list[int],
                   in_vectors: list[list[int]], out_slots: list[int]) -> list[list[int]]:
    """Evaluate each input vector against a freshly zeroed state."""
    state = PyState(program)
    results = []
    n_slots = program.n_slots
    for vec in in_vectors:
        state.slots = [0] * n_slots
        for slot, value in zip(in_slots, vec):
            state.slots[slot] = value
        run_comb(state)
        results.append([state.slots[s] for s in out_slots])
    return results
