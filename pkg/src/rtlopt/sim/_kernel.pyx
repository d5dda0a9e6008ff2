# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tape interpreter for designs whose widths all fit in 64 bits.

Mirrors interp.py instruction for instruction; the two are differentially
tested.  Hot entry points: run_comb_batch (exhaustive/fuzz vectors) and
run_cycles (clocked co-simulation).
"""

from libc.string cimport memset

import numpy as np
cimport numpy as cnp

ctypedef unsigned long long u64
ctypedef long long i64

cdef enum:
    CONST = 0
    MOV = 1
    ADD = 2
    SUB = 3
    MUL = 4
    DIV = 5
    MOD = 6
    SHL = 7
    SHR = 8
    BAND = 9
    BOR = 10
    BXOR = 11
    LAND = 12
    LOR = 13
    EQ = 14
    NE = 15
    LT = 16
    LE = 17
    GT = 18
    GE = 19
    NOT = 20
    NEG = 21
    LNOT = 22
    RAND = 23
    ROR = 24
    RXOR = 25
    BITSEL = 26
    PARTSEL = 27
    TERN = 28
    MEMRD = 29
    MEMWR = 30
    JMP = 31
    JZ = 32
    NBA = 33
    NBA_MEMWR = 34
    STBIT = 35
    NBA_BIT = 36
    STRANGE = 37
    NBA_RANGE = 38
    SHLI = 39
    END = 40


cdef inline u64 _parity(u64 v) noexcept nogil:
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return v & 1


cdef struct Tape:
    int* op
    int* dst
    int* a
    int* b
    i64* imm
    u64* mask
    u64* aux
    u64* pool


cdef struct Mach:
    u64* slots
    u64* mem
    i64* mem_base
    i64* nq_slot
    u64* nq_clear
    u64* nq_or
    int nq_n
    i64* mq_ref      # packed mem<<32 | addr
    u64* mq_val
    int mq_n


cdef int _exec(Tape* t, Mach* m, int pc, int end) noexcept nogil:
    cdef int op
    cdef u64 va, vb, sh, idx
    cdef i64 addr
    while pc < end:
        op = t.op[pc]
        if op == CONST:
            m.slots[t.dst[pc]] = t.pool[t.imm[pc]]
        elif op == MOV:
            m.slots[t.dst[pc]] = m.slots[t.a[pc]] & t.mask[pc]
        elif op == ADD:
            m.slots[t.dst[pc]] = (m.slots[t.a[pc]] + m.slots[t.b[pc]]) & t.mask[pc]
        elif op == SUB:
            m.slots[t.dst[pc]] = (m.slots[t.a[pc]] - m.slots[t.b[pc]]) & t.mask[pc]
        elif op == MUL:
            m.slots[t.dst[pc]] = (m.slots[t.a[pc]] * m.slots[t.b[pc]]) & t.mask[pc]
        elif op == DIV:
            vb = m.slots[t.b[pc]]
            if vb == 0:
                m.slots[t.dst[pc]] = t.mask[pc]
            else:
                m.slots[t.dst[pc]] = (m.slots[t.a[pc]] / vb) & t.mask[pc]
        elif op == MOD:
            vb = m.slots[t.b[pc]]
            if vb == 0:
                m.slots[t.dst[pc]] = t.mask[pc]
            else:
                m.slots[t.dst[pc]] = (m.slots[t.a[pc]] % vb) & t.mask[pc]
        elif op == SHL:
            sh = m.slots[t.b[pc]]
            if sh >= 64:
                m.slots[t.dst[pc]] = 0
            else:
                m.slots[t.dst[pc]] = (m.slots[t.a[pc]] << sh) & t.mask[pc]
        elif op == SHR:
            sh = m.slots[t.b[pc]]
            if sh >= 64:
                m.slots[t.dst[pc]] = 0
            else:
                m.slots[t.dst[pc]] = (m.slots[t.a[pc]] >> sh) & t.mask[pc]
        elif op == BAND:
            m.slots[t.dst[pc]] = (m.slots[t.a[pc]] & m.slots[t.b[pc]]) & t.mask[pc]
        elif op == BOR:
            m.slots[t.dst[pc]] = (m.slots[t.a[pc]] | m.slots[t.b[pc]]) & t.mask[pc]
        elif op == BXOR:
            m.slots[t.dst[pc]] = (m.slots[t.a[pc]] ^ m.slots[t.b[pc]]) & t.mask[pc]
        elif op == LAND:
            m.slots[t.dst[pc]] = 1 if (m.slots[t.a[pc]] != 0 and m.slots[t.b[pc]] != 0) else 0
        elif op == LOR:
            m.slots[t.dst[pc]] = 1 if (m.slots[t.a[pc]] != 0 or m.slots[t.b[pc]] != 0) else 0
        elif op == EQ:
            m.slots[t.dst[pc]] = 1 if m.slots[t.a[pc]] == m.slots[t.b[pc]] else 0
        elif op == NE:
            m.slots[t.dst[pc]] = 1 if m.slots[t.a[pc]] != m.slots[t.b[pc]] else 0
        elif op == LT:
            m.slots[t.dst[pc]] = 1 if m.slots[t.a[pc]] < m.slots[t.b[pc]] else 0
        elif op == LE:
            m.slots[t.dst[pc]] = 1 if m.slots[t.a[pc]] <= m.slots[t.b[pc]] else 0
        elif op == GT:
            m.slots[t.dst[pc]] = 1 if m.slots[t.a[pc]] > m.slots[t.b[pc]] else 0
        elif op == GE:
            m.slots[t.dst[pc]] = 1 if m.slots[t.a[pc]] >= m.slots[t.b[pc]] else 0
        elif op == NOT:
            m.slots[t.dst[pc]] = (~m.slots[t.a[pc]]) & t.mask[pc]
        elif op == NEG:
            m.slots[t.dst[pc]] = (0 - m.slots[t.a[pc]]) & t.mask[pc]
        elif op == LNOT:
            m.slots[t.dst[pc]] = 1 if m.slots[t.a[pc]] == 0 else 0
        elif op == RAND:
            m.slots[t.dst[pc]] = 1 if m.slots[t.a[pc]] == t.aux[pc] else 0
        elif op == ROR:
            m.slots[t.dst[pc]] = 1 if m.slots[t.a[pc]] != 0 else 0
        elif op == RXOR:
            m.slots[t.dst[pc]] = _parity(m.slots[t.a[pc]])
        elif op == BITSEL:
            idx = m.slots[t.b[pc]]
            if idx < t.aux[pc]:
                m.slots[t.dst[pc]] = (m.slots[t.a[pc]] >> idx) & 1
            else:
                m.slots[t.dst[pc]] = 0
        elif op == PARTSEL:
            m.slots[t.dst[pc]] = (m.slots[t.a[pc]] >> t.imm[pc]) & t.mask[pc]
        elif op == TERN:
            if m.slots[t.imm[pc]] != 0:
                m.slots[t.dst[pc]] = m.slots[t.a[pc]]
            else:
                m.slots[t.dst[pc]] = m.slots[t.b[pc]]
        elif op == MEMRD:
            idx = m.slots[t.b[pc]]
            if idx < t.aux[pc]:
                m.slots[t.dst[pc]] = m.mem[m.mem_base[t.a[pc]] + <i64>idx]
            else:
                m.slots[t.dst[pc]] = 0
        elif op == MEMWR:
            idx = m.slots[t.b[pc]]
            if idx < t.aux[pc]:
                m.mem[m.mem_base[t.a[pc]] + <i64>idx] = m.slots[t.dst[pc]] & t.mask[pc]
        elif op == JMP:
            pc = <int>t.imm[pc]
            continue
        elif op == JZ:
            if m.slots[t.a[pc]] == 0:
                pc = <int>t.imm[pc]
                continue
        elif op == NBA:
            m.nq_slot[m.nq_n] = t.dst[pc]
            m.nq_clear[m.nq_n] = t.mask[pc]
            m.nq_or[m.nq_n] = m.slots[t.a[pc]] & t.mask[pc]
            m.nq_n += 1
        elif op == NBA_MEMWR:
            idx = m.slots[t.b[pc]]
            if idx < t.aux[pc]:
                m.mq_ref[m.mq_n] = (<i64>t.a[pc] << 32) | <i64>idx
                m.mq_val[m.mq_n] = m.slots[t.dst[pc]] & t.mask[pc]
                m.mq_n += 1
        elif op == STBIT:
            idx = m.slots[t.a[pc]]
            if idx < t.aux[pc]:
                m.slots[t.dst[pc]] = (m.slots[t.dst[pc]] & ~((<u64>1) << idx)) | \
                    ((m.slots[t.b[pc]] & 1) << idx)
        elif op == NBA_BIT:
            idx = m.slots[t.a[pc]]
            if idx < t.aux[pc]:
                m.nq_slot[m.nq_n] = t.dst[pc]
                m.nq_clear[m.nq_n] = (<u64>1) << idx
                m.nq_or[m.nq_n] = (m.slots[t.b[pc]] & 1) << idx
                m.nq_n += 1
        elif op == STRANGE:
            m.slots[t.dst[pc]] = (m.slots[t.dst[pc]] & ~(t.aux[pc] << t.imm[pc])) | \
                ((m.slots[t.a[pc]] & t.aux[pc]) << t.imm[pc])
        elif op == NBA_RANGE:
            m.nq_slot[m.nq_n] = t.dst[pc]
            m.nq_clear[m.nq_n] = t.aux[pc] << t.imm[pc]
            m.nq_or[m.nq_n] = (m.slots[t.a[pc]] & t.aux[pc]) << t.imm[pc]
            m.nq_n += 1
        elif op == SHLI:
            m.slots[t.dst[pc]] = (m.slots[t.a[pc]] << t.imm[pc]) & t.mask[pc]
        elif op == END:
            return 0
        pc += 1
    return 0


cdef void _commit(Mach* m) noexcept nogil:
    cdef int k
    cdef i64 ref
    for k in range(m.nq_n):
        m.slots[m.nq_slot[k]] = (m.slots[m.nq_slot[k]] & ~m.nq_clear[k]) | m.nq_or[k]
    m.nq_n = 0
    for k in range(m.mq_n):
        ref = m.mq_ref[k]
        m.mem[m.mem_base[ref >> 32] + (ref & <i64>0xFFFFFFFF)] = m.mq_val[k]
    m.mq_n = 0


cdef Tape _tape(int[::1] op, int[::1] dst, int[::1] a, int[::1] b,
                i64[::1] imm, u64[::1] mask, u64[::1] aux, u64[::1] pool):
    cdef Tape t
    t.op = &op[0]
    t.dst = &dst[0]
    t.a = &a[0]
    t.b = &b[0]
    t.imm = &imm[0]
    t.mask = &mask[0]
    t.aux = &aux[0]
    t.pool = &pool[0]
    return t


def run_comb_batch(tape_arrays, int comb_start, int comb_end,
                   int n_slots,
                   cnp.ndarray[cnp.uint64_t, ndim=1] mem,
                   cnp.ndarray[cnp.int64_t, ndim=1] mem_base,
                   cnp.ndarray[cnp.int64_t, ndim=1] in_slots,
                   cnp.ndarray[cnp.uint64_t, ndim=2] in_vals,
                   cnp.ndarray[cnp.int64_t, ndim=1] out_slots,
                   cnp.ndarray[cnp.uint64_t, ndim=2] out_vals):
    """Evaluate each row of in_vals against a freshly zeroed state."""
    cdef Tape t = _tape(tape_arrays[0], tape_arrays[1], tape_arrays[2],
                        tape_arrays[3], tape_arrays[4], tape_arrays[5],
                        tape_arrays[6], tape_arrays[7])
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] slots = np.zeros(n_slots, dtype=np.uint64)
    cdef Mach mch
    mch.slots = <u64*>&slots[0]
    mch.mem = <u64*>&mem[0] if mem.shape[0] else NULL
    mch.mem_base = <i64*>&mem_base[0] if mem_base.shape[0] else NULL
    mch.nq_slot = NULL
    mch.nq_clear = NULL
    mch.nq_or = NULL
    mch.nq_n = 0
    mch.mq_ref = NULL
    mch.mq_val = NULL
    mch.mq_n = 0
    cdef Py_ssize_t n = in_vals.shape[0]
    cdef Py_ssize_t k = in_slots.shape[0]
    cdef Py_ssize_t mo = out_slots.shape[0]
    cdef Py_ssize_t v, j
    with nogil:
        for v in range(n):
            memset(mch.slots, 0, n_slots * sizeof(u64))
            for j in range(k):
                mch.slots[in_slots[j]] = in_vals[v, j]
            _exec(&t, &mch, comb_start, comb_end)
            for j in range(mo):
                out_vals[v, j] = mch.slots[out_slots[j]]
    return out_vals


def run_cycles(tape_arrays, int comb_start, int comb_end,
               cnp.ndarray[cnp.uint64_t, ndim=1] slots,
               cnp.ndarray[cnp.uint64_t, ndim=1] mem,
               cnp.ndarray[cnp.int64_t, ndim=1] mem_base,
               cnp.ndarray[cnp.int64_t, ndim=2] seg_table,
               cnp.ndarray[cnp.int64_t, ndim=2] guard_table,
               int clock_slot, int has_negedge_clk,
               cnp.ndarray[cnp.int64_t, ndim=1] nq_slot,
               cnp.ndarray[cnp.uint64_t, ndim=1] nq_clear,
               cnp.ndarray[cnp.uint64_t, ndim=1] nq_or,
               cnp.ndarray[cnp.int64_t, ndim=1] mq_ref,
               cnp.ndarray[cnp.uint64_t, ndim=1] mq_val,
               cnp.ndarray[cnp.int64_t, ndim=1] in_slots,
               cnp.ndarray[cnp.uint64_t, ndim=2] in_vals,
               cnp.ndarray[cnp.int64_t, ndim=1] out_slots,
               cnp.ndarray[cnp.uint64_t, ndim=2] out_vals,
               cnp.ndarray[cnp.uint64_t, ndim=1] guard_prev):
    """Clocked run over in_vals.shape[0] cycles; state persists in slots/mem.

    seg_table rows: (start, end).  guard_table rows: (seg_index, slot,
    edge, is_clk) with edge 0=posedge 1=negedge.  guard_prev holds the
    previous cycle's truth value per guard row (non-clock rows only).
    """
    cdef Tape t = _tape(tape_arrays[0], tape_arrays[1], tape_arrays[2],
                        tape_arrays[3], tape_arrays[4], tape_arrays[5],
                        tape_arrays[6], tape_arrays[7])
    cdef Mach mch
    mch.slots = <u64*>&slots[0]
    mch.mem = <u64*>&mem[0] if mem.shape[0] else NULL
    mch.mem_base = <i64*>&mem_base[0] if mem_base.shape[0] else NULL
    mch.nq_slot = <i64*>&nq_slot[0]
    mch.nq_clear = <u64*>&nq_clear[0]
    mch.nq_or = <u64*>&nq_or[0]
    mch.nq_n = 0
    mch.mq_ref = <i64*>&mq_ref[0]
    mch.mq_val = <u64*>&mq_val[0]
    mch.mq_n = 0
    cdef Py_ssize_t cycles = in_vals.shape[0]
    cdef Py_ssize_t k = in_slots.shape[0]
    cdef Py_ssize_t mo = out_slots.shape[0]
    cdef Py_ssize_t n_segs = seg_table.shape[0]
    cdef Py_ssize_t n_guards = guard_table.shape[0]
    cdef Py_ssize_t cyc, j, g, s
    cdef u64 cur
    cdef int fire, any_fired
    with nogil:
        for cyc in range(cycles):
            for j in range(k):
                mch.slots[in_slots[j]] = in_vals[cyc, j]
            _exec(&t, &mch, comb_start, comb_end)
            if clock_slot >= 0:
                mch.slots[clock_slot] = 1
            any_fired = 0
            for s in range(n_segs):
                fire = 0
                for g in range(n_guards):
                    if guard_table[g, 0] != s:
                        continue
                    if guard_table[g, 3]:  # clock guard
                        if guard_table[g, 2] == 0:
                            fire = 1
                    else:
                        cur = 1 if mch.slots[guard_table[g, 1]] != 0 else 0
                        if guard_table[g, 2] == 0 and guard_prev[g] == 0 and cur == 1:
                            fire = 1
                        if guard_table[g, 2] == 1 and guard_prev[g] == 1 and cur == 0:
                            fire = 1
                if fire:
                    _exec(&t, &mch, <int>seg_table[s, 0], <int>seg_table[s, 1])
                    any_fired = 1
            if any_fired:
                _commit(&mch)
                _exec(&t, &mch, comb_start, comb_end)
            if has_negedge_clk:
                if clock_slot >= 0:
                    mch.slots[clock_slot] = 0
                any_fired = 0
                for s in range(n_segs):
                    fire = 0
                    for g in range(n_guards):
                        if guard_table[g, 0] == s and guard_table[g, 3] and \
                                guard_table[g, 2] == 1:
                            fire = 1
                    if fire:
                        _exec(&t, &mch, <int>seg_table[s, 0], <int>seg_table[s, 1])
                        any_fired = 1
                if any_fired:
                    _commit(&mch)
                    _exec(&t, &mch, comb_start, comb_end)
            elif clock_slot >= 0:
                mch.slots[clock_slot] = 0
            for g in range(n_guards):
                if not guard_table[g, 3]:
                    guard_prev[g] = 1 if mch.slots[guard_table[g, 1]] != 0 else 0
            for j in range(mo):
                out_vals[cyc, j] = mch.slots[out_slots[j]]
    return out_vals
