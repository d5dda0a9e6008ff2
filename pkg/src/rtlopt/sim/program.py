"""Compile a module to a flat bytecode tape for cycle-based simulation.

The same program runs on two interpreters: the pure-Python one in
``interp.py`` (arbitrary widths) and the Cython kernel in ``_kernel.pyx``
(all widths <= 64).  Expressions are compiled with context-determined
evaluation widths following the unsigned sizing rules, so results match
event-driven semantics for the subset.

Value conventions (two-state):
* regs and wires start at 0,
* division or modulo by a runtime zero yields all-ones,
* dynamic bit-select past the declared width reads 0; writes there are
  dropped,
* memory reads past the depth return 0; writes there are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import CombinationalLoop, SimulationError
from ..frontend import ast as A
from ..frontend.width import Sym, symbol_table

# opcodes
CONST, MOV = 0, 1
ADD, SUB, MUL, DIV, MOD, SHL, SHR, BAND, BOR, BXOR = 2, 3, 4, 5, 6, 7, 8, 9, 10, 11
LAND, LOR, EQ, NE, LT, LE, GT, GE = 12, 13, 14, 15, 16, 17, 18, 19
NOT, NEG, LNOT, RAND, ROR, RXOR = 20, 21, 22, 23, 24, 25
BITSEL, PARTSEL, TERN, MEMRD, MEMWR = 26, 27, 28, 29, 30
JMP, JZ = 31, 32
NBA, NBA_MEMWR, STBIT, NBA_BIT, STRANGE, NBA_RANGE = 33, 34, 35, 36, 37, 38
SHLI, END = 39, 40

_BINOP = {
    "+": ADD, "-": SUB, "*": MUL, "/": DIV, "%": MOD,
    "<<": SHL, ">>": SHR, "&": BAND, "|": BOR, "^": BXOR,
    "&&": LAND, "||": LOR, "==": EQ, "!=": NE,
    "<": LT, "<=": LE, ">": GT, ">=": GE,
}
_CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


def _mask(width: int) -> int:
    return (1 << width) - 1


@dataclass
class Insn:
    op: int
    dst: int = 0
    a: int = 0
    b: int = 0
    imm: int = 0
    mask: int = 0
    aux: int = 0


@dataclass
class SeqSegment:
    start: int
    end: int
    # (slot, edge) with edge 0=posedge 1=negedge; signal names kept for the
    # engine to decide which guard is the clock
    guards: list[tuple[int, int, str]] = field(default_factory=list)


@dataclass
class Program:
    module_name: str
    insns: list[Insn] = field(default_factory=list)
    pool: list[int] = field(default_factory=list)
    n_slots: int = 0
    slot_of: dict[str, int] = field(default_factory=dict)
    slot_width: list[int] = field(default_factory=list)
    mems: list[tuple[str, int, int]] = field(default_factory=list)  # name, depth, width
    mem_of: dict[str, int] = field(default_factory=dict)
    comb: tuple[int, int] = (0, 0)
    seq_segments: list[SeqSegment] = field(default_factory=list)
    inputs: list[tuple[str, int, int]] = field(default_factory=list)  # name, slot, width
    outputs: list[tuple[str, int, int]] = field(default_factory=list)
    nba_capacity: int = 0
    max_width: int = 1

    @property
    def is_combinational(self) -> bool:
        return not self.seq_segments


class _Compiler:
    def __init__(self, module: A.ModuleAst):
        self.module = module
        self.table: dict[str, Sym] = symbol_table(module)
        self.prog = Program(module_name=module.name)
        self.params = {p.name: p for p in module.params}
        self._pool_index: dict[int, int] = {}
        self._temp_base = 0
        self._temp_next = 0
        self._max_temp = 0

    # -- slots ---------------------------------------------------------------

    def build(self) -> Program:
        m, p = self.module, self.prog
        for port in m.ports:
            if port.direction == "inout":
                raise SimulationError(
                    f"{m.name}: inout port {port.name!r} is not simulatable")
        for name, sym in self.table.items():
            if sym.kind == "param":
                continue
            if sym.depth is not None:
                p.mem_of[name] = len(p.mems)
                p.mems.append((name, sym.depth, sym.width))
                continue
            p.slot_of[name] = len(p.slot_width)
            p.slot_width.append(sym.width)
            p.max_width = max(p.max_width, sym.width)
        self._temp_base = len(p.slot_width)

        for port in m.ports:
            slot = p.slot_of[port.name]
            if port.direction == "input":
                p.inputs.append((port.name, slot, port.width))
            else:
                p.outputs.append((port.name, slot, port.width))

        comb_items, seq_items = [], []
        for item in m.items:
            if isinstance(item, A.Instance):
                raise SimulationError(
                    f"{m.name}: instance {item.name!r} present; flatten the "
                    "design before simulating")
            if isinstance(item, A.Always) and not item.sens.star:
                seq_items.append(item)
            else:
                comb_items.append(item)

        start = len(p.insns)
        for item in self._topo_sort(comb_items):
            self._temp_next = self._temp_base
            if isinstance(item, A.ContAssign):
                self._stmt(A.Assign(item.lhs, item.rhs, blocking=True))
            else:
                self._stmt(item.body)
        self._emit(Insn(END))
        p.comb = (start, len(p.insns))

        for item in seq_items:
            seg_start = len(p.insns)
            self._temp_next = self._temp_base
            self._stmt(item.body)
            self._emit(Insn(END))
            guards = []
            pos_sigs = [s for e, s in item.sens.edges if e == "posedge"]
            neg_sigs = [s for e, s in item.sens.edges if e == "negedge"]
            if set(pos_sigs) & set(neg_sigs):
                raise SimulationError(
                    f"{m.name}: both edges of one signal in a sensitivity list")
            for edge, sig in item.sens.edges:
                if sig not in p.slot_of:
                    raise SimulationError(
                        f"{m.name}: edge on non-scalar signal {sig!r}")
                guards.append((p.slot_of[sig], 0 if edge == "posedge" else 1, sig))
            p.seq_segments.append(SeqSegment(seg_start, len(p.insns), guards))

        p.n_slots = self._temp_base + self._max_temp
        p.nba_capacity = max(
            1, sum(1 for i in p.insns
                   if i.op in (NBA, NBA_MEMWR, NBA_BIT, NBA_RANGE)))
        for i in p.insns:
            p.max_width = max(p.max_width, i.mask.bit_length())
        return p

    # -- combinational ordering ------------------------------------------------

    def _item_io(self, item: A.Item) -> tuple[set[str], set[str]]:
        """Nets read before assignment / nets assigned, for one comb item."""
        reads: set[str] = set()
        writes: set[str] = set()

        def expr_reads(e: A.Expr) -> None:
            for n in A.walk_exprs(e):
                if isinstance(n, A.Ident):
                    sym = self.table.get(n.name)
                    if sym and sym.kind != "param" and n.name not in writes:
                        reads.add(n.name)

        def visit(s: A.Stmt) -> None:
            if isinstance(s, A.Assign):
                expr_reads(s.rhs)
                if isinstance(s.lhs, (A.Index, A.PartSelect)):
                    if isinstance(s.lhs, A.Index):
                        expr_reads(s.lhs.index)
                    base = s.lhs.base.name
                    sym = self.table[base]
                    if sym.depth is None:
                        # partial write: previous bits observable
                        if base not in writes:
                            reads.add(base)
                        writes.add(base)
                elif isinstance(s.lhs, A.Ident):
                    writes.add(s.lhs.name)
            elif isinstance(s, A.If):
                expr_reads(s.cond)
                before = set(writes)
                visit(s.then)
                w_then = set(writes)
                writes.clear()
                writes.update(before)
                if s.other is not None:
                    visit(s.other)
                # only both-branch writes hide later reads
                w_else = set(writes)
                writes.clear()
                writes.update(before | (w_then & w_else))
            elif isinstance(s, A.Case):
                expr_reads(s.subject)
                before = set(writes)
                branch_writes = []
                has_default = False
                for arm in s.arms:
                    if arm.labels is not None:
                        for lab in arm.labels:
                            expr_reads(lab)
                    else:
                        has_default = True
                    writes.clear()
                    writes.update(before)
                    visit(arm.body)
                    branch_writes.append(set(writes))
                common = set.intersection(*branch_writes) if branch_writes else set()
                if not has_default:
                    common = set()
                writes.clear()
                writes.update(before | common)
            elif isinstance(s, A.Begin):
                for sub in s.stmts:
                    visit(sub)

        if isinstance(item, A.ContAssign):
            expr_reads(item.rhs)
            if isinstance(item.lhs, A.Index):
                expr_reads(item.lhs.index)
            base = item.lhs if isinstance(item.lhs, A.Ident) else item.lhs.base
            writes.add(base.name)
        else:
            visit(item.body)
        # memory names are not tracked as comb dependencies
        mems = set(self.prog.mem_of) | {
            n for n, s in self.table.items() if s.depth is not None}
        return reads - mems, writes - mems

    def _topo_sort(self, items: list[A.Item]) -> list[A.Item]:
        ios = [self._item_io(it) for it in items]
        producer: dict[str, int] = {}
        for idx, (_, writes) in enumerate(ios):
            for w in writes:
                producer[w] = idx
        # seq-assigned nets are cycle state, not comb dependencies
        seq_written: set[str] = set()
        for item in self.module.items:
            if isinstance(item, A.Always) and not item.sens.star:
                _, w = self._item_io(item)
                seq_written |= w
        deps: list[set[int]] = []
        for idx, (reads, _) in enumerate(ios):
            d = {producer[r] for r in reads
                 if r in producer and r not in seq_written and producer[r] != idx}
            deps.append(d)
        order: list[int] = []
        state = [0] * len(items)  # 0 new, 1 visiting, 2 done

        def visit(i: int, chain: list[int]) -> None:
            if state[i] == 2:
                return
            if state[i] == 1:
                nets = sorted(set().union(*(ios[j][1] for j in chain + [i])))
                raise CombinationalLoop(
                    f"{self.module.name}: combinational loop through "
                    + ", ".join(nets))
            state[i] = 1
            for j in sorted(deps[i]):
                visit(j, chain + [i])
            state[i] = 2
            order.append(i)

        for i in range(len(items)):
            visit(i, [])
        return [items[i] for i in order]

    # -- emission --------------------------------------------------------------

    def _emit(self, insn: Insn) -> int:
        self.prog.insns.append(insn)
        return len(self.prog.insns) - 1

    def _temp(self) -> int:
        t = self._temp_next
        self._temp_next += 1
        self._max_temp = max(self._max_temp, self._temp_next - self._temp_base)
        return t

    def _const(self, value: int) -> int:
        idx = self._pool_index.get(value)
        if idx is None:
            idx = len(self.prog.pool)
            self.prog.pool.append(value)
            self._pool_index[value] = idx
        return idx

    def _load_const(self, value: int) -> int:
        t = self._temp()
        self._emit(Insn(CONST, dst=t, imm=self._const(value)))
        return t

    # -- expressions -------------------------------------------------------------

    def _expr(self, e: A.Expr, w: int) -> int:
        """Compile e at evaluation width w (>= self width); returns a slot
        holding the value masked to w."""
        mask = _mask(w)
        if isinstance(e, A.Ident):
            sym = self.table[e.name]
            if sym.kind == "param":
                return self._load_const(sym.value & mask)
            return self.prog.slot_of[e.name]
        if isinstance(e, A.Literal):
            return self._load_const(e.value & mask)
        if isinstance(e, A.Index):
            sym = self.table[e.base.name]
            addr = self._expr(e.index, e.index.width)
            t = self._temp()
            if sym.depth is not None:
                self._emit(Insn(MEMRD, dst=t, a=self.prog.mem_of[e.base.name],
                                b=addr, mask=_mask(sym.width), aux=sym.depth))
            else:
                self._emit(Insn(BITSEL, dst=t, a=self.prog.slot_of[e.base.name],
                                b=addr, mask=1, aux=sym.width))
            return t
        if isinstance(e, A.PartSelect):
            t = self._temp()
            self._emit(Insn(PARTSEL, dst=t, a=self.prog.slot_of[e.base.name],
                            imm=e.lsb, mask=_mask(e.msb - e.lsb + 1)))
            return t
        if isinstance(e, A.Concat):
            return self._concat(e.parts, w)
        if isinstance(e, A.Repl):
            return self._concat([e.part] * e.count, w)
        if isinstance(e, A.Unary):
            if e.op == "~":
                a = self._expr(e.operand, w)
                t = self._temp()
                self._emit(Insn(NOT, dst=t, a=a, mask=mask))
                return t
            if e.op == "-":
                a = self._expr(e.operand, w)
                t = self._temp()
                self._emit(Insn(NEG, dst=t, a=a, mask=mask))
                return t
            a = self._expr(e.operand, e.operand.width)
            t = self._temp()
            if e.op == "!":
                self._emit(Insn(LNOT, dst=t, a=a, mask=1))
            elif e.op == "&":
                self._emit(Insn(RAND, dst=t, a=a, mask=1,
                                aux=_mask(e.operand.width)))
            elif e.op == "|":
                self._emit(Insn(ROR, dst=t, a=a, mask=1))
            elif e.op == "^":
                self._emit(Insn(RXOR, dst=t, a=a, mask=1))
            else:
                raise SimulationError(f"unknown unary op {e.op!r}")
            return t
        if isinstance(e, A.Binary):
            if e.op in ("<<", ">>"):
                a = self._expr(e.left, w)
                b = self._expr(e.right, e.right.width)
            elif e.op in _CMP_OPS:
                wc = max(e.left.width, e.right.width)
                a = self._expr(e.left, wc)
                b = self._expr(e.right, wc)
            elif e.op in ("&&", "||"):
                a = self._expr(e.left, e.left.width)
                b = self._expr(e.right, e.right.width)
            else:
                a = self._expr(e.left, w)
                b = self._expr(e.right, w)
            t = self._temp()
            omask = 1 if e.op in _CMP_OPS or e.op in ("&&", "||") else mask
            self._emit(Insn(_BINOP[e.op], dst=t, a=a, b=b, mask=omask))
            return t
        if isinstance(e, A.Ternary):
            c = self._expr(e.cond, e.cond.width)
            a = self._expr(e.then, w)
            b = self._expr(e.other, w)
            t = self._temp()
            self._emit(Insn(TERN, dst=t, a=a, b=b, imm=c, mask=mask))
            return t
        raise SimulationError(f"cannot compile {type(e).__name__}")

    def _concat(self, parts: list[A.Expr], w: int) -> int:
        mask = _mask(w)
        acc = self._temp()
        first = self._expr(parts[0], parts[0].width)
        self._emit(Insn(MOV, dst=acc, a=first, mask=mask))
        for part in parts[1:]:
            pw = part.width
            v = self._expr(part, pw)
            self._emit(Insn(SHLI, dst=acc, a=acc, imm=pw, mask=mask))
            self._emit(Insn(BOR, dst=acc, a=acc, b=v, mask=mask))
        return acc

    # -- statements ------------------------------------------------------------

    def _stmt(self, s: A.Stmt) -> None:
        if isinstance(s, A.Assign):
            self._assign(s)
        elif isinstance(s, A.Begin):
            for sub in s.stmts:
                self._stmt(sub)
        elif isinstance(s, A.If):
            c = self._expr(s.cond, s.cond.width)
            jz = self._emit(Insn(JZ, a=c))
            self._stmt(s.then)
            if s.other is not None:
                jend = self._emit(Insn(JMP))
                self.prog.insns[jz].imm = len(self.prog.insns)
                self._stmt(s.other)
                self.prog.insns[jend].imm = len(self.prog.insns)
            else:
                self.prog.insns[jz].imm = len(self.prog.insns)
        elif isinstance(s, A.Case):
            self._case(s)
        else:
            raise SimulationError(f"cannot compile {type(s).__name__}")

    def _case(self, s: A.Case) -> None:
        wc = s.subject.width
        for arm in s.arms:
            if arm.labels is not None:
                for lab in arm.labels:
                    wc = max(wc, lab.width)
        subj = self._expr(s.subject, wc)
        # pin the subject into a dedicated temp: label compilation reuses
        # the temp pool, and arm bodies reset it
        pinned = self._temp()
        self._emit(Insn(MOV, dst=pinned, a=subj, mask=_mask(wc)))
        base_temp = self._temp_next

        default_arm = None
        end_jumps = []
        for arm in s.arms:
            if arm.labels is None:
                default_arm = arm
                continue
            self._temp_next = base_temp
            match = self._temp()
            lab0 = self._expr(arm.labels[0], wc)
            self._emit(Insn(EQ, dst=match, a=pinned, b=lab0, mask=1))
            for lab in arm.labels[1:]:
                lv = self._expr(lab, wc)
                t = self._temp()
                self._emit(Insn(EQ, dst=t, a=pinned, b=lv, mask=1))
                self._emit(Insn(BOR, dst=match, a=match, b=t, mask=1))
            jz = self._emit(Insn(JZ, a=match))
            self._temp_next = base_temp
            self._stmt(arm.body)
            end_jumps.append(self._emit(Insn(JMP)))
            self.prog.insns[jz].imm = len(self.prog.insns)
        if default_arm is not None:
            self._temp_next = base_temp
            self._stmt(default_arm.body)
        for j in end_jumps:
            self.prog.insns[j].imm = len(self.prog.insns)

    def _assign(self, s: A.Assign) -> None:
        rhs = s.rhs
        if isinstance(s.lhs, A.Ident):
            sym = self.table[s.lhs.name]
            w = max(sym.width, rhs.width)
            v = self._expr(rhs, w)
            slot = self.prog.slot_of[s.lhs.name]
            op = MOV if s.blocking else NBA
            if op == MOV:
                self._emit(Insn(MOV, dst=slot, a=v, mask=_mask(sym.width)))
            else:
                self._emit(Insn(NBA, dst=slot, a=v, mask=_mask(sym.width)))
            return
        if isinstance(s.lhs, A.Index):
            base = s.lhs.base.name
            sym = self.table[base]
            addr = self._expr(s.lhs.index, s.lhs.index.width)
            if sym.depth is not None:
                w = max(sym.width, rhs.width)
                v = self._expr(rhs, w)
                op = MEMWR if s.blocking else NBA_MEMWR
                self._emit(Insn(op, dst=v, a=self.prog.mem_of[base], b=addr,
                                mask=_mask(sym.width), aux=sym.depth))
            else:
                v = self._expr(rhs, rhs.width)
                slot = self.prog.slot_of[base]
                op = STBIT if s.blocking else NBA_BIT
                self._emit(Insn(op, dst=slot, a=addr, b=v, aux=sym.width))
            return
        if isinstance(s.lhs, A.PartSelect):
            base = s.lhs.base.name
            fw = s.lhs.msb - s.lhs.lsb + 1
            w = max(fw, rhs.width)
            v = self._expr(rhs, w)
            slot = self.prog.slot_of[base]
            op = STRANGE if s.blocking else NBA_RANGE
            self._emit(Insn(op, dst=slot, a=v, imm=s.lhs.lsb, aux=_mask(fw)))
            return
        raise SimulationError("unsupported assignment target")


def compile_module(module: A.ModuleAst) -> Program:
    """Compile; width annotations are refreshed if missing."""
    probe = next(A.module_exprs(module), None)
    if probe is not None and probe.width is None:
        from ..frontend.width import annotate_module
        annotate_module(module)
    return _Compiler(module).build()
