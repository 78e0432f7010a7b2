"""Instruction -> p-code templates (pre-SSA), with RSP/RBP-relative stack slot promotion."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..disasm import REGISTERS, Flow, Instruction
from .ir import Const, FuncRef, Global, Label, Loc, PcodeOp, Value, flag, mask, reg, stack

SYSV_ARGS = ("RDI", "RSI", "RDX", "RCX", "R8", "R9")
WIN64_ARGS = ("RCX", "RDX", "R8", "R9")
ABI_ARGS = {"sysv": SYSV_ARGS, "win64": WIN64_ARGS}

FLAG_WRITERS = frozenset({"add", "sub", "and", "or", "xor", "cmp", "test", "inc", "dec",
                          "shl", "shr", "sar", "imul"})
_DEST_WRITERS = frozenset({"mov", "movzx", "movsx", "movsxd", "lea", "add", "sub", "and", "or", "xor",
                           "shl", "shr", "sar", "imul", "inc", "dec", "pop"})
_FRAME = ("RSP", "RBP")

# jcc -> condition built from flag values
_JCC = {
    "jz": ("ZF",), "jnz": ("!", ("ZF",)), "jc": ("CF",), "jnc": ("!", ("CF",)),
    "jbe": ("|", ("CF",), ("ZF",)), "ja": ("!", ("|", ("CF",), ("ZF",))),
    "js": ("SF",), "jns": ("!", ("SF",)), "jo": ("OF",), "jno": ("!", ("OF",)),
    "jl": ("!=", ("SF",), ("OF",)), "jge": ("==", ("SF",), ("OF",)),
    "jle": ("|", ("ZF",), ("!=", ("SF",), ("OF",))),
    "jg": ("!", ("|", ("ZF",), ("!=", ("SF",), ("OF",)))),
}
# jcc -> (flag-source key, operator, swap operands) for the CBRANCH display text
_DISPLAY = {
    "jz": ("eq", "==", False), "jnz": ("eq", "!=", False),
    "jc": ("ult", "<u", False), "jnc": ("ult", "<=u", True),
    "jbe": ("ult", "<=u", False), "ja": ("ult", "<u", True),
    "jl": ("slt", "<", False), "jge": ("slt", "<=", True),
    "jle": ("slt", "<=", False), "jg": ("slt", "<", True),
    "js": ("neg", "<", False), "jns": ("neg", "<=", True),
}


class UnsupportedInstruction(Exception):
    """Raised for instructions without a template; ``ops`` holds the block's ops so far."""

    def __init__(self, insn: Instruction, ops=None):
        self.insn = insn
        self.ops = list(ops or [])
        super().__init__(f"no p-code template for {insn.mnemonic!r} at {insn.va:#x}")


# ---------------------------------------------------------------- stack frame analysis

def _full(op) -> str | None:
    return REGISTERS[op.reg][0] if op.kind == "register" else None


def _frame_step(insn: Instruction, rsp, rbp):
    m, ops = insn.mnemonic, insn.operands
    dst = _full(ops[0]) if ops else None
    src = ops[1] if len(ops) > 1 else None
    if m == "push":
        return (rsp - 8 if rsp is not None else None), rbp
    if m == "pop":
        rsp = rsp + 8 if rsp is not None else None
        if dst == "RBP":
            rbp = None
        if dst == "RSP":
            rsp = None
        return rsp, rbp
    if m == "leave":
        return (rbp + 8 if rbp is not None else None), None
    if m in ("add", "sub") and dst == "RSP" and ops[0].width == 8 and src.kind == "immediate":
        if rsp is None:
            return None, rbp
        return (rsp + src.value if m == "add" else rsp - src.value), rbp
    if m == "mov" and dst in _FRAME and ops[0].width == 8 and src.kind == "register" and src.reg in _FRAME:
        val = rsp if src.reg == "RSP" else rbp
        return (val, rbp) if dst == "RSP" else (rsp, val)
    if m == "lea" and dst in _FRAME and ops[0].width == 8 and src.base in _FRAME and src.index is None:
        base = rsp if src.base == "RSP" else rbp
        val = base + src.disp if base is not None else None
        return (val, rbp) if dst == "RSP" else (rsp, val)
    if m in _DEST_WRITERS and dst in _FRAME:
        return (None, rbp) if dst == "RSP" else (rsp, None)
    return rsp, rbp


_TOP = object()


def frame_offsets(f) -> dict[int, tuple]:
    """(RSP, RBP) offsets from the entry stack pointer before each instruction; None = unknown."""
    by_va = {i.va: i for i in f.instructions}
    blocks = {b.label: b for b in f.blocks}
    succ = {}
    for s, t, _ in f.edges:
        succ.setdefault(s, []).append(t)
    state_in = {b.label: _TOP for b in f.blocks}
    if not f.blocks:
        return {}
    state_in["blk_0"] = (0, None)
    out = {}
    work = ["blk_0"]
    while work:
        lab = work.pop()
        rsp, rbp = state_in[lab]
        for va in blocks[lab].insn_vas:
            out[va] = (rsp, rbp)
            rsp, rbp = _frame_step(by_va[va], rsp, rbp)
        for t in succ.get(lab, ()):
            old = state_in[t]
            new = (rsp, rbp) if old is _TOP else tuple(a if a == b else None for a, b in zip(old, (rsp, rbp)))
            if new != old:
                state_in[t] = new
                work.append(t)
    return out


def _stack_slots(f, frames) -> set[tuple[int, int]]:
    """Stack slots safe to promote: no escaping frame address, no overlapping slot shapes."""
    slots = set()
    for insn in f.instructions:
        rsp, rbp = frames.get(insn.va, (None, None))
        m = insn.mnemonic
        if m == "push":
            if rsp is None:
                return set()
            slots.add((rsp - 8, 8))
        elif m == "pop":
            if rsp is None:
                return set()
            slots.add((rsp, 8))
        elif m == "leave":
            if rbp is None:
                return set()
            slots.add((rbp, 8))
        # recognised frame-pointer arithmetic moves one of two distinct probe offsets
        frame_ops_ok = _frame_step(insn, 16, 32) != (16, 32) or m in ("push", "pop")
        for k, op in enumerate(insn.operands):
            if op.kind == "memory" and (op.base in _FRAME or op.index in _FRAME):
                if m == "lea" and not frame_ops_ok:
                    return set()                    # frame address escapes
                if m == "lea":
                    continue
                base = rsp if op.base == "RSP" else rbp
                if op.index is not None or base is None:
                    return set()
                slots.add((base + op.disp, op.width))
            elif op.kind == "register" and op.reg in _FRAME and not frame_ops_ok and (k > 0 or m in ("cmp", "test", "push")):
                return set()                        # frame pointer value copied somewhere
    bad = set()
    ordered = sorted(slots)
    for i, (o1, w1) in enumerate(ordered):
        for o2, w2 in ordered[i + 1:]:
            if o2 >= o1 + w1:
                break
            bad |= {(o1, w1), (o2, w2)}
    return slots - bad


# ---------------------------------------------------------------- templates

@dataclass
class LiftedBlock:
    label: str
    start: int
    ops: list = field(default_factory=list)


@dataclass
class LiftedFunction:
    name: str
    entry_va: int
    blocks: list
    preds: dict
    succs: dict
    unsupported: list = field(default_factory=list)     # (va, mnemonic)


class _Lifter:
    def __init__(self, f, abi: str, resolver, frames, slots, labels):
        self.f = f
        self.args = ABI_ARGS[abi]
        self.resolver = resolver
        self.frames = frames
        self.slots = slots
        self.labels = labels
        self.inside = f.insn_vas
        self.ops: list[PcodeOp] = []
        self.flag_src: dict[str, PcodeOp] = {}

    # -- plumbing
    def emit(self, opcode, out, *inputs, display=None) -> PcodeOp:
        op = PcodeOp(opcode, out, list(inputs), va=self.insn.va, display=display)
        self.ops.append(op)
        return op

    def tmp(self, width, type=None) -> Value:
        return Value(width, None, type)

    def calc(self, opcode, width, *inputs, type=None):
        out = self.tmp(width, type)
        self.emit(opcode, out, *inputs)
        return out

    def _slot(self, op) -> Loc | None:
        if op.kind != "memory" or op.base not in _FRAME or op.index is not None or op.seg:
            return None
        rsp, rbp = self.frames.get(self.insn.va, (None, None))
        base = rsp if op.base == "RSP" else rbp
        if base is None or (base + op.disp, op.width) not in self.slots:
            return None
        return stack(base + op.disp, op.width)

    def address(self, op, out=None):
        if op.seg:
            raise UnsupportedInstruction(self.insn, self.ops)
        addr = self.insn.mem_address(op)
        if addr is not None:
            cur = Global(addr, 8)
            if out is not None:
                self.emit("PTRSUB", out, Const(0, 8), cur)
                return out
            return self.calc("PTRSUB", 8, Const(0, 8), cur, type="void *")
        steps = []
        cur = reg(op.base) if op.base else None
        if op.index:
            idx = reg(op.index)
            if cur is None:
                steps.append(("INT_MULT", [idx, Const(op.scale, 8)], None))
            else:
                steps.append(("PTRADD", [cur, idx, Const(op.scale, 8)], "void *"))
        if op.disp or (cur is None and not op.index):
            steps.append(("INT_ADD", [None, Const(op.disp, 8)], None))
        if not steps:
            if out is not None:
                self.emit("COPY", out, cur)
                return out
            return cur
        for k, (opc, ins, typ) in enumerate(steps):
            if ins[0] is None:
                ins[0] = cur if cur is not None else Const(0, 8)
            if k == len(steps) - 1 and out is not None:
                self.emit(opc, out, *ins)
                cur = out
            else:
                cur = self.calc(opc, 8, *ins, type=typ)
        return cur

    def read(self, op, width=None):
        width = width or op.width
        if op.kind == "immediate":
            return Const(op.value, width)
        if op.kind == "register":
            full, w, off = REGISTERS[op.reg]
            if w == 8:
                return reg(full)
            return self.calc("SUBPIECE", w, reg(full), Const(off, 4))
        slot = self._slot(op)
        if slot is not None:
            return slot
        addr = self.insn.mem_address(op)
        if addr is not None and not op.seg:
            return self.calc("LOAD", op.width, Global(addr, op.width))
        return self.calc("LOAD", op.width, self.address(op))

    def assign(self, dst, opcode, *inputs):
        """Write ``opcode(inputs)`` to operand ``dst``; returns a token reading the result."""
        if opcode == "COPY" and self._fresh(inputs[0]) and (dst.width == 8 or self._slot(dst) is not None):
            target = reg(REGISTERS[dst.reg][0]) if dst.kind == "register" else self._slot(dst)
            if target is not None:
                self.ops[-1].output = target       # retarget the temp's producer
                return target
        if dst.kind == "register":
            full, w, off = REGISTERS[dst.reg]
            if w == 8:
                self.emit(opcode, reg(full), *inputs)
                return reg(full)
            if w == 4:
                if opcode == "COPY" and isinstance(inputs[0], Const):
                    self.emit("COPY", reg(full), Const(inputs[0].value & mask(4), 8))
                    return self.calc("SUBPIECE", 4, reg(full), Const(0, 4))
                val = inputs[0] if opcode == "COPY" else self.calc(opcode, 4, *inputs)
                self.emit("INT_ZEXT", reg(full), val)
                return val
            val = inputs[0] if opcode == "COPY" and not isinstance(inputs[0], Loc) else self.calc(opcode, w, *inputs)
            z = self.calc("INT_ZEXT", 8, val)
            if off:
                z = self.calc("INT_LEFT", 8, z, Const(8 * off, 4))
            keep = self.calc("INT_AND", 8, reg(full), Const(~(mask(w) << (8 * off)), 8))
            self.emit("INT_OR", reg(full), keep, z)
            return val
        slot = self._slot(dst)
        if slot is not None:
            self.emit(opcode, slot, *inputs)
            return slot
        if opcode == "COPY":
            val = inputs[0]
        else:
            val = self.calc(opcode, dst.width, *inputs)
        addr = self.insn.mem_address(dst)
        if addr is not None and not dst.seg:
            self.emit("STORE", None, Global(addr, dst.width), val)
        else:
            self.emit("STORE", None, self.address(dst), val)
        return val

    def _fresh(self, x) -> bool:
        return isinstance(x, Value) and bool(self.ops) and self.ops[-1].output is x

    def setflag(self, name, opcode, *inputs) -> PcodeOp:
        return self.emit(opcode, flag(name), *inputs)

    def call_args(self):
        return [reg(r) for r in self.args]

    # -- per-instruction
    def lift(self, insn: Instruction):
        self.insn = insn
        m = insn.mnemonic
        fn = getattr(self, f"op_{m}", None)
        if insn.flow is Flow.INVALID or fn is None:
            raise UnsupportedInstruction(insn, self.ops)
        if m in FLAG_WRITERS:
            self.flag_src = {}
        fn(insn, *insn.operands)

    def op_nop(self, insn, *ops):
        pass

    op_endbr64 = op_nop

    def op_int3(self, insn, *ops):
        pass

    op_hlt = op_int3

    def op_mov(self, insn, dst, src):
        self.assign(dst, "COPY", self.read(src, dst.width))

    def op_movzx(self, insn, dst, src):
        self.assign(dst, "INT_ZEXT", self.read(src))

    def op_movsx(self, insn, dst, src):
        self.assign(dst, "INT_SEXT", self.read(src))

    op_movsxd = op_movsx

    def op_lea(self, insn, dst, src):
        if dst.width == 8:
            self.address(src, out=reg(REGISTERS[dst.reg][0]))
        else:
            a = self.address(src)
            self.assign(dst, "SUBPIECE", a, Const(0, 4))

    def op_push(self, insn, src):
        val = self.read(src, 8)
        rsp, _ = self.frames.get(insn.va, (None, None))
        if rsp is not None and (rsp - 8, 8) in self.slots:
            self.emit("COPY", stack(rsp - 8, 8), val)
        else:
            a = self.calc("INT_SUB", 8, reg("RSP"), Const(8, 8))
            self.emit("STORE", None, a, val)
        self.emit("INT_SUB", reg("RSP"), reg("RSP"), Const(8, 8))

    def _pop_value(self, off):
        if off is not None and (off, 8) in self.slots:
            return stack(off, 8)
        return self.calc("LOAD", 8, reg("RSP"))

    def op_pop(self, insn, dst):
        rsp, _ = self.frames.get(insn.va, (None, None))
        val = self._pop_value(rsp)
        if isinstance(val, Loc):
            val = self.calc("COPY", 8, val)
        self.emit("INT_ADD", reg("RSP"), reg("RSP"), Const(8, 8))
        self.assign(dst, "COPY", val)

    def op_leave(self, insn):
        _, rbp = self.frames.get(insn.va, (None, None))
        self.emit("COPY", reg("RSP"), reg("RBP"))
        val = self._pop_value(rbp)
        self.emit("COPY", reg("RBP"), val)
        self.emit("INT_ADD", reg("RSP"), reg("RSP"), Const(8, 8))

    def _zero_idiom(self, dst):
        self.assign(dst, "COPY", Const(0, dst.width))
        for name, v in (("ZF", 1), ("SF", 0), ("CF", 0), ("OF", 0)):
            self.setflag(name, "COPY", Const(v, 1))

    def _subtract(self, dst, a, b, write: bool):
        w = dst.width
        eq = self.setflag("ZF", "INT_EQUAL", a, b)
        ult = self.setflag("CF", "INT_LESS", a, b)
        slt_val = self.tmp(1, "bool")
        slt = self.emit("INT_SLESS", slt_val, a, b)
        res = self.assign(dst, "INT_SUB", a, b) if write else self.calc("INT_SUB", w, a, b)
        neg = self.setflag("SF", "INT_SLESS", res, Const(0, w))
        self.setflag("OF", "INT_NOTEQUAL", flag("SF"), slt_val)
        self.flag_src = {"eq": eq, "ult": ult, "slt": slt, "neg": neg}

    def op_sub(self, insn, dst, src):
        if dst == src and dst.kind == "register":
            return self._zero_idiom(dst)
        self._subtract(dst, self.read(dst), self.read(src, dst.width), True)

    def op_cmp(self, insn, dst, src):
        self._subtract(dst, self.read(dst), self.read(src, dst.width), False)

    def op_add(self, insn, dst, src):
        w = dst.width
        a, b = self.read(dst), self.read(src, w)
        nota = self.calc("INT_XOR", w, a, Const(-1, w))
        self.setflag("CF", "INT_LESS", nota, b)
        sa = self.calc("INT_SLESS", 1, a, Const(0, w), type="bool")
        sb = self.calc("INT_SLESS", 1, b, Const(0, w), type="bool")
        res = self.assign(dst, "INT_ADD", a, b)
        eq = self.setflag("ZF", "INT_EQUAL", res, Const(0, w))
        neg = self.setflag("SF", "INT_SLESS", res, Const(0, w))
        same = self.calc("INT_EQUAL", 1, sa, sb, type="bool")
        flip = self.calc("INT_NOTEQUAL", 1, flag("SF"), sa, type="bool")
        self.setflag("OF", "BOOL_AND", same, flip)
        self.flag_src = {"eq": eq, "neg": neg}

    def _logic(self, opcode, dst, src, write: bool):
        w = dst.width
        if opcode == "INT_AND" and not write and dst == src:
            res = self.read(dst)                    # test r, r
        else:
            a, b = self.read(dst), self.read(src, w)
            res = self.assign(dst, opcode, a, b) if write else self.calc(opcode, w, a, b)
        eq = self.setflag("ZF", "INT_EQUAL", res, Const(0, w))
        neg = self.setflag("SF", "INT_SLESS", res, Const(0, w))
        self.setflag("CF", "COPY", Const(0, 1))
        self.setflag("OF", "COPY", Const(0, 1))
        self.flag_src = {"eq": eq, "slt": neg, "neg": neg}

    def op_and(self, insn, dst, src):
        self._logic("INT_AND", dst, src, True)

    def op_or(self, insn, dst, src):
        self._logic("INT_OR", dst, src, True)

    def op_xor(self, insn, dst, src):
        if dst == src and dst.kind == "register":
            return self._zero_idiom(dst)
        self._logic("INT_XOR", dst, src, True)

    def op_test(self, insn, dst, src):
        self._logic("INT_AND", dst, src, False)

    def _incdec(self, dst, opcode, edge):
        w = dst.width
        res = self.assign(dst, opcode, self.read(dst), Const(1, w))
        eq = self.setflag("ZF", "INT_EQUAL", res, Const(0, w))
        neg = self.setflag("SF", "INT_SLESS", res, Const(0, w))
        self.setflag("OF", "INT_EQUAL", res, Const(edge, w))
        self.flag_src = {"eq": eq, "neg": neg}

    def op_inc(self, insn, dst):
        self._incdec(dst, "INT_ADD", 1 << (8 * dst.width - 1))

    def op_dec(self, insn, dst):
        self._incdec(dst, "INT_SUB", (1 << (8 * dst.width - 1)) - 1)

    def _shift(self, opcode, dst, count):
        w = dst.width
        bits = 8 * w
        cmask = 63 if w == 8 else 31
        a = self.read(dst)
        if count.kind == "immediate":
            c = count.value & cmask
            if c == 0:
                # flags untouched, but a 32-bit register write still clears the upper half
                if w == 4 and dst.kind == "register":
                    self.assign(dst, "COPY", a)
                return
            cf = None
            if c <= bits:
                if opcode == "INT_LEFT":
                    bit = self.calc("INT_RIGHT", w, a, Const(bits - c, 4))
                else:
                    bit = self.calc(opcode, w, a, Const(c - 1, 4))
                low = self.calc("INT_AND", w, bit, Const(1, w))
                cf = self.setflag("CF", "INT_NOTEQUAL", low, Const(0, w))
            msb = self.calc("INT_SLESS", 1, a, Const(0, w), type="bool") if c == 1 and opcode == "INT_RIGHT" else None
            res = self.assign(dst, opcode, a, Const(c, 4))
        else:
            # flags after a variable count are modelled as if the count were nonzero
            cnt = self.calc("INT_AND", 1, self.read(count), Const(cmask, 1))
            res = self.assign(dst, opcode, a, cnt)
            c, cf, msb = None, None, None
        eq = self.setflag("ZF", "INT_EQUAL", res, Const(0, w))
        neg = self.setflag("SF", "INT_SLESS", res, Const(0, w))
        if c == 1:
            if opcode == "INT_LEFT" and cf is not None:
                self.setflag("OF", "INT_NOTEQUAL", flag("SF"), flag("CF"))
            elif opcode == "INT_RIGHT":
                self.setflag("OF", "COPY", msb)
            else:
                self.setflag("OF", "COPY", Const(0, 1))
        self.flag_src = {"eq": eq, "neg": neg}

    def op_shl(self, insn, dst, count):
        self._shift("INT_LEFT", dst, count)

    def op_shr(self, insn, dst, count):
        self._shift("INT_RIGHT", dst, count)

    def op_sar(self, insn, dst, count):
        self._shift("INT_SRIGHT", dst, count)

    def op_imul(self, insn, dst, src, imm=None):
        w = dst.width
        if imm is None:
            a, b = self.read(dst), self.read(src)
        else:
            a, b = self.read(src), self.read(imm, w)
        wide_a = self.calc("INT_SEXT", 2 * w, a)
        wide_b = self.calc("INT_SEXT", 2 * w, b)
        full = self.calc("INT_MULT", 2 * w, wide_a, wide_b)
        low = self.calc("SUBPIECE", w, full, Const(0, 4))
        back = self.calc("INT_SEXT", 2 * w, low)
        self.setflag("OF", "INT_NOTEQUAL", back, full)
        self.setflag("CF", "COPY", flag("OF"))
        self.assign(dst, "INT_MULT", a, b)

    def op_ret(self, insn, *ops):
        self.emit("RETURN", None, reg("RAX"))

    def op_call(self, insn, target):
        self.flag_src = {}
        name = self.resolver.target(insn) if self.resolver else None
        if name is None and insn.static_target is not None:
            name = f"sub_{insn.static_target:x}"
        if name is not None:
            self.emit("CALL", reg("RAX"), FuncRef(name), *self.call_args())
        else:
            self.emit("CALLIND", reg("RAX"), self.read(target, 8), *self.call_args())

    def op_jmp(self, insn, target):
        t = insn.static_target
        if t is not None and t in self.inside:
            self.emit("BRANCH", None, Label(self.labels[t]))
            return
        name = self.resolver.target(insn) if self.resolver else None
        if name is None and t is not None:
            name = f"sub_{t:x}"
        if name is not None:                        # tail call
            self.emit("CALL", reg("RAX"), FuncRef(name), *self.call_args())
            self.emit("RETURN", None, reg("RAX"))
        else:
            self.emit("BRANCHIND", None, self.read(target, 8))

    def _cond(self, expr):
        if len(expr) == 1:
            return flag(expr[0])
        if expr[0] == "!":
            return self.calc("BOOL_NEGATE", 1, self._cond(expr[1]), type="bool")
        a, b = self._cond(expr[1]), self._cond(expr[2])
        opc = {"|": "BOOL_OR", "==": "INT_EQUAL", "!=": "INT_NOTEQUAL"}[expr[0]]
        return self.calc(opc, 1, a, b, type="bool")

    def jcc(self, insn):
        m = insn.mnemonic
        t = insn.static_target
        if m not in _JCC or t not in self.inside:
            raise UnsupportedInstruction(insn, self.ops)
        cond = self._cond(_JCC[m])
        display = None
        if m in _DISPLAY and _DISPLAY[m][0] in self.flag_src:
            key, sym, swap = _DISPLAY[m]
            display = (sym, self.flag_src[key], swap)
        self.emit("CBRANCH", None, Label(self.labels[t]), cond, display=display)


def _jcc_method(self, insn, *ops):
    self.jcc(insn)


for _m in _JCC:
    setattr(_Lifter, f"op_{_m}", _jcc_method)
for _m in ("jp", "jnp"):
    setattr(_Lifter, f"op_{_m}", _jcc_method)


def lift_block(block, f, abi: str = "sysv", resolver=None, frames=None, slots=None, labels=None):
    """Pre-SSA p-code for one basic block of ``f``."""
    frames = frame_offsets(f) if frames is None else frames
    slots = _stack_slots(f, frames) if slots is None else slots
    labels = labels or {b.start: b.label for b in f.blocks}
    lifter = _Lifter(f, abi, resolver, frames, slots, labels)
    by_va = {i.va: i for i in f.instructions}
    for va in block.insn_vas:
        lifter.lift(by_va[va])
    return lifter.ops


def lift_function(f, abi: str = "sysv", resolver=None) -> LiftedFunction:
    frames = frame_offsets(f)
    slots = _stack_slots(f, frames)
    labels = {b.start: b.label for b in f.blocks}
    preds = {b.label: [] for b in f.blocks}
    succs = {b.label: [] for b in f.blocks}
    for s, t, _ in f.edges:
        preds[t].append(s)
        succs[s].append(t)
    blocks, unsupported = [], []
    for b in f.blocks:
        try:
            ops = lift_block(b, f, abi, resolver, frames, slots, labels)
        except UnsupportedInstruction as exc:
            ops = exc.ops
            unsupported.append((exc.insn.va, exc.insn.mnemonic))
        blocks.append(LiftedBlock(b.label, b.start, ops))
    return LiftedFunction(f.name, f.entry_va, blocks, preds, succs, unsupported)
