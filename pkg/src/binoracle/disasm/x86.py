"""Reference x86-64 decoder for the integer subset compilers emit for plain C.

Anything outside the subset decodes to ``flow=invalid`` with length 1; the
decoder never raises.
"""
from __future__ import annotations

import struct

from .insn import MASK64, REG64, Flow, Instruction, Operand, invalid, reg_name

MAX_LEN = 15

ALU = {0x00: "add", 0x08: "or", 0x20: "and", 0x28: "sub", 0x30: "xor", 0x38: "cmp"}
GRP1 = {0: "add", 1: "or", 4: "and", 5: "sub", 6: "xor", 7: "cmp"}
GRP2 = {4: "shl", 5: "shr", 7: "sar"}
JCC = ["jo", "jno", "jc", "jnc", "jz", "jnz", "jbe", "ja",
       "js", "jns", "jp", "jnp", "jl", "jge", "jle", "jg"]


class _Bad(Exception):
    pass


class _State:
    def __init__(self, buf: bytes, va: int):
        self.buf = buf
        self.va = va
        self.pos = 0
        self.opsize = False
        self.rep = None
        self.seg = None
        self.rex = 0
        self.has_rex = False

    # -- raw reads
    def u8(self) -> int:
        if self.pos >= len(self.buf):
            raise _Bad
        b = self.buf[self.pos]
        self.pos += 1
        return b

    def _unpack(self, fmt: str, n: int) -> int:
        if self.pos + n > len(self.buf):
            raise _Bad
        v, = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += n
        return v

    def imm(self, width: int) -> int:
        # 8-byte operations take a sign-extended 32-bit immediate
        return {1: lambda: self._unpack("<b", 1), 2: lambda: self._unpack("<h", 2),
                4: lambda: self._unpack("<i", 4), 8: lambda: self._unpack("<i", 4)}[width]()

    @property
    def W(self):
        return bool(self.rex & 8)

    @property
    def osz(self) -> int:
        return 8 if self.W else (2 if self.opsize else 4)

    def reg(self, num: int, width: int) -> Operand:
        return Operand.register(reg_name(num, width, self.has_rex))

    def modrm(self, width: int, reg_width: int | None = None):
        """Returns (reg field low bits, full reg number, reg operand, r/m operand, mod)."""
        m = self.u8()
        mod, reg, rm = m >> 6, ((m >> 3) & 7) | ((self.rex & 4) << 1), m & 7
        reg_op = self.reg(reg, reg_width or width)
        if mod == 3:
            return reg & 7, reg, reg_op, self.reg(rm | ((self.rex & 1) << 3), width), mod
        base = index = None
        scale = 1
        if rm == 4:
            sib = self.u8()
            scale = 1 << (sib >> 6)
            idx = ((sib >> 3) & 7) | ((self.rex & 2) << 2)
            index = None if idx == 4 else REG64[idx]
            b = sib & 7
            if b == 5 and mod == 0:
                disp = self.imm(4)
            else:
                base = REG64[b | ((self.rex & 1) << 3)]
        elif rm == 5 and mod == 0:
            base = "RIP"
            disp = self.imm(4)
        else:
            base = REG64[rm | ((self.rex & 1) << 3)]
        if mod == 1:
            disp = self.imm(1)
        elif mod == 2:
            disp = self.imm(4)
        elif base is not None and base != "RIP":
            disp = 0
        if index is None:
            scale = 1
        return reg & 7, reg, reg_op, Operand.memory(width, base, index, scale, disp, self.seg), mod


class X86Decoder:
    """Table-free decoder; ``decode`` is a pure function of (window, va)."""

    name = "x86-64-subset"

    def decode(self, window: bytes, va: int) -> Instruction:
        st = _State(bytes(window[:MAX_LEN]), va)
        try:
            out = _decode(st)
        except _Bad:
            return invalid(va)
        return out


def _done(st: _State, mnemonic: str, *ops, flow=Flow.SEQUENTIAL, rel=None) -> Instruction:
    length = st.pos
    target = None
    if rel is not None:
        target = (st.va + length + rel) & MASK64
    return Instruction(va=st.va, length=length, mnemonic=mnemonic, operands=tuple(ops),
                       flow=flow, static_target=target)


def _decode(st: _State) -> Instruction:
    while True:
        b = st.u8()
        if b == 0x66:
            st.opsize = True
        elif b in (0xF2, 0xF3):
            st.rep = b
        elif b in (0x2E, 0x3E, 0x26, 0x36):
            pass                                    # null segments / branch hints in 64-bit mode
        elif b in (0x64, 0x65):
            st.seg = "FS" if b == 0x64 else "GS"
        elif b in (0xF0, 0x67):
            raise _Bad                              # lock / address-size: outside the subset
        else:
            break
        if st.pos >= 14:
            raise _Bad
    if 0x40 <= b <= 0x4F:
        st.rex, st.has_rex = b, True
        b = st.u8()
        if b in (0x66, 0xF2, 0xF3, 0x2E, 0x3E, 0x26, 0x36, 0x64, 0x65, 0xF0, 0x67) or 0x40 <= b <= 0x4F:
            raise _Bad
    if b == 0x0F:
        return _decode_0f(st)

    branchy = b in (0xC3, 0xC2, 0xE8, 0xE9, 0xEB, 0xFF) or 0x70 <= b <= 0x7F
    if st.rep == 0xF3 and not (b == 0xC3 or b == 0xC2):
        raise _Bad
    if st.rep == 0xF2 and not branchy:
        raise _Bad
    if st.opsize and (branchy or 0x50 <= b <= 0x5F or b in (0x68, 0x6A, 0xC9)):
        raise _Bad

    if b < 0x40 and (b & 0xF8) in ALU and (b & 7) <= 5:
        mn = ALU[b & 0xF8]
        low = b & 7
        if low == 4:
            return _done(st, mn, st.reg(0, 1), Operand.immediate(st.imm(1), 1))
        if low == 5:
            w = st.osz
            return _done(st, mn, st.reg(0, w), Operand.immediate(st.imm(w), w))
        w = 1 if low in (0, 2) else st.osz
        _, _, reg_op, rm_op, _ = st.modrm(w)
        return _done(st, mn, rm_op, reg_op) if low < 2 else _done(st, mn, reg_op, rm_op)
    if 0x50 <= b <= 0x57:
        return _done(st, "push", Operand.register(REG64[(b & 7) | ((st.rex & 1) << 3)]))
    if 0x58 <= b <= 0x5F:
        return _done(st, "pop", Operand.register(REG64[(b & 7) | ((st.rex & 1) << 3)]))
    if b == 0x63:
        if not st.W:
            raise _Bad
        _, _, reg_op, rm_op, _ = st.modrm(4, reg_width=8)
        return _done(st, "movsxd", reg_op, rm_op)
    if b in (0x68, 0x6A):
        return _done(st, "push", Operand.immediate(st.imm(4 if b == 0x68 else 1), 8))
    if b in (0x69, 0x6B):
        w = st.osz
        _, _, reg_op, rm_op, _ = st.modrm(w)
        return _done(st, "imul", reg_op, rm_op, Operand.immediate(st.imm(w if b == 0x69 else 1), w))
    if 0x70 <= b <= 0x7F:
        rel = st.imm(1)
        return _done(st, JCC[b & 0xF], Operand.immediate(rel, 8), flow=Flow.COND_JUMP, rel=rel)
    if b in (0x80, 0x81, 0x83):
        w = 1 if b == 0x80 else st.osz
        sub, _, _, rm_op, _ = st.modrm(w)
        if sub not in GRP1:
            raise _Bad
        return _done(st, GRP1[sub], rm_op, Operand.immediate(st.imm(1 if b != 0x81 else w), w))
    if b in (0x84, 0x85):
        w = 1 if b == 0x84 else st.osz
        _, _, reg_op, rm_op, _ = st.modrm(w)
        return _done(st, "test", rm_op, reg_op)
    if 0x88 <= b <= 0x8B:
        w = 1 if b in (0x88, 0x8A) else st.osz
        _, _, reg_op, rm_op, _ = st.modrm(w)
        return _done(st, "mov", rm_op, reg_op) if b < 0x8A else _done(st, "mov", reg_op, rm_op)
    if b == 0x8D:
        _, _, reg_op, rm_op, mod = st.modrm(st.osz)
        if mod == 3:
            raise _Bad
        return _done(st, "lea", reg_op, rm_op)
    if b == 0x90:
        if st.rex & 1:
            raise _Bad                              # xchg r8, rax
        return _done(st, "nop")
    if b in (0xA8, 0xA9):
        w = 1 if b == 0xA8 else st.osz
        return _done(st, "test", st.reg(0, w), Operand.immediate(st.imm(w), w))
    if 0xB0 <= b <= 0xB7:
        return _done(st, "mov", st.reg((b & 7) | ((st.rex & 1) << 3), 1), Operand.immediate(st.imm(1), 1))
    if 0xB8 <= b <= 0xBF:
        w = st.osz
        num = (b & 7) | ((st.rex & 1) << 3)
        if w == 8:
            val = st._unpack("<q", 8)
        else:
            val = st.imm(w)
        return _done(st, "mov", st.reg(num, w), Operand.immediate(val, w))
    if b in (0xC0, 0xC1, 0xD0, 0xD1, 0xD2, 0xD3):
        w = 1 if b in (0xC0, 0xD0, 0xD2) else st.osz
        sub, _, _, rm_op, _ = st.modrm(w)
        if sub not in GRP2:
            raise _Bad
        if b in (0xC0, 0xC1):
            count = Operand.immediate(st.imm(1), 1)
        elif b in (0xD0, 0xD1):
            count = Operand.immediate(1, 1)
        else:
            count = Operand.register("CL")
        return _done(st, GRP2[sub], rm_op, count)
    if b == 0xC3:
        return _done(st, "ret", flow=Flow.RET)
    if b == 0xC2:
        return _done(st, "ret", Operand.immediate(st._unpack("<H", 2), 2), flow=Flow.RET)
    if b in (0xC6, 0xC7):
        w = 1 if b == 0xC6 else st.osz
        sub, _, _, rm_op, _ = st.modrm(w)
        if sub != 0:
            raise _Bad
        return _done(st, "mov", rm_op, Operand.immediate(st.imm(w), w))
    if b == 0xC9:
        return _done(st, "leave")
    if b == 0xCC:
        return _done(st, "int3", flow=Flow.HALT)
    if b == 0xF4:
        return _done(st, "hlt", flow=Flow.HALT)
    if b in (0xE8, 0xE9):
        rel = st.imm(4)
        flow = Flow.CALL if b == 0xE8 else Flow.JUMP
        return _done(st, "call" if b == 0xE8 else "jmp", Operand.immediate(rel, 8), flow=flow, rel=rel)
    if b == 0xEB:
        rel = st.imm(1)
        return _done(st, "jmp", Operand.immediate(rel, 8), flow=Flow.JUMP, rel=rel)
    if b in (0xF6, 0xF7):
        w = 1 if b == 0xF6 else st.osz
        sub, _, _, rm_op, _ = st.modrm(w)
        if sub != 0:
            raise _Bad
        return _done(st, "test", rm_op, Operand.immediate(st.imm(w), w))
    if b == 0xFE:
        sub, _, _, rm_op, _ = st.modrm(1)
        if sub > 1:
            raise _Bad
        return _done(st, ("inc", "dec")[sub], rm_op)
    if b == 0xFF:
        save = st.pos
        m = st.u8()
        st.pos = save
        sub = (m >> 3) & 7
        if sub in (0, 1):
            if st.rep:
                raise _Bad
            _, _, _, rm_op, _ = st.modrm(st.osz)
            return _done(st, ("inc", "dec")[sub], rm_op)
        if sub in (2, 4):
            _, _, _, rm_op, _ = st.modrm(8)
            if sub == 2:
                return _done(st, "call", rm_op, flow=Flow.CALL)
            return _done(st, "jmp", rm_op, flow=Flow.JUMP)
        if sub == 6 and not st.rep:
            _, _, _, rm_op, _ = st.modrm(8)
            return _done(st, "push", rm_op)
        raise _Bad
    raise _Bad


def _decode_0f(st: _State) -> Instruction:
    b = st.u8()
    if b == 0x0B:
        if st.rep or st.opsize:
            raise _Bad
        return Instruction(va=st.va, length=st.pos, mnemonic="ud2", flow=Flow.INVALID)
    if b == 0x1E:
        if st.rep == 0xF3 and not st.has_rex and st.u8() == 0xFA:
            return _done(st, "endbr64")
        raise _Bad
    if 0x80 <= b <= 0x8F:
        if st.rep == 0xF3 or st.opsize:
            raise _Bad
        rel = st.imm(4)
        return _done(st, JCC[b & 0xF], Operand.immediate(rel, 8), flow=Flow.COND_JUMP, rel=rel)
    if st.rep:
        raise _Bad
    if b == 0x1F:
        sub, _, _, rm_op, _ = st.modrm(st.osz)
        if sub != 0:
            raise _Bad
        return _done(st, "nop", rm_op)
    if b == 0xAF:
        w = st.osz
        _, _, reg_op, rm_op, _ = st.modrm(w)
        return _done(st, "imul", reg_op, rm_op)
    if b in (0xB6, 0xB7, 0xBE, 0xBF):
        src = 1 if b in (0xB6, 0xBE) else 2
        _, _, reg_op, rm_op, _ = st.modrm(src, reg_width=st.osz)
        return _done(st, "movzx" if b < 0xB8 else "movsx", reg_op, rm_op)
    raise _Bad
