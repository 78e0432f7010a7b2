"""Instruction and operand records shared by every decoder."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

MASK64 = (1 << 64) - 1

REG64 = ["RAX", "RCX", "RDX", "RBX", "RSP", "RBP", "RSI", "RDI",
         "R8", "R9", "R10", "R11", "R12", "R13", "R14", "R15"]
REG32 = ["EAX", "ECX", "EDX", "EBX", "ESP", "EBP", "ESI", "EDI"] + [f"R{i}D" for i in range(8, 16)]
REG16 = ["AX", "CX", "DX", "BX", "SP", "BP", "SI", "DI"] + [f"R{i}W" for i in range(8, 16)]
REG8_REX = ["AL", "CL", "DL", "BL", "SPL", "BPL", "SIL", "DIL"] + [f"R{i}B" for i in range(8, 16)]
REG8_LEGACY = ["AL", "CL", "DL", "BL", "AH", "CH", "DH", "BH"]

# name -> (containing 64-bit register, width in bytes, byte offset inside it)
REGISTERS: dict[str, tuple[str, int, int]] = {}
for _i, _full in enumerate(REG64):
    REGISTERS[_full] = (_full, 8, 0)
    REGISTERS[REG32[_i]] = (_full, 4, 0)
    REGISTERS[REG16[_i]] = (_full, 2, 0)
    REGISTERS[REG8_REX[_i]] = (_full, 1, 0)
for _i, _name in enumerate(("AH", "CH", "DH", "BH")):
    REGISTERS[_name] = (REG64[_i], 1, 1)
REGISTERS["RIP"] = ("RIP", 8, 0)


def reg_name(num: int, width: int, rex: bool = True) -> str:
    if width == 8:
        return REG64[num]
    if width == 4:
        return REG32[num]
    if width == 2:
        return REG16[num]
    return REG8_REX[num] if rex else REG8_LEGACY[num]


class Flow(str, Enum):
    SEQUENTIAL = "sequential"
    JUMP = "jump"
    COND_JUMP = "cond_jump"
    CALL = "call"
    RET = "ret"
    HALT = "halt"
    INVALID = "invalid"


# flows that end a basic block
TERMINATORS = frozenset({Flow.JUMP, Flow.COND_JUMP, Flow.RET, Flow.HALT, Flow.INVALID})


@dataclass(frozen=True)
class Operand:
    kind: str                   # register | immediate | memory
    width: int
    reg: str | None = None
    value: int | None = None
    base: str | None = None
    index: str | None = None
    scale: int | None = None
    disp: int | None = None
    seg: str | None = None

    @staticmethod
    def register(name: str) -> "Operand":
        return Operand("register", REGISTERS[name][1], reg=name)

    @staticmethod
    def immediate(value: int, width: int) -> "Operand":
        return Operand("immediate", width, value=value)

    @staticmethod
    def memory(width: int, base=None, index=None, scale=1, disp=0, seg=None) -> "Operand":
        return Operand("memory", width, base=base, index=index, scale=scale, disp=disp, seg=seg)

    @property
    def rip_relative(self) -> bool:
        return self.kind == "memory" and self.base == "RIP"


@dataclass(frozen=True)
class Instruction:
    va: int
    length: int
    mnemonic: str
    operands: tuple = ()
    flow: Flow = Flow.SEQUENTIAL
    static_target: int | None = None

    @property
    def end(self) -> int:
        return self.va + self.length

    def mem_address(self, op: Operand) -> int | None:
        """Absolute address of a memory operand when it is static (rip-relative or absolute)."""
        if op.kind != "memory" or op.index is not None:
            return None
        if op.base == "RIP":
            return (self.end + op.disp) & MASK64
        if op.base is None:
            return op.disp & MASK64
        return None


def invalid(va: int, length: int = 1) -> Instruction:
    return Instruction(va=va, length=length, mnemonic="invalid", flow=Flow.INVALID)


_PTR = {1: "byte", 2: "word", 4: "dword", 8: "qword", 16: "xmmword"}


def _hex(v: int) -> str:
    return f"-{-v:#x}" if v < 0 else f"{v:#x}"


def format_operand(insn: Instruction, op: Operand, names=None, sized=True, lower=False) -> str:
    """Intel-style operand text. ``names`` maps absolute addresses to symbolic names."""
    if op.kind == "register":
        text = op.reg
    elif op.kind == "immediate":
        # branch immediates hold the relative displacement; show the absolute target
        if insn.static_target is not None:
            text = (names or {}).get(insn.static_target) or f"{insn.static_target:#x}"
        else:
            text = _hex(op.value)
    else:
        addr = insn.mem_address(op)
        if addr is not None and names and addr in names:
            inner = names[addr]
        elif op.base == "RIP" and not lower:
            inner = f"{addr:#x}"
        else:
            parts = []
            if op.base:
                parts.append(op.base)
            if op.index:
                parts.append(f"{op.index}*{op.scale:#x}")
            if op.disp or not parts:
                parts.append(_hex(op.disp))
            inner = " + ".join(parts)
        text = f"[{inner}]"
        if op.seg:
            text = f"{op.seg}:{text}"
        if sized and insn.mnemonic != "lea":
            text = f"{_PTR.get(op.width, f'b{op.width}')} ptr {text}"
    return text.lower() if lower else text


def format_intel(insn: Instruction) -> str:
    """Lower-case ``mnemonic op, op`` text used by fixture listings."""
    ops = ", ".join(format_operand(insn, op, lower=True) for op in insn.operands)
    return f"{insn.mnemonic} {ops}".rstrip()


def format_assembly(insn: Instruction, names=None) -> str:
    """``0x401230  MOV RBP,RSP`` -- upper-case mnemonic, comma-joined operands."""
    ops = ",".join(format_operand(insn, op, names) for op in insn.operands)
    text = "??" if insn.mnemonic == "invalid" else insn.mnemonic.upper()
    return f"{insn.va:#x}  {text} {ops}".rstrip()
