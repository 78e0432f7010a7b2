"""P-code operations, storage locations and SSA values."""
from __future__ import annotations

from dataclasses import dataclass, field

OPCODES = (
    "COPY", "LOAD", "STORE", "INT_ADD", "INT_SUB", "INT_MULT", "INT_AND", "INT_OR", "INT_XOR",
    "INT_LEFT", "INT_RIGHT", "INT_SRIGHT", "INT_EQUAL", "INT_NOTEQUAL", "INT_LESS", "INT_SLESS",
    "INT_LESSEQUAL", "INT_SLESSEQUAL", "BOOL_NEGATE", "BOOL_AND", "BOOL_OR",
    "FLOAT_ADD", "FLOAT_SUB", "FLOAT_MULT", "FLOAT_DIV",
    "CALL", "CALLIND", "CBRANCH", "BRANCH", "BRANCHIND", "RETURN", "CAST", "SUBPIECE",
    "INT_ZEXT", "INT_SEXT", "PIECE", "PTRADD", "PTRSUB", "PHI",
)
COMPARISONS = frozenset({"INT_EQUAL", "INT_NOTEQUAL", "INT_LESS", "INT_SLESS", "INT_LESSEQUAL",
                         "INT_SLESSEQUAL", "BOOL_NEGATE", "BOOL_AND", "BOOL_OR"})
BLOCK_FINAL = frozenset({"CBRANCH", "BRANCH", "BRANCHIND", "RETURN"})
# ops kept even when their output is unused
SIDE_EFFECTS = frozenset({"STORE", "CALL", "CALLIND", "CBRANCH", "BRANCH", "BRANCHIND", "RETURN"})


def mask(width: int) -> int:
    return (1 << (8 * width)) - 1


def signed(value: int, width: int) -> int:
    value &= mask(width)
    return value - (1 << (8 * width)) if value >> (8 * width - 1) else value


@dataclass(frozen=True)
class Loc:
    """A storage location: register, stack slot (offset from entry RSP), flag, or unique temp."""
    space: str                  # register | stack | flag | unique
    width: int
    name: str | None = None
    offset: int | None = None

    def suffix(self) -> str:
        if self.space in ("register", "flag"):
            return f"@{self.name}"
        if self.space == "stack":
            sign = "-" if self.offset < 0 else ""
            return f"@stack[{sign}{abs(self.offset):#x}]"
        return ""


def reg(name: str) -> Loc:
    return Loc("register", 8, name=name)


def flag(name: str) -> Loc:
    return Loc("flag", 1, name=name)


def stack(offset: int, width: int) -> Loc:
    return Loc("stack", width, offset=offset)


class Value:
    """An SSA value. Identity-compared; ``id`` is assigned by the final renumbering."""
    __slots__ = ("id", "width", "loc", "type")

    def __init__(self, width: int, loc: Loc | None = None, type: str | None = None):
        self.id = None
        self.width = width
        self.loc = loc
        self.type = type

    def __repr__(self):
        return f"Value(v{self.id}:{self.width}{self.loc.suffix() if self.loc else ''})"


@dataclass(frozen=True)
class Const:
    value: int
    width: int

    def __post_init__(self):
        object.__setattr__(self, "value", signed(self.value, self.width))


@dataclass(frozen=True)
class Global:
    """RAM-space location identified by its address."""
    addr: int
    width: int


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class FuncRef:
    name: str


@dataclass(eq=False)
class PcodeOp:
    opcode: str
    output: object = None               # Loc (pre-SSA) or Value
    inputs: list = field(default_factory=list)
    va: int | None = None
    # CBRANCH only: (operator, op whose two inputs are displayed) for the condition text
    display: tuple | None = None

    def __post_init__(self):
        if self.opcode not in OPCODES:
            raise ValueError(f"unknown opcode {self.opcode}")
