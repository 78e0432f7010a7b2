"""Instruction decoding behind a swappable decoder interface."""
from __future__ import annotations

from typing import Protocol

from .insn import (REGISTERS, TERMINATORS, Flow, Instruction, Operand, format_assembly,
                   format_intel, format_operand, invalid)
from .listing import FixtureSyntax, normalize_fixture, parse_fixture, render_fixture
from .x86 import MAX_LEN, X86Decoder

__all__ = [
    "Decoder", "FixtureSyntax", "Flow", "Instruction", "Operand", "REGISTERS", "TERMINATORS",
    "X86Decoder", "decode_at", "decode_instruction", "default_decoder", "format_assembly",
    "format_intel", "format_operand", "invalid", "linear_sweep", "normalize_fixture",
    "parse_fixture", "render_fixture",
]


class Decoder(Protocol):
    name: str

    def decode(self, window: bytes, va: int) -> Instruction: ...


_DEFAULT = X86Decoder()


def default_decoder() -> Decoder:
    return _DEFAULT


def decode_instruction(window: bytes, va: int, decoder: Decoder | None = None) -> Instruction:
    if not window:
        raise ValueError("empty byte window")
    return (decoder or _DEFAULT).decode(window, va)


def decode_at(img, va: int, decoder: Decoder | None = None) -> Instruction | None:
    """Decode at ``va`` inside a BinaryImage; None when the address holds no bytes."""
    window = img.read(va, MAX_LEN)
    if not window:
        return None
    return (decoder or _DEFAULT).decode(window, va)


def linear_sweep(section, decoder: Decoder | None = None) -> list[Instruction]:
    dec = decoder or _DEFAULT
    data, out, off = section.data, [], 0
    while off < len(data):
        insn = dec.decode(data[off:off + MAX_LEN], section.va + off)
        out.append(insn)
        off += 1 if insn.flow is Flow.INVALID else insn.length
    return out
