"""Executable container parsing: ELF and PE into an immutable :class:`BinaryImage`."""
from __future__ import annotations

import os
import re

from .elf import ELF_MAGIC, parse_elf
from .image import (ALLOC, EXECUTABLE, INITIALIZED, WRITABLE, BinaryFormat, BinaryImage,
                    ContainerError, ImportEntry, MalformedContainer, NotABinary, Section,
                    StringLiteral, SymbolEntry)
from .pe import parse_pe

__all__ = [
    "BinaryFormat", "BinaryImage", "ContainerError", "ImportEntry", "MalformedContainer",
    "NotABinary", "Section", "StringLiteral", "SymbolEntry", "entry_points", "extract_imports",
    "extract_strings", "load_binary", "parse_binary",
    "ALLOC", "EXECUTABLE", "INITIALIZED", "WRITABLE",
]

MIN_STRING = 4

# maximal printable-ASCII runs that end at a NUL or at the end of the section
_STRING_RE = re.compile(rb"(?<![\x20-\x7e])[\x20-\x7e]{%d,}(?=\x00|\Z)" % MIN_STRING)


def parse_binary(data: bytes, path: str | None = None) -> BinaryImage:
    if data[:4] == ELF_MAGIC:
        return parse_elf(data, path)
    if data[:2] == b"MZ":
        return parse_pe(data, path)
    raise NotABinary("unrecognized magic (expected ELF or MZ)", 0)


def load_binary(path: str | os.PathLike) -> BinaryImage:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_binary(data, os.fspath(path))


def extract_imports(img: BinaryImage) -> list[ImportEntry]:
    return list(img.imports)


def extract_strings(img: BinaryImage) -> list[StringLiteral]:
    """NUL-terminated printable ASCII literals (>= 4 chars) in mapped, initialized sections."""
    out = []
    for sec in img.mapped_sections():
        if not sec.initialized:
            continue
        for m in _STRING_RE.finditer(sec.data):
            text = m.group().decode("ascii")
            out.append(StringLiteral(va=sec.va + m.start(), text=text, byte_len=len(text)))
    out.sort(key=lambda s: (s.text, s.va))
    return out


def entry_points(img: BinaryImage, use_symbols: bool = True) -> list[int]:
    """Container entry, exported functions and (when present) symbol-table functions."""
    vas = set()
    if img.entry_va and img.is_executable(img.entry_va):
        vas.add(img.entry_va)
    for sym in img.symbols:
        if sym.kind != "func" or sym.absolute:
            continue
        if sym.source in ("export", "dynsym") or use_symbols:
            if img.is_executable(sym.va):
                vas.add(sym.va)
    return sorted(vas)
