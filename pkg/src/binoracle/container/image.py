"""Immutable in-memory model of a parsed executable."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from functools import cached_property
from enum import Enum


class ContainerError(Exception):
    """Base class for container parsing failures; carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset:#x})"
        super().__init__(message)


class NotABinary(ContainerError):
    pass


class MalformedContainer(ContainerError):
    pass


class BinaryFormat(str, Enum):
    ELF = "ELF"
    PE = "PE"


EXECUTABLE = "executable"
WRITABLE = "writable"
INITIALIZED = "initialized"
# mapped into the address space at run time; non-alloc sections carry va == 0
ALLOC = "alloc"


@dataclass(frozen=True)
class Section:
    name: str
    va: int
    size: int
    flags: frozenset
    data: bytes = b""
    file_offset: int | None = None

    @property
    def end(self) -> int:
        return self.va + self.size

    @property
    def executable(self) -> bool:
        return EXECUTABLE in self.flags

    @property
    def initialized(self) -> bool:
        return INITIALIZED in self.flags

    @property
    def mapped(self) -> bool:
        return ALLOC in self.flags

    def contains(self, va: int) -> bool:
        return self.mapped and self.va <= va < self.end


@dataclass(frozen=True)
class SymbolEntry:
    name: str
    va: int
    size: int = 0
    kind: str = "other"         # func | object | other
    source: str = "symtab"      # symtab | dynsym | export
    absolute: bool = False


@dataclass(frozen=True)
class ImportEntry:
    name: str
    library: str | None = None
    thunk_va: int | None = None
    # GOT / IAT slot the loader patches with the resolved address
    slot_va: int | None = None


@dataclass(frozen=True)
class StringLiteral:
    va: int
    text: str
    byte_len: int


@dataclass(frozen=True)
class BinaryImage:
    format: BinaryFormat
    content_hash: bytes
    sections: tuple
    symbols: tuple
    imports: tuple
    entry_va: int
    image_base: int
    path: str | None = field(default=None, compare=False)

    @property
    def sha256(self) -> str:
        return self.content_hash.hex()

    @cached_property
    def _mapped(self) -> tuple:
        return tuple(sorted((s for s in self.sections if s.mapped and s.size), key=lambda s: s.va))

    @cached_property
    def _starts(self) -> list[int]:
        return [s.va for s in self._mapped]

    def mapped_sections(self) -> list[Section]:
        return list(self._mapped)

    def executable_sections(self) -> list[Section]:
        return [s for s in self.mapped_sections() if s.executable and s.initialized]

    def section_at(self, va: int) -> Section | None:
        secs = self._mapped
        i = bisect.bisect_right(self._starts, va) - 1
        if i >= 0 and secs[i].contains(va):
            return secs[i]
        return None

    def read(self, va: int, n: int) -> bytes:
        """Up to ``n`` initialized bytes starting at ``va`` (short at section end)."""
        sec = self.section_at(va)
        if sec is None or not sec.initialized:
            return b""
        off = va - sec.va
        return sec.data[off:off + n]

    def is_executable(self, va: int) -> bool:
        sec = self.section_at(va)
        return sec is not None and sec.executable and sec.initialized
