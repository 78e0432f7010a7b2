"""Seeded recursive descent over the executable sections of a BinaryImage."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..container import BinaryImage, entry_points
from ..disasm import Decoder, Flow, Instruction, decode_at, default_decoder, linear_sweep
from .cfg import BasicBlock, split_blocks

# push rbp; mov rbp,rsp in both encodings, optionally behind endbr64
_PROLOGUE = re.compile(rb"(?:\xf3\x0f\x1e\xfa)?\x55\x48(?:\x89\xe5|\x8b\xec)")


@dataclass(frozen=True)
class FunctionRecord:
    name: str
    entry_va: int
    size_bytes: int
    instructions: tuple
    blocks: tuple
    edges: tuple = field(default=(), repr=False)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def insn_vas(self) -> frozenset:
        return frozenset(i.va for i in self.instructions)

    def info(self) -> dict:
        return {"name": self.name, "address": f"{self.entry_va:#x}", "size_bytes": self.size_bytes,
                "num_blocks": self.num_blocks}


def function_name(va: int) -> str:
    return f"sub_{va:x}"


def _seeds(img: BinaryImage, decoder: Decoder, thunks: set[int]) -> set[int]:
    seeds = set(entry_points(img, use_symbols=True))
    for sec in img.executable_sections():
        for insn in linear_sweep(sec, decoder):
            t = insn.static_target
            if insn.flow is Flow.CALL and t is not None and img.is_executable(t):
                seeds.add(t)
        for m in _PROLOGUE.finditer(sec.data):
            seeds.add(sec.va + m.start())
    return seeds - thunks


def _descend(img: BinaryImage, entry: int, seeds: set[int], thunks: set[int], decoder: Decoder):
    insns: dict[int, Instruction] = {}
    work = [entry]
    while work:
        va = work.pop()
        while va not in insns:
            if va != entry and (va in seeds or va in thunks):
                break                                   # fell into the next function
            if not img.is_executable(va):
                break
            insn = decode_at(img, va, decoder)
            if insn is None:
                break
            insns[va] = insn
            t = insn.static_target
            if insn.flow in (Flow.RET, Flow.HALT, Flow.INVALID):
                break
            if insn.flow is Flow.JUMP:
                if t is None or t in thunks or (t in seeds and t != entry):
                    break                               # indirect jump or tail call
                va = t
                continue
            if insn.flow is Flow.COND_JUMP and t is not None:
                if t not in thunks and (t not in seeds or t == entry):
                    work.append(t)
            va = insn.end
    return [insns[k] for k in sorted(insns)]


def discover_functions(img: BinaryImage, decoder: Decoder | None = None,
                       strict: bool = True) -> list[FunctionRecord]:
    """All functions reachable from entry, call-target and prologue seeds.

    ``strict`` ignores symbol names (sub_ names everywhere); otherwise a
    surviving function symbol names the function at its address.
    """
    decoder = decoder or default_decoder()
    thunks = {imp.thunk_va for imp in img.imports if imp.thunk_va is not None}
    seeds = _seeds(img, decoder, thunks)
    names = {}
    if not strict:
        for sym in img.symbols:
            if sym.kind == "func" and not sym.absolute:
                names.setdefault(sym.va, sym.name)
    out = []
    for entry in sorted(seeds):
        insns = _descend(img, entry, seeds, thunks, decoder)
        if not insns:
            continue
        blocks, edges = split_blocks(insns, entry)
        size = max(i.end for i in insns) - entry
        out.append(FunctionRecord(name=names.get(entry, function_name(entry)), entry_va=entry,
                                  size_bytes=size, instructions=tuple(insns), blocks=tuple(blocks),
                                  edges=tuple(edges)))
    return out


def function_from_listing(insns, entry: int | None = None, name: str | None = None) -> FunctionRecord:
    """Wrap fixture-listing instructions (already one function) as a FunctionRecord."""
    insns = sorted(insns, key=lambda i: i.va)
    entry = insns[0].va if entry is None else entry
    blocks, edges = split_blocks(insns, entry)
    size = max(i.end for i in insns) - entry if insns else 0
    return FunctionRecord(name=name or function_name(entry), entry_va=entry, size_bytes=size,
                          instructions=tuple(insns), blocks=tuple(blocks), edges=tuple(edges))


__all__ = ["BasicBlock", "FunctionRecord", "discover_functions", "function_from_listing", "function_name"]
