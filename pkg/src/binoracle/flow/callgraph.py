"""Direct call graph over internal functions and imports."""
from __future__ import annotations

from dataclasses import dataclass

from ..disasm import Flow


class Resolver:
    """Maps code/slot addresses to callee names (internal sub_ names or import names)."""

    def __init__(self, funcs, img):
        self.entry = {f.entry_va: f.name for f in funcs}
        self.thunk = {}
        self.slot = {}
        for imp in img.imports:
            if imp.thunk_va is not None:
                self.thunk.setdefault(imp.thunk_va, imp.name)
            if imp.slot_va is not None:
                self.slot.setdefault(imp.slot_va, imp.name)
        self.imports = {imp.name for imp in img.imports}

    def target(self, insn) -> str | None:
        """Name of the direct (or import-slot) target of a call/jump, if any."""
        t = insn.static_target
        if t is not None:
            return self.entry.get(t) or self.thunk.get(t)
        if insn.operands and insn.operands[0].kind == "memory":
            addr = insn.mem_address(insn.operands[0])
            if addr is not None:
                return self.slot.get(addr)
        return None

    def names(self) -> dict[int, str]:
        """Address -> name table for rendering operands."""
        out = dict(self.slot)
        out.update(self.thunk)
        out.update(self.entry)
        return out


def call_sites(f, resolver: Resolver) -> list[tuple[int, str]]:
    """(instruction va, callee name) for calls and tail-jumps leaving ``f``."""
    inside = f.insn_vas
    out = []
    for insn in f.instructions:
        if insn.flow is Flow.CALL:
            name = resolver.target(insn)
        elif insn.flow in (Flow.JUMP, Flow.COND_JUMP):
            if insn.static_target is not None and insn.static_target in inside:
                continue
            name = resolver.target(insn)
        else:
            continue
        if name is not None:
            out.append((insn.va, name))
    return out


@dataclass(frozen=True)
class CallGraph:
    adjacency: dict
    reverse: dict

    def callees(self, name: str) -> list[str]:
        return list(self.adjacency.get(name, ()))

    def callers(self, name: str) -> list[str]:
        return list(self.reverse.get(name, ()))


def build_call_graph(funcs, img, resolver: Resolver | None = None) -> CallGraph:
    resolver = resolver or Resolver(funcs, img)
    addr = {f.name: f.entry_va for f in funcs}

    def order(names):
        # imports alphabetically, then internal functions by address
        return tuple(sorted(set(names), key=lambda n: (n in addr, addr.get(n, 0), n)))

    adj = {f.name: order(n for _, n in call_sites(f, resolver)) for f in funcs}
    rev: dict[str, list] = {}
    for src, dsts in adj.items():
        for d in dsts:
            rev.setdefault(d, []).append(src)
    for f in funcs:
        rev.setdefault(f.name, [])
    return CallGraph(adjacency=adj, reverse={k: order(v) for k, v in rev.items()})
