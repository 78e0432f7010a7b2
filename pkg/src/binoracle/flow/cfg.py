"""Basic-block splitting and CFG construction with reverse-post-order labels."""
from __future__ import annotations

from dataclasses import dataclass

from ..disasm import TERMINATORS, Flow, Instruction

EDGE_TYPES = ("fallthrough", "branch_true", "branch_false", "unconditional")


@dataclass(frozen=True)
class BasicBlock:
    label: str
    insn_vas: tuple
    terminator: Instruction

    @property
    def start(self) -> int:
        return self.insn_vas[0]


@dataclass(frozen=True)
class CFGEdge:
    source: str
    target: str
    edge_type: str

    def to_dict(self) -> dict:
        return {"source": self.source, "target": self.target, "edge_type": self.edge_type}


@dataclass(frozen=True)
class CFG:
    function: str
    blocks: tuple
    entry_block: str
    edges: tuple

    def to_dict(self) -> dict:
        return {"function": self.function, "blocks": list(self.blocks), "entry_block": self.entry_block,
                "edges": [e.to_dict() for e in self.edges]}

    def successors(self, label: str) -> list[str]:
        return [e.target for e in self.edges if e.source == label]

    def predecessors(self, label: str) -> list[str]:
        return [e.source for e in self.edges if e.target == label]


def split_blocks(insns: list[Instruction], entry: int):
    """Partition a function's instructions into blocks.

    Returns (blocks, edges) with blocks labelled blk_0.. in reverse post-order
    from the entry; edges are (source label, target label, edge type) triples.
    """
    insns = sorted(insns, key=lambda i: i.va)
    if not insns:
        return [], []
    by_va = {i.va: i for i in insns}
    leaders = {entry}
    prev = None
    for insn in insns:
        if prev is None or prev.end != insn.va or prev.flow in TERMINATORS:
            leaders.add(insn.va)
        if insn.flow in (Flow.JUMP, Flow.COND_JUMP) and insn.static_target in by_va:
            leaders.add(insn.static_target)
        prev = insn

    groups, cur = [], []
    for insn in insns:
        if insn.va in leaders and cur:
            groups.append(cur)
            cur = []
        cur.append(insn)
    groups.append(cur)
    start_of = {g[0].va: k for k, g in enumerate(groups)}

    succ = {k: [] for k in range(len(groups))}
    for k, g in enumerate(groups):
        last = g[-1]
        nxt = start_of.get(last.end)
        if last.flow is Flow.COND_JUMP:
            if last.static_target in start_of:
                succ[k].append((start_of[last.static_target], "branch_true"))
            if nxt is not None:
                succ[k].append((nxt, "branch_false"))
        elif last.flow is Flow.JUMP:
            if last.static_target in start_of:
                succ[k].append((start_of[last.static_target], "unconditional"))
        elif last.flow not in TERMINATORS and nxt is not None:
            succ[k].append((nxt, "fallthrough"))

    # iterative DFS; successors pushed so the lowest-VA child is explored last,
    # which puts it first in reverse post-order
    root = start_of.get(entry, 0)
    order, seen = [], {root}
    stack = [(root, iter(sorted({t for t, _ in succ[root]}, key=lambda t: -groups[t][0].va)))]
    while stack:
        node, it = stack[-1]
        child = next((c for c in it if c not in seen), None)
        if child is None:
            order.append(node)
            stack.pop()
            continue
        seen.add(child)
        stack.append((child, iter(sorted({t for t, _ in succ[child]}, key=lambda t: -groups[t][0].va))))
    rpo = order[::-1]
    rpo += [k for k in range(len(groups)) if k not in seen]     # unreachable leftovers, by address
    label = {k: f"blk_{n}" for n, k in enumerate(rpo)}

    blocks = [BasicBlock(label[k], tuple(i.va for i in groups[k]), groups[k][-1]) for k in rpo]
    edges = sorted(((label[k], label[t], kind) for k in succ for t, kind in succ[k]),
                   key=lambda e: (int(e[0][4:]), int(e[1][4:]), EDGE_TYPES.index(e[2])))
    return blocks, edges


def build_cfg(f) -> CFG:
    """CFG of a discovered FunctionRecord."""
    return CFG(function=f.name, blocks=tuple(b.label for b in f.blocks),
               entry_block="blk_0" if f.blocks else "",
               edges=tuple(CFGEdge(*e) for e in f.edges))
