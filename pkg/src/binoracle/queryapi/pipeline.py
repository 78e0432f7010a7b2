"""container -> flow -> lift, flattened into a JSON-able analysis payload."""
from __future__ import annotations

import bisect
from collections import Counter

from ..container import BinaryImage, extract_strings
from ..flow import Resolver, build_call_graph, build_cfg, discover_functions
from ..lift import abi_for, analyze_function

FORMAT_VERSION = 4

# observable work counters (tests use these to prove a warm open lifts nothing)
STATS: Counter = Counter()


def _referenced_vas(f):
    for insn in f.instructions:
        for op in insn.operands:
            if op.kind == "memory":
                addr = insn.mem_address(op)
                if addr is not None:
                    yield addr
            elif op.kind == "immediate" and insn.static_target is None:
                yield op.value & 0xFFFFFFFFFFFFFFFF


def string_refs(f, strings) -> list[int]:
    """VAs of string literals that some operand of ``f`` points into."""
    starts = [s.va for s in strings]
    out = set()
    for va in _referenced_vas(f):
        k = bisect.bisect_right(starts, va) - 1
        # literals never overlap, so only the nearest start below can contain va
        if k >= 0 and va < strings[k].va + max(strings[k].byte_len, 1):
            out.add(strings[k].va)
    return sorted(out)


def analyze(img: BinaryImage, strict: bool = True) -> dict:
    STATS["analyses"] += 1
    funcs = discover_functions(img, strict=strict)
    resolver = Resolver(funcs, img)
    graph = build_call_graph(funcs, img, resolver)
    lits = sorted(extract_strings(img), key=lambda s: s.va)
    text_at = {s.va: s.text for s in lits}
    abi = abi_for(img)
    functions = []
    for f in funcs:
        STATS["functions_lifted"] += 1
        a = analyze_function(f, abi, resolver, text_at)
        functions.append({
            "name": f.name,
            "entry_va": f.entry_va,
            "size_bytes": f.size_bytes,
            "num_blocks": f.num_blocks,
            "insn_count": len(f.instructions),
            "cfg": build_cfg(f).to_dict(),
            "pcode": a.rendered.pcode_text,
            "assembly": a.rendered.assembly_text,
            "decompiled": a.rendered.pseudo_c_text,
            "string_refs": string_refs(f, lits),
            "unsupported": [[va, m] for va, m in a.unsupported],
        })
    return {
        "format": "binoracle-analysis",
        "format_version": FORMAT_VERSION,
        "sha256": img.sha256,
        "strict": strict,
        "binary_format": str(getattr(img.format, "value", img.format)),
        "functions": functions,
        "imports": sorted({imp.name for imp in img.imports}),
        "strings": [[s.va, s.text] for s in lits],
        "callees": {name: list(v) for name, v in graph.adjacency.items()},
    }
