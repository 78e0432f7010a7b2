"""BinaryAPI: the read-only query facade over one cached binary analysis."""
from __future__ import annotations

import bisect
import os
from dataclasses import dataclass

from ..container import load_binary
from .dialect import compile_pattern
from .errors import InvalidPage, UnknownName
from .pipeline import analyze
from .store import AnalysisStore

DEFAULT_PAGE = 100
DEFAULT_SEARCH_LIMIT = 200
REPRESENTATIONS = ("decompiled", "pcode", "assembly")

METHODS = (
    "list_functions", "get_imports", "get_strings", "find_callers_of_import",
    "find_functions_referencing_string", "get_callees", "get_callers", "decompile", "get_pcode",
    "get_assembly", "get_cfg", "search_decompiled", "search_pcode", "search_assembly",
)


@dataclass(frozen=True)
class Page:
    items: list
    total: int
    offset: int
    returned: int
    next_offset: int | None

    def to_dict(self) -> dict:
        return {"items": list(self.items), "total": self.total, "offset": self.offset,
                "returned": self.returned, "next_offset": self.next_offset}


def paginate(items: list, offset: int, limit: int) -> Page:
    if isinstance(offset, bool) or not isinstance(offset, int) or offset < 0:
        raise InvalidPage(f"offset must be a non-negative integer, got {offset!r}")
    if isinstance(limit, bool) or not isinstance(limit, int) or limit < 1:
        raise InvalidPage(f"limit must be a positive integer, got {limit!r}")
    window = items[offset:offset + limit]
    end = offset + len(window)
    return Page(window, len(items), offset, len(window), end if end < len(items) else None)


def search_texts(texts, pattern: str, limit: int = DEFAULT_SEARCH_LIMIT) -> dict:
    """Line-by-line regex scan over ``(function, text)`` pairs in the given order.

    Matches on a line are counted non-overlapping, left to right.
    """
    rx = compile_pattern(pattern)
    if isinstance(limit, bool) or not isinstance(limit, int) or limit < 1:
        raise InvalidPage(f"limit must be a positive integer, got {limit!r}")
    results, total, truncated = [], 0, False
    for fname, text in texts:
        group = None
        for n, line in enumerate(text.split("\n"), 1):
            for m in rx.finditer(line):
                if total == limit:
                    truncated = True
                    break
                if group is None:
                    group = {"function": fname, "match_count": 0, "matches": []}
                    results.append(group)
                group["matches"].append({"function": fname, "line_number": n, "line_content": line,
                                         "match_text": m.group()})
                group["match_count"] += 1
                total += 1
            if truncated:
                break
        if truncated:
            break
    return {"results": results, "total_match_count": total, "truncated": truncated, "limit": limit}


class BinaryAPI:
    """Read-only queries over a stripped ELF/PE binary; analysis cached by SHA-256."""

    def __init__(self, path: str | os.PathLike, cache_dir=None, cache: bool = True, strict: bool = True,
                 store: AnalysisStore | None = None):
        img = load_binary(path)
        self.path = os.fspath(path)
        self.sha256 = img.sha256
        self.strict = strict
        variant = "" if strict else "named"
        self.store = store or (AnalysisStore(cache_dir) if cache else None)
        payload = self.store.load(img.sha256, variant) if self.store else None
        self.from_cache = payload is not None
        if payload is None:
            payload = analyze(img, strict=strict)
            if self.store:
                self.store.save(img.sha256, payload, variant)
        self._load(payload)

    def _load(self, payload: dict):
        self.binary_format = payload["binary_format"]
        self._funcs = sorted(payload["functions"], key=lambda f: f["entry_va"])
        self._by_name = {f["name"]: f for f in self._funcs}
        self._imports = list(payload["imports"])
        self._import_set = set(self._imports)
        lits = sorted((va, text) for va, text in payload["strings"])
        self._string_text = dict(lits)
        self._strings = sorted(set(self._string_text.values()))
        self._callees = {k: list(v) for k, v in payload["callees"].items()}
        addr = {f["name"]: f["entry_va"] for f in self._funcs}
        rev: dict[str, set] = {f["name"]: set() for f in self._funcs}
        for src, dsts in self._callees.items():
            for d in dsts:
                rev.setdefault(d, set()).add(src)
        self._callers = {k: sorted(v, key=lambda n: addr[n]) for k, v in rev.items()}
        self._addr = addr

    # -- enumeration
    def list_functions(self, offset: int = 0, limit: int = DEFAULT_PAGE) -> Page:
        infos = [{"name": f["name"], "address": f"{f['entry_va']:#x}", "size_bytes": f["size_bytes"],
                  "num_blocks": f["num_blocks"]} for f in self._funcs]
        return paginate(infos, offset, limit)

    def get_imports(self, offset: int = 0, limit: int = DEFAULT_PAGE) -> Page:
        return paginate(self._imports, offset, limit)

    def get_strings(self, offset: int = 0, limit: int = DEFAULT_PAGE) -> Page:
        return paginate(self._strings, offset, limit)

    # -- property-based discovery
    def find_callers_of_import(self, import_name: str) -> list[str]:
        if import_name not in self._import_set:
            return []
        return [f["name"] for f in self._funcs if import_name in self._callees.get(f["name"], ())]

    def find_functions_referencing_string(self, s: str, case_sensitive: bool = False) -> list[str]:
        if case_sensitive:
            hits = {va for va, t in self._string_text.items() if s in t}
        else:
            needle = s.casefold()
            hits = {va for va, t in self._string_text.items() if needle in t.casefold()}
        if not hits:
            return []
        return [f["name"] for f in self._funcs if hits.intersection(f["string_refs"])]

    # -- call graph
    def _func(self, name: str) -> dict:
        if not isinstance(name, str) or name not in self._by_name:
            what = "imported function" if name in self._import_set else "function"
            raise UnknownName(f"{what} not found: {name!r}")
        return self._by_name[name]

    def get_callees(self, func: str) -> list[str]:
        return list(self._callees.get(self._func(func)["name"], ()))

    def get_callers(self, func: str) -> list[str]:
        return list(self._callers.get(self._func(func)["name"], ()))

    # -- code inspection
    def render(self, func: str, representation: str) -> str:
        if representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {representation!r}")
        return self._func(func)[representation]

    def decompile(self, func: str) -> str:
        return self.render(func, "decompiled")

    def get_pcode(self, func: str) -> str:
        return self.render(func, "pcode")

    def get_assembly(self, func: str) -> str:
        return self.render(func, "assembly")

    def get_cfg(self, func: str) -> dict:
        cfg = self._func(func)["cfg"]
        return {"function": cfg["function"], "blocks": list(cfg["blocks"]), "entry_block": cfg["entry_block"],
                "edges": [{"source": e["source"], "target": e["target"], "edge_type": e["edge_type"]}
                          for e in cfg["edges"]]}

    # -- search
    def search(self, representation: str, pattern: str, limit: int = DEFAULT_SEARCH_LIMIT) -> dict:
        if representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {representation!r}")
        return search_texts(((f["name"], f[representation]) for f in self._funcs), pattern, limit)

    def search_decompiled(self, pattern: str, limit: int = DEFAULT_SEARCH_LIMIT) -> dict:
        return self.search("decompiled", pattern, limit)

    def search_pcode(self, pattern: str, limit: int = DEFAULT_SEARCH_LIMIT) -> dict:
        return self.search("pcode", pattern, limit)

    def search_assembly(self, pattern: str, limit: int = DEFAULT_SEARCH_LIMIT) -> dict:
        return self.search("assembly", pattern, limit)

    # -- extras used by the harness (not part of the query method list)
    def function_names(self) -> list[str]:
        return [f["name"] for f in self._funcs]

    def unsupported(self, func: str) -> list:
        return [tuple(x) for x in self._func(func)["unsupported"]]

    def instruction_count(self, func: str) -> int:
        return self._func(func)["insn_count"]

    def function_at(self, va: int) -> str | None:
        """Name of the function whose entry is the greatest one <= va."""
        starts = [f["entry_va"] for f in self._funcs]
        k = bisect.bisect_right(starts, va) - 1
        return self._funcs[k]["name"] if k >= 0 else None


open_binary = BinaryAPI
