import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binoracle.queryapi import (METHODS, STATS, AnalysisStore, BinaryAPI, InvalidPage, InvalidPattern, UnknownName,
                                compile_pattern, paginate, search_texts)

from conftest import FIXTURE_NAMES, fixture_path


def _call_all(api):
    """Every query method on every name, as plain data."""
    out = {"list_functions": api.list_functions(0, 1000).to_dict(),
           "get_imports": api.get_imports(0, 1000).to_dict(), "get_strings": api.get_strings(0, 1000).to_dict()}
    for f in api.function_names():
        for m in ("get_callees", "get_callers", "decompile", "get_pcode", "get_assembly", "get_cfg"):
            out[f"{m}:{f}"] = getattr(api, m)(f)
    for imp in api.get_imports(0, 1000).items:
        out[f"callers:{imp}"] = api.find_callers_of_import(imp)
    for s in api.get_strings(0, 1000).items:
        out[f"refs:{s}"] = api.find_functions_referencing_string(s[:4])
    for m in ("search_decompiled", "search_pcode", "search_assembly"):
        out[m] = getattr(api, m)(r"\w+\(|CALL|RET", 50)
    return out


def test_fourteen_methods():
    assert len(METHODS) == 14
    assert all(callable(getattr(BinaryAPI, m)) for m in METHODS)


# ---------------------------------------------------------------- paging
def test_page_boundary_algebra():
    items = list(range(250))
    p = paginate(items, 200, 100)
    assert (p.returned, p.next_offset, p.total) == (50, None, 250)
    p = paginate(items, 300, 100)
    assert (p.items, p.returned, p.next_offset) == ([], 0, None)
    assert paginate(items, 0, 100).next_offset == 100


@pytest.mark.parametrize("bad", [(-1, 10), (0, 0), (0, -3), (True, 5), (0, 1.5)])
def test_invalid_page(bad):
    with pytest.raises(InvalidPage):
        paginate([1, 2, 3], *bad)


@settings(max_examples=300)
@given(st.lists(st.integers(), max_size=60), st.integers(1, 70))
def test_pages_concatenate(items, limit):
    got, off, totals = [], 0, set()
    while True:
        p = paginate(items, off, limit)
        assert p.returned == len(p.items) and p.offset == off
        assert p.items == items[off:off + limit]
        totals.add(p.total)
        got += p.items
        if p.next_offset is None:
            break
        assert p.next_offset == off + p.returned < p.total
        off = p.next_offset
    assert got == items and totals == {len(items)}


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_pages_concatenate(apis, name):
    api = apis[name]
    for meth in (api.list_functions, api.get_imports, api.get_strings):
        whole = meth(0, 10_000)
        for limit in (1, 2, 3):
            got, off = [], 0
            while off is not None:
                p = meth(off, limit)
                got += p.items
                off = p.next_offset
            assert got == whole.items


def test_functions_sorted_by_address(apis):
    for api in apis.values():
        addrs = [int(x["address"], 16) for x in api.list_functions(0, 1000).items]
        assert addrs == sorted(addrs)
        assert set(api.list_functions(0, 1000).items[0]) == {"name", "address", "size_bytes", "num_blocks"}


def test_imports_alphabetical(apis):
    items = apis["dyn_imports_elf"].get_imports(0, 100).items
    assert items == sorted(items)
    assert [i for i in items if i in {"free", "malloc", "memcpy"}] == ["free", "malloc", "memcpy"]
    assert apis["single_ret_elf"].get_imports().total == 0


# ---------------------------------------------------------------- discovery and call graph
def test_import_callers(apis):
    api = apis["dyn_imports_elf"]
    assert api.find_callers_of_import("nonexistent_fn") == []
    assert api.find_callers_of_import("malloc") == ["sub_401096"]


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_import_callers_brute_force(apis, name):
    api = apis[name]
    for imp in api.get_imports(0, 1000).items:
        expect = [f for f in api.function_names() if imp in api.get_callees(f)]
        assert api.find_callers_of_import(imp) == expect


def test_string_reference_case_folding(apis):
    api = apis["tiny_elf_x64"]
    hit = api.find_functions_referencing_string("XPM")
    assert len(hit) == 1
    assert api.find_functions_referencing_string("XPM", case_sensitive=True) == []
    assert apis["strings_pe"].find_functions_referencing_string("XPM", case_sensitive=True)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_case_sensitive_subset(apis, name):
    api = apis[name]
    strings = api.get_strings(0, 1000).items
    rng = random.Random(name)
    for _ in range(50 if strings else 0):
        s = rng.choice(strings)
        i = rng.randrange(len(s))
        sub = s[i:i + rng.randint(1, 6)]
        sens = api.find_functions_referencing_string(sub, case_sensitive=True)
        insens = api.find_functions_referencing_string(sub)
        assert set(sens) <= set(insens)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_callers_transpose(apis, name):
    api = apis[name]
    fwd = {(f, g) for f in api.function_names() for g in api.get_callees(f)}
    rev = {(g, f) for f in api.function_names() for g in api.get_callers(f)}
    internal = set(api.function_names())
    assert {(f, g) for f, g in fwd if g in internal} == rev


def test_callee_order_imports_first(apis):
    api = apis["dyn_imports_elf"]
    for f in api.function_names():
        cs = api.get_callees(f)
        imps = [c for c in cs if not c.startswith("sub_")]
        assert cs[:len(imps)] == sorted(imps)


def test_leaf_and_uncalled(apis):
    api = apis["callchain_elf"]
    a, b, c = api.function_names()
    assert api.get_callees(c) == [] and api.get_callers(a) == []


# ---------------------------------------------------------------- error table
@pytest.mark.parametrize("meth", ["get_callees", "get_callers", "decompile", "get_pcode", "get_assembly", "get_cfg"])
def test_unknown_name(apis, meth):
    api = apis["dyn_imports_elf"]
    with pytest.raises(UnknownName):
        getattr(api, meth)("no_such_function")
    with pytest.raises(UnknownName):
        getattr(api, meth)("malloc")


def test_bad_regex():
    api = BinaryAPI(fixture_path("single_ret_elf"), cache=False)
    for meth in (api.search_decompiled, api.search_pcode, api.search_assembly):
        with pytest.raises(InvalidPattern):
            meth("([unclosed")


@pytest.mark.parametrize("pat", [r"(?=x)", r"(?<=a)b", r"(a)\1", r"(?P<n>a)", r"(?i)call", r"(?(1)a|b)"])
def test_dialect_rejects(pat):
    with pytest.raises(InvalidPattern):
        compile_pattern(pat)


@pytest.mark.parametrize("pat", [r"CALL memcpy", r"memcpy\(", r"^\s+v\d+", r"INT_(ADD|SUB)", r"[A-Z]+ R[A-Z]X$",
                                 r"a.*?b", r"(?:x|y){2,3}", r"\bRET\b", r"\[RBP \+ -0x[0-9a-f]+\]"])
def test_dialect_accepts(pat):
    assert compile_pattern(pat).pattern == pat


# ---------------------------------------------------------------- renderings and cfg
@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_cross_representation(apis, name):
    api = apis[name]
    for f in api.function_names():
        pcode = api.get_pcode(f)
        assert pcode.startswith("blk_0:")
        headers = re.findall(r"^(blk_\d+):$", pcode, re.M)
        assert headers == api.get_cfg(f)["blocks"]
        asm = api.get_assembly(f)
        assert len(asm.splitlines()) == api.instruction_count(f)
        assert api.decompile(f) == api.decompile(f)


def test_cfg_diamond(apis):
    api = apis["diamond_elf"]
    cfg = next(api.get_cfg(f) for f in api.function_names() if len(api.get_cfg(f)["blocks"]) == 4)
    assert cfg["entry_block"] == "blk_0"
    assert sorted(e["edge_type"] for e in cfg["edges"]) == ["branch_false", "branch_true", "fallthrough",
                                                           "unconditional"]
    assert apis["single_ret_elf"].get_cfg("sub_401000")["edges"] == []


# ---------------------------------------------------------------- search
def _brute_search(api, rep, pattern):
    rx = re.compile(pattern)
    out = []
    for f in api.function_names():
        for n, line in enumerate(api.render(f, rep).split("\n"), 1):
            out += [(f, n, line, m) for m in rx.findall(line)] if rx.groups == 0 else \
                   [(f, n, line, m.group()) for m in rx.finditer(line)]
    return out


def _flatten(res):
    return [(m["function"], m["line_number"], m["line_content"], m["match_text"])
            for g in res["results"] for m in g["matches"]]


SEARCHES = [("pcode", r"CALL"), ("pcode", r"v\d+"), ("assembly", r"MOV|PUSH"), ("decompiled", r"\w+\("),
            ("assembly", r"R[A-Z]X"), ("pcode", r"zzz_never")]


@pytest.mark.parametrize("name", FIXTURE_NAMES)
@pytest.mark.parametrize("rep,pat", SEARCHES)
def test_search_against_brute_force(apis, name, rep, pat):
    api = apis[name]
    expect = _brute_search(api, rep, pat)
    for limit in (1, 2, 7, 200, 10_000):
        res = api.search(rep, pat, limit)
        assert res["limit"] == limit and res["total_match_count"] <= limit
        assert _flatten(res) == expect[:limit]
        assert res["truncated"] == (len(expect) > limit)
        if not res["truncated"]:
            assert res["total_match_count"] == len(expect)
        # grouped contiguously, functions in address order
        fs = [g["function"] for g in res["results"]]
        assert len(fs) == len(set(fs))
        order = api.function_names()
        assert fs == sorted(fs, key=order.index)
        assert all(g["match_count"] == len(g["matches"]) for g in res["results"])


def test_search_examples(apis):
    api = apis["dyn_imports_elf"]
    res = api.search_pcode("CALL memcpy")
    assert res["results"] and res["results"][0]["function"] == "sub_401096"
    none = api.search_pcode("zzz_never")
    assert (none["results"], none["total_match_count"], none["truncated"]) == ([], 0, False)
    texts = [("f", "ab\nab"), ("g", "ab")]
    one = search_texts(texts, "ab", 1)
    assert one["total_match_count"] == 1 and one["truncated"]


def test_search_non_overlapping():
    res = search_texts([("f", "aaaa")], "aa")
    assert res["total_match_count"] == 2


# ---------------------------------------------------------------- cache
def test_warm_open_does_no_work(tmp_path):
    cold = BinaryAPI(fixture_path("dyn_imports_elf"), cache_dir=tmp_path)
    before = STATS["functions_lifted"]
    warm = BinaryAPI(fixture_path("dyn_imports_elf"), cache_dir=tmp_path)
    assert STATS["functions_lifted"] == before
    assert not cold.from_cache and warm.from_cache
    assert _call_all(cold) == _call_all(warm)


def test_version_bump_reanalyzes(tmp_path):
    BinaryAPI(fixture_path("arith_elf"), cache_dir=tmp_path)
    before = STATS["analyses"]
    store = AnalysisStore(tmp_path, format_version=10_000)
    api = BinaryAPI(fixture_path("arith_elf"), store=store)
    assert not api.from_cache and STATS["analyses"] == before + 1
    assert BinaryAPI(fixture_path("arith_elf"), store=store).from_cache


@pytest.mark.parametrize("damage", ["truncate", "flip", "empty", "header"])
def test_corrupt_cache_is_transparent(tmp_path, damage):
    path = fixture_path("strings_pe")
    cold = BinaryAPI(path, cache=False)
    BinaryAPI(path, cache_dir=tmp_path)
    (f,) = list(tmp_path.glob("*.analysis"))
    raw = f.read_bytes()
    f.write_bytes({"truncate": raw[:len(raw) // 2], "flip": raw[:-10] + b"X" + raw[-9:], "empty": b"",
                   "header": b"{}\n" + raw.partition(b"\n")[2]}[damage])
    again = BinaryAPI(path, cache_dir=tmp_path)
    assert not again.from_cache
    assert _call_all(again) == _call_all(cold)
    assert BinaryAPI(path, cache_dir=tmp_path).from_cache


def test_cache_file_named_by_hash(tmp_path):
    api = BinaryAPI(fixture_path("single_ret_elf"), cache_dir=tmp_path)
    assert (tmp_path / f"{api.sha256}.analysis").exists()


def test_env_var_cache_location(tmp_path, monkeypatch):
    monkeypatch.setenv("BINORACLE_CACHE_DIR", str(tmp_path / "env"))
    api = BinaryAPI(fixture_path("single_ret_elf"))
    assert (tmp_path / "env" / f"{api.sha256}.analysis").exists()


def test_purity(apis):
    api = apis["arith_elf"]
    assert _call_all(api) == _call_all(api)


def test_strict_mode_hides_symbols(tmp_path):
    strict = BinaryAPI(fixture_path("symbols_elf"), cache_dir=tmp_path)
    named = BinaryAPI(fixture_path("symbols_elf"), cache_dir=tmp_path, strict=False)
    assert all(n.startswith("sub_") for n in strict.function_names())
    assert "parse_header" in named.function_names()
    assert "parse_header" not in strict.decompile(strict.function_names()[0])
    # the two variants are cached side by side
    assert len(list(tmp_path.glob("*.analysis"))) == 2
