import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binoracle.container import load_binary
from binoracle.disasm import Flow, parse_fixture
from binoracle.flow import build_call_graph, build_cfg, discover_functions, function_from_listing, function_name

from conftest import FIXTURE_NAMES, LISTINGS, fixture_path


def _funcs(name):
    img = load_binary(fixture_path(name))
    return img, discover_functions(img)


def _listing(stem):
    return function_from_listing(parse_fixture((LISTINGS / f"{stem}.lst").read_text()))


def test_single_function_fixture():
    _, fs = _funcs("single_ret_elf")
    assert [f.name for f in fs] == ["sub_401000"]


def test_main_calls_two_helpers():
    # tailcall.s: the entry calls two helpers with rel32 calls
    _, fs = _funcs("tailcall_elf")
    assert len(fs) == 3


def test_symbols_superset():
    img, fs = _funcs("symbols_elf")
    syms = {s.va for s in img.symbols if s.kind == "func"}
    assert len(syms) >= 5
    assert syms <= {f.entry_va for f in fs}


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_names_sorted_and_formatted(name):
    _, fs = _funcs(name)
    assert [f.entry_va for f in fs] == sorted(f.entry_va for f in fs)
    for f in fs:
        assert f.name == function_name(f.entry_va) == f"sub_{f.entry_va:x}"
        assert f.size_bytes == max(i.end for i in f.instructions) - f.entry_va


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_block_partition_and_edges(name):
    _, fs = _funcs(name)
    for f in fs:
        vas = [va for b in f.blocks for va in b.insn_vas]
        assert sorted(vas) == sorted(f.insn_vas)
        assert len(vas) == len(set(vas))
        cfg = build_cfg(f)
        assert cfg.entry_block == "blk_0"
        assert list(cfg.blocks) == [f"blk_{i}" for i in range(len(f.blocks))]
        by_va = {i.va: i for i in f.instructions}
        for b in f.blocks:
            for va in b.insn_vas[:-1]:
                assert by_va[va].flow not in (Flow.JUMP, Flow.COND_JUMP, Flow.RET, Flow.HALT, Flow.INVALID)
            out = [e for e in cfg.edges if e.source == b.label]
            assert all(e.target in cfg.blocks for e in out)
            if b.terminator.flow is Flow.COND_JUMP and len({e.target for e in out}) == 2:
                assert sorted(e.edge_type for e in out) == ["branch_false", "branch_true"]


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_reanalysis_is_identical(name):
    a, b = _funcs(name)[1], _funcs(name)[1]
    assert [build_cfg(f).to_dict() for f in a] == [build_cfg(f).to_dict() for f in b]


def test_diamond_matches_reference_shape():
    _, fs = _funcs("diamond_elf")
    cfg = build_cfg(next(f for f in fs if f.num_blocks == 4))
    assert cfg.blocks == ("blk_0", "blk_1", "blk_2", "blk_3")
    assert [e.to_dict() for e in cfg.edges] == [
        {"source": "blk_0", "target": "blk_1", "edge_type": "branch_false"},
        {"source": "blk_0", "target": "blk_2", "edge_type": "branch_true"},
        {"source": "blk_1", "target": "blk_3", "edge_type": "fallthrough"},
        {"source": "blk_2", "target": "blk_3", "edge_type": "unconditional"},
    ]


def test_straight_line_listing():
    cfg = build_cfg(_listing("straight"))
    assert cfg.blocks == ("blk_0",) and cfg.edges == ()


def test_self_loop_listing():
    cfg = build_cfg(_listing("selfloop"))
    assert ("blk_1", "blk_1", "unconditional") in [(e.source, e.target, e.edge_type) for e in cfg.edges]


def test_loop_listing_back_edge():
    cfg = build_cfg(_listing("loop3"))
    edges = {(e.source, e.target, e.edge_type) for e in cfg.edges}
    assert edges == {("blk_0", "blk_1", "fallthrough"), ("blk_1", "blk_1", "branch_true"),
                     ("blk_1", "blk_2", "branch_false")}


def test_no_calls_empty_adjacency():
    img, fs = _funcs("single_ret_elf")
    cg = build_call_graph(fs, img)
    assert all(v == () for v in cg.adjacency.values())


def test_import_call_edges():
    img, fs = _funcs("dyn_imports_elf")
    cg = build_call_graph(fs, img)
    callers = [f for f, cs in cg.adjacency.items() if "malloc" in cs]
    assert callers == ["sub_401096"]
    assert cg.reverse["malloc"] == ("sub_401096",)


def test_chain_graph():
    img, fs = _funcs("callchain_elf")
    cg = build_call_graph(fs, img)
    a, b, c = (f.name for f in fs)
    assert cg.reverse[c] == (b,)
    assert cg.adjacency[a] == (b,)


def test_tail_call_adds_edge():
    img, fs = _funcs("tailcall_elf")
    cg = build_call_graph(fs, img)
    assert "sub_401020" in cg.adjacency["sub_401012"]


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_call_graph_transpose(name):
    img, fs = _funcs(name)
    cg = build_call_graph(fs, img)
    fwd = {(f, g) for f, gs in cg.adjacency.items() for g in gs}
    rev = {(f, g) for g, fs_ in cg.reverse.items() for f in fs_}
    assert fwd == rev


# -- random listings: partition, edge soundness and RPO labelling against a brute-force walk
@st.composite
def listings(draw):
    n = draw(st.integers(2, 14))
    lines = []
    for k in range(n):
        va = 0x1000 + 2 * k
        kind = "ret" if k == n - 1 else draw(st.sampled_from(["nop", "nop", "jmp", "jz", "ret"]))
        if kind in ("jmp", "jz"):
            t = 0x1000 + 2 * draw(st.integers(0, n - 1))
            flow = "jump" if kind == "jmp" else "cond_jump"
            lines.append(f"{va:#x}: {kind} {t:#x} ; flow={flow} target={t:#x}")
        elif kind == "ret":
            lines.append(f"{va:#x}: ret ; flow=ret")
        else:
            lines.append(f"{va:#x}: nop ; flow=sequential")
    return "\n".join(lines)


def _reachable(insns):
    by_va = {i.va: i for i in insns}
    seen, work = set(), [insns[0].va]
    while work:
        va = work.pop()
        if va in seen or va not in by_va:
            continue
        seen.add(va)
        i = by_va[va]
        if i.flow in (Flow.JUMP, Flow.COND_JUMP):
            work.append(i.static_target)
        if i.flow in (Flow.SEQUENTIAL, Flow.COND_JUMP, Flow.CALL):
            work.append(i.end)
    return seen


@settings(max_examples=300)
@given(listings())
def test_random_cfg_invariants(text):
    insns = parse_fixture(text)
    f = function_from_listing(insns)
    cfg = build_cfg(f)
    vas = [va for b in f.blocks for va in b.insn_vas]
    assert len(vas) == len(set(vas))
    # a listing is one whole function, so unreachable code still gets blocks
    assert set(vas) == {i.va for i in insns}
    live = _reachable(insns)
    label = {b.label: b for b in f.blocks}
    assert cfg.entry_block == "blk_0" and label["blk_0"].start == insns[0].va
    for b in f.blocks:
        out = [e for e in cfg.edges if e.source == b.label]
        t = b.terminator
        if t.flow is Flow.COND_JUMP:
            kinds = sorted(e.edge_type for e in out)
            assert kinds in (["branch_false", "branch_true"],)
        elif t.flow is Flow.JUMP:
            assert [e.edge_type for e in out] == ["unconditional"]
        elif t.flow is Flow.RET:
            assert out == []
        else:
            assert [e.edge_type for e in out] == ["fallthrough"]
    # reverse post-order: every non-entry block has a predecessor with a smaller number
    reach = [b for b in f.blocks if b.start in live]
    assert all(set(b.insn_vas) <= live for b in reach)
    assert [b.label for b in reach] == [f"blk_{i}" for i in range(len(reach))]
    for b in reach[1:]:
        n = int(b.label[4:])
        assert any(int(p[4:]) < n for p in cfg.predecessors(b.label))
