import itertools
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binoracle.container import load_binary
from binoracle.disasm import parse_fixture
from binoracle.flow import build_cfg, discover_functions, function_from_listing
from binoracle.lift import (Const, Global, Loc, Value, abi_for, analyze_function, lift_function, parse_pcode,
                            render_assembly, render_parsed, token, verify_ssa)

import dual
from conftest import FIXTURE_NAMES, LISTINGS, fixture_path

LISTING_NAMES = sorted(p.stem for p in LISTINGS.glob("*.lst"))


def _listing(stem):
    return function_from_listing(parse_fixture((LISTINGS / f"{stem}.lst").read_text()))


def _all_functions():
    out = []
    for name in FIXTURE_NAMES:
        img = load_binary(fixture_path(name))
        out += [(f"{name}:{f.name}", f, abi_for(img)) for f in discover_functions(img)]
    out += [(f"listing:{s}", _listing(s), "sysv") for s in LISTING_NAMES]
    return out


ALL = _all_functions()


# ---------------------------------------------------------------- tokens and renderings
def _val(vid, width, loc=None, type=None):
    v = Value(width, loc, type)
    v.id = vid
    return v


def test_register_value_token():
    assert token(_val(0, 8, Loc("register", 8, name="RCX"), "longlong")) == "v0:8@RCX<longlong>"


def test_unique_temp_token():
    assert token(_val(7, 4)) == "v7:4"


def test_stack_slot_token():
    assert token(_val(3, 8, Loc("stack", 8, offset=-0x10))) == "v3:8@stack[-0x10]"


def test_constant_and_global_tokens():
    assert token(Const(24, 8)) == "24:8"
    assert token(Global(0x404010, 8)) == "0x404010:8"


def _lift_text(text):
    return lift_function(function_from_listing(parse_fixture(text)))


def test_ret_lifts_to_return():
    lf = _lift_text("0x1000: ret ; flow=ret")
    assert [op.opcode for op in lf.blocks[0].ops] == ["RETURN"]


def test_compare_and_branch():
    lf = _lift_text("0x1000: cmp rcx, 0x0 ; flow=sequential\n"
                    "0x1004: jz 0x1007 ; flow=cond_jump target=0x1007\n"
                    "0x1006: ret ; flow=ret\n0x1007: ret ; flow=ret")
    ops = lf.blocks[0].ops
    eq = [op for op in ops if op.opcode == "INT_EQUAL"]
    assert eq and eq[0].output.width == 1 and eq[0].output.name == "ZF"
    assert ops[-1].opcode == "CBRANCH"


def test_add_constant_renders_width():
    a = analyze_function(function_from_listing(parse_fixture("0x1000: add rax, 0x18 ; flow=sequential\n"
                                                             "0x1004: ret ; flow=ret")))
    assert re.search(r"INT_ADD v\d+:8@RAX, 24:8", a.rendered.pcode_text)


def test_assembly_lines():
    f = function_from_listing(parse_fixture("0x401230: ret ; flow=ret"))
    assert render_assembly(f) == "0x401230  RET"
    pro = function_from_listing(parse_fixture("0x1000: push rbp ; flow=sequential\n"
                                              "0x1001: mov rbp, rsp ; flow=sequential\n"
                                              "0x1004: sub rsp, 0x30 ; flow=sequential\n"
                                              "0x1008: leave ; flow=sequential\n0x1009: ret ; flow=ret"))
    lines = [l.split("  ", 1)[1] for l in render_assembly(pro).splitlines()]
    assert lines[:3] == ["PUSH RBP", "MOV RBP,RSP", "SUB RSP,0x30"]


def test_empty_function_assembly():
    f = function_from_listing(parse_fixture("0x1000: ret ; flow=ret"))
    empty = type(f)(f.name, f.entry_va, 0, (), (), ())
    assert render_assembly(empty) == ""


def test_straight_line_has_no_phi_and_returns():
    a = analyze_function(_listing("straight"))
    assert "PHI" not in a.rendered.pcode_text
    body = [l for l in a.rendered.pseudo_c_text.splitlines() if l.strip().startswith("return")]
    assert len(body) == 1


def test_diamond_single_phi_and_single_if():
    a = analyze_function(_listing("diamond"))
    phis = [l for l in a.rendered.pcode_text.splitlines() if "PHI(" in l]
    assert len(phis) == 1 and phis[0].count(",") == 1 and "@RAX" in phis[0]
    blocks = parse_pcode(a.rendered.pcode_text)
    assert blocks["blk_3"][0].opcode == "PHI"
    assert sum(l.strip().startswith("if (") for l in a.rendered.pseudo_c_text.splitlines()) == 1


def test_loop_counter_phi_matches_hand_ssa():
    blocks = parse_pcode(analyze_function(_listing("loop3")).rendered.pcode_text)
    head = blocks["blk_1"]
    phis = [op for op in head if op.opcode == "PHI"]
    defs = {op.output.id: op for ops in blocks.values() for op in ops if op.output is not None}
    # RAX: 0 on entry, rax + rdi around the back edge; RCX: 3 on entry, ecx - 1 around it
    got = {}
    for phi in phis:
        init, back = phi.inputs
        assert defs[init.id] in blocks["blk_0"] and defs[back.id] in head
        got[phi.output.loc] = (defs[init.id].opcode, defs[init.id].inputs[0].value, defs[back.id].opcode)
    assert got == {"RAX": ("COPY", 0, "INT_ADD"), "RCX": ("COPY", 3, "INT_ZEXT")}


def test_memcpy_call_visible_in_pseudo_c(apis):
    assert "memcpy(" in apis["dyn_imports_elf"].decompile("sub_401096")


# ---------------------------------------------------------------- SSA validity
def _brute_dominators(labels, edges, entry):
    """d dominates b iff b is unreachable from entry once d is removed."""
    succ = {l: [] for l in labels}
    for s, t in edges:
        succ[s].append(t)

    def reach(skip):
        seen, work = set(), [entry] if entry != skip else []
        while work:
            x = work.pop()
            if x in seen:
                continue
            seen.add(x)
            work += [y for y in succ[x] if y != skip]
        return seen

    live = reach(None)
    return {d: {b for b in live if b not in reach(d)} | {d} for d in labels}


@pytest.mark.parametrize("key,f,abi", ALL, ids=[k for k, *_ in ALL])
def test_ssa_valid_on_every_function(key, f, abi):
    text = analyze_function(f, abi).rendered.pcode_text
    blocks = parse_pcode(text)
    assert render_parsed(blocks) == text
    cfg = build_cfg(f)
    edges = [(e.source, e.target) for e in cfg.edges]
    assert list(blocks) == list(cfg.blocks)
    assert verify_ssa(blocks, [(e.source, e.target, e.edge_type) for e in cfg.edges]) == []

    preds = {l: [s for s, t in edges if t == l] for l in blocks}
    dom = _brute_dominators(list(blocks), edges, cfg.entry_block)
    where = {}
    for label, ops in blocks.items():
        for k, op in enumerate(ops):
            if op.output is not None:
                assert op.output.id not in where, f"v{op.output.id} defined twice"
                where[op.output.id] = (label, k)
    for label, ops in blocks.items():
        for k, op in enumerate(ops):
            if op.opcode == "PHI":
                assert len(op.inputs) == len(preds[label])
                assert all(o.opcode == "PHI" for o in ops[:k])
                for p, t in zip(preds[label], op.inputs):
                    if t.kind == "value" and t.id in where:
                        assert p in dom[where[t.id][0]]
                continue
            uses = list(op.inputs) + ([op.cond[0], op.cond[2]] if op.cond else [])
            for t in uses:
                if t.kind == "value" and t.id in where:
                    dl, dk = where[t.id]
                    assert (dl == label and dk < k) or (dl != label and label in dom[dl])


@pytest.mark.parametrize("key,f,abi", ALL, ids=[k for k, *_ in ALL])
def test_value_ids_sequential(key, f, abi):
    text = analyze_function(f, abi).rendered.pcode_text
    ids = [int(m) for m in re.findall(r"\bv(\d+):", text)]
    first = list(dict.fromkeys(ids))
    assert sorted(first) == list(range(len(first)))


def test_rendering_injective_across_corpus():
    texts = {}
    for key, f, abi in ALL:
        t = analyze_function(f, abi).rendered.pcode_text
        ops = parse_pcode(t)
        sig = repr([(l, [(o.opcode, o.output, o.inputs, o.cond) for o in v]) for l, v in ops.items()])
        if t in texts:
            assert texts[t] == sig
        texts[t] = sig
    assert len(set(texts.values())) == len(texts)


def test_verifier_catches_broken_text():
    text = analyze_function(_listing("diamond")).rendered.pcode_text
    edges = [(e.source, e.target, e.edge_type) for e in build_cfg(_listing("diamond")).edges]
    bad = text.replace("v3:8@RAX = COPY 1:8", "v2:8@RAX = COPY 1:8")
    assert verify_ssa(parse_pcode(bad), edges)
    moved = text.replace("    v4:8@RAX = PHI(v2:8@RAX, v3:8@RAX)\n    RETURN v4:8@RAX",
                         "    RETURN v4:8@RAX\n    v4:8@RAX = PHI(v2:8@RAX, v3:8@RAX)")
    assert verify_ssa(parse_pcode(moved), edges)


# ---------------------------------------------------------------- semantic spot-check
BRANCH_FREE = [(k, f, abi) for k, f, abi in ALL
               if len(f.blocks) == 1 and f.instructions[-1].mnemonic == "ret"
               and not lift_function(f, abi).unsupported]


def _stack_band(rsp):
    return range(rsp - 0x1000, rsp + 0x1000)


def dual_check(f, abi, seed):
    regs = dual.initial_state(seed)
    m_mem, p_mem = dual.Memory(seed), dual.Memory(seed)
    m_regs = dual.run_machine(f, regs, m_mem, abi)
    ops = parse_pcode(analyze_function(f, abi).rendered.pcode_text)["blk_0"]
    p_regs, ret = dual.run_pcode(ops, regs, p_mem, abi)
    band = _stack_band(regs["RSP"])
    m_heap = {a: v for a, v in m_mem.written.items() if a not in band}
    p_heap = {a: v for a, v in p_mem.written.items() if a not in band}
    return m_regs, p_regs, ret, m_heap, p_heap


def test_branch_free_corpus_is_nontrivial():
    assert len(BRANCH_FREE) >= 30


@pytest.mark.parametrize("key,f,abi", BRANCH_FREE, ids=[k for k, *_ in BRANCH_FREE])
def test_dual_interpretation(key, f, abi):
    for seed in range(100):
        m_regs, p_regs, ret, m_heap, p_heap = dual_check(f, abi, seed)
        assert p_regs == m_regs, key
        assert m_heap == p_heap, key
        if ret is not None:
            assert ret == m_regs["RAX"]


# random straight-line arithmetic through both interpreters
_REGS = ["rax", "rcx", "rdx", "rsi", "rdi", "r8", "r9"]
_R32 = {"rax": "eax", "rcx": "ecx", "rdx": "edx", "rsi": "esi", "rdi": "edi", "r8": "r8d", "r9": "r9d"}


@st.composite
def arith_listing(draw):
    n = draw(st.integers(1, 8))
    lines, va = [], 0x1000
    for _ in range(n):
        m = draw(st.sampled_from(["mov", "add", "sub", "and", "or", "xor", "imul", "shl", "shr", "sar",
                                  "inc", "dec", "lea"]))
        a, b = draw(st.sampled_from(_REGS)), draw(st.sampled_from(_REGS))
        if draw(st.booleans()):
            a, b = _R32[a], _R32[b]
        imm = draw(st.integers(-128, 127))
        if m in ("shl", "shr", "sar"):
            text = f"{m} {a}, {draw(st.integers(0, 31)):#x}"
        elif m in ("inc", "dec"):
            text = f"{m} {a}"
        elif m == "lea":
            text = f"lea {_REGS[_REGS.index(a) if a in _REGS else list(_R32.values()).index(a)]}, " \
                   f"[{draw(st.sampled_from(_REGS))} + {imm:#x}]"
        elif draw(st.booleans()):
            text = f"{m} {a}, {b}"
        else:
            text = f"{m} {a}, {imm:#x}" if m != "imul" else f"imul {a}, {b}, {imm:#x}"
        lines.append(f"{va:#x}: {text} ; flow=sequential")
        va += 4
    lines.append(f"{va:#x}: ret ; flow=ret")
    return "\n".join(lines)


@settings(max_examples=200, deadline=None)
@given(arith_listing(), st.integers(0, 2**32))
def test_dual_interpretation_random_listings(text, seed):
    f = function_from_listing(parse_fixture(text))
    m_regs, p_regs, *_ = dual_check(f, "sysv", seed)
    assert p_regs == m_regs
