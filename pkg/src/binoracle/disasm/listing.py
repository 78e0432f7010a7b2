"""Textual instruction listings, so flow/lift can be tested without any decoder.

One instruction per line::

    0x1000: cmp rcx, 0x0 ; flow=sequential
    0x1004: jz 0x1010 ; flow=cond_jump target=0x1010

``#`` starts a comment. Lengths default to the gap to the next line (1 for the
last line); ``len=N`` overrides.
"""
from __future__ import annotations

import re

from .insn import REGISTERS, Flow, Instruction, Operand, format_intel

_LINE = re.compile(r"^\s*(0x[0-9a-fA-F]+|\d+)\s*:\s*([a-z][a-z0-9]*)\s*(.*?)\s*;\s*(.*?)\s*$")
_MEM = re.compile(r"^(?:(byte|word|dword|qword|xmmword)\s+ptr\s+)?(?:(fs|gs):)?\[(.*)\]$")
_WIDTHS = {"byte": 1, "word": 2, "dword": 4, "qword": 8, "xmmword": 16}
_BRANCHES = (Flow.JUMP, Flow.COND_JUMP, Flow.CALL)


class FixtureSyntax(ValueError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


def _split_operands(text: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _parse_operand(text: str, default_width: int, lineno: int) -> Operand:
    low = text.strip().lower()
    if low.upper() in REGISTERS and low != "rip":
        return Operand.register(low.upper())
    m = _MEM.match(low)
    if m:
        width = _WIDTHS[m.group(1)] if m.group(1) else default_width
        base = index = None
        scale, disp = 1, 0
        for sign, term in re.findall(r"([+-]?)\s*([^\s+-]+)", m.group(3)):
            if "*" in term:
                reg, _, sc = term.partition("*")
                if reg.upper() not in REGISTERS or index is not None:
                    raise FixtureSyntax(lineno, f"bad index term {term!r}")
                index, scale = reg.upper(), int(sc, 0)
            elif term.upper() in REGISTERS:
                if base is not None or sign == "-":
                    raise FixtureSyntax(lineno, f"bad base term {term!r}")
                base = term.upper()
            else:
                try:
                    v = int(term, 0)
                except ValueError:
                    raise FixtureSyntax(lineno, f"bad memory term {term!r}") from None
                disp += -v if sign == "-" else v
        return Operand.memory(width, base, index, scale, disp, m.group(2).upper() if m.group(2) else None)
    try:
        return Operand.immediate(int(low, 0), default_width)
    except ValueError:
        raise FixtureSyntax(lineno, f"unrecognized operand {text!r}") from None


def parse_fixture(text: str) -> list[Instruction]:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise FixtureSyntax(lineno, f"expected 'VA: mnemonic operands ; flow=KIND', got {raw.strip()!r}")
        va = int(m.group(1), 0)
        notes = {}
        for item in m.group(4).split():
            key, eq, val = item.partition("=")
            if not eq or key not in ("flow", "target", "len") or key in notes:
                raise FixtureSyntax(lineno, f"bad annotation {item!r}")
            notes[key] = val
        if "flow" not in notes:
            raise FixtureSyntax(lineno, "missing flow=")
        try:
            flow = Flow(notes["flow"])
        except ValueError:
            raise FixtureSyntax(lineno, f"unknown flow kind {notes['flow']!r}") from None
        try:
            target = int(notes["target"], 0) if "target" in notes else None
            length = int(notes["len"], 0) if "len" in notes else None
        except ValueError:
            raise FixtureSyntax(lineno, "target/len must be integers") from None
        if target is not None and flow not in _BRANCHES:
            raise FixtureSyntax(lineno, f"target= not allowed with flow={flow.value}")
        if rows and va <= rows[-1][0]:
            raise FixtureSyntax(lineno, "addresses must be strictly increasing")
        ops_text = _split_operands(m.group(3))
        rows.append((va, m.group(2), ops_text, flow, target, length, lineno))

    out = []
    for k, (va, mnem, ops_text, flow, target, length, lineno) in enumerate(rows):
        if length is None:
            length = rows[k + 1][0] - va if k + 1 < len(rows) else 1
        if length < 1:
            raise FixtureSyntax(lineno, "length must be >= 1")
        width = 8
        for t in ops_text:
            if t.upper() in REGISTERS:
                width = REGISTERS[t.upper()][1]
                break
        ops = [_parse_operand(t, width, lineno) for t in ops_text]
        if flow in _BRANCHES and ops and ops[0].kind == "immediate" and len(ops) == 1:
            if target is not None and ops[0].value != target:
                raise FixtureSyntax(lineno, "operand disagrees with target=")
            target = ops[0].value
            ops = [Operand.immediate(target - (va + length), 8)]
        out.append(Instruction(va=va, length=length, mnemonic=mnem, operands=tuple(ops),
                               flow=flow, static_target=target))
    return out


def render_fixture(insns) -> str:
    insns = list(insns)
    lines = []
    for k, insn in enumerate(insns):
        default = insns[k + 1].va - insn.va if k + 1 < len(insns) else 1
        text = f"{insn.va:#x}: {format_intel(insn)} ; flow={insn.flow.value}"
        if insn.static_target is not None:
            text += f" target={insn.static_target:#x}"
        if insn.length != default:
            text += f" len={insn.length}"
        lines.append(text)
    return "\n".join(lines) + ("\n" if lines else "")


def normalize_fixture(text: str) -> str:
    return render_fixture(parse_fixture(text))
