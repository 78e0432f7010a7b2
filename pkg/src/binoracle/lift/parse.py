"""Parse rendered p-code text back into tokens and check SSA well-formedness on it."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .ir import BLOCK_FINAL, OPCODES
from .ssa import dominates, dominators, _roots

_VALUE = r"v(?P<id>\d+):(?P<w>\d+)(?:@(?P<loc>stack\[-?0x[0-9a-f]+\]|[A-Z][A-Z0-9]*))?(?:<(?P<type>[^<>]+)>)?"
_TOKEN = re.compile(
    rf"(?:{_VALUE})|(?P<glob>0x[0-9a-f]+):(?P<gw>\d+)|(?P<const>-?\d+):(?P<cw>\d+)|(?P<name>[A-Za-z_][\w.@$?]*)")
_HEADER = re.compile(r"^(blk_\d+):$")
_LINE = re.compile(rf"^    (?:(?P<out>{_VALUE.replace('?P<', '?P<o')}) = )?(?P<opc>[A-Z_]+)(?:(?P<paren>\()|\s|$)(?P<rest>.*)$")
_COND = re.compile(r"^(?P<a>\S+(?: \*>)?) (?P<sym>==|!=|<=u|<u|<=|<) (?P<b>\S+(?: \*>)?)$")


class PcodeSyntax(ValueError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


@dataclass(frozen=True)
class Tok:
    kind: str                   # value | const | global | name
    id: int | None = None
    width: int | None = None
    loc: str | None = None
    type: str | None = None
    value: int | None = None
    text: str = ""


@dataclass(frozen=True)
class ParsedOp:
    opcode: str
    output: Tok | None
    inputs: tuple
    memory: bool = False        # LOAD/STORE address written in brackets
    cond: tuple | None = None   # CBRANCH displayed comparison (a, sym, b)
    lineno: int = 0


def parse_token(text: str, lineno: int = 0) -> Tok:
    m = _TOKEN.fullmatch(text)
    if not m:
        raise PcodeSyntax(lineno, f"bad operand {text!r}")
    if m.group("id") is not None:
        return Tok("value", id=int(m.group("id")), width=int(m.group("w")), loc=m.group("loc"),
                   type=m.group("type"), text=text)
    if m.group("glob") is not None:
        return Tok("global", width=int(m.group("gw")), value=int(m.group("glob"), 16), text=text)
    if m.group("const") is not None:
        return Tok("const", width=int(m.group("cw")), value=int(m.group("const")), text=text)
    return Tok("name", text=text)


def _split(rest: str) -> list[str]:
    return [p.strip() for p in rest.split(", ")] if rest.strip() else []


def parse_pcode(text: str) -> dict[str, list[ParsedOp]]:
    """``{label: [ParsedOp]}`` in text order; raises PcodeSyntax on any line outside the grammar."""
    blocks: dict[str, list] = {}
    cur = None
    prev_blank = False
    for n, line in enumerate(text.split("\n"), 1):
        if not line:
            if cur is None or prev_blank:
                raise PcodeSyntax(n, "unexpected blank line")
            prev_blank = True
            continue
        h = _HEADER.match(line)
        if h:
            if cur is not None and not prev_blank:
                raise PcodeSyntax(n, "blocks must be separated by a blank line")
            cur = h.group(1)
            if cur in blocks:
                raise PcodeSyntax(n, f"duplicate block {cur}")
            blocks[cur] = []
            prev_blank = False
            continue
        if prev_blank:
            raise PcodeSyntax(n, "op after blank line")
        m = _LINE.match(line)
        if cur is None or not m:
            raise PcodeSyntax(n, f"unparseable line {line!r}")
        opc = m.group("opc")
        if opc not in OPCODES:
            raise PcodeSyntax(n, f"unknown opcode {opc}")
        out = parse_token(m.group("out"), n) if m.group("out") else None
        rest = m.group("rest")
        memory, cond = False, None
        if opc == "PHI":
            if not m.group("paren") or not rest.endswith(")"):
                raise PcodeSyntax(n, "PHI needs parenthesised inputs")
            parts = _split(rest[:-1])
        elif m.group("paren"):
            raise PcodeSyntax(n, "unexpected parenthesis")
        elif opc == "CBRANCH":
            parts = _split(rest)
            if len(parts) != 2:
                raise PcodeSyntax(n, "CBRANCH takes a label and a condition")
            c = _COND.match(parts[1])
            if c:
                cond = (parse_token(c.group("a"), n), c.group("sym"), parse_token(c.group("b"), n))
                parts = parts[:1]
        else:
            parts = _split(rest)
            if opc in ("LOAD", "STORE") and parts:
                if parts[0].startswith("[") and parts[0].endswith("]"):
                    parts[0] = parts[0][1:-1]
                    memory = True
        inputs = tuple(parse_token(p, n) for p in parts)
        blocks[cur].append(ParsedOp(opc, out, inputs, memory, cond, n))
    if prev_blank:
        raise PcodeSyntax(len(text.split("\n")), "trailing blank line")
    return blocks


def render_parsed(blocks: dict[str, list[ParsedOp]]) -> str:
    """Inverse of parse_pcode (used for round-trip checks)."""
    parts = []
    for label, ops in blocks.items():
        lines = [f"{label}:"]
        for op in ops:
            ins = [t.text for t in op.inputs]
            if op.memory:
                ins[0] = f"[{ins[0]}]"
            if op.cond:
                ins.append(f"{op.cond[0].text} {op.cond[1]} {op.cond[2].text}")
            if op.opcode == "PHI":
                rhs = "PHI(" + ", ".join(ins) + ")"
            else:
                rhs = op.opcode + (" " + ", ".join(ins) if ins else "")
            lines.append("    " + (f"{op.output.text} = " if op.output else "") + rhs)
        parts.append("\n".join(lines))
    return "\n\n".join(parts)


def verify_ssa(blocks: dict[str, list[ParsedOp]], edges) -> list[str]:
    """Problems found in parsed p-code against CFG ``edges`` ((src, dst, type) triples); [] if valid."""
    problems = []
    labels = list(blocks)
    preds = {l: [] for l in labels}
    for s, t, *_ in edges:
        if s not in preds or t not in preds:
            problems.append(f"edge {s}->{t} names a missing block")
            continue
        preds[t].append(s)
    if not labels:
        return problems
    idom = dominators(labels, preds, _roots(labels, preds, labels[0]))

    defs: dict[int, tuple] = {}
    shape: dict[int, tuple] = {}
    for label, ops in blocks.items():
        for k, op in enumerate(ops):
            if op.opcode == "PHI" and any(o.opcode != "PHI" for o in ops[:k]):
                problems.append(f"{label}: PHI after a non-PHI op (line {op.lineno})")
            if op.opcode in BLOCK_FINAL and k != len(ops) - 1:
                problems.append(f"{label}: {op.opcode} is not block-final (line {op.lineno})")
            if op.opcode == "PHI" and len(op.inputs) != len(preds[label]):
                problems.append(f"{label}: PHI arity {len(op.inputs)} != {len(preds[label])} preds")
            toks = list(op.inputs) + ([op.cond[0], op.cond[2]] if op.cond else [])
            if op.output is not None:
                toks.append(op.output)
                if op.output.kind != "value":
                    problems.append(f"{label}: output is not an SSA value (line {op.lineno})")
                elif op.output.id in defs:
                    problems.append(f"v{op.output.id} defined twice")
                else:
                    defs[op.output.id] = (label, k)
            for t in toks:
                if t.kind == "value":
                    sig = (t.width, t.loc, t.type)
                    if shape.setdefault(t.id, sig) != sig:
                        problems.append(f"v{t.id} rendered inconsistently")

    def dominated(use_label, use_idx, vid) -> bool:
        d = defs.get(vid)
        if d is None:
            return True
        dl, di = d
        if dl == use_label:
            return di < use_idx
        return dominates(idom, dl, use_label)

    for label, ops in blocks.items():
        for k, op in enumerate(ops):
            if op.opcode == "PHI":
                for j, t in enumerate(op.inputs):
                    if t.kind == "value" and j < len(preds[label]):
                        p = preds[label][j]
                        if not dominated(p, len(blocks[p]), t.id):
                            problems.append(f"{label}: PHI input v{t.id} not available on edge from {p}")
                continue
            toks = list(op.inputs) + ([op.cond[0], op.cond[2]] if op.cond else [])
            for t in toks:
                if t.kind != "value":
                    continue
                if t.id not in defs and t.loc is None:
                    problems.append(f"v{t.id} used but never defined")
                elif not dominated(label, k, t.id):
                    problems.append(f"{label}: use of v{t.id} not dominated by its definition")
    return problems
