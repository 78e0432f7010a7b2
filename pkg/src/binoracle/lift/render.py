"""Text renderings of a lifted function: annotated p-code, assembly and goto-style pseudo-C."""
from __future__ import annotations

from ..disasm import format_assembly
from .ir import Const, FuncRef, Global, Label, Value

_ARG_REGS = {"sysv": ("RDI", "RSI", "RDX", "RCX", "R8", "R9"), "win64": ("RCX", "RDX", "R8", "R9")}


def token(x) -> str:
    if isinstance(x, Value):
        loc = x.loc.suffix() if x.loc is not None else ""
        typ = f"<{x.type}>" if x.type else ""
        return f"v{x.id}:{x.width}{loc}{typ}"
    if isinstance(x, Const):
        return f"{x.value}:{x.width}"
    if isinstance(x, Global):
        return f"{x.addr:#x}:{x.width}"
    if isinstance(x, (Label, FuncRef)):
        return x.name
    raise TypeError(f"cannot render {x!r}")


def _addr(x) -> str:
    return token(x) if isinstance(x, Global) else f"[{token(x)}]"


def condition_text(op, name=token) -> str:
    if op.display is None:
        return name(op.inputs[1])
    sym, src, swap = op.display
    a, b = src.inputs[0], src.inputs[1]
    if swap:
        a, b = b, a
    return f"{name(a)} {sym} {name(b)}"


def render_op(op) -> str:
    opc, ins = op.opcode, op.inputs
    if opc == "PHI":
        rhs = "PHI(" + ", ".join(token(x) for x in ins) + ")"
    elif opc == "LOAD":
        rhs = f"LOAD {_addr(ins[0])}"
    elif opc == "STORE":
        rhs = f"STORE {_addr(ins[0])}, {token(ins[1])}"
    elif opc == "CBRANCH":
        rhs = f"CBRANCH {token(ins[0])}, {condition_text(op)}"
    elif ins:
        rhs = f"{opc} " + ", ".join(token(x) for x in ins)
    else:
        rhs = opc
    if op.output is not None:
        return f"{token(op.output)} = {rhs}"
    return rhs


def render_pcode(fn) -> str:
    parts = []
    for b in fn.blocks:
        lines = [f"{b.label}:"] + ["    " + render_op(op) for op in b.ops]
        parts.append("\n".join(lines))
    return "\n\n".join(parts)


def render_assembly(f, names=None) -> str:
    return "\n".join(format_assembly(i, names) for i in f.instructions)


# ---------------------------------------------------------------- pseudo-C

_CTYPE = {1: "char", 2: "short", 4: "int", 8: "long", 16: "long long"}
_BINOP = {
    "INT_ADD": "+", "INT_SUB": "-", "INT_MULT": "*", "INT_AND": "&", "INT_OR": "|", "INT_XOR": "^",
    "INT_LEFT": "<<", "INT_RIGHT": ">>", "INT_SRIGHT": ">>", "INT_EQUAL": "==", "INT_NOTEQUAL": "!=",
    "INT_LESS": "<", "INT_SLESS": "<", "INT_LESSEQUAL": "<=", "INT_SLESSEQUAL": "<=",
    "BOOL_AND": "&&", "BOOL_OR": "||",
    "FLOAT_ADD": "+", "FLOAT_SUB": "-", "FLOAT_MULT": "*", "FLOAT_DIV": "/",
}
_UNSIGNED = {"INT_LESS", "INT_LESSEQUAL", "INT_RIGHT"}


def _c_string(s: str) -> str:
    esc = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{esc}"'


class _CWriter:
    def __init__(self, fn, abi, strings):
        self.fn = fn
        self.strings = strings or {}
        self.args = _ARG_REGS[abi]
        self.defs = {}
        self.uses: dict[int, list] = {}
        for b in fn.blocks:
            for op in b.ops:
                if isinstance(op.output, Value):
                    self.defs[id(op.output)] = op
                for x in op.inputs:
                    if isinstance(x, Value):
                        self.uses.setdefault(id(x), []).append(op)
        self.params = self._params()
        self.hidden = self._hidden()

    def _hidden(self) -> set:
        """Ids of flag/temp values whose only consumers are displayed branch conditions."""
        hidden: set = set()
        ops = [op for b in self.fn.blocks for op in b.ops]
        changed = True
        while changed:
            changed = False
            for op in ops:
                v = op.output
                if not isinstance(v, Value) or id(v) in hidden or op.opcode in ("CALL", "CALLIND", "PHI"):
                    continue
                if v.loc is not None and v.loc.space != "flag":
                    continue
                uses = self.uses.get(id(v), [])
                if uses and all((u.opcode == "CBRANCH" and u.display is not None)
                                or (isinstance(u.output, Value) and id(u.output) in hidden) for u in uses):
                    hidden.add(id(v))
                    changed = True
        return hidden

    def _params(self) -> int:
        n = 0
        for b in self.fn.blocks:
            for op in b.ops:
                # arguments forwarded to a call don't make a parameter on their own
                ins = op.inputs[:1] if op.opcode in ("CALL", "CALLIND") else op.inputs
                for x in ins:
                    if self._is_param(x):
                        n = max(n, self.args.index(x.loc.name) + 1)
        return n

    def _is_param(self, x) -> bool:
        return (isinstance(x, Value) and id(x) not in self.defs and x.loc is not None
                and x.loc.space == "register" and x.loc.name in self.args)

    def inlined(self, v) -> bool:
        op = self.defs.get(id(v))
        if op is None:
            return False
        if op.opcode == "COPY" and isinstance(op.inputs[0], Const):
            return True
        return id(v) in self.hidden

    def name(self, x) -> str:
        if isinstance(x, Const):
            return str(x.value)
        if isinstance(x, Global):
            return f"DAT_{x.addr:x}"
        if isinstance(x, (Label, FuncRef)):
            return x.name
        op = self.defs.get(id(x))
        if op is not None and op.opcode == "COPY" and isinstance(op.inputs[0], Const):
            return str(op.inputs[0].value)
        if op is None and x.loc is not None:
            if self._is_param(x) and self.args.index(x.loc.name) < self.params:
                return f"param_{self.args.index(x.loc.name) + 1}"
            return "in_" + self._locname(x)
        if x.loc is None:
            return f"t{x.id}"
        return f"{self._locname(x)}_{x.id}"

    @staticmethod
    def _locname(x) -> str:
        if x.loc.space == "stack":
            return f"local_{abs(x.loc.offset):x}"
        return x.loc.name.lower()

    def expr(self, op) -> str:
        opc, ins = op.opcode, op.inputs
        n = [self.name(x) for x in ins]
        if opc in _BINOP:
            a, b = n[0], n[1]
            if opc in _UNSIGNED:
                a = f"(u{_CTYPE.get(ins[0].width, 'long')}){a}"
            return f"{a} {_BINOP[opc]} {b}"
        if opc == "BOOL_NEGATE":
            return f"!{n[0]}"
        if opc in ("COPY", "CAST"):
            return n[0]
        if opc == "INT_ZEXT":
            return f"(u{_CTYPE.get(op.output.width, 'long')}){n[0]}"
        if opc == "INT_SEXT":
            return f"({_CTYPE.get(op.output.width, 'long')}){n[0]}"
        if opc == "SUBPIECE":
            shift = ins[1].value if isinstance(ins[1], Const) else 0
            src = f"({n[0]} >> {8 * shift})" if shift else n[0]
            return f"({_CTYPE.get(op.output.width, 'long')}){src}"
        if opc == "PIECE":
            return f"CONCAT({n[0]}, {n[1]})"
        if opc == "PTRADD":
            return f"{n[0]} + {n[1]} * {n[2]}"
        if opc == "PTRSUB":
            g = ins[1]
            if isinstance(g, Global):
                if g.addr in self.strings:
                    return _c_string(self.strings[g.addr])
                return f"&DAT_{g.addr:x}"
            return f"{n[0]} + {n[1]}"
        if opc == "LOAD":
            return self._deref(ins[0], op.output.width)
        if opc in ("CALL", "CALLIND"):
            callee = n[0] if opc == "CALL" else f"(*{n[0]})"
            args = list(ins[1:])
            while args and not self._arg_used(args[-1]):
                args.pop()
            return f"{callee}(" + ", ".join(self.name(a) for a in args) + ")"
        return f"{opc}(" + ", ".join(n) + ")"

    def _arg_used(self, x) -> bool:
        # trailing call arguments that are untouched incoming registers (not params) are dropped
        if not isinstance(x, Value) or id(x) in self.defs:
            return True
        return self._is_param(x) and self.args.index(x.loc.name) < self.params

    def _deref(self, a, width) -> str:
        typ = _CTYPE.get(width, "long")
        if isinstance(a, Global):
            return f"*({typ} *){a.addr:#x}"
        return f"*({typ} *)({self.name(a)})"

    def statement(self, op) -> str | None:
        opc = op.opcode
        if isinstance(op.output, Value) and self.inlined(op.output):
            return None
        if opc == "STORE":
            return f"{self._deref(op.inputs[0], op.inputs[1].width)} = {self.name(op.inputs[1])};"
        if opc == "CBRANCH":
            return f"if ({condition_text(op, self.name)}) goto {op.inputs[0].name};"
        if opc == "BRANCH":
            return f"goto {op.inputs[0].name};"
        if opc == "BRANCHIND":
            return f"goto *{self.name(op.inputs[0])};"
        if opc == "RETURN":
            return f"return {self.name(op.inputs[0])};" if op.inputs else "return;"
        if opc == "PHI":
            rhs = "phi(" + ", ".join(self.name(x) for x in op.inputs) + ")"
        else:
            rhs = self.expr(op)
        if op.output is None:
            return f"{rhs};"
        return f"{self.name(op.output)} = {rhs};"

    def render(self) -> str:
        params = ", ".join(f"long param_{i + 1}" for i in range(self.params)) or "void"
        lines = [f"long {self.fn.name}({params})", "{"]
        for b in self.fn.blocks:
            lines.append(f"{b.label}:")
            body = [s for s in (self.statement(op) for op in b.ops) if s]
            lines.extend("    " + s for s in body or [";"])
        lines.append("}")
        return "\n".join(lines)


def render_pseudo_c(fn, abi: str = "sysv", strings: dict | None = None) -> str:
    """Goto-form pseudo-C; ``strings`` maps addresses to literal text for PTRSUB rendering."""
    return _CWriter(fn, abi, strings).render()
