"""Lifting to p-code, SSA construction and the three text renderings."""
from __future__ import annotations

from dataclasses import dataclass

from .ir import OPCODES, Const, FuncRef, Global, Label, Loc, PcodeOp, Value
from .lifter import (ABI_ARGS, LiftedBlock, LiftedFunction, UnsupportedInstruction, frame_offsets,
                     lift_block, lift_function)
from .parse import ParsedOp, PcodeSyntax, parse_pcode, render_parsed, verify_ssa
from .render import render_assembly, render_op, render_pcode, render_pseudo_c, token
from .ssa import SsaBlock, SsaFunction, construct_ssa


@dataclass(frozen=True)
class RenderedFunction:
    pcode_text: str
    assembly_text: str
    pseudo_c_text: str


@dataclass
class FunctionAnalysis:
    record: object              # flow.FunctionRecord
    ssa: SsaFunction
    rendered: RenderedFunction

    @property
    def unsupported(self):
        return self.ssa.unsupported


def abi_for(img) -> str:
    return "win64" if str(getattr(img.format, "value", img.format)).upper() == "PE" else "sysv"


def analyze_function(f, abi: str = "sysv", resolver=None, strings=None) -> FunctionAnalysis:
    """Lift, SSA-convert and render one function."""
    ssa = construct_ssa(lift_function(f, abi, resolver))
    names = resolver.names() if resolver is not None else None
    rendered = RenderedFunction(render_pcode(ssa), render_assembly(f, names),
                                render_pseudo_c(ssa, abi, strings))
    return FunctionAnalysis(f, ssa, rendered)


__all__ = [
    "ABI_ARGS", "Const", "FuncRef", "FunctionAnalysis", "Global", "Label", "LiftedBlock", "LiftedFunction",
    "Loc", "OPCODES", "ParsedOp", "PcodeOp", "PcodeSyntax", "RenderedFunction", "SsaBlock", "SsaFunction",
    "UnsupportedInstruction", "Value", "abi_for", "analyze_function", "construct_ssa", "frame_offsets",
    "lift_block", "lift_function", "parse_pcode", "render_assembly", "render_op", "render_parsed",
    "render_pcode", "render_pseudo_c", "token", "verify_ssa",
]
