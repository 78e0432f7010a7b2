"""Locate ``jmp qword [rip+slot]`` stubs that forward to import slots."""
from __future__ import annotations

import re
import struct

from .image import Section

# optional bnd prefix, then FF /4 with rip-relative modrm
_JMP_SLOT = re.compile(rb"\xf2?\xff\x25", re.DOTALL)
_ENDBR64 = b"\xf3\x0f\x1e\xfa"


def find_jump_thunks(sections, slots: set[int]) -> dict[int, int]:
    """Map import slot VA -> VA of the lowest stub jumping through it."""
    out: dict[int, int] = {}
    if not slots:
        return out
    for sec in sections:
        if not (sec.executable and sec.initialized and sec.mapped):
            continue
        data = sec.data
        for m in _JMP_SLOT.finditer(data):
            end = m.end() + 4
            if end > len(data):
                break
            disp, = struct.unpack_from("<i", data, m.end())
            target = sec.va + end + disp
            if target not in slots:
                continue
            start = m.start()
            if start >= 4 and data[start - 4:start] == _ENDBR64:
                start -= 4
            va = sec.va + start
            if target not in out or va < out[target]:
                out[target] = va
    return out
