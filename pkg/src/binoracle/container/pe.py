"""PE/COFF parsing (PE32+ and PE32 headers; x86-64 code)."""
from __future__ import annotations

import hashlib
import logging
import struct

from .image import (ALLOC, EXECUTABLE, INITIALIZED, WRITABLE, BinaryFormat, BinaryImage,
                    ImportEntry, MalformedContainer, Section, SymbolEntry)
from .thunks import find_jump_thunks

log = logging.getLogger(__name__)

IMAGE_SCN_CNT_CODE = 0x20
IMAGE_SCN_CNT_UNINITIALIZED_DATA = 0x80
IMAGE_SCN_MEM_EXECUTE = 0x20000000
IMAGE_SCN_MEM_WRITE = 0x80000000

DIR_EXPORT, DIR_IMPORT = 0, 1

_COFF = struct.Struct("<HHIIIHH")
_SECTION = struct.Struct("<8sIIIIIIHHI")
_IMPORT_DESC = struct.Struct("<IIIII")
_EXPORT_DIR = struct.Struct("<IIHHIIIIIII")


class _Rva:
    """RVA -> file bytes translation over the raw section table."""

    def __init__(self, data: bytes, table):
        self.data = data
        self.table = table      # (rva, vsize, raw_off, raw_size)

    def offset(self, rva: int) -> int | None:
        for va, vsize, raw_off, raw_size in self.table:
            if va <= rva < va + max(vsize, raw_size) and rva - va < raw_size:
                return raw_off + (rva - va)
        return None

    def read(self, rva: int, n: int) -> bytes | None:
        off = self.offset(rva)
        if off is None or off + n > len(self.data):
            return None
        return self.data[off:off + n]

    def cstr(self, rva: int, limit: int = 512) -> str | None:
        off = self.offset(rva)
        if off is None:
            return None
        end = self.data.find(b"\0", off, off + limit)
        if end < 0:
            return None
        return self.data[off:end].decode("latin-1")


def parse_pe(data: bytes, path: str | None = None) -> BinaryImage:
    if len(data) < 0x40:
        raise MalformedContainer("DOS header truncated", len(data))
    e_lfanew, = struct.unpack_from("<I", data, 0x3C)
    if e_lfanew + 4 + _COFF.size > len(data):
        raise MalformedContainer("PE header offset beyond end of file", 0x3C)
    if data[e_lfanew:e_lfanew + 4] != b"PE\0\0":
        raise MalformedContainer("missing PE signature", e_lfanew)
    coff_off = e_lfanew + 4
    machine, nsections, _ts, _symptr, _nsyms, opt_size, _chars = _COFF.unpack_from(data, coff_off)
    opt = coff_off + _COFF.size
    if opt + opt_size > len(data) or opt_size < 2:
        raise MalformedContainer("optional header truncated", opt)
    magic, = struct.unpack_from("<H", data, opt)
    if magic == 0x20B:
        entry_rva, = struct.unpack_from("<I", data, opt + 16)
        image_base, = struct.unpack_from("<Q", data, opt + 24)
        ndir_off, dir_off, ptr = opt + 108, opt + 112, 8
    elif magic == 0x10B:
        entry_rva, = struct.unpack_from("<I", data, opt + 16)
        image_base, = struct.unpack_from("<I", data, opt + 28)
        ndir_off, dir_off, ptr = opt + 92, opt + 96, 4
    else:
        raise MalformedContainer(f"unknown optional header magic {magic:#x}", opt)
    if ndir_off + 4 > opt + opt_size:
        raise MalformedContainer("optional header too small for data directories", opt)
    ndirs, = struct.unpack_from("<I", data, ndir_off)
    dirs = []
    for k in range(min(ndirs, 16)):
        if dir_off + 8 * (k + 1) > opt + opt_size:
            break
        dirs.append(struct.unpack_from("<II", data, dir_off + 8 * k))

    sec_table = opt + opt_size
    raw_table, sections = [], []
    for k in range(nsections):
        off = sec_table + k * _SECTION.size
        if off + _SECTION.size > len(data):
            raise MalformedContainer("section table truncated", off)
        (name, vsize, rva, raw_size, raw_off, *_unused, chars) = _SECTION.unpack_from(data, off)
        if raw_size and raw_off + raw_size > len(data):
            raise MalformedContainer(f"section {k} raw data past end of file", off)
        raw_table.append((rva, vsize, raw_off, raw_size))
        flags = {ALLOC}
        if chars & (IMAGE_SCN_MEM_EXECUTE | IMAGE_SCN_CNT_CODE):
            flags.add(EXECUTABLE)
        if chars & IMAGE_SCN_MEM_WRITE:
            flags.add(WRITABLE)
        size = vsize or raw_size
        body = b""
        if raw_size and not chars & IMAGE_SCN_CNT_UNINITIALIZED_DATA:
            flags.add(INITIALIZED)
            body = data[raw_off:raw_off + min(raw_size, size)].ljust(size, b"\0")
        sections.append(Section(name=name.rstrip(b"\0").decode("latin-1"), va=image_base + rva,
                                size=size, flags=frozenset(flags), data=body,
                                file_offset=raw_off if raw_size else None))

    rva = _Rva(data, raw_table)
    imports = _pe_imports(rva, dirs, image_base, ptr)
    symbols = _pe_exports(rva, dirs, image_base, sections)
    slot_to_thunk = find_jump_thunks(sections, {imp.slot_va for imp in imports})
    imports = [ImportEntry(name=i.name, library=i.library, slot_va=i.slot_va,
                           thunk_va=slot_to_thunk.get(i.slot_va)) for i in imports]
    return BinaryImage(format=BinaryFormat.PE, content_hash=hashlib.sha256(data).digest(),
                       sections=tuple(sections), symbols=tuple(symbols), imports=tuple(imports),
                       entry_va=image_base + entry_rva if entry_rva else 0,
                       image_base=image_base, path=path)


def _pe_imports(rva: _Rva, dirs, image_base: int, ptr: int) -> list[ImportEntry]:
    if len(dirs) <= DIR_IMPORT or not dirs[DIR_IMPORT][0]:
        return []
    out, seen = [], set()
    desc_rva = dirs[DIR_IMPORT][0]
    while True:
        raw = rva.read(desc_rva, _IMPORT_DESC.size)
        if raw is None:
            log.warning("import descriptor at rva %#x not file-backed; stopping", desc_rva)
            break
        ilt, _ts, _fwd, name_rva, iat = _IMPORT_DESC.unpack(raw)
        if not (ilt or name_rva or iat):
            break
        desc_rva += _IMPORT_DESC.size
        library = rva.cstr(name_rva)
        if library is None:
            log.warning("unreadable import library name at rva %#x", name_rva)
            continue
        lookup = ilt or iat
        fmt, ord_flag = ("<Q", 1 << 63) if ptr == 8 else ("<I", 1 << 31)
        for k in range(4096):
            entry_raw = rva.read(lookup + k * ptr, ptr)
            if entry_raw is None:
                break
            entry, = struct.unpack(fmt, entry_raw)
            if not entry:
                break
            if entry & ord_flag:
                name = f"ord{entry & 0xFFFF}"
            else:
                name = rva.cstr((entry & 0x7FFFFFFF) + 2)
                if not name:
                    continue
            key = (library.lower(), name)
            if key in seen:
                continue
            seen.add(key)
            out.append(ImportEntry(name=name, library=library, slot_va=image_base + iat + k * ptr))
    return out


def _pe_exports(rva: _Rva, dirs, image_base: int, sections) -> list[SymbolEntry]:
    if not dirs or not dirs[DIR_EXPORT][0]:
        return []
    exp_rva, exp_size = dirs[DIR_EXPORT]
    raw = rva.read(exp_rva, _EXPORT_DIR.size)
    if raw is None:
        log.warning("export directory not file-backed")
        return []
    (*_hdr, nfuncs, nnames, funcs_rva, names_rva, ords_rva) = _EXPORT_DIR.unpack(raw)
    out = []
    for k in range(min(nnames, 65536)):
        name_ptr = rva.read(names_rva + 4 * k, 4)
        ord_raw = rva.read(ords_rva + 2 * k, 2)
        if name_ptr is None or ord_raw is None:
            break
        name = rva.cstr(struct.unpack("<I", name_ptr)[0])
        ordinal, = struct.unpack("<H", ord_raw)
        func_raw = rva.read(funcs_rva + 4 * ordinal, 4) if ordinal < nfuncs else None
        if not name or func_raw is None:
            continue
        target, = struct.unpack("<I", func_raw)
        if exp_rva <= target < exp_rva + exp_size:
            continue        # forwarder string, not code
        va = image_base + target
        sec = next((s for s in sections if s.contains(va)), None)
        kind = "func" if sec is not None and sec.executable else "object"
        out.append(SymbolEntry(name=name, va=va, kind=kind, source="export", absolute=sec is None))
    out.sort(key=lambda s: (s.va, s.name))
    return out
