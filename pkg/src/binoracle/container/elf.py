"""ELF64 little-endian (x86-64) parsing."""
from __future__ import annotations

import hashlib
import logging
import struct

from .image import (ALLOC, EXECUTABLE, INITIALIZED, WRITABLE, BinaryFormat, BinaryImage,
                    ImportEntry, MalformedContainer, Section, SymbolEntry)
from .thunks import find_jump_thunks

log = logging.getLogger(__name__)

ELF_MAGIC = b"\x7fELF"

SHT_NULL, SHT_SYMTAB, SHT_NOBITS, SHT_DYNSYM = 0, 2, 8, 11
SHF_WRITE, SHF_ALLOC, SHF_EXECINSTR, SHF_TLS = 0x1, 0x2, 0x4, 0x400
SHN_UNDEF, SHN_ABS = 0, 0xFFF1
PT_LOAD, PT_DYNAMIC = 1, 2
STT_NOTYPE, STT_OBJECT, STT_FUNC = 0, 1, 2
STB_LOCAL = 0

DT_NULL, DT_STRTAB, DT_SYMTAB, DT_RELA, DT_RELASZ = 0, 5, 6, 7, 8
DT_SYMENT, DT_PLTRELSZ, DT_JMPREL = 11, 2, 23

R_X86_64_GLOB_DAT, R_X86_64_JUMP_SLOT = 6, 7

_EHDR = struct.Struct("<16sHHIQQQIHHHHHH")
_SHDR = struct.Struct("<IIQQQQIIQQ")
_PHDR = struct.Struct("<IIQQQQQQ")
_SYM = struct.Struct("<IBBHQQ")
_RELA = struct.Struct("<QQq")
_DYN = struct.Struct("<qQ")


def _unpack(st: struct.Struct, data: bytes, off: int, what: str):
    if off < 0 or off + st.size > len(data):
        raise MalformedContainer(f"truncated {what}", off)
    return st.unpack_from(data, off)


def _cstr(data: bytes, off: int) -> str:
    if not 0 <= off < len(data):
        return ""
    end = data.find(b"\0", off)
    if end < 0:
        end = len(data)
    return data[off:end].decode("latin-1")


class _Loader:
    def __init__(self, data: bytes):
        self.data = data
        self.segments = []      # (vaddr, memsz, offset, filesz, flags)
        self.dynamic = None     # (offset, size) of PT_DYNAMIC

    def va_to_offset(self, va: int) -> int | None:
        for vaddr, _memsz, off, filesz, _fl in self.segments:
            if vaddr <= va < vaddr + filesz:
                return off + (va - vaddr)
        return None


def parse_elf(data: bytes, path: str | None = None) -> BinaryImage:
    (ident, _etype, machine, _ver, entry, phoff, shoff, _flags, _ehsize,
     phentsize, phnum, shentsize, shnum, shstrndx) = _unpack(_EHDR, data, 0, "ELF header")
    if ident[4] != 2 or ident[5] != 1:
        raise MalformedContainer("only ELF64 little-endian is supported", 4)
    if machine != 62:
        raise MalformedContainer(f"unsupported ELF machine {machine}", 18)

    ld = _Loader(data)
    for i in range(phnum if phoff else 0):
        off = phoff + i * phentsize
        p_type, p_flags, p_offset, p_vaddr, _pa, p_filesz, p_memsz, _al = _unpack(_PHDR, data, off, "program header")
        if p_type == PT_LOAD:
            if p_offset + p_filesz > len(data):
                raise MalformedContainer("PT_LOAD extends past end of file", off)
            ld.segments.append((p_vaddr, p_memsz, p_offset, p_filesz, p_flags))
        elif p_type == PT_DYNAMIC:
            ld.dynamic = (p_offset, p_filesz)

    raw_sections = []
    if shoff and shnum:
        if shentsize != _SHDR.size:
            raise MalformedContainer("unexpected section header size", 58)
        for i in range(shnum):
            raw_sections.append(_unpack(_SHDR, data, shoff + i * shentsize, "section header"))
    sections = _build_sections(data, raw_sections, shstrndx, shoff) if raw_sections else _segments_as_sections(ld)

    symbols = []
    dynsym_undef = []
    for (_n, sh_type, _f, _a, sh_offset, sh_size, sh_link, _i, _al, sh_entsize) in raw_sections:
        if sh_type not in (SHT_SYMTAB, SHT_DYNSYM) or not sh_size:
            continue
        if sh_offset + sh_size > len(data) or sh_link >= len(raw_sections):
            log.warning("skipping out-of-range symbol table at %#x", sh_offset)
            continue
        strsec = raw_sections[sh_link]
        strtab = data[strsec[4]:strsec[4] + strsec[5]]
        source = "symtab" if sh_type == SHT_SYMTAB else "dynsym"
        entsize = sh_entsize or _SYM.size
        for k in range(1, sh_size // entsize):
            name_off, info, _other, shndx, value, size = _SYM.unpack_from(data, sh_offset + k * entsize)
            name = _cstr(strtab, name_off)
            stype, bind = info & 0xF, info >> 4
            if shndx == SHN_UNDEF:
                if source == "dynsym" and name:
                    dynsym_undef.append((k, name, stype))
                continue
            if not name:
                continue
            if source == "dynsym" and bind == STB_LOCAL:
                continue
            kind = {STT_FUNC: "func", STT_OBJECT: "object"}.get(stype, "other")
            inside = any(s.contains(value) for s in sections)
            symbols.append(SymbolEntry(name=name, va=value, size=size, kind=kind, source=source,
                                       absolute=shndx == SHN_ABS or not inside))

    imports = _elf_imports(data, ld, dynsym_undef)
    slot_to_thunk = find_jump_thunks(sections, {imp.slot_va for imp in imports if imp.slot_va})
    imports = [ImportEntry(name=i.name, library=i.library, slot_va=i.slot_va,
                           thunk_va=slot_to_thunk.get(i.slot_va)) for i in imports]

    base = min((seg[0] for seg in ld.segments), default=0) & ~0xFFF
    symbols.sort(key=lambda s: (s.va, s.name, s.source))
    return BinaryImage(format=BinaryFormat.ELF, content_hash=hashlib.sha256(data).digest(),
                       sections=tuple(sections), symbols=tuple(symbols), imports=tuple(imports),
                       entry_va=entry, image_base=base, path=path)


def _build_sections(data, raw_sections, shstrndx, shoff):
    if shstrndx >= len(raw_sections):
        raise MalformedContainer("section name table index out of range", shoff)
    names_hdr = raw_sections[shstrndx]
    names = data[names_hdr[4]:names_hdr[4] + names_hdr[5]]
    out = []
    for idx, (sh_name, sh_type, sh_flags, sh_addr, sh_offset, sh_size, *_rest) in enumerate(raw_sections):
        if sh_type == SHT_NULL:
            continue
        flags = set()
        if sh_flags & SHF_ALLOC and not (sh_flags & SHF_TLS and sh_type == SHT_NOBITS):
            flags.add(ALLOC)
        if sh_flags & SHF_WRITE:
            flags.add(WRITABLE)
        if sh_flags & SHF_EXECINSTR:
            flags.add(EXECUTABLE)
        body = b""
        if sh_type != SHT_NOBITS:
            if sh_offset + sh_size > len(data):
                raise MalformedContainer(f"section {idx} contents past end of file",
                                         shoff + idx * _SHDR.size)
            flags.add(INITIALIZED)
            body = data[sh_offset:sh_offset + sh_size]
        out.append(Section(name=_cstr(names, sh_name), va=sh_addr if ALLOC in flags else 0,
                           size=sh_size, flags=frozenset(flags), data=body,
                           file_offset=sh_offset if sh_type != SHT_NOBITS else None))
    return out


def _segments_as_sections(ld: _Loader):
    # stripped of section headers: loadable segments stand in for sections
    out = []
    for i, (vaddr, memsz, off, filesz, pflags) in enumerate(ld.segments):
        flags = {ALLOC}
        if pflags & 1:
            flags.add(EXECUTABLE)
        if pflags & 2:
            flags.add(WRITABLE)
        if filesz:
            out.append(Section(name=f"seg{i}", va=vaddr, size=filesz,
                               flags=frozenset(flags | {INITIALIZED}),
                               data=ld.data[off:off + filesz], file_offset=off))
        if memsz > filesz:
            out.append(Section(name=f"seg{i}.bss", va=vaddr + filesz, size=memsz - filesz,
                               flags=frozenset(flags)))
    return out


def _elf_imports(data: bytes, ld: _Loader, dynsym_undef) -> list[ImportEntry]:
    """Undefined dynamic function symbols, with their GOT slots when relocated."""
    dyn = {}
    if ld.dynamic:
        off, size = ld.dynamic
        for k in range(size // _DYN.size):
            if off + (k + 1) * _DYN.size > len(data):
                break
            tag, val = _DYN.unpack_from(data, off + k * _DYN.size)
            if tag == DT_NULL:
                break
            dyn.setdefault(tag, val)

    slots = {}      # symbol index -> (slot va, from plt)
    symtab_off = ld.va_to_offset(dyn[DT_SYMTAB]) if DT_SYMTAB in dyn else None
    strtab_off = ld.va_to_offset(dyn[DT_STRTAB]) if DT_STRTAB in dyn else None
    for tag_addr, tag_size, plt in ((DT_JMPREL, DT_PLTRELSZ, True), (DT_RELA, DT_RELASZ, False)):
        if tag_addr not in dyn:
            continue
        roff = ld.va_to_offset(dyn[tag_addr])
        if roff is None:
            log.warning("relocation table at %#x not file-backed", dyn[tag_addr])
            continue
        for k in range(dyn.get(tag_size, 0) // _RELA.size):
            if roff + (k + 1) * _RELA.size > len(data):
                break
            r_offset, r_info, _add = _RELA.unpack_from(data, roff + k * _RELA.size)
            rtype, sym = r_info & 0xFFFFFFFF, r_info >> 32
            if sym and rtype in (R_X86_64_JUMP_SLOT, R_X86_64_GLOB_DAT):
                slots.setdefault(sym, (r_offset, plt))

    found = {}
    for k, name, stype in dynsym_undef:
        slot = slots.get(k)
        if stype == STT_FUNC or (stype == STT_NOTYPE and slot and slot[1]):
            found.setdefault(name, ImportEntry(name=name, slot_va=slot[0] if slot else None))
    if not dynsym_undef and symtab_off is not None and strtab_off is not None:
        # no section headers: the relocations are the only index into .dynsym
        for k, (slot_va, plt) in sorted(slots.items()):
            so = symtab_off + k * _SYM.size
            if so + _SYM.size > len(data):
                continue
            name_off, info, _o, shndx, _v, _s = _SYM.unpack_from(data, so)
            stype = info & 0xF
            name = _cstr(data, strtab_off + name_off)
            if shndx == SHN_UNDEF and name and (stype == STT_FUNC or (stype == STT_NOTYPE and plt)):
                found.setdefault(name, ImportEntry(name=name, slot_va=slot_va))
    return sorted(found.values(), key=lambda i: i.name)
