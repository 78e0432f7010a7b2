#!/usr/bin/env python3
"""Rebuild the fixture corpus from fixtures/src with GNU as/ld.

ELF fixtures are linked by ld directly. PE fixtures are assembled as flat code
at their final addresses and wrapped in a PE32+ image written here, so import
and export directories are exactly what this script lays out.

    python fixtures/build_fixtures.py        # rewrites fixtures/bin + MANIFEST.tsv
"""
from __future__ import annotations

import hashlib
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

HERE = Path(__file__).resolve().parent
SRC = HERE / "src"
BIN = HERE / "bin"

# name -> (source, link mode)
ELF_FIXTURES = {
    "single_ret_elf": ("single_ret.s", "static-stripped"),
    "tiny_elf_x64": ("tiny.s", "static-stripped"),
    "diamond_elf": ("diamond.s", "static-stripped"),
    "loop_elf": ("loops.s", "static-stripped"),
    "dyn_imports_elf": ("dynimports.s", "dynamic-stripped"),
    "symbols_elf": ("symbols.s", "static"),
    "callchain_elf": ("callchain.s", "static-stripped"),
    "tailcall_elf": ("tailcall.s", "static-stripped"),
    "arith_elf": ("arith.s", "static-stripped"),
    "invalid_elf": ("invalid.s", "static-stripped"),
    "nosht_elf": ("nosht.s", "no-section-headers"),
}

PE_FIXTURES = {
    "tiny_pe_x64": dict(
        source="tiny_pe.s",
        imports={"msvcrt.dll": ["malloc", "memcpy"]},
        strings={"hello": b"hello!", "xpm": b"xpm_load_image"},
        data={},
        exports=["ExportA", "ExportB"],
    ),
    "diamond_pe": dict(
        source="diamond_pe.s",
        imports={"KERNEL32.dll": ["ExitProcess"]},
        strings={"banner": b"diamond fixture"},
        data={"global": 8},
        exports=[],
    ),
    "strings_pe": dict(
        source="strings_pe.s",
        imports={"msvcrt.dll": ["printf", "strcpy", "strlen"]},
        strings={"XPM": b"XPM_LoadImage", "err": b"error: overflow in %s",
                 "ver": b"Version 1.2.3"},
        data={"buf": 64},
        exports=[],
    ),
    "noimport_pe": dict(
        source="noimport_pe.s",
        imports={},
        strings={},
        data={},
        exports=["Square"],
    ),
}

IMAGE_BASE = 0x140000000
TEXT_RVA, RDATA_RVA, DATA_RVA = 0x1000, 0x2000, 0x3000
FILE_ALIGN, SECT_ALIGN = 0x200, 0x1000


def run(*cmd):
    subprocess.run(cmd, check=True)


def align(n, a):
    return (n + a - 1) // a * a


def build_elf(name, source, mode, tmp: Path) -> bytes:
    obj = tmp / f"{name}.o"
    out = tmp / name
    run("as", "--64", "-o", str(obj), str(SRC / source))
    cmd = ["ld", "-o", str(out), "-e", "_start", "--build-id=none"]
    if mode.startswith("dynamic"):
        cmd += ["-dynamic-linker", "/lib64/ld-linux-x86-64.so.2", str(obj), "-lc"]
    else:
        cmd += ["-static", str(obj)]
    if mode.endswith("stripped") or mode == "no-section-headers":
        cmd.append("-s")
    run(*cmd)
    data = bytearray(out.read_bytes())
    if mode == "no-section-headers":
        shoff, = struct.unpack_from("<Q", data, 0x28)
        struct.pack_into("<Q", data, 0x28, 0)
        struct.pack_into("<HHH", data, 0x3A, 0, 0, 0)
        del data[shoff:]
    return bytes(data)


def _elf_symbols(path: Path) -> dict[str, int]:
    from elftools.elf.elffile import ELFFile
    with open(path, "rb") as fh:
        elf = ELFFile(fh)
        text = elf.get_section_by_name(".text")
        syms = {s.name: s["st_value"] for s in elf.get_section_by_name(".symtab").iter_symbols() if s.name}
        return syms, text.data()


def build_pe(name, spec, tmp: Path) -> bytes:
    rdata = bytearray()
    defsyms = {}

    def put(blob: bytes, al=1) -> int:
        while len(rdata) % al:
            rdata.append(0)
        off = len(rdata)
        rdata.extend(blob)
        return RDATA_RVA + off

    for label, text in spec["strings"].items():
        defsyms[f"STR_{label}"] = IMAGE_BASE + put(text + b"\0")

    # import address tables first so every slot address is fixed before code is assembled
    iat_rva = {}
    for dll, names in spec["imports"].items():
        iat_rva[dll] = put(b"\0" * 8 * (len(names) + 1), 8)
        for k, fn in enumerate(names):
            defsyms[f"IAT_{fn}"] = IMAGE_BASE + iat_rva[dll] + 8 * k
    idir_rva = idir_size = 0
    iat_dir_rva = min(iat_rva.values()) if iat_rva else 0
    iat_dir_size = 0
    if spec["imports"]:
        hint_rva = {}
        for dll, names in spec["imports"].items():
            for fn in names:
                hint_rva[fn] = put(struct.pack("<H", 0) + fn.encode() + b"\0", 2)
        ilt_rva, name_rva = {}, {}
        for dll, names in spec["imports"].items():
            ilt_rva[dll] = put(b"".join(struct.pack("<Q", hint_rva[f]) for f in names) + b"\0" * 8, 8)
            name_rva[dll] = put(dll.encode() + b"\0")
        for dll, names in spec["imports"].items():
            off = iat_rva[dll] - RDATA_RVA
            rdata[off:off + 8 * len(names)] = b"".join(struct.pack("<Q", hint_rva[f]) for f in names)
        descs = b"".join(struct.pack("<IIIII", ilt_rva[d], 0, 0, name_rva[d], iat_rva[d])
                         for d in spec["imports"]) + b"\0" * 20
        idir_rva = put(descs, 4)
        idir_size = len(descs)
        iat_dir_size = sum(8 * (len(n) + 1) for n in spec["imports"].values())

    data_off = 0
    for label, size in spec["data"].items():
        defsyms[f"DATA_{label}"] = IMAGE_BASE + DATA_RVA + data_off
        data_off = align(data_off + size, 8)

    obj, out = tmp / f"{name}.o", tmp / f"{name}.elf"
    run("as", "--64", "-o", str(obj), str(SRC / spec["source"]))
    cmd = ["ld", "-o", str(out), f"-Ttext={IMAGE_BASE + TEXT_RVA:#x}", "-e", "start", "--build-id=none",
           "-z", "noseparate-code"]
    for k, v in defsyms.items():
        cmd += ["--defsym", f"{k}={v:#x}"]
    run(*cmd, str(obj))
    syms, text = _elf_symbols(out)

    edir_rva = edir_size = 0
    if spec["exports"]:
        dll_name = put(f"{name}.dll".encode() + b"\0")
        exports = sorted(spec["exports"])
        funcs = put(b"".join(struct.pack("<I", syms[e] - IMAGE_BASE) for e in exports), 4)
        name_ptrs = [put(e.encode() + b"\0") for e in exports]
        names = put(b"".join(struct.pack("<I", p) for p in name_ptrs), 4)
        ords = put(b"".join(struct.pack("<H", k) for k in range(len(exports))), 2)
        edir = struct.pack("<IIHHIIIIIII", 0, 0, 0, 0, dll_name, 1, len(exports), len(exports),
                           funcs, names, ords)
        edir_rva = put(edir, 4)
        edir_size = len(edir)

    sections = [(b".text", TEXT_RVA, bytes(text), 0x60000020)]
    if rdata:
        sections.append((b".rdata", RDATA_RVA, bytes(rdata), 0x40000040))
    if spec["data"]:
        sections.append((b".data", DATA_RVA, b"\0" * max(data_off, 8), 0xC0000040))

    headers_size = FILE_ALIGN * 2
    raw_off = headers_size
    table = b""
    body = b""
    for sname, rva, blob, chars in sections:
        raw_size = align(len(blob), FILE_ALIGN)
        table += struct.pack("<8sIIIIIIHHI", sname, len(blob), rva, raw_size, raw_off, 0, 0, 0, 0, chars)
        body += blob.ljust(raw_size, b"\0")
        raw_off += raw_size
    image_size = align(sections[-1][1] + len(sections[-1][2]), SECT_ALIGN)

    dirs = [(0, 0)] * 16
    dirs[0] = (edir_rva, edir_size)
    dirs[1] = (idir_rva, idir_size)
    dirs[12] = (iat_dir_rva, iat_dir_size)
    opt = struct.pack("<HBBIIIII", 0x20B, 2, 38, len(sections[0][2]), 0, 0,
                      syms["start"] - IMAGE_BASE, TEXT_RVA)
    opt += struct.pack("<QIIHHHHHHIIIIHHQQQQII", IMAGE_BASE, SECT_ALIGN, FILE_ALIGN, 6, 0, 0, 0, 6, 0, 0,
                       image_size, headers_size, 0, 3, 0x8160, 0x100000, 0x1000, 0x100000, 0x1000, 0, 16)
    opt += b"".join(struct.pack("<II", *d) for d in dirs)
    characteristics = 0x22 | (0x2000 if spec["exports"] else 0)
    coff = struct.pack("<HHIIIHH", 0x8664, len(sections), 0, 0, 0, len(opt), characteristics)
    dos = bytearray(64)
    dos[0:2] = b"MZ"
    struct.pack_into("<I", dos, 0x3C, 64)
    header = bytes(dos) + b"PE\0\0" + coff + opt + table
    assert len(header) <= headers_size
    return header.ljust(headers_size, b"\0") + body


def main(argv=None):
    BIN.mkdir(exist_ok=True)
    rows = []
    with tempfile.TemporaryDirectory() as td:
        tmp = Path(td)
        for name, (source, mode) in ELF_FIXTURES.items():
            blob = build_elf(name, source, mode, tmp)
            (BIN / name).write_bytes(blob)
            rows.append((name, "ELF", hashlib.sha256(blob).hexdigest(), source))
        for name, spec in PE_FIXTURES.items():
            blob = build_pe(name, spec, tmp)
            (BIN / name).write_bytes(blob)
            rows.append((name, "PE", hashlib.sha256(blob).hexdigest(), spec["source"]))
    with open(HERE / "MANIFEST.tsv", "w") as fh:
        fh.write("name\tformat\tsha256\tsource\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")
    print(f"wrote {len(rows)} fixtures to {BIN}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
