"""TLSH-compatible fuzzy digest (128 buckets, 1-byte checksum, "T1" hex form)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_LENGTH = 50
BUCKETS = 128
VERSION = "T1"
HEX_LEN = len(VERSION) + 70

# Pearson permutation used by the bucket mapping
_V = bytes((
    1, 87, 49, 12, 176, 178, 102, 166, 121, 193, 6, 84, 249, 230, 44, 163,
    14, 197, 213, 181, 161, 85, 218, 80, 64, 239, 24, 226, 236, 142, 38, 200,
    110, 177, 104, 103, 141, 253, 255, 50, 77, 101, 81, 18, 45, 96, 31, 222,
    25, 107, 190, 70, 86, 237, 240, 34, 72, 242, 20, 214, 244, 227, 149, 235,
    97, 234, 57, 22, 60, 250, 82, 175, 208, 5, 127, 199, 111, 62, 135, 248,
    174, 169, 211, 58, 66, 154, 106, 195, 245, 171, 17, 187, 182, 179, 0, 243,
    132, 56, 148, 75, 128, 133, 158, 100, 130, 126, 91, 13, 153, 246, 216, 219,
    119, 68, 223, 78, 83, 88, 201, 99, 122, 11, 92, 32, 136, 114, 52, 10,
    138, 30, 48, 183, 156, 35, 61, 26, 143, 74, 251, 94, 129, 162, 63, 152,
    170, 7, 115, 167, 241, 206, 3, 150, 55, 59, 151, 220, 90, 53, 23, 131,
    125, 173, 15, 238, 79, 95, 89, 16, 105, 137, 225, 224, 217, 160, 37, 123,
    118, 73, 2, 157, 46, 116, 9, 145, 134, 228, 207, 212, 202, 215, 69, 229,
    27, 188, 67, 124, 168, 252, 42, 4, 29, 108, 21, 247, 19, 205, 39, 203,
    233, 40, 186, 147, 198, 192, 155, 33, 164, 191, 98, 204, 165, 180, 117, 76,
    140, 36, 210, 172, 41, 54, 159, 8, 185, 232, 113, 196, 231, 47, 146, 120,
    51, 65, 28, 144, 254, 221, 93, 189, 194, 139, 112, 43, 71, 109, 184, 209,
))
_VT = np.frombuffer(_V, dtype=np.uint8)

# (salt, window offsets) for the six trigrams drawn from each 5-byte window
_TRIGRAMS = ((2, 1, 2), (3, 1, 3), (5, 2, 3), (7, 2, 4), (11, 1, 4), (13, 3, 4))


class DigestError(ValueError):
    pass


class InputTooSmall(DigestError):
    pass


class DegenerateInput(DigestError):
    pass


class VersionMismatch(DigestError):
    pass


def _lvalue(n: int) -> int:
    # log-scale length bucket; float32 logs as in the reference
    lg = float(np.log(np.float32(n)))
    if n <= 656:
        i = math.floor(lg / 0.4054651)
    elif n <= 3199:
        i = math.floor(lg / 0.26236426 - 8.72777)
    else:
        i = math.floor(lg / 0.095310180 - 62.5472)
    return i & 0xFF


def _swap(b: int) -> int:
    return ((b & 0x0F) << 4) | (b >> 4)


@dataclass(frozen=True)
class FuzzyDigest:
    checksum: int
    lvalue: int
    q1ratio: int
    q2ratio: int
    codes: tuple            # 128 two-bit codes, bucket order
    version: str = VERSION

    def hex(self) -> str:
        body = bytearray([_swap(self.checksum), _swap(self.lvalue), _swap(self.q1ratio | (self.q2ratio << 4))])
        packed = [sum(self.codes[4 * i + j] << (2 * j) for j in range(4)) for i in range(BUCKETS // 4)]
        body.extend(reversed(packed))
        return self.version + body.hex().upper()

    __str__ = hex

    @classmethod
    def from_hex(cls, text: str) -> "FuzzyDigest":
        text = text.strip()
        if len(text) != HEX_LEN or not text.startswith(VERSION):
            raise VersionMismatch(f"not a {VERSION} digest: {text!r}")
        raw = bytes.fromhex(text[len(VERSION):])
        q = _swap(raw[2])
        packed = list(reversed(raw[3:]))
        codes = tuple((packed[i // 4] >> (2 * (i % 4))) & 3 for i in range(BUCKETS))
        return cls(_swap(raw[0]), _swap(raw[1]), q & 0x0F, q >> 4, codes)


def bucket_counts(data: bytes) -> tuple[np.ndarray, int]:
    """Trigram bucket histogram (256 slots) and the rolling checksum byte."""
    a = np.frombuffer(bytes(data), dtype=np.uint8)
    counts = np.zeros(256, dtype=np.int64)
    if len(a) < 5:
        return counts, 0
    win = [a[4 - k:len(a) - k] for k in range(5)]     # win[k][i] = byte at position i+4-k
    for salt, x, y in _TRIGRAMS:
        h = _VT[_VT[_VT[_VT[salt] ^ win[0]] ^ win[x]] ^ win[y]]
        counts += np.bincount(h, minlength=256)
    # the checksum chains through itself, so it stays a scalar loop
    chk = 0
    v, c0, c1 = _V, a[4:].tobytes(), a[3:-1].tobytes()
    for p, q in zip(c0, c1):
        chk = v[v[v[v[0] ^ p] ^ q] ^ chk]
    return counts, chk


def digest(data: bytes) -> FuzzyDigest:
    data = bytes(data)
    if len(data) < MIN_LENGTH:
        raise InputTooSmall(f"need at least {MIN_LENGTH} bytes, got {len(data)}")
    counts, chk = bucket_counts(data)
    eff = counts[:BUCKETS]
    srt = np.sort(eff)
    q1, q2, q3 = int(srt[31]), int(srt[63]), int(srt[95])
    if np.count_nonzero(eff) <= BUCKETS // 2 or q3 == 0:
        raise DegenerateInput("too few populated buckets (input has too little variety)")
    codes = tuple(int(3 if k > q3 else 2 if k > q2 else 1 if k > q1 else 0) for k in eff)
    q1r = int(np.float32(q1 * 100) / np.float32(q3)) % 16
    q2r = int(np.float32(q2 * 100) / np.float32(q3)) % 16
    return FuzzyDigest(chk, _lvalue(len(data)), q1r, q2r, codes)


def _mod_diff(x: int, y: int, r: int) -> int:
    d = abs(x - y)
    return min(d, r - d)


def distance(a: FuzzyDigest | str, b: FuzzyDigest | str, length: bool = True) -> int:
    a = FuzzyDigest.from_hex(a) if isinstance(a, str) else a
    b = FuzzyDigest.from_hex(b) if isinstance(b, str) else b
    if a.version != b.version:
        raise VersionMismatch(f"{a.version} vs {b.version}")
    diff = 0
    if length:
        ld = _mod_diff(a.lvalue, b.lvalue, 256)
        diff += ld if ld <= 1 else ld * 12
    for qa, qb in ((a.q1ratio, b.q1ratio), (a.q2ratio, b.q2ratio)):
        qd = _mod_diff(qa, qb, 16)
        diff += qd if qd <= 1 else (qd - 1) * 12
    if a.checksum != b.checksum:
        diff += 1
    ca = np.asarray(a.codes, dtype=np.int16)
    cb = np.asarray(b.codes, dtype=np.int16)
    d = np.abs(ca - cb)
    diff += int(np.where(d == 3, 6, d).sum())
    return diff
