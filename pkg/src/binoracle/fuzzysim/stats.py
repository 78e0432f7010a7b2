"""Package-level similarity statistics over fuzzy digests."""
from __future__ import annotations

import csv
import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from ..container import load_binary
from .digest import FuzzyDigest, digest

THRESHOLD = 100


class EmptySet(ValueError):
    pass


class DegenerateVariance(ValueError):
    pass


def threshold_fraction(distances, t: int = THRESHOLD) -> float:
    d = np.asarray(list(distances), dtype=float)
    if d.size == 0:
        raise EmptySet("no pairs")
    return float(np.mean(d <= t))


def cohens_d(intra, inter) -> float:
    a = np.asarray(list(intra), dtype=float)
    b = np.asarray(list(inter), dtype=float)
    if a.size < 2 or b.size < 2:
        raise DegenerateVariance("need at least two scores on each side")
    pooled = ((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2)
    if not pooled > 0:
        raise DegenerateVariance("pooled standard deviation is zero")
    return float((a.mean() - b.mean()) / np.sqrt(pooled))


def _arrays(digests):
    ds = [FuzzyDigest.from_hex(d) if isinstance(d, str) else d for d in digests]
    codes = np.array([d.codes for d in ds], dtype=np.int16).reshape(len(ds), -1)
    head = np.array([[d.lvalue, d.q1ratio, d.q2ratio, d.checksum] for d in ds], dtype=np.int16).reshape(len(ds), 4)
    return codes, head


def _mod(d, r):
    d = np.abs(d)
    return np.minimum(d, r - d)


def distance_matrix(xs, ys=None) -> np.ndarray:
    """All-pairs TLSH distance (with length term); same value as digest.distance pairwise."""
    cx, hx = _arrays(xs)
    cy, hy = (cx, hx) if ys is None else _arrays(ys)
    ld = _mod(hx[:, None, 0] - hy[None, :, 0], 256)
    out = np.where(ld <= 1, ld, ld * 12).astype(np.int64)
    for k in (1, 2):
        qd = _mod(hx[:, None, k] - hy[None, :, k], 16)
        out += np.where(qd <= 1, qd, (qd - 1) * 12)
    out += hx[:, None, 3] != hy[None, :, 3]
    for i in range(cx.shape[0]):        # row at a time keeps memory at n * 128
        d = np.abs(cx[i][None, :] - cy)
        out[i] += np.where(d == 3, 6, d).sum(axis=1)
    return out


@dataclass
class PairStats:
    matrix: dict                    # (pkgA, pkgB) -> fraction of pairs within threshold, or None
    intra_mean: float
    inter_mean: float
    cohens_d: float | None
    intra_scores: list = field(repr=False, default_factory=list)
    inter_scores: list = field(repr=False, default_factory=list)

    def packages(self) -> list[str]:
        return sorted({a for a, _ in self.matrix})


def package_mean_matrix(corpus: dict, t: int = THRESHOLD) -> PairStats:
    """Cell (A, B): fraction of cross pairs with distance <= t; the diagonal skips self-pairs.

    Intra/inter means and Cohen's d are pair-level (every pair weighs the same).
    """
    names = sorted(corpus)
    if len(names) < 2:
        raise EmptySet("need at least two packages")
    groups = {p: list(corpus[p]) for p in names}
    matrix, intra, inter = {}, [], []
    for a, b in itertools.combinations_with_replacement(names, 2):
        ga, gb = groups[a], groups[b]
        if a == b:
            if len(ga) < 2:
                matrix[(a, a)] = None       # insufficient data, not zero
                continue
            dm = distance_matrix(ga)
            iu = np.triu_indices(len(ga), 1)
            scores = (dm[iu] <= t).astype(float)
            intra.extend(scores.tolist())
        else:
            if not ga or not gb:
                matrix[(a, b)] = matrix[(b, a)] = None
                continue
            scores = (distance_matrix(ga, gb) <= t).astype(float).ravel()
            inter.extend(scores.tolist())
        cell = float(scores.mean())
        matrix[(a, b)] = matrix[(b, a)] = cell
    if not intra or not inter:
        raise EmptySet("no intra-package or no inter-package pairs")
    try:
        d = cohens_d(intra, inter)
    except DegenerateVariance:
        d = None
    return PairStats(matrix, float(np.mean(intra)), float(np.mean(inter)), d, intra, inter)


def file_digest(path: str | os.PathLike, sections: bool = False) -> FuzzyDigest:
    """Digest of the whole file, or of its executable section bytes concatenated in VA order."""
    if not sections:
        with open(path, "rb") as fh:
            return digest(fh.read())
    img = load_binary(path)
    return digest(b"".join(s.data for s in sorted(img.executable_sections(), key=lambda s: s.va)))


MANIFEST_COLUMNS = ("package", "version", "build_id", "path", "digest")


def read_manifest(path) -> list[dict]:
    """Tab-separated corpus manifest; ``digest`` may be blank (computed on demand)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    for r in rows:
        missing = [c for c in MANIFEST_COLUMNS[:4] if not r.get(c)]
        if missing:
            raise ValueError(f"manifest row missing {missing}: {r}")
        r["digest"] = r.get("digest") or None
    return rows


def write_manifest(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MANIFEST_COLUMNS, delimiter="\t", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: (r.get(c) or "") for c in MANIFEST_COLUMNS})


def corpus_from_manifest(rows, base_dir=None, sections: bool = False) -> dict:
    corpus: dict[str, list] = {}
    for r in rows:
        dg = r.get("digest")
        if not dg:
            p = r["path"] if base_dir is None else os.path.join(base_dir, r["path"])
            dg = file_digest(p, sections).hex()
        corpus.setdefault(r["package"], []).append(dg)
    return corpus


def synthetic_corpus(n_packages: int = 5, n_variants: int = 6, size: int = 4096, flips: int = 96,
                     seed: int = 0) -> dict:
    """Packages of near-duplicate byte blobs: one random base each, variants overwrite ~``flips`` bytes.

    Bases are independent, so cross-package pairs behave like unrelated files. Flip counts vary
    per variant (half to 1.5x ``flips``) to give the intra distances some spread.
    """
    rng = np.random.default_rng(seed)
    corpus = {}
    for p in range(n_packages):
        base = rng.integers(0, 256, size, dtype=np.uint8)
        members = []
        for _ in range(n_variants):
            v = base.copy()
            k = int(rng.integers(flips // 2, flips + flips // 2 + 1))
            idx = rng.choice(size, k, replace=False)
            v[idx] = rng.integers(0, 256, k, dtype=np.uint8)
            members.append(v.tobytes())
        corpus[f"pkg{p:02d}"] = members
    return corpus
