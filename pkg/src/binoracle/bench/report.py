"""Per-bucket Hit@1 / Hit@5 table with the pooled Mean Diffs row."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .config import BUCKETS

REFERENCE = "Reference"
MEAN_DIFFS = "Mean Diffs"


@dataclass
class ReportRow:
    name: str
    n: int
    hit1: float | None      # None when the row has no results
    hit5: float | None


def _mean(xs):
    xs = list(xs)
    return sum(xs) / len(xs) if xs else None


def aggregate_report(results, weighted: bool = False) -> list[ReportRow]:
    """Reference row, one row per diff bucket (absent ones kept with n = 0), then Mean Diffs.

    Mean Diffs is the unweighted mean of the present bucket means; ``weighted`` pools every
    bucketed result instead.
    """
    groups: dict = {REFERENCE: []}
    groups.update({b: [] for b in BUCKETS})
    for r in results:
        key = REFERENCE if r.bucket is None else r.bucket
        if key not in groups:
            raise ValueError(f"unknown bucket {r.bucket!r}")
        groups[key].append(r)
    rows = [ReportRow(k, len(v), _mean(r.hit_at[1] for r in v), _mean(r.hit_at[5] for r in v))
            for k, v in groups.items()]
    present = [row for row in rows[1:] if row.n]
    if weighted:
        pooled = [r for b in BUCKETS for r in groups[b]]
        rows.append(ReportRow(MEAN_DIFFS, len(pooled), _mean(r.hit_at[1] for r in pooled),
                              _mean(r.hit_at[5] for r in pooled)))
    else:
        rows.append(ReportRow(MEAN_DIFFS, sum(r.n for r in present), _mean(r.hit1 for r in present),
                              _mean(r.hit5 for r in present)))
    return rows


def report_tsv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(["row", "n", "hit@1", "hit@5"])
    for r in rows:
        w.writerow([r.name, r.n, "-" if r.hit1 is None else f"{r.hit1:.4f}", "-" if r.hit5 is None else f"{r.hit5:.4f}"])
    return buf.getvalue()
