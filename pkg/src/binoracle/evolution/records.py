"""Observation files in, fit reports and draws files out."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .model import Dataset, make_dataset
from .transform import Standardized, fit_tau, squeeze, standardize, transform_distance

COVARIATES = ("days", "commits", "changed_file_fraction")


@dataclass
class Observations:
    project: list
    response: np.ndarray
    kind: str                   # "y" or "distance"
    covariates: np.ndarray      # (rows, 3) in COVARIATES order


def read_observations(path, delimiter: str | None = None) -> Observations:
    """Delimited text with a header: project, y or distance, days, commits, changed_file_fraction."""
    with open(path, newline="") as fh:
        text = fh.read()
    if delimiter is None:
        delimiter = "\t" if "\t" in text.split("\n", 1)[0] else ","
    rows = list(csv.DictReader(text.splitlines(), delimiter=delimiter))
    if not rows:
        raise ValueError(f"{path}: no observations")
    cols = set(rows[0])
    kinds = [k for k in ("y", "distance") if k in cols]
    if len(kinds) != 1:
        raise ValueError(f"{path}: need exactly one of the columns y / distance")
    missing = [c for c in ("project",) + COVARIATES if c not in cols]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    kind = kinds[0]
    resp = np.array([float(r[kind]) for r in rows])
    X = np.array([[float(r[c]) for c in COVARIATES] for r in rows])
    for i, r in enumerate(rows):
        if float(r["days"]) < 0 or float(r["commits"]) < 0 or float(r["changed_file_fraction"]) < 0:
            raise ValueError(f"{path}: row {i + 1} has a negative covariate")
        if float(r["commits"]) != int(float(r["commits"])):
            raise ValueError(f"{path}: row {i + 1} commits is not an integer")
    return Observations([r["project"] for r in rows], resp, kind, X)


def write_observations(path, project, response, covariates, kind: str = "y") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["project", kind, *COVARIATES])
        for p, r, x in zip(project, response, covariates):
            w.writerow([p, repr(float(r)), *(repr(float(v)) for v in x)])


@dataclass
class Prepared:
    data: Dataset
    standardization: Standardized
    calibration: dict | None        # {m, tau, p90} when the response was a distance


def prepare(obs: Observations) -> Prepared:
    """Distance -> similarity if needed, squeeze into (0, 1), standardize covariates."""
    calib = None
    y = obs.response
    if obs.kind == "distance":
        calib = fit_tau(y)
        y = transform_distance(y, calib["m"], calib["tau"])
    y = squeeze(np.clip(y, 0.0, 1.0), len(y))
    std = standardize(obs.covariates, COVARIATES)
    return Prepared(make_dataset(y, std.z, obs.project, std.names), std, calib)


def fit_report(fit, prepared: Prepared | None = None) -> dict:
    params = [{"name": n, "mean": p.mean, "hdi_lo": p.hdi_lo, "hdi_hi": p.hdi_hi, "rhat": p.rhat}
              for n, p in fit.params.items()]
    rep = {"config": fit.config_echo(), "globals": list(fit.globals), "max_global_rhat": fit.max_global_rhat(),
           "acceptance": fit.acceptance, "parameters": params}
    if prepared is not None:
        std = prepared.standardization
        rep["standardization"] = {"names": std.names, "means": std.means.tolist(), "sds": std.sds.tolist(),
                                  "dropped": std.dropped}
        a, b = std.back_transform(fit.params["alpha_g"].mean,
                                  [fit.params[f"beta_g[{c}]"].mean for c in std.names])
        rep["unstandardized_global"] = {"intercept": a, **{c: float(v) for c, v in zip(std.names, b)}}
        rep["calibration"] = prepared.calibration
    return rep


def write_fit_report(fit, path, prepared: Prepared | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(fit_report(fit, prepared), fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_draws(fit, path) -> None:
    """One row per (chain, draw), one column per parameter."""
    c, n, k = fit.draws.shape
    idx = np.stack(np.meshgrid(np.arange(c), np.arange(n), indexing="ij"), axis=-1).reshape(-1, 2)
    table = np.column_stack([idx, fit.draws.reshape(-1, k)])
    header = "\t".join(["chain", "draw", *fit.names])
    fmt = ["%d", "%d"] + ["%.17g"] * k
    np.savetxt(path, table, fmt=fmt, delimiter="\t", header=header, comments="")


def read_draws(path) -> tuple[list, np.ndarray]:
    with open(path) as fh:
        names = fh.readline().rstrip("\n").split("\t")[2:]
    table = np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
    chains = int(table[:, 0].max()) + 1 if table.size else 0
    draws = table[:, 2:].reshape(chains, -1, len(names))
    return names, draws
