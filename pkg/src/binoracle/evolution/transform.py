"""Distance -> similarity transform, open-interval squeeze and covariate standardization."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


class DegenerateQuantiles(ValueError):
    pass


class NonpositiveTau(ValueError):
    pass


class ZeroVariance(UserWarning):
    """A covariate with zero variance; it is dropped from the design."""


def fit_tau(distances) -> dict:
    """Centre ``m`` at the median and pick tau so the 90th percentile maps to 0.1."""
    d = np.asarray(list(distances), dtype=float)
    if d.size < 10:
        raise DegenerateQuantiles(f"need at least 10 distances, got {d.size}")
    m = float(np.median(d))
    p90 = float(np.percentile(d, 90))
    if not p90 > m:
        raise DegenerateQuantiles(f"p90 ({p90}) does not exceed the median ({m})")
    # s(p90) = 0.1  <=>  exp((p90 - m) / tau) = 9
    return {"m": m, "tau": (p90 - m) / math.log(9.0), "p90": p90}


def transform_distance(d, m: float, tau: float):
    """s = 1 / (1 + exp((d - m) / tau)); scalar in, float out, array in, array out."""
    if not tau > 0:
        raise NonpositiveTau(f"tau must be positive, got {tau}")
    x = (np.asarray(d, dtype=float) - m) / tau
    # logistic written via tanh stays finite for huge |x|
    s = 0.5 * (1.0 - np.tanh(0.5 * x))
    return float(s) if np.ndim(s) == 0 else s


def squeeze(y, n: int):
    """(y (n - 1) + 0.5) / n, pulling [0, 1] responses strictly inside (0, 1)."""
    if n < 2:
        raise ValueError(f"squeeze needs n >= 2, got {n}")
    out = (np.asarray(y, dtype=float) * (n - 1) + 0.5) / n
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class Standardized:
    z: np.ndarray                       # (rows, kept covariates)
    names: list
    means: np.ndarray
    sds: np.ndarray
    dropped: list = field(default_factory=list)     # [(name, reason)]

    def back_transform(self, intercept, slopes):
        """Coefficients on the standardized scale -> original units."""
        slopes = np.asarray(slopes, dtype=float)
        raw = slopes / self.sds
        return float(intercept - np.sum(raw * self.means)), raw

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.means) / self.sds


def standardize(X, names=None) -> Standardized:
    """Column-wise z-scores over the full dataset (population sd)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = list(names) if names is not None else [f"x{j}" for j in range(X.shape[1])]
    if not np.all(np.isfinite(X)):
        raise ValueError("covariates must be finite")
    keep, dropped = [], []
    means, sds = X.mean(axis=0), X.std(axis=0)
    for j, name in enumerate(names):
        if sds[j] > 0 and np.ptp(X[:, j]) > 0:
            keep.append(j)
        else:
            dropped.append((name, "ZeroVariance"))
            warnings.warn(ZeroVariance(f"covariate {name!r} has zero variance; dropped"), stacklevel=2)
    means, sds = means[keep], sds[keep]
    return Standardized((X[:, keep] - means) / sds, [names[j] for j in keep], means, sds, dropped)
