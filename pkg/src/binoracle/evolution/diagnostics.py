"""Split R-hat and highest-density intervals."""
from __future__ import annotations

import math

import numpy as np


class TooFewDraws(ValueError):
    pass


class DegenerateVariance(ValueError):
    """Within-chain variance is zero, so R-hat is undefined."""


def split_chains(chains) -> np.ndarray:
    """(m, n, ...) -> (2m, n // 2, ...); the middle draw of odd-length chains is dropped."""
    c = np.asarray(chains, dtype=float)
    half = c.shape[1] // 2
    return np.concatenate([c[:, :half], c[:, c.shape[1] - half:]], axis=0)


def rhat(chains) -> np.ndarray | float:
    """Split-chain Gelman-Rubin: sqrt(((n-1)/n W + B/n) / W), n = draws per half.

    ``chains`` is (chains, draws) or (chains, draws, params).
    """
    c = np.asarray(chains, dtype=float)
    if c.ndim < 2 or c.shape[0] < 2:
        raise TooFewDraws("need at least two chains")
    if c.shape[1] < 4:
        raise TooFewDraws(f"need at least 4 draws per chain, got {c.shape[1]}")
    s = split_chains(c)
    n = s.shape[1]
    W = s.var(axis=1, ddof=1).mean(axis=0)
    B = n * s.mean(axis=1).var(axis=0, ddof=1)
    if np.any(W <= 0):
        raise DegenerateVariance("zero within-chain variance")
    r = np.sqrt(((n - 1) / n * W + B / n) / W)
    return float(r) if np.ndim(r) == 0 else r


def hdi(draws, mass: float = 0.95) -> tuple[float, float]:
    """Narrowest interval over the sorted draws holding ceil(mass * n) of them."""
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    n = x.size
    if n < 20:
        raise TooFewDraws(f"need at least 20 draws, got {n}")
    if not 0 < mass <= 1:
        raise ValueError("mass must be in (0, 1]")
    k = min(n, math.ceil(mass * n - 1e-9))
    widths = x[k - 1:] - x[:n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])
