"""Posterior predictive check: observed vs replicated deciles plus an interval coverage table."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .diagnostics import TooFewDraws

DECILES = tuple(round(0.1 * k, 1) for k in range(1, 10))
COVERAGE_LEVELS = (0.5, 0.8, 0.9, 0.95)


class NotConverged(RuntimeError):
    pass


@dataclass
class PpcReport:
    deciles: list           # (q, observed, replicated mean, band lo, band hi, inside)
    coverage: list          # (nominal, empirical fraction of rows inside their predictive interval)
    n_sims: int
    band: float

    @property
    def ok(self) -> bool:
        return all(row[-1] for row in self.deciles)

    def outside(self) -> list:
        return [row[0] for row in self.deciles if not row[-1]]

    def to_text(self) -> str:
        lines = ["quantile\tobserved\treplicated\tlo\thi\tinside"]
        lines += [f"{q:.1f}\t{o:.6f}\t{m:.6f}\t{lo:.6f}\t{hi:.6f}\t{int(ok)}" for q, o, m, lo, hi, ok in self.deciles]
        lines += ["", "nominal\tempirical"]
        lines += [f"{n:.2f}\t{e:.6f}" for n, e in self.coverage]
        return "\n".join(lines)


def predictive_parameters(fit, n_sims: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """(mu, kappa) for ``n_sims`` posterior draws picked uniformly from all chains."""
    data = fit.data
    flat = fit.draws.reshape(-1, fit.draws.shape[-1])
    if flat.shape[0] == 0:
        raise TooFewDraws("fit holds no draws")
    pick = rng.choice(flat.shape[0], size=n_sims, replace=flat.shape[0] < n_sims)
    names = fit.names
    P, J = data.n_projects, data.X.shape[1]
    a0 = names.index(f"alpha[{data.projects[0]}]")
    alpha = flat[pick, a0:a0 + P]
    beta = flat[pick, a0 + P:a0 + P + P * J].reshape(n_sims, P, J)
    kappa = flat[pick, names.index("kappa")]
    p = data.project
    eta = alpha[:, p] + np.einsum("sij,ij->si", beta[:, p, :], data.X)
    return expit(eta), kappa


def replicate(fit, n_sims: int = 200, seed: int = 0) -> np.ndarray:
    """(n_sims, rows) replicated responses."""
    rng = np.random.default_rng(seed)
    mu, kappa = predictive_parameters(fit, n_sims, rng)
    k = kappa[:, None]
    return rng.beta(mu * k, (1 - mu) * k)


def posterior_predictive_check(fit, data=None, n_sims: int = 200, seed: int = 0, rhat_threshold: float = 1.05,
                               band: float = 0.99) -> PpcReport:
    """Compare observed deciles with the spread of replicated-data deciles.

    ``data`` defaults to the dataset the fit was made on; the band is the central ``band`` mass of the
    replicated decile distribution.
    """
    if fit.draws.shape[1] == 0:
        raise NotConverged("fit holds no draws")
    worst = fit.max_global_rhat()
    if not worst <= rhat_threshold:
        raise NotConverged(f"max global R-hat {worst:.4f} exceeds {rhat_threshold}")
    if data is not None and data is not fit.data:
        fit = _refit_view(fit, data)
    y = fit.data.y
    yrep = replicate(fit, n_sims, seed)
    qs = np.array(DECILES)
    obs = np.quantile(y, qs)
    sim = np.quantile(yrep, qs, axis=1)           # (9, n_sims)
    tail = (1 - band) / 2
    lo, hi = np.quantile(sim, tail, axis=1), np.quantile(sim, 1 - tail, axis=1)
    deciles = [(float(q), float(o), float(m), float(a), float(b), bool(a <= o <= b))
               for q, o, m, a, b in zip(qs, obs, sim.mean(axis=1), lo, hi)]
    coverage = []
    for level in COVERAGE_LEVELS:
        t = (1 - level) / 2
        plo, phi = np.quantile(yrep, t, axis=0), np.quantile(yrep, 1 - t, axis=0)
        coverage.append((level, float(np.mean((y >= plo) & (y <= phi)))))
    return PpcReport(deciles, coverage, n_sims, band)


def _refit_view(fit, data):
    """Same draws evaluated against other rows with the same projects and covariates."""
    if list(data.projects) != list(fit.data.projects) or list(data.covariates) != list(fit.data.covariates):
        raise ValueError("data must share the fit's projects and covariates")
    from copy import copy
    view = copy(fit)
    view.data = data
    return view
