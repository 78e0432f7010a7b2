"""Hierarchical Beta regression with a logit link, sampled by adaptive random-walk Metropolis.

    y_i ~ Beta(mu_i kappa, (1 - mu_i) kappa)
    logit(mu_i) = alpha_p + sum_j beta_pj x_ij          (p = project of row i)
    alpha_p = alpha_g + sigma_alpha * za_p,  beta_pj = beta_gj + sigma_j * zb_pj,  z ~ N(0, 1)

Per-project deviations are non-centered.  Besides the single-site moves, every sweep makes
"centered" moves that shift or rescale a global parameter while holding the project-level
coefficients fixed (compensating the z's); those only touch the prior and cure the slow
mixing of non-centered hierarchies when each project carries plenty of data.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit, gammaln

from .diagnostics import DegenerateVariance, TooFewDraws, hdi, rhat


class NonFiniteLikelihood(ValueError):
    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class ChainCountTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    alpha_scale: float = 1.0        # alpha_g ~ Normal(0, alpha_scale)
    beta_scale: float = 1.0         # beta_gj ~ Normal(0, beta_scale)
    sigma_scale: float = 1.0        # sigma_alpha, sigma_j ~ HalfNormal(sigma_scale)
    kappa_scale: float = 100.0      # kappa ~ HalfNormal(kappa_scale)
    link: str = "logit"
    # pin whole parameter groups: alpha_g, beta_g (sequence), sigma_alpha, sigma_beta (sequence), kappa
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.link != "logit":
            raise ValueError(f"unsupported link {self.link!r}")
        bad = set(self.fixed) - {"alpha_g", "beta_g", "sigma_alpha", "sigma_beta", "kappa"}
        if bad:
            raise ValueError(f"cannot fix {sorted(bad)}")
        if "kappa" in self.fixed and not self.fixed["kappa"] > 0:
            raise ValueError("kappa must be positive")


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    warmup: int = 1000
    draws: int = 2000
    seed: int = 0
    target_accept: float = 0.3
    adapt_every: int = 25
    same_seed: bool = False     # every chain gets the master seed (degenerate, for testing)
    debug: bool = False         # assert mu in (0, 1) and kappa > 0 on every accepted state


@dataclass
class Dataset:
    y: np.ndarray               # (n,) in (0, 1)
    X: np.ndarray               # (n, J) standardized covariates
    project: np.ndarray         # (n,) project index
    projects: list
    covariates: list

    @property
    def n_projects(self) -> int:
        return len(self.projects)

    def check(self):
        y, X = self.y, self.X
        if X.shape[0] != y.size or self.project.size != y.size:
            raise ValueError("y, X and project lengths differ")
        for i in range(y.size):
            if not (np.isfinite(y[i]) and 0 < y[i] < 1):
                raise NonFiniteLikelihood(i, f"response {y[i]!r} is not strictly inside (0, 1)")
            if not np.all(np.isfinite(X[i])):
                raise NonFiniteLikelihood(i, f"non-finite covariate in {X[i].tolist()}")


def make_dataset(y, X, project, covariates=None) -> Dataset:
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float).reshape(y.size, -1)
    names, idx = np.unique(np.asarray([str(p) for p in project]), return_inverse=True)
    covariates = list(covariates) if covariates is not None else [f"x{j}" for j in range(X.shape[1])]
    return Dataset(y, X, idx.astype(np.int64), names.tolist(), covariates)


def _half_normal(x, s):
    return -0.5 * (x / s) ** 2


def _normal(x, s):
    return -0.5 * (x / s) ** 2


class _Chain:
    """State, cached linear predictor and per-move adaptive scales of one chain."""

    def __init__(self, data: Dataset, spec: ModelSpec, cfg: SamplerConfig, rng: np.random.Generator):
        self.d, self.spec, self.cfg, self.rng = data, spec, cfg, rng
        P, J = data.n_projects, data.X.shape[1]
        self.P, self.J = P, J
        self.ly, self.l1y = np.log(data.y), np.log1p(-data.y)
        fx = spec.fixed
        self.free = {k: k not in fx for k in ("alpha_g", "beta_g", "sigma_alpha", "sigma_beta", "kappa")}
        # overdispersed start
        self.ag = float(fx.get("alpha_g", rng.normal(0, 1)))
        self.bg = np.asarray(fx["beta_g"], float).copy() if "beta_g" in fx else rng.normal(0, 1, J)
        self.sa = float(fx.get("sigma_alpha", np.exp(rng.normal(np.log(0.5), 0.5))))
        self.sb = (np.asarray(fx["sigma_beta"], float).copy() if "sigma_beta" in fx
                   else np.exp(rng.normal(np.log(0.5), 0.5, J)))
        self.k = float(fx.get("kappa", np.exp(rng.normal(np.log(10.0), 0.5))))
        self.za = rng.normal(0, 1, P)
        self.zb = rng.normal(0, 1, (P, J))
        if self.bg.shape != (J,) or self.sb.shape != (J,):
            raise ValueError("fixed beta_g / sigma_beta must have one entry per covariate")
        # move name -> log proposal scale
        self.log_scale = {"ag": np.log(0.1), "ag_c": np.log(0.3), "sa": np.log(0.2), "sa_c": np.log(0.2),
                          "k": np.log(0.2), "bg": np.full(J, np.log(0.1)), "bg_c": np.full(J, np.log(0.3)),
                          "sb": np.full(J, np.log(0.2)), "sb_c": np.full(J, np.log(0.2)),
                          "za": np.full(P, np.log(0.5)), "zb": np.full((P, J), np.log(0.5))}
        self.acc = {k: np.zeros_like(v, dtype=float) for k, v in self.log_scale.items()}
        self.tries = {k: np.zeros_like(v, dtype=float) for k, v in self.log_scale.items()}
        self.eta = self._eta()
        self.ll = self._rows(self.eta, self.k)

    # -- likelihood pieces
    def _eta(self, ag=None, bg=None, sa=None, sb=None, za=None, zb=None):
        ag = self.ag if ag is None else ag
        bg = self.bg if bg is None else bg
        sa = self.sa if sa is None else sa
        sb = self.sb if sb is None else sb
        za = self.za if za is None else za
        zb = self.zb if zb is None else zb
        p = self.d.project
        alpha = ag + sa * za
        beta = bg + sb * zb
        return alpha[p] + np.einsum("ij,ij->i", beta[p], self.d.X)

    def _rows(self, eta, k):
        mu = expit(eta)
        a, b = mu * k, (1.0 - mu) * k
        with np.errstate(all="ignore"):
            ll = gammaln(k) - gammaln(a) - gammaln(b) + (a - 1) * self.ly + (b - 1) * self.l1y
        return np.where(np.isfinite(ll), ll, -np.inf)

    def first_bad_row(self) -> int | None:
        bad = np.flatnonzero(~np.isfinite(self.ll))
        return int(bad[0]) if bad.size else None

    # -- priors on the sampling coordinates (log scale for sigma / kappa, so + log x Jacobian)
    def _lp_scale(self, s):
        return _half_normal(s, self.spec.sigma_scale) + np.log(s)

    def _lp_kappa(self, k):
        return _half_normal(k, self.spec.kappa_scale) + np.log(k)

    # -- bookkeeping
    def _step(self, name, idx=None):
        s = self.log_scale[name]
        return float(np.exp(s if idx is None else s[idx]))

    def _record(self, name, ok, idx=None):
        if idx is None:
            self.tries[name] += 1
            self.acc[name] += ok
        else:
            self.tries[name][idx] += 1
            self.acc[name][idx] += ok

    def _accept(self, log_ratio) -> bool:
        return bool(np.log(self.rng.uniform()) < log_ratio)

    def _try_global(self, name, idx, eta_new, k_new, prior_delta):
        ll_new = self._rows(eta_new, k_new)
        ok = self._accept(ll_new.sum() - self.ll.sum() + prior_delta) if np.all(np.isfinite(ll_new)) else False
        self._record(name, ok, idx)
        if ok:
            self.eta, self.ll = eta_new, ll_new
        return ok

    # -- one sweep over all moves
    def sweep(self):
        rng, J = self.rng, self.J
        sp = self.spec
        if self.free["alpha_g"]:
            new = self.ag + self._step("ag") * rng.normal()
            if self._try_global("ag", None, self._eta(ag=new), self.k,
                                _normal(new, sp.alpha_scale) - _normal(self.ag, sp.alpha_scale)):
                self.ag = new
        if self.free["beta_g"]:
            for j in range(J):
                bg = self.bg.copy()
                bg[j] += self._step("bg", j) * rng.normal()
                if self._try_global("bg", j, self._eta(bg=bg), self.k,
                                    _normal(bg[j], sp.beta_scale) - _normal(self.bg[j], sp.beta_scale)):
                    self.bg = bg
        if self.free["sigma_alpha"]:
            new = self.sa * np.exp(self._step("sa") * rng.normal())
            if self._try_global("sa", None, self._eta(sa=new), self.k, self._lp_scale(new) - self._lp_scale(self.sa)):
                self.sa = new
        if self.free["sigma_beta"]:
            for j in range(J):
                sb = self.sb.copy()
                sb[j] *= np.exp(self._step("sb", j) * rng.normal())
                if self._try_global("sb", j, self._eta(sb=sb), self.k,
                                    self._lp_scale(sb[j]) - self._lp_scale(self.sb[j])):
                    self.sb = sb
        if self.free["kappa"]:
            new = self.k * np.exp(self._step("k") * rng.normal())
            if self._try_global("k", None, self.eta, new, self._lp_kappa(new) - self._lp_kappa(self.k)):
                self.k = new
        self._centered_moves()
        self._project_moves()
        if self.cfg.debug:
            mu = expit(self.eta)
            assert np.all((mu > 0) & (mu < 1)) and self.k > 0, "accepted state outside the support"

    def _centered_moves(self):
        """Shift/rescale globals with project coefficients held fixed: likelihood unchanged."""
        rng, sp, P = self.rng, self.spec, self.P
        if self.free["alpha_g"] and self.sa > 0:
            delta = self._step("ag_c") * rng.normal()
            za = self.za - delta / self.sa
            lr = (_normal(self.ag + delta, sp.alpha_scale) - _normal(self.ag, sp.alpha_scale)
                  + np.sum(_normal(za, 1.0) - _normal(self.za, 1.0)))
            ok = self._accept(lr)
            self._record("ag_c", ok)
            if ok:
                self.ag, self.za = self.ag + delta, za
        if self.free["beta_g"]:
            for j in range(self.J):
                if not self.sb[j] > 0:
                    continue
                delta = self._step("bg_c", j) * rng.normal()
                zj = self.zb[:, j] - delta / self.sb[j]
                lr = (_normal(self.bg[j] + delta, sp.beta_scale) - _normal(self.bg[j], sp.beta_scale)
                      + np.sum(_normal(zj, 1.0) - _normal(self.zb[:, j], 1.0)))
                ok = self._accept(lr)
                self._record("bg_c", ok, j)
                if ok:
                    self.bg = self.bg.copy()
                    self.bg[j] += delta
                    self.zb = self.zb.copy()
                    self.zb[:, j] = zj
        # (log s, z) -> (log s + e, z exp(-e)) has Jacobian exp(-P e)
        if self.free["sigma_alpha"]:
            e = self._step("sa_c") * rng.normal()
            new, za = self.sa * np.exp(e), self.za * np.exp(-e)
            lr = (self._lp_scale(new) - self._lp_scale(self.sa)
                  + np.sum(_normal(za, 1.0) - _normal(self.za, 1.0)) - P * e)
            ok = self._accept(lr)
            self._record("sa_c", ok)
            if ok:
                self.sa, self.za = new, za
        if self.free["sigma_beta"]:
            for j in range(self.J):
                e = self._step("sb_c", j) * rng.normal()
                new, zj = self.sb[j] * np.exp(e), self.zb[:, j] * np.exp(-e)
                lr = (self._lp_scale(new) - self._lp_scale(self.sb[j])
                      + np.sum(_normal(zj, 1.0) - _normal(self.zb[:, j], 1.0)) - P * e)
                ok = self._accept(lr)
                self._record("sb_c", ok, j)
                if ok:
                    self.sb = self.sb.copy()
                    self.sb[j] = new
                    self.zb = self.zb.copy()
                    self.zb[:, j] = zj

    def _project_moves(self):
        """Per-project z updates; projects are conditionally independent, so all move at once."""
        rng, P, p = self.rng, self.P, self.d.project
        cols = [("za", None)] + [("zb", j) for j in range(self.J)]
        for name, j in cols:
            cur = self.za if j is None else self.zb[:, j]
            step = np.exp(self.log_scale[name] if j is None else self.log_scale[name][:, j])
            prop = cur + step * rng.normal(size=P)
            dz = prop - cur
            if j is None:
                eta_new = self.eta + self.sa * dz[p]
            else:
                eta_new = self.eta + self.sb[j] * dz[p] * self.d.X[:, j]
            ll_new = self._rows(eta_new, self.k)
            with np.errstate(invalid="ignore"):
                delta = np.bincount(p, ll_new - self.ll, minlength=P)
            delta = np.where(np.isfinite(delta), delta, -np.inf)
            lr = delta + _normal(prop, 1.0) - _normal(cur, 1.0)
            ok = np.log(rng.uniform(size=P)) < lr
            if j is None:
                self.tries["za"] += 1
                self.acc["za"] += ok
                self.za = np.where(ok, prop, cur)
            else:
                self.tries["zb"][:, j] += 1
                self.acc["zb"][:, j] += ok
                self.zb = self.zb.copy()
                self.zb[:, j] = np.where(ok, prop, cur)
            rows = ok[p]
            self.eta = np.where(rows, eta_new, self.eta)
            self.ll = np.where(rows, ll_new, self.ll)

    def adapt(self, batch: int):
        """Nudge each log scale toward the target acceptance; counters reset."""
        gain = min(1.0, 3.0 / np.sqrt(batch))
        for k in self.log_scale:
            t = self.tries[k]
            rate = np.divide(self.acc[k], t, out=np.full_like(t, self.cfg.target_accept), where=t > 0)
            self.log_scale[k] = self.log_scale[k] + gain * (rate - self.cfg.target_accept)
            self.acc[k] = np.zeros_like(t)
            self.tries[k] = np.zeros_like(t)

    def acceptance(self) -> dict:
        out = {}
        for k, t in self.tries.items():
            if np.sum(t) > 0:
                out[k] = float(np.sum(self.acc[k]) / np.sum(t))
        return out

    def snapshot(self) -> np.ndarray:
        alpha = self.ag + self.sa * self.za
        beta = self.bg + self.sb * self.zb
        return np.concatenate([[self.ag], self.bg, [self.sa], self.sb, [self.k], alpha, beta.ravel()])


def parameter_names(projects, covariates) -> list[str]:
    names = ["alpha_g"] + [f"beta_g[{c}]" for c in covariates] + ["sigma_alpha"]
    names += [f"sigma_beta[{c}]" for c in covariates] + ["kappa"]
    names += [f"alpha[{p}]" for p in projects]
    names += [f"beta[{p},{c}]" for p in projects for c in covariates]
    return names


def global_names(covariates) -> list[str]:
    return (["alpha_g"] + [f"beta_g[{c}]" for c in covariates] + ["sigma_alpha"]
            + [f"sigma_beta[{c}]" for c in covariates] + ["kappa"])


@dataclass
class ParamSummary:
    mean: float
    hdi_lo: float
    hdi_hi: float
    rhat: float | None


@dataclass
class PosteriorSummary:
    names: list
    draws: np.ndarray                   # (chains, draws, params)
    params: dict                        # name -> ParamSummary
    globals: list
    spec: ModelSpec
    config: SamplerConfig
    data: Dataset = field(repr=False)
    acceptance: list = field(default_factory=list)     # per chain {move: post-warmup rate}

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, :, self.names.index(name)]

    def max_global_rhat(self) -> float:
        vals = [self.params[n].rhat for n in self.globals if self.params[n].rhat is not None]
        return max(vals) if vals else float("inf")

    def config_echo(self) -> dict:
        spec = asdict(self.spec)
        spec["fixed"] = {k: np.asarray(v).tolist() for k, v in self.spec.fixed.items()}
        return {"model": spec, "sampler": asdict(self.config),
                "sigma_structure": "per-covariate sigma_j, separate sigma_alpha for intercepts",
                "projects": list(self.data.projects), "covariates": list(self.data.covariates),
                "rows": int(self.data.y.size)}


def summarize(names, draws, globals_, spec, cfg, data, acceptance=()) -> PosteriorSummary:
    params = {}
    for i, n in enumerate(names):
        col = draws[:, :, i]
        try:
            r = rhat(col)
        except (TooFewDraws, DegenerateVariance):
            r = None
        try:
            lo, hi = hdi(col)
        except TooFewDraws:
            lo = hi = float("nan")
        params[n] = ParamSummary(float(col.mean()) if col.size else float("nan"), lo, hi, r)
    return PosteriorSummary(list(names), draws, params, list(globals_), spec, cfg, data, list(acceptance))


def chain_seeds(cfg: SamplerConfig) -> list[np.random.SeedSequence]:
    if cfg.same_seed:
        return [np.random.SeedSequence(cfg.seed) for _ in range(cfg.chains)]
    return np.random.SeedSequence(cfg.seed).spawn(cfg.chains)


def run_chain(data: Dataset, spec: ModelSpec, cfg: SamplerConfig, seed: np.random.SeedSequence):
    ch = _Chain(data, spec, cfg, np.random.default_rng(seed))
    bad = ch.first_bad_row()
    if bad is not None:
        raise NonFiniteLikelihood(bad, f"log-likelihood is not finite at the initial state (y={data.y[bad]!r})")
    batch = 0
    for it in range(cfg.warmup):
        ch.sweep()
        if (it + 1) % cfg.adapt_every == 0:
            batch += 1
            ch.adapt(batch)
    # scales frozen from here on
    for k in ch.tries:
        ch.tries[k] = np.zeros_like(ch.tries[k])
        ch.acc[k] = np.zeros_like(ch.acc[k])
    out = np.empty((cfg.draws, 2 * data.X.shape[1] + 3 + data.n_projects * (1 + data.X.shape[1])))
    for it in range(cfg.draws):
        ch.sweep()
        out[it] = ch.snapshot()
    return out, ch.acceptance()


def fit_model(data: Dataset, spec: ModelSpec | None = None, config: SamplerConfig | None = None,
              executor=None) -> PosteriorSummary:
    """Sample the posterior; chains are independent, ``executor`` (concurrent.futures) may run them in parallel."""
    spec = spec or ModelSpec()
    cfg = config or SamplerConfig()
    if cfg.chains < 4:
        raise ChainCountTooSmall(f"need at least 4 chains, got {cfg.chains}")
    if data.n_projects < 2:
        raise ValueError("need at least two projects")
    data.check()
    seeds = chain_seeds(cfg)
    if executor is None:
        results = [run_chain(data, spec, cfg, s) for s in seeds]
    else:
        results = list(executor.map(run_chain, [data] * cfg.chains, [spec] * cfg.chains, [cfg] * cfg.chains, seeds))
    draws = np.stack([r[0] for r in results])
    names = parameter_names(data.projects, data.covariates)
    return summarize(names, draws, global_names(data.covariates), spec, cfg, data, [r[1] for r in results])


def simulate(alpha_g: float, beta_g, kappa: float, sigma_alpha: float = 0.2, sigma_beta=0.1,
             n_projects: int = 20, n_pairs: int = 100, seed: int = 0) -> tuple[Dataset, dict]:
    """Synthetic hierarchical data with standardized covariates; returns (dataset, truth)."""
    rng = np.random.default_rng(seed)
    beta_g = np.asarray(beta_g, dtype=float)
    J = beta_g.size
    sigma_beta = np.broadcast_to(np.asarray(sigma_beta, dtype=float), (J,))
    n = n_projects * n_pairs
    X = rng.normal(size=(n, J))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    project = np.repeat(np.arange(n_projects), n_pairs)
    alpha = alpha_g + sigma_alpha * rng.normal(size=n_projects)
    beta = beta_g + sigma_beta * rng.normal(size=(n_projects, J))
    mu = expit(alpha[project] + np.einsum("ij,ij->i", beta[project], X))
    y = rng.beta(mu * kappa, (1 - mu) * kappa)
    y = np.clip(y, 1e-12, 1 - 1e-12)
    names = [f"p{i:02d}" for i in range(n_projects)]
    data = Dataset(y, X, project, names, [f"x{j}" for j in range(J)])
    truth = {"alpha_g": alpha_g, "kappa": kappa, "sigma_alpha": sigma_alpha}
    truth.update({f"beta_g[x{j}]": float(b) for j, b in enumerate(beta_g)})
    truth.update({f"sigma_beta[x{j}]": float(s) for j, s in enumerate(sigma_beta)})
    return data, truth
