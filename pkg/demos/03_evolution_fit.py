# simulate hierarchical similarity data, fit, check
import numpy as np

from binoracle.evolution import SamplerConfig, fit_model, posterior_predictive_check, simulate

data, truth = simulate(0.2, [-0.5, 0.0, 0.3], 50.0, n_projects=10, n_pairs=80, seed=4)
print(data.y.shape, "rows,", data.n_projects, "projects")

# short run; the full default is 1000 warmup / 2000 draws
fit = fit_model(data, config=SamplerConfig(warmup=500, draws=800, seed=1))
print(f"{'param':16s} {'truth':>7s} {'mean':>7s} {'hdi95':>18s} {'rhat':>6s}")
for n in fit.globals:
    p = fit.params[n]
    print(f"{n:16s} {truth.get(n, np.nan):7.3f} {p.mean:7.3f} [{p.hdi_lo:7.3f}, {p.hdi_hi:7.3f}] {p.rhat:6.3f}")
print("acceptance", [{k: round(v, 2) for k, v in a.items()} for a in fit.acceptance][:1])

rep = posterior_predictive_check(fit, n_sims=200)
print(rep.to_text())
print("ppc ok:", rep.ok)
