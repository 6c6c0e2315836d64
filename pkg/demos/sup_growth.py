"""E[sup u] over growing windows against Psi, with the chaining and Sudakov bounds.

Run: python demos/sup_growth.py  (a few seconds)
"""

from sfhelab.experiments import ExperimentConfig, run_experiment
from sfhelab.model import ModelParams

p = ModelParams(1.5, 0.4)
cfg = ExperimentConfig(p, "supGrowthL", t=1.0, L=(1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0), replicates=400,
                       seed=3, resolution="skip")
res = run_experiment(cfg)
print(f"{'L':>6} {'Psi':>7} {'E sup':>8} {'se':>7} {'Sudakov':>8} {'chaining':>9}")
for t, L, ps, est, se, sud, chain in res.rows:
    print(f"{L:6g} {ps:7.4f} {est:8.4f} {se:7.4f} {sud:8.4f} {chain:9.3f}")
s = res.summary
print(f"fit: E sup = {s['psi_intercept']:.3f} + {s['psi_slope']:.3f} Psi, R^2 = {s['psi_r2']:.4f}")
print(f"slope 95% CI [{s['psi_slope_lo']:.3f}, {s['psi_slope_hi']:.3f}]")
print(f"multipliers: {s['sudakov_multiplier']:.3f} x Sudakov <= E sup <= {s['chaining_multiplier']:.3f} x chaining")
