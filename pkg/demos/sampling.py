"""Exact Cholesky sampling on a point set and spectral sampling on a grid.

Run: python demos/sampling.py
"""

import numpy as np

from sfhelab.model import ModelParams, variance_law
from sfhelab.sampler import (PointSet, SpacetimeGrid, discretization_report, sample_cholesky,
                             sample_spectral_grid, spectral_plan)

p = ModelParams(1.5, 0.4)

# a handful of space-time points, exact law
pts = PointSet([(1.0, 0.0), (1.0, 0.5), (2.0, 0.0)])
X = np.stack([s.values for s in sample_cholesky(p, pts, seed=1, n_replicates=5000)])
print("Cholesky sample variances:", np.round(X.var(axis=0), 4))
print("exact:                    ", np.round([variance_law(p, 1.0)] * 2 + [variance_law(p, 2.0)], 4))

# a 4 x 256 grid from the spectral sampler
grid = SpacetimeGrid(t0=0.5, dt=0.5, nt=4, x0=-16.0, dx=0.125, nx=256)
plan = spectral_plan(p, grid)
rep = discretization_report(p, plan)
print(f"spectral plan: max covariance error {rep.bound:.2e} ({100 * rep.relative:.3f}% of the variance)")
S = np.stack([s.values for s in sample_spectral_grid(p, grid, seed=2, n_replicates=400, plan=plan)])
print("per-slice sample variance:", np.round(S.var(axis=(0, 2)), 4))
print("exact:                    ", np.round([variance_law(p, t) for t in grid.times], 4))
