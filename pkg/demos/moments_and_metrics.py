"""Closed-form constants, the variance law and the canonical metrics.

Run: python demos/moments_and_metrics.py
"""

import numpy as np

from sfhelab.metrics import SpacetimePoint, correlation, d1, d1tilde, d2, d3
from sfhelab.model import ModelParams, constants, psi, variance_law

p = ModelParams(1.5, 0.4)
c = constants(p)
print(f"gamma = {p.gamma_exp:.3f}, kappa = {p.kappa:.3f}")
print(f"c1H = {c.c1H:.10f}, c21 = {c.c21:.7f}")

# variance grows like t^(2 kappa)
for t in (0.5, 1.0, 2.0, 4.0):
    print(f"t = {t:<4}  var u(t, x) = {variance_law(p, t):.6f}  Psi(t, 256) = {psi(p, t, 256.0):.4f}")

# d1 against its closed-form comparison metric
a = SpacetimePoint(1.0, 0.0)
for r in (0.01, 0.1, 1.0, 10.0):
    b = SpacetimePoint(1.0, r)
    rep = d1(p, a, b)
    print(f"r = {r:<5} d1 = {rep.value:.6f} (+- {rep.error:.1e})  d1 / d1tilde = {rep.value / d1tilde(p, a, b):.4f}")

# increment metrics at separation 2
for h in (1e-3, 1e-2):
    print(f"h = {h:g}: d2 = {d2(p, 1.0, h, 0.0, 2.0).value:.6f}")
for tau in (1e-3, 1e-2):
    print(f"tau = {tau:g}: d3 = {d3(p, 1.0, tau, 0.0, 2.0).value:.6f}")

# correlation of u(1, .) decays with the lag
lags = np.array([0.5, 1.0, 2.0, 5.0, 10.0])
print("rho1:", np.round([correlation("rho1", p, 1.0, x).value for x in lags], 5))
