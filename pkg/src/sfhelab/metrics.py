"""Canonical metrics and correlation functions of the solution field.

Every quantity is an integral over xi in (0, inf) of the form handled by
:mod:`sfhelab.quadrature`; with r = |x - y|, Delta = t - s >= 0:

    d1^2 = c21 Delta^{gamma/alpha}
           + c1H int (1 - e^{-2 s xi^a}) (1 - e^{-Delta xi^a})^2 xi^{-p}
           + 2 c1H int (1 - e^{-2 s xi^a}) e^{-Delta xi^a} (1 - cos r xi) xi^{-p}
    d2^2 = 4 c1H int (1 - e^{-2 t xi^a}) (1 - cos h xi) (1 - cos r xi) xi^{-p}
    d3^2 = 2 c1H int [(1 - e^{-tau xi^a})^2 (1 - e^{-2 t xi^a}) + (1 - e^{-2 tau xi^a})]
                     (1 - cos r xi) xi^{-p}

where p = 2H + alpha - 1 and gamma = 2H + alpha - 2.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import RegionViolation
from .model import variance_law
from .quadrature import (KernelSpec, QuadratureSpec, integrate, power_cos_tail,
                         riesz_identity, _series_head)
from .special import gamma as gamma_fn

_DEFAULT_Q = QuadratureSpec()


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    x: float

    def __post_init__(self):
        t, x = float(self.t), float(self.x)
        if not (math.isfinite(t) and t >= 0.0):
            raise ValueError(f"time must be finite and >= 0, got {self.t!r}")
        if not math.isfinite(x):
            raise ValueError(f"position must be finite, got {self.x!r}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class MetricReport:
    kind: str
    value: float
    error: float
    inputs: dict = field(default_factory=dict, compare=False)


def _kernel(p, **kw):
    return KernelSpec(gamma=p.gamma_exp, alpha=p.alpha, **kw)


def _sqrt_report(kind, sq, err, inputs):
    sq = max(sq, 0.0)
    value = math.sqrt(sq)
    # d sqrt(v) = dv / (2 sqrt(v)); near zero fall back to sqrt(err)
    e = err / (2.0 * value) if value > 0 and err < sq else math.sqrt(err)
    return MetricReport(kind, value, e, inputs)


@lru_cache(maxsize=65536)
def _d1_squared(p, t, s, r, q):
    """(d1^2, error) for t >= s >= 0 and spatial distance r >= 0."""
    if t < s:
        t, s = s, t
    delta = t - s
    c1 = p.c1H
    val = variance_law(p, delta) if delta > 0 else 0.0
    err = 1e-15 * val
    if s > 0 and delta > 0:
        v, e = integrate(_kernel(p, exp_terms=((2.0, s, 1), (1.0, delta, 2)), scale=c1), q)
        val += v
        err += e
    if s > 0 and 0 < r and 2.0 * c1 * riesz_identity(p.gamma_exp, r) <= 1e-16 * variance_law(p, s):
        # the spatial part is bounded by 2 c1H R r^gamma, negligible here
        err += 2.0 * c1 * riesz_identity(p.gamma_exp, r)
    elif s > 0 and r > 0:
        v, e = integrate(_kernel(p, exp_terms=((2.0, s, 1),), cos_freqs=(r,), damping=delta, scale=2.0 * c1), q)
        val += v
        err += e
    return val, err


def d1(p, a, b, q=None):
    """Canonical metric ||u(a) - u(b)||_{L^2}."""
    q = q or _DEFAULT_Q
    sq, err = _d1_squared(p, a.t, b.t, abs(a.x - b.x), q) if a.t >= b.t else _d1_squared(p, b.t, a.t, abs(a.x - b.x), q)
    return _sqrt_report("d1", sq, err, {"t": a.t, "x": a.x, "s": b.t, "y": b.x})


def d1tilde(p, a, b):
    """Closed-form equivalent metric |x-y|^{gamma/2} ^ (t^s)^kappa + |t-s|^kappa."""
    g = p.gamma_exp
    space = min(abs(a.x - b.x) ** (0.5 * g), min(a.t, b.t) ** p.kappa)
    return space + abs(a.t - b.t) ** p.kappa


@lru_cache(maxsize=65536)
def _d2_squared(p, t, h, r, q):
    return tuple(integrate(_kernel(p, exp_terms=((2.0, t, 1),), cos_freqs=(h, r), scale=4.0 * p.c1H), q))


def d2(p, t, h, x, y, q=None):
    """Metric of the spatial increment field x -> u(t, x + h) - u(t, x)."""
    q = q or _DEFAULT_Q
    if t <= 0:
        raise ValueError("d2 needs t > 0")
    sq, err = _d2_squared(p, float(t), abs(float(h)), abs(float(x) - float(y)), q)
    return _sqrt_report("d2", sq, err, {"t": t, "h": h, "x": x, "y": y})


@lru_cache(maxsize=65536)
def _d3_squared(p, t, tau, r, q):
    c = 2.0 * p.c1H
    v1, e1 = integrate(_kernel(p, exp_terms=((1.0, tau, 2), (2.0, t, 1)), cos_freqs=(r,), scale=c), q)
    v2, e2 = integrate(_kernel(p, exp_terms=((2.0, tau, 1),), cos_freqs=(r,), scale=c), q)
    return v1 + v2, e1 + e2


def d3(p, t, tau, x, y, q=None):
    """Metric of the temporal increment field x -> u(t + tau, x) - u(t, x)."""
    q = q or _DEFAULT_Q
    if t <= 0 or tau <= 0:
        raise ValueError("d3 needs t > 0 and tau > 0")
    sq, err = _d3_squared(p, float(t), float(tau), abs(float(x) - float(y)), q)
    return _sqrt_report("d3", sq, err, {"t": t, "tau": tau, "x": x, "y": y})


# -- smoothing density and the smoothed field ---------------------------------

def rho_constant(p):
    """Normalizing constant c of the density rho."""
    return 0.5 / (4.0 / (4.0 - 2.0 * p.hurst - p.alpha) + 1.0 / (1.0 - 2.0 * p.hurst))


def _rho_inner_exponent(p):
    return 0.5 * p.hurst + 0.25 * p.alpha


def rho_density(p, h):
    """Probability density c (|h|^{-H/2-alpha/4} 1{|h|<=1} + |h|^{2H-2} 1{|h|>=1})."""
    h = np.abs(np.asarray(h, dtype=float))
    if np.any(h == 0):
        raise ValueError("density is singular at h = 0")
    c = rho_constant(p)
    out = c * np.where(h <= 1.0, h ** (-_rho_inner_exponent(p)), h ** (2.0 * p.hurst - 2.0))
    return float(out) if out.ndim == 0 else out


def smoothing_profile(p, xi):
    """g(xi) = int_0^inf (1 - cos h xi) rho(h) dh, evaluated in closed form.

    g rises like xi^{1-2H} at the origin and tends to 1/2 at infinity.
    """
    xi = np.abs(np.asarray(xi, dtype=float))
    b = _rho_inner_exponent(p)
    s2 = 2.0 - 2.0 * p.hurst
    c = rho_constant(p)
    out = np.zeros(xi.shape)
    lo = (xi > 0) & (xi <= 1.0)
    hi = xi > 1.0
    if np.any(lo):
        x = xi[lo]
        a = np.zeros_like(x)
        fact = 1.0
        for k in range(1, 12):
            fact *= (2 * k - 1) * (2 * k)
            a += (-1.0) ** (k + 1) * x ** (2 * k) / (fact * (2 * k + 1 - b))
        bb = x ** (s2 - 1.0) * (riesz_identity(s2 - 1.0, 1.0) - _series_head(s2, x, cosine=False))
        out[lo] = c * (a + bb)
    if np.any(hi):
        x = xi[hi]
        tb, _ = power_cos_tail(b, 1.0, x)
        a = 1.0 / (1.0 - b) - x ** (b - 1.0) * (gamma_fn(1.0 - b) * math.sin(0.5 * math.pi * b) - tb)
        t2, _ = power_cos_tail(s2, x, 1.0)
        out[hi] = c * (a + 1.0 / (s2 - 1.0) - t2)
    return float(out) if out.ndim == 0 else out


def _profile_kernel_parts(p):
    """Head bound, tail expansion and residual for the weight g(xi)^2."""
    b = _rho_inner_exponent(p)
    c = rho_constant(p)
    s2 = 2.0 - 2.0 * p.hurst
    head = c * (0.5 / (3.0 - b) + riesz_identity(s2 - 1.0, 1.0))
    cc = c * gamma_fn(1.0 - b) * math.sin(0.5 * math.pi * b)
    tail = ((0.25, 0.0), (-cc, b - 1.0), (cc * cc, 2.0 * (b - 1.0)))
    resid = 2.0 * c * (2.0 * b + 2.0 * s2)
    return (head * head, 2.0 * (1.0 - 2.0 * p.hurst)), tail, (resid, -2.0)


@lru_cache(maxsize=4096)
def _d4_squared(p, t, r, q):
    head, tail, resid = _profile_kernel_parts(p)
    k = _kernel(p, exp_terms=((2.0, t, 1),), cos_freqs=(r,), scale=8.0 * p.c1H,
                weight=lambda xi: smoothing_profile(p, xi) ** 2,
                weight_head=head, weight_tail=tail, weight_residual=resid)
    return tuple(integrate(k, q))


def d4(p, t, x, y, q=None):
    """Metric of the smoothed field u_rho(t, x) = int (u(t, x+h) - u(t, x)) rho(h) dh."""
    q = q or _DEFAULT_Q
    if t <= 0:
        raise ValueError("d4 needs t > 0")
    sq, err = _d4_squared(p, float(t), abs(float(x) - float(y)), q)
    return _sqrt_report("d4", sq, err, {"t": t, "x": x, "y": y})


def d4_lower_bound(p, t):
    """Squared lower bound for d4 at |x - y| >= t^{1/alpha}, with unit inner constant."""
    h, a = p.hurst, p.alpha
    c = rho_constant(p)
    l = p.length_scale(t)
    return (4.0 * p.c1H * c * c / (12.0 - 2.0 * h - a) ** 2 * (-math.expm1(-2.0 * t))
            * (l / (l + 3.0 * math.pi)) ** (h + 0.5 * a))


# -- correlations -----------------------------------------------------------

def _corr_numerator(p, kind, t, aux, lag, q):
    c1 = p.c1H
    sc = float(lag) if lag else None
    if kind == "rho1":
        return [_kernel(p, exp_terms=((2.0, t, 1),), signed_cos=sc, scale=c1)]
    if kind == "rho2":
        return [_kernel(p, exp_terms=((2.0, t, 1),), cos_freqs=(aux,), signed_cos=sc, scale=2.0 * c1)]
    if kind == "rho3":
        return [_kernel(p, exp_terms=((1.0, aux, 2), (2.0, t, 1)), signed_cos=sc, scale=c1),
                _kernel(p, exp_terms=((2.0, aux, 1),), signed_cos=sc, scale=c1)]
    raise ValueError(f"unknown correlation kind {kind!r}")


def correlation(kind, p, t, lag, aux=None, q=None):
    """Spatial correlation at distance lag of u (rho1), Delta_h u (rho2) or D_tau u (rho3).

    aux is h for rho2 and tau for rho3.
    """
    q = q or _DEFAULT_Q
    if t <= 0:
        raise ValueError("correlation needs t > 0")
    if kind in ("rho2", "rho3") and not (aux and aux > 0):
        raise ValueError(f"{kind} needs a positive auxiliary h or tau")
    lag = abs(float(lag))
    den = num = 0.0
    den_e = num_e = 0.0
    for k in _corr_numerator(p, kind, t, aux, 0.0, q):
        v, e = integrate(k, q)
        den += v
        den_e += e
    if lag == 0:
        num, num_e = den, den_e
    else:
        for k in _corr_numerator(p, kind, t, aux, lag, q):
            v, e = integrate(k, q)
            num += v
            num_e += e
    value = num / den
    err = num_e / den + abs(value) * den_e / den
    return MetricReport(kind, value, err, {"t": t, "aux": aux, "lag": lag})


def correlation_decay_bound(p, t, lag):
    """Explicit bracket bounding |rho1(lag)| for lag >= 1 (decay order lag^{(H-1)/2})."""
    h, a = p.hurst, p.alpha
    lag = float(lag)
    bracket = (t / (1.0 - h) + 2.0 * t * lag ** -0.75
               + (2.0 * t) ** ((2 * h + a - 1) / a) * gamma_fn((1 - 2 * h) / a) * lag ** (-(1 + h) / 2)
               + lag ** (-(3.0 - a) / 4.0))
    return p.c1H / variance_law(p, t) * lag ** ((h - 1.0) / 2.0) * bracket


# -- sandwich checks ---------------------------------------------------------

@dataclass(frozen=True)
class SandwichReport:
    kind: str
    ratio_min: float
    ratio_max: float
    count: int
    theta: float = None
    side: str = "both"


def _d2_lower_window(p, t, r):
    l = p.length_scale(t)
    return min(3.0 * r / 64.0, 0.25 * math.pi * (2.0 / math.log(2.0)) ** (1.0 / p.alpha) * l, 3.0 * l / 64.0)


def sandwich_ratio(kind, p, point, theta=None, side="upper", q=None):
    """Ratio of a metric to its comparison function at one grid point.

    point is (t, x, s, y) for d1, (t, h, x, y) for d2 and (t, tau, x, y) for d3.
    """
    q = q or _DEFAULT_Q
    g = p.gamma_exp
    if kind == "d1":
        t, x, s, y = point
        a, b = SpacetimePoint(t, x), SpacetimePoint(s, y)
        if a == b:
            raise RegionViolation("d1 sandwich is 0/0 at coincident points")
        return d1(p, a, b, q).value / d1tilde(p, a, b)
    t, aux, x, y = point
    r = abs(x - y)
    if kind == "d2":
        h = abs(aux)
        if side == "lower":
            l = p.length_scale(t)
            if r < l or h <= 0 or h > _d2_lower_window(p, t, r) * (1 + 1e-12):
                raise RegionViolation(f"d2 lower bound needs r >= {l:.4g} and 0 < h <= window, got r={r}, h={h}")
            comp = h ** (0.5 * g)
        else:
            th = 0.0 if theta is None else theta
            if not 0.0 <= th <= 0.5 * g + 1e-15 or h <= 0 or r <= 0:
                raise RegionViolation(f"d2 upper bound needs 0 <= theta <= {0.5 * g:.4g}, h > 0, r > 0")
            e = 0.5 * (g - 2.0 * th)
            comp = h**th * min(r**e, t ** (e / p.alpha))
        return d2(p, t, h, x, y, q).value / comp
    if kind == "d3":
        tau = aux
        if side == "lower":
            l = p.length_scale(t)
            if r < l or tau <= 0 or tau > (3.0 / 32.0) ** p.alpha * r**p.alpha * (1 + 1e-12):
                raise RegionViolation(f"d3 lower bound needs r >= {l:.4g} and 0 < tau <= (3/32)^alpha r^alpha")
            comp = tau ** (0.5 * g / p.alpha)
        else:
            th = 0.0 if theta is None else theta
            if not 0.0 <= th <= g / p.alpha + 1e-15 or not 0 < tau <= t or r <= 0:
                raise RegionViolation(f"d3 upper bound needs 0 <= theta <= {g / p.alpha:.4g}, 0 < tau <= t, r > 0")
            e = 0.5 * (g - p.alpha * th)
            comp = tau ** (0.5 * th) * min(r**e, t ** (e / p.alpha))
        return d3(p, t, tau, x, y, q).value / comp
    raise ValueError(f"unknown metric kind {kind!r}")


def sandwich_check(kind, p, grid, theta=None, side="upper", q=None):
    """Extreme ratios metric / comparison over the grid points."""
    ratios = [sandwich_ratio(kind, p, pt, theta, side, q) for pt in grid]
    if not ratios:
        raise ValueError("empty sandwich grid")
    return SandwichReport(kind, min(ratios), max(ratios), len(ratios), theta, side)
