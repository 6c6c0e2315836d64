"""Chaining upper bounds, Sudakov lower bounds and the Borell tail.

The partition scheme splits [0, T] x [-L, L] at level n >= 2 into
2^{2^{n-1}} time cells and 2 * 2^{2^{n-2}} space cells, so that the product
has at most 2^{2^n} elements.  Levels 0 and 1 use the whole domain.  Diameters
come from the closed-form comparison metrics scaled by a fitted constant, and
all universal constants are reported as unit multipliers.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergentSeries, SeparationViolated
from .metrics import SpacetimePoint, d1, d2, d3
from .model import psi

_SERIES_CUT = 1e-15
_MAX_LEVEL = 64


def _cut_index(ratio):
    """inf{n >= 2 : 2^{n-2} >= log2(ratio v 2)}."""
    need = math.log2(max(ratio, 2.0))
    n = 2
    while 2.0 ** (n - 2) < need:
        n += 1
    return n


def cut_index_n0(p, T, L):
    """Level at which time-space cells reach the natural scale T^{1/alpha}."""
    if T <= 0 or L <= 0:
        raise ValueError("cut index needs T > 0 and L > 0")
    return _cut_index(L / p.length_scale(T))


def cut_index_n1(p, t, L):
    """Same cut for the fixed-time increment fields."""
    return cut_index_n0(p, t, L)


@dataclass(frozen=True)
class DyadicPartitionScheme:
    T: float
    L: float
    n_max: int = _MAX_LEVEL

    def __post_init__(self):
        if self.T <= 0 or self.L <= 0 or self.n_max < 0:
            raise ValueError("scheme needs T > 0, L > 0 and n_max >= 0")

    def time_cells(self, n):
        return 1 if n < 2 else 2 ** (2 ** (n - 1))

    def space_cells(self, n):
        return 1 if n < 2 else 2 * 2 ** (2 ** (n - 2))

    def time_width(self, n):
        return self.T if n < 2 else self.T * 2.0 ** (-(2.0 ** (n - 1)))

    def space_width(self, n):
        return 2.0 * self.L if n < 2 else self.L * 2.0 ** (-(2.0 ** (n - 2)))

    def log2_count(self, n, kind="product"):
        """log2 of the number of cells (exact, to avoid huge integers)."""
        lt = 0.0 if n < 2 else 2.0 ** (n - 1)
        ls = 0.0 if n < 2 else 1.0 + 2.0 ** (n - 2)
        return {"time": lt, "space": ls, "product": lt + ls}[kind]

    def admissible(self, n):
        """Each of the time, space and product schemes obeys #A_n <= 2^{2^n}."""
        return all(self.log2_count(n, k) <= 2.0**n for k in ("time", "space", "product"))


@dataclass(frozen=True)
class ChainingReport:
    law: str
    per_level: tuple
    cut_index: int
    total: float
    psi: float
    scale: float
    inputs: dict = field(default_factory=dict, compare=False)

    @property
    def ratio(self):
        """total / (scale * Psi), the empirical counterpart of the growth constant."""
        return self.total / (self.scale * self.psi)


def _diameter(p, law, scheme, n, t, h, tau, theta, c):
    g, a = p.gamma_exp, p.alpha
    sw = scheme.space_width(n)
    if law == "d1":
        return c * (min(sw ** (0.5 * g), scheme.T**p.kappa) + scheme.time_width(n) ** p.kappa)
    if law == "d1space":
        return c * min(sw ** (0.5 * g), t**p.kappa)
    if law == "d2":
        e = 0.5 * (g - 2.0 * theta)
        return c * h**theta * min(sw**e, t ** (e / a))
    if law == "d3":
        e = 0.5 * (g - a * theta)
        return c * tau ** (0.5 * theta) * min(sw**e, t ** (e / a))
    raise ValueError(f"unknown diameter law {law!r}")


def chaining_upper_bound(p, scheme, law="d1", c_upper=1.0, t=None, h=None, tau=None, theta=0.0):
    """Sum over levels of 2^{n/2} diam(A_n) for the dyadic scheme.

    law d1 bounds sup over [0,T] x [-L,L]; d1space, d2, d3 bound sups over
    [-L,L] at fixed time t of u, Delta_h u and D_tau u.  c_upper multiplies the
    comparison metric (the fitted upper sandwich constant).
    """
    g, a = p.gamma_exp, p.alpha
    if law == "d1":
        t = scheme.T
    if t is None or t <= 0:
        raise ValueError("chaining bound needs a positive time")
    if law == "d2":
        if not 0.0 <= theta <= 0.5 * g + 1e-12 or h is None or h <= 0:
            raise ValueError("d2 law needs h > 0 and 0 <= theta <= gamma/2")
        if theta >= 0.5 * g - 1e-12:
            raise DivergentSeries("diameters do not shrink at theta = gamma/2; the chaining series diverges")
        scale = h**theta * t ** ((g - 2.0 * theta) / (2.0 * a))
    elif law == "d3":
        if not 0.0 <= theta <= g / a + 1e-12 or tau is None or tau <= 0:
            raise ValueError("d3 law needs tau > 0 and 0 <= theta <= gamma/alpha")
        if theta >= g / a - 1e-12:
            raise DivergentSeries("diameters do not shrink at theta = gamma/alpha; the chaining series diverges")
        scale = tau ** (0.5 * theta) * t ** ((g - a * theta) / (2.0 * a))
    else:
        scale = t**p.kappa
    levels = []
    total = comp = 0.0
    for n in range(scheme.n_max + 1):
        diam = _diameter(p, law, scheme, n, t, h, tau, theta, c_upper)
        term = 2.0 ** (0.5 * n) * diam
        # compensated summation in ascending n
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s
        levels.append((n, diam, term))
        if n >= 2 and term < _SERIES_CUT * total:
            break
    else:
        if scheme.n_max >= _MAX_LEVEL:
            raise DivergentSeries("chaining series did not converge")
    cut = cut_index_n0(p, t, scheme.L)
    return ChainingReport(law, tuple(levels), cut, total, psi(p, t, scheme.L), scale,
                          {"T": scheme.T, "L": scheme.L, "t": t, "h": h, "tau": tau, "theta": theta,
                           "c_upper": c_upper})


def chaining_tail(report, start):
    """Sum of the per-level terms with n >= start."""
    return sum(term for n, _, term in report.per_level if n >= start)


@dataclass(frozen=True)
class SudakovReport:
    kind: str
    delta: float
    count: int
    pairwise_min: float
    value: float
    psi_form: float
    fallback: bool = False
    inputs: dict = field(default_factory=dict, compare=False)


def _pair_metric(p, kind, t, aux, r, q):
    if kind == "d1":
        return d1(p, SpacetimePoint(t, 0.0), SpacetimePoint(t, r), q).value
    if kind == "d2":
        return d2(p, t, aux, 0.0, r, q).value
    if kind == "d3":
        return d3(p, t, aux, 0.0, r, q).value
    raise ValueError(f"unknown metric kind {kind!r}")


def sudakov_lower_bound(p, t, L, kind="d1", aux=None, delta=None, max_lags=50, q=None):
    """Sudakov minoration on the grid x_j = j t^{1/alpha}, |j| <= L / t^{1/alpha}.

    The pairwise metric is computed at up to max_lags distinct lags (all lags
    when there are fewer, otherwise the first max_lags/2 and a geometric
    sample of the rest).  delta defaults to the observed minimum; a supplied
    delta larger than the observed minimum raises SeparationViolated.  When
    L < t^{1/alpha} the two-point family {u(t/2, 0), u(t, 0)} is used instead.
    """
    ell = p.length_scale(t)
    m = int(math.floor(L / ell * (1 + 1e-12)))
    if m < 1:
        dmin = d1(p, SpacetimePoint(0.5 * t, 0.0), SpacetimePoint(t, 0.0), q).value
        dl = dmin if delta is None else delta
        if dl > dmin:
            raise SeparationViolated((0, 1), dmin, dl)
        return SudakovReport(kind, dl, 2, dmin, dl, 0.5 * dl * psi(p, t, L), True,
                             {"t": t, "L": L, "aux": aux})
    n = 2 * m + 1
    top = 2 * m
    if top <= max_lags:
        lags = np.arange(1, top + 1)
    else:
        half = max_lags // 2
        lags = np.unique(np.concatenate([np.arange(1, half + 1),
                                         np.round(np.geomspace(half + 1, top, max_lags - half)).astype(int)]))
    vals = [(int(j), _pair_metric(p, kind, t, aux, j * ell, q)) for j in lags]
    jmin, dmin = min(vals, key=lambda v: v[1])
    dl = dmin if delta is None else delta
    if dl > dmin:
        raise SeparationViolated((0, jmin), dmin, dl)
    return SudakovReport(kind, dl, n, dmin, dl * math.sqrt(math.log2(n)), 0.5 * dl * psi(p, t, L), False,
                         {"t": t, "L": L, "aux": aux, "lags_checked": len(vals)})


def borell_tail(sigma_sq, lam):
    """Borell bound 2 exp(-lam^2 / (2 sigma^2)) on P(|sup - E sup| > lam)."""
    if sigma_sq <= 0 or lam < 0:
        raise ValueError("borell_tail needs sigma_sq > 0 and lam >= 0")
    return 2.0 * math.exp(-lam * lam / (2.0 * sigma_sq))
