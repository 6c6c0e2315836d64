"""Gaussian samplers for the solution field on point sets and regular grids.

Two paths are provided.

Cholesky
    The exact finite-dimensional law, from the covariance

        E[u(t,x) u(s,y)] = c1H int_0^inf e^{-|t-s| xi^a} (1 - e^{-2 (t^s) xi^a})
                                    cos((x-y) xi) xi^{-p} dxi.

Spectral
    On a periodic lattice x_j = x0 + j dx (j < nx) the field is written as

        u(t, x_j) = sum_k A_k(t) cos(xi_k j dx) + B_k(t) sin(xi_k j dx),
        xi_k = 2 pi k / (nx dx),

    with independent pairs (A_k, B_k).  Since cos(xi j dx) is periodic in xi
    with period 2 pi / dx, every frequency of the continuum aliases exactly onto
    one lattice bin; in the default "aliased" mode each bin carries the spectral
    mass of all its aliases, so the lattice marginals have no truncation error.
    The only approximation is the binning of frequencies, which the
    discretization report measures against the exact covariance.  Time slices
    are advanced by an exact Ornstein-Uhlenbeck recursion per frequency
    component.
"""

import csv
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as sp_integrate
from scipy import special as sp_special

from .errors import (EdgeTooClose, NotIntegrable, NyquistViolation, PSDRepairExceeded,
                     TruncationBudgetExceeded)
from .metrics import SpacetimePoint
from .model import variance_law
from .quadrature import KernelSpec, QuadratureSpec, integrate, riesz_identity
from .rng import CHOLESKY, SPECTRAL, check_seed, stream

_DEFAULT_Q = QuadratureSpec()
_MAGIC = b"SFHE1\x00\x00\x00"
_HEADER = struct.Struct("<8sQQQ")
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


# -- index sets ---------------------------------------------------------------

@dataclass(frozen=True)
class PointSet:
    """Ordered finite set of space-time points; duplicates are dropped."""

    points: tuple

    def __post_init__(self):
        pts = []
        seen = set()
        for q in self.points:
            q = q if isinstance(q, SpacetimePoint) else SpacetimePoint(*q)
            if (q.t, q.x) not in seen:
                seen.add((q.t, q.x))
                pts.append(q)
        if not pts:
            raise ValueError("a point set needs at least one point")
        object.__setattr__(self, "points", tuple(pts))

    def __len__(self):
        return len(self.points)

    @property
    def t(self):
        return np.array([q.t for q in self.points])

    @property
    def x(self):
        return np.array([q.x for q in self.points])


@dataclass(frozen=True)
class SpacetimeGrid:
    """Regular grid t0 + i dt (i < nt) by x0 + j dx (j < nx), periodic in x.

    cutoff is the largest frequency represented (only used in truncated mode);
    it defaults to the Nyquist frequency pi / dx.
    """

    t0: float
    dt: float
    nt: int
    x0: float
    dx: float
    nx: int
    cutoff: float = None

    def __post_init__(self):
        if self.nt < 1 or self.nx < 2:
            raise ValueError("grid needs nt >= 1 and nx >= 2")
        if self.t0 < 0 or not (self.dt > 0 or self.nt == 1):
            raise ValueError("grid needs t0 >= 0 and dt > 0 (or a single slice)")
        if not self.dx > 0:
            raise ValueError("grid needs dx > 0")
        if self.cutoff is not None and self.cutoff > self.nyquist * (1 + 1e-12):
            raise NyquistViolation(f"cutoff {self.cutoff} exceeds the Nyquist frequency {self.nyquist}")

    @property
    def nyquist(self):
        return math.pi / self.dx

    @property
    def resolution(self):
        """Spacing of the lattice frequencies, 2 pi / period."""
        return 2.0 * math.pi / self.period

    @property
    def period(self):
        return self.nx * self.dx

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.nt)

    @property
    def positions(self):
        return self.x0 + self.dx * np.arange(self.nx)

    def points(self):
        """Time-major point set of the grid."""
        return PointSet(tuple(SpacetimePoint(t, x) for t in self.times for x in self.positions))


@dataclass(frozen=True)
class FieldSample:
    """One realization. values has shape (nt, nx) on a grid, (npoints,) on a point set."""

    values: np.ndarray
    seed: int
    method: str
    replicate: int
    index: object = field(repr=False)


# -- exact covariance and the Cholesky path -----------------------------------

@lru_cache(maxsize=1 << 16)
def _covariance(p, t, s, r, q):
    lo, lag = min(t, s), abs(t - s)
    if lo == 0:
        return 0.0, 0.0
    if lag == 0 and r == 0:
        return variance_law(p, t), 1e-15 * variance_law(p, t)
    if r > 0:
        # var - cov <= c1H int (1 - cos r xi) xi^{-p} = c1H R r^gamma: negligible lags collapse to 0
        gap = p.c1H * riesz_identity(p.gamma_exp, r)
        if gap <= 1e-16 * variance_law(p, lo):
            c, e = _covariance(p, t, s, 0.0, q)
            return c, e + gap
    k = KernelSpec(gamma=p.gamma_exp, alpha=p.alpha, exp_terms=((2.0, lo, 1),), damping=lag,
                   signed_cos=r if r > 0 else None, scale=p.c1H)
    return tuple(integrate(k, q))


def covariance(p, a, b, q=None):
    """(E[u(a) u(b)], error bound) for two space-time points."""
    return _covariance(p, float(a.t), float(b.t), abs(float(a.x) - float(b.x)), q or _DEFAULT_Q)


def covariance_matrix(p, pts, q=None, return_error=False):
    """Covariance matrix of u on a point set; the diagonal is the closed-form variance."""
    q = q or _DEFAULT_Q
    t, x = pts.t, pts.x
    n = len(pts)
    c = np.empty((n, n))
    err = 0.0
    for i in range(n):
        for j in range(i, n):
            v, e = _covariance(p, t[i], t[j], abs(x[i] - x[j]), q)
            c[i, j] = c[j, i] = v
            err = max(err, e)
    return (c, err) if return_error else c


def psd_factor(c, start=1e-14, cap=1e-6):
    """Lower Cholesky factor with doubling diagonal jitter; zero-variance rows stay zero.

    Returns (factor, jitter).  Raises PSDRepairExceeded when the jitter needed
    exceeds cap times the largest diagonal entry.
    """
    live = np.diag(c) > 0
    out = np.zeros_like(c)
    if not live.any():
        return out, 0.0
    sub = c[np.ix_(live, live)]
    scale = sub.diagonal().max()
    jitter = 0.0
    eps = start * scale
    while True:
        try:
            f = np.linalg.cholesky(sub + jitter * np.eye(sub.shape[0]))
            break
        except np.linalg.LinAlgError:
            jitter = eps
            eps *= 2.0
            if jitter > cap * scale:
                raise PSDRepairExceeded(f"jitter {jitter:.3g} exceeds {cap:g} x max diagonal {scale:.3g}")
    out[np.ix_(live, live)] = f
    return out, jitter


def sample_cholesky(p, pts, seed, n_replicates, q=None, first_replicate=0, factor=None):
    """Yield FieldSample replicates of u on pts (exact Gaussian law)."""
    seed = check_seed(seed)
    if factor is None:
        factor, _ = psd_factor(covariance_matrix(p, pts, q))
    n = factor.shape[0]
    for r in range(first_replicate, first_replicate + n_replicates):
        z = stream(seed, CHOLESKY, r).standard_normal(n)
        yield FieldSample(factor @ z, seed, "cholesky", r, pts)


# -- spectral path ------------------------------------------------------------

def _tail_mass(p, t, X):
    """int_X^inf c1H (1 - e^{-2 t xi^a}) xi^{-p} dxi in closed form."""
    g, a = p.gamma_exp, p.alpha
    full = X ** (-g) / g
    z = 2.0 * t * X**a
    if t == 0:
        return 0.0
    if z > 700:
        return p.c1H * full
    # int_X^inf e^{-2t xi^a} xi^{-p} = (2t)^{g/a} / a * Gamma(-g/a, z), Gamma(s, z) from s + 1 by recurrence
    s = -g / a
    upper = (sp_special.gammaincc(s + 1.0, z) * sp_special.gamma(s + 1.0) - z**s * math.exp(-z)) / s
    return p.c1H * (full - (2.0 * t) ** (g / a) / a * upper)


def _bin_mass(p, t, lo, hi):
    """Mass of f_t over [lo, hi] elementwise, 16-point Gauss-Legendre per interval."""
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    xi = mid[..., None] + half[..., None] * _GL_NODES
    f = p.c1H * -np.expm1(-2.0 * t * xi**p.alpha) * xi ** (-p.p)
    return half * (f @ _GL_WEIGHTS)


def _origin_mass(p, t, a):
    f = lambda xi: p.c1H * -math.expm1(-2.0 * t * xi**p.alpha) * xi ** (-p.p) if xi > 0 else 0.0
    return sp_integrate.quad(f, 0.0, a, epsabs=0.0, epsrel=1e-12, limit=200)[0]


@dataclass
class SpectralPlan:
    """Per-bin variances and OU rates of the lattice representation of u.

    ou_var[i, j, k] is the variance at time slice i of the component of bin k
    coming from half-period j (only the components whose time correlation over
    one step exceeds the floor are evolved as OU states); white_var[i, k] holds
    every other component, drawn independently per slice.
    """

    grid: SpacetimeGrid
    mode: str
    freqs: np.ndarray
    ou_rate: np.ndarray
    ou_var: np.ndarray
    white_var: np.ndarray
    remainder_bound: float
    truncated_mass: np.ndarray
    dropped_corr: np.ndarray

    @property
    def variance(self):
        """Lattice variance per time slice."""
        return self.ou_var.sum(axis=(1, 2)) + self.white_var.sum(axis=1)

    def bin_weights(self, i, i2):
        """Per-bin covariance weights between slices i and i2."""
        if i == i2:
            return self.ou_var[i].sum(axis=0) + self.white_var[i]
        a, b = min(i, i2), max(i, i2)
        lag = self.grid.dt * (b - a)
        return (np.exp(-lag * self.ou_rate) * self.ou_var[a]).sum(axis=0)

    def covariance(self, i, i2, lags):
        """Exact covariance of the sampled lattice field at spatial lags (in x units)."""
        w = self.bin_weights(i, i2)
        lags = np.atleast_1d(np.asarray(lags, dtype=float))
        return np.cos(np.outer(lags, self.freqs)) @ w


def spectral_plan(p, grid, mode="aliased", alias_orders=None, corr_floor=1e-12, budget=0.01):
    """Build the per-bin variances of the spectral sampler.

    alias_orders half-periods of width pi/dx are resolved bin by bin (by default
    the fewest, at most 64, whose remainder bound is below 1e-3 of the
    variance); the mass
    beyond them is spread evenly over the bins, with a total-variation bound on
    the resulting covariance error (remainder_bound).  In truncated mode only
    frequencies up to grid.cutoff are kept and the discarded tail mass must be
    below budget times the variance at the last slice.
    """
    if mode not in ("aliased", "truncated"):
        raise ValueError(f"unknown spectral mode {mode!r}")
    n = grid.nx
    Xi = grid.nyquist
    dxi = grid.resolution
    nk = n // 2 + 1
    freqs = dxi * np.arange(nk)
    lo = np.maximum(freqs - 0.5 * dxi, 0.0)
    hi = np.minimum(freqs + 0.5 * dxi, Xi)
    times = grid.times
    nt = grid.nt
    if mode == "truncated":
        cut = grid.cutoff or Xi
        hi = np.minimum(hi, cut)
        lo = np.minimum(lo, hi)
        J = 1
    else:
        if grid.cutoff is not None and grid.cutoff != Xi:
            raise ValueError("aliased mode always uses the full Nyquist band")
        J = _alias_orders(p, Xi, times[-1]) if alias_orders is None else max(int(alias_orders), 1)
    width = (hi - lo) / Xi
    remainder = np.array([_tail_mass(p, t, J * Xi) for t in times]) if mode == "aliased" else np.zeros(nt)
    truncated = np.zeros(nt)
    if mode == "truncated":
        cut = grid.cutoff or Xi
        truncated = np.array([_tail_mass(p, t, cut) for t in times])
        vmax = variance_law(p, times[-1])
        if vmax > 0 and truncated[-1] > budget * vmax:
            raise TruncationBudgetExceeded(
                f"spectral tail mass {truncated[-1]:.4g} beyond cutoff exceeds {budget:g} x variance {vmax:.4g}")
    # half-periods whose one-step correlation stays above the floor are evolved as OU states,
    # the rest are drawn white in time
    if nt > 1:
        J_ou = 1
        while J_ou < J and math.exp(-grid.dt * (J_ou * Xi) ** p.alpha) > corr_floor:
            J_ou += 1
    else:
        J_ou = 0
    ou_rate = np.empty((J_ou, nk))
    ou_var = np.zeros((nt, J_ou, nk))
    white = remainder[:, None] * width
    dropped = np.array([math.exp(-grid.dt * (J * Xi) ** p.alpha) * remainder[i] for i in range(nt - 1)])
    for j in range(J):
        # half-period j is mapped onto [0, Xi] forward (j even) or reflected (j odd)
        a, b = (j * Xi + lo, j * Xi + hi) if j % 2 == 0 else ((j + 1) * Xi - hi, (j + 1) * Xi - lo)
        rate = (0.5 * (a + b)) ** p.alpha
        if j == 0:
            rate[0] = (0.25 * dxi) ** p.alpha
        var = np.zeros((nt, nk))
        for i, t in enumerate(times):
            if t > 0:
                var[i] = _bin_mass(p, t, a, b)
                if j == 0:
                    var[i, 0] = _origin_mass(p, t, hi[0])
        if j < J_ou:
            ou_rate[j] = rate
            ou_var[:, j] = var
        else:
            white += var
            decay = np.exp(-grid.dt * rate)
            for i in range(nt - 1):
                dropped[i] += decay @ var[i]
    tv = 2.0 * Xi * p.c1H * (J * Xi) ** (-p.p) if mode == "aliased" else 0.0
    return SpectralPlan(grid, mode, freqs, ou_rate, ou_var, white, tv, truncated, dropped)


def _alias_orders(p, Xi, t, rel=1e-3):
    """Smallest number of resolved half-periods (2..64) whose remainder bound is below rel x variance."""
    target = rel * variance_law(p, t) if t > 0 else 1.0
    J = (2.0 * p.c1H * Xi ** (-p.gamma_exp) / target) ** (1.0 / p.p)
    return int(min(max(math.ceil(J), 2), 64))


def _synthesize(a, b, n):
    """Lattice field sum_k a_k cos(xi_k j dx) + b_k sin(xi_k j dx) via an inverse real FFT."""
    z = 0.5 * n * (a - 1j * b)
    z[0] = n * a[0]
    if n % 2 == 0:
        z[-1] = n * a[-1]
    return np.fft.irfft(z, n)


def sample_spectral_grid(p, grid, seed, n_replicates, mode="aliased", plan=None, first_replicate=0):
    """Yield FieldSample replicates of u on a periodic space-time grid."""
    seed = check_seed(seed)
    plan = plan or spectral_plan(p, grid, mode)
    nt, nx = grid.nt, grid.nx
    sd0 = np.sqrt(plan.ou_var[0]) if nt else None
    phi = np.exp(-grid.dt * plan.ou_rate)
    innov = [None] + [np.sqrt(np.maximum(plan.ou_var[i] - phi**2 * plan.ou_var[i - 1], 0.0)) for i in range(1, nt)]
    white_sd = np.sqrt(plan.white_var)
    J_ou, nk = plan.ou_var.shape[1:]
    for r in range(first_replicate, first_replicate + n_replicates):
        rng = stream(seed, SPECTRAL, r)
        out = np.empty((nt, nx))
        state = None
        for i in range(nt):
            z = rng.standard_normal((2, J_ou, nk))
            w = rng.standard_normal((2, nk))
            state = sd0 * z if i == 0 else phi * state + innov[i] * z
            coef = state.sum(axis=1) + white_sd[i] * w
            out[i] = _synthesize(coef[0], coef[1], nx)
        yield FieldSample(out, seed, "spectral", r, grid)


@dataclass(frozen=True)
class DiscretizationReport:
    """Largest covariance error of a spectral plan over the checked (lag, slice pair) set."""

    mode: str
    max_abs_error: float
    variance: float
    quadrature_error: float
    remainder_bound: float
    truncated_mass: float
    checked_lags: tuple
    checked_pairs: tuple

    @property
    def bound(self):
        """Total certified error at the checked entries."""
        return self.max_abs_error + self.quadrature_error

    @property
    def relative(self):
        return self.bound / self.variance if self.variance > 0 else 0.0


def discretization_report(p, plan, lags=None, pairs=None, q=None):
    """Compare the sampler covariance with the exact covariance on chosen entries.

    lags are integer lattice offsets (default: a geometric set up to period/8);
    pairs are slice index pairs (default: each slice with itself and its successor).
    """
    q = q or _DEFAULT_Q
    g = plan.grid
    if lags is None:
        top = max(g.nx // 8, 1)
        lags = np.unique(np.concatenate([[0], np.round(np.geomspace(1, top, 24)).astype(int)]))
    lags = tuple(int(m) for m in lags)
    if pairs is None:
        pairs = [(i, i) for i in range(g.nt)] + [(i, i + 1) for i in range(g.nt - 1)]
    pairs = tuple(tuple(pr) for pr in pairs)
    times = g.times
    worst = qerr = 0.0
    for i, i2 in pairs:
        mine = plan.covariance(i, i2, np.array(lags) * g.dx)
        for m, v in zip(lags, mine):
            ref, e = _covariance(p, float(times[i]), float(times[i2]), m * g.dx, q)
            worst = max(worst, abs(v - ref))
            qerr = max(qerr, e)
    return DiscretizationReport(plan.mode, worst, variance_law(p, times[-1]), qerr, plan.remainder_bound,
                                float(plan.truncated_mass[-1]), lags, pairs)


# -- semi-norm ------------------------------------------------------------------

def _seminorm_power(p):
    beta = 4.0 * p.hurst + p.alpha - 3.0
    if beta <= 0:
        raise NotIntegrable("0", beta - 1.0)
    return beta


def seminorm_weights(p, dx, h_max):
    """Cell weights int |h|^{2H-2} over the cells of the offsets m dx, m = 1..M."""
    M = int(round(h_max / dx))
    e = 2.0 * p.hurst - 1.0
    edges = (np.arange(M + 1) + 0.5) * dx
    edges[-1] = M * dx
    return (edges[1:] ** e - edges[:-1] ** e) / e


def _smooth_part_integral(p, t, a, q):
    """int_0^a G(h) h^{2H-2} dh with G(h) = 2 c1H int e^{-2t xi^a}(1 - cos h xi) xi^{-p}."""

    def G(h):
        if h == 0:
            return 0.0
        k = KernelSpec(gamma=p.gamma_exp, alpha=p.alpha, cos_freqs=(h,), damping=2.0 * t, scale=2.0 * p.c1H)
        return integrate(k, q).value * h ** (2.0 * p.hurst - 2.0)

    return sp_integrate.quad(G, 0.0, a, epsrel=1e-9, limit=200)[0]


def seminorm_expectation(p, t, h_max, h_min=0.0, q=None):
    """E int_{h_min <= |h| <= h_max} |u(t,x+h) - u(t,x)|^2 |h|^{2H-2} dh, by quadrature.

    Uses d1(h)^2 = 2 c1H (R h^gamma - G(h)) where R h^gamma is the closed-form
    integral of (1 - cos h xi) xi^{-p} and G is smooth at h = 0.
    """
    q = q or _DEFAULT_Q
    beta = _seminorm_power(p)
    R = riesz_identity(p.gamma_exp, 1.0)
    power = 4.0 * p.c1H * R * (h_max**beta - h_min**beta) / beta
    return power - 2.0 * (_smooth_part_integral(p, t, h_max, q) - _smooth_part_integral(p, t, h_min, q))


def completion_factor(p, t, dx, q=None):
    """Ratio of E[part |h| < dx/2] to E[(u(x+dx) - u(x))^2 + (u(x-dx) - u(x))^2]."""
    from .metrics import d1
    near = d1(p, SpacetimePoint(t, 0.0), SpacetimePoint(t, dx), q).value ** 2
    return seminorm_expectation(p, t, 0.5 * dx, q=q) / (2.0 * near)


def seminorm_profile(p, values, dx, h_max, t, indices=None, completion=None):
    """Semi-norm estimate N^2 at lattice indices of one slice.

    Offsets m dx with 1 <= m <= M = h_max/dx enter with their cell weights.  The
    part |h| < dx/2 is extrapolated from the nearest-neighbour increments,
    scaled by completion (default completion_factor) so that it has the exact
    expectation; a field constant in x therefore gives 0.
    """
    values = np.asarray(values, dtype=float)
    M = int(round(h_max / dx))
    if M < 64 or dx > h_max / 64 * (1 + 1e-12):
        raise ValueError("semi-norm needs grid spacing <= h_max/64")
    n = values.shape[-1]
    idx = np.arange(M, n - M) if indices is None else np.asarray(indices)
    if idx.size and (idx.min() < M or idx.max() >= n - M):
        raise EdgeTooClose(f"points must lie at least h_max={h_max} from the grid edge")
    if completion is None:
        completion = completion_factor(p, t, dx)
    w = seminorm_weights(p, dx, h_max)
    base = values[..., idx]
    out = np.zeros(base.shape)
    for m in range(1, M + 1):
        sq = (values[..., idx + m] - base) ** 2 + (values[..., idx - m] - base) ** 2
        if m == 1:
            out = out + completion * sq
        out = out + w[m - 1] * sq
    return out


def seminorm_estimate(p, sample, x, h_max, slice_index=-1):
    """N^2_{1/2-H} u(t, x) from a grid FieldSample."""
    g = sample.index
    j = (x - g.x0) / g.dx
    ji = int(round(j))
    if abs(j - ji) > 1e-9:
        raise ValueError("x must be a grid point")
    t = float(g.times[slice_index])
    return float(seminorm_profile(p, sample.values[slice_index], g.dx, h_max, t, [ji])[0])


def seminorm_mean(p, t, dx, h_max):
    """Exact expectation of the discretized estimator of seminorm_profile."""
    from .metrics import d1
    w = seminorm_weights(p, dx, h_max)
    o = SpacetimePoint(t, 0.0)
    sq = np.array([d1(p, o, SpacetimePoint(t, m * dx)).value ** 2 for m in range(1, len(w) + 1)])
    return seminorm_expectation(p, t, 0.5 * dx) + 2.0 * float(w @ sq)


# -- serialization ---------------------------------------------------------------

def _coords(sample):
    idx = sample.index
    if isinstance(idx, SpacetimeGrid):
        tt, xx = np.meshgrid(idx.times, idx.positions, indexing="ij")
        return tt.ravel(), xx.ravel()
    return idx.t, idx.x


def write_csv(samples, path):
    """Write samples as rows (t, x, value, replicate, seed) to a path or an open text file."""
    if hasattr(path, "write"):
        _csv_rows(samples, path)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _csv_rows(samples, fh)


def _csv_rows(samples, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "x", "value", "replicate", "seed"])
    for s in samples:
        tt, xx = _coords(s)
        for a, b, v in zip(tt, xx, np.ravel(s.values)):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(v)), s.replicate, s.seed])


def write_binary(sample, path):
    """32-byte header (magic, nt, nx, seed) then little-endian float64, row-major time x space."""
    v = np.atleast_2d(np.asarray(sample.values, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, v.shape[0], v.shape[1], sample.seed))
        fh.write(np.ascontiguousarray(v).tobytes())


def read_binary(path):
    """Return (values, seed) from a binary field dump."""
    with open(path, "rb") as fh:
        magic, nt, nx, seed = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError("not a field dump (bad magic)")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nt * nx:
        raise ValueError("truncated field dump")
    return data.reshape(nt, nx), seed
