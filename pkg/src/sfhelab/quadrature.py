"""Certified quadrature for the power-law Fourier kernels of the model.

Integrands have the form

    scale * xi^{-gamma-1} * prod_i (1 - cos a_i xi) * prod_j (1 - exp(-c_j t_j xi^alpha))^{m_j}
          * exp(-damping xi^alpha) * cos(b xi) * weight(xi)

on (0, inf).  The range is split into

* a head [0, eps] bounded analytically from the small-argument expansion,
* dyadic panels [eps, xi0] and oscillation-resolving panels [xi0, X] integrated
  with adaptive 21-point Gauss-Kronrod,
* an analytic tail [X, inf): once every exponential factor is saturated the
  trigonometric product is expanded into a cosine sum and each term
  int_X^inf xi^{-s} cos(w xi) dxi is evaluated in closed form (asymptotic
  series with a rigorous remainder, or the Riesz identity for small w X).

With a damping factor the tail is cut where the exponential bound is negligible.
"""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import NotIntegrable, ToleranceNotMet
from .special import gamma as gamma_fn

_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525478020, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
# 21 nodes on [-1, 1]; Gauss weights live on the odd-indexed Kronrod nodes.
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG_FULL = np.zeros(21)
for _i, _w in enumerate(_WG):
    _WG_FULL[2 * _i + 1] = _w
    _WG_FULL[21 - 2 - 2 * _i] = _w

_SAT = 40.0  # exp(-40) ~ 4e-18: an exponential factor is saturated beyond this argument
_ASYMPTOTIC_START = 40.0
_SPLIT_FROM = 20000  # oscillation panels beyond which far-field splitting is tried first


def versine(x):
    """1 - cos(x) without cancellation near zero."""
    s = np.sin(0.5 * np.asarray(x, dtype=float))
    return 2.0 * s * s


def one_minus_exp(x):
    """1 - exp(-x) without cancellation near zero."""
    return -np.expm1(-np.asarray(x, dtype=float))


def gk21(f, a, b):
    """Vectorized 21-point Gauss-Kronrod rule on panels [a_i, b_i].

    Returns (kronrod estimates, |kronrod - gauss|) per panel.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = f(x)
    k = half * (fx @ _WK)
    g = half * (fx @ _WG_FULL)
    return k, np.abs(k - g)


@lru_cache(maxsize=None)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def riesz_identity(gamma, xi):
    """int_0^inf (1 - cos(xi z)) z^{-1-gamma} dz = Gamma(1-gamma)/gamma cos(pi gamma/2) |xi|^gamma."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("riesz identity needs 0 < gamma < 1")
    return gamma_fn(1.0 - gamma) / gamma * math.cos(0.5 * math.pi * gamma) * abs(xi) ** gamma


def _series_head(s, y, cosine):
    """int_0^y v^{-s} phi(v) dv for y <= 1, phi = 1 - cos (cosine=False) or cos."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    fact = 1.0
    for k in range(0, 14):
        if k > 0:
            fact *= (2 * k - 1) * (2 * k)
        if not cosine and k == 0:
            continue
        sign = (-1.0) ** k if cosine else (-1.0) ** (k + 1)
        e = 2 * k + 1 - s
        out += sign * y**e / (fact * e)
    return out


def _finite_part(s, y, cosine):
    """int_0^y v^{-s} phi(v) dv for y up to the asymptotic threshold."""
    y = np.asarray(y, dtype=float)
    y1 = np.minimum(y, 1.0)
    out = _series_head(s, y1, cosine)
    rest = y > 1.0
    if np.any(rest):
        yr = y[rest]
        npan, order = 48, 20
        xg, wg = _leggauss(order)
        edges = 1.0 + (yr[:, None] - 1.0) * np.linspace(0.0, 1.0, npan + 1)[None, :]
        lo, hi = edges[:, :-1], edges[:, 1:]
        half = 0.5 * (hi - lo)
        v = (0.5 * (hi + lo))[..., None] + half[..., None] * xg
        phi = np.cos(v) if cosine else versine(v)
        vals = (phi * v ** (-s)) @ wg * half
        out[rest] += vals.sum(axis=1)
    return out


def power_cos_tail(s, omega, x):
    """int_x^inf u^{-s} cos(omega u) du and an error bound.

    Valid for s > 1 (any omega >= 0) and 0 < s < 1 (omega > 0), with x > 0.
    Vectorized over omega and x.
    """
    if s <= 0 or s == 1.0:
        raise ValueError("power_cos_tail needs s > 0, s != 1")
    omega, x = np.broadcast_arrays(np.abs(np.asarray(omega, dtype=float)), np.asarray(x, dtype=float))
    omega = omega.astype(float).copy()
    x = x.astype(float).copy()
    val = np.zeros(omega.shape)
    err = np.zeros(omega.shape)
    y = omega * x

    zero = omega == 0.0
    if np.any(zero):
        if s <= 1.0:
            raise NotIntegrable("inf", -s)
        val[zero] = x[zero] ** (1.0 - s) / (s - 1.0)
        err[zero] = 1e-16 * np.abs(val[zero])

    big = (~zero) & (y >= _ASYMPTOTIC_START)
    if np.any(big):
        w, xb = omega[big], x[big]
        z = -1j / (w * xb)
        term = np.ones(w.shape, dtype=complex)
        acc = np.zeros(w.shape, dtype=complex)
        poch = 1.0
        K = 24
        for k in range(K):
            acc += term
            term = term * (s + k) * z
            poch *= s + k
        val[big] = np.real(1j * np.exp(1j * w * xb) * xb ** (-s) / w * acc)
        err[big] = poch / w**K * xb ** (1.0 - s - K) / (s + K - 1.0) + 1e-15 * np.abs(val[big])

    small = (~zero) & (~big)
    if np.any(small):
        w, ys = omega[small], y[small]
        if s > 1.0:
            g = s - 1.0
            rz = gamma_fn(1.0 - g) / g * math.cos(0.5 * math.pi * g)
            fin = _finite_part(s, ys, cosine=False)
            head = ys ** (1.0 - s) / (s - 1.0)
            core = head - rz + fin
            scale = w ** (s - 1.0)
            val[small] = scale * core
            err[small] = 1e-13 * scale * (np.abs(head) + rz + np.abs(fin))
        else:
            full = gamma_fn(1.0 - s) * math.sin(0.5 * math.pi * s)
            fin = _finite_part(s, ys, cosine=True)
            scale = w ** (s - 1.0)
            val[small] = scale * (full - fin)
            err[small] = 1e-13 * scale * (full + np.abs(fin))
    if val.ndim == 0:
        return float(val), float(err)
    return val, err


def cosine_expansion(cos_freqs, signed_cos=None, tol=1e-12):
    """Expand prod_i (1 - cos a_i x) [* cos b x] into sum_w c_w cos(w x)."""
    terms = {0.0: 1.0}
    factors = [(a, -1.0) for a in cos_freqs]
    if signed_cos is not None:
        factors.append((signed_cos, None))
    for a, mode in factors:
        new = {}
        for w, c in terms.items():
            parts = []
            if mode is not None:
                parts.append((w, c))
                parts.append((abs(w - a), -0.5 * c))
                parts.append((w + a, -0.5 * c))
            else:
                parts.append((abs(w - a), 0.5 * c))
                parts.append((w + a, 0.5 * c))
            for ww, cc in parts:
                key = None
                for k in new:
                    if abs(k - ww) <= tol * max(1.0, abs(ww)):
                        key = k
                        break
                if key is None:
                    new[ww] = cc
                else:
                    new[key] += cc
        terms = new
    return {w: c for w, c in terms.items() if c != 0.0}


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_periods: int = 10**6
    max_rounds: int = 60

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_periods < 16:
            raise ValueError("max_periods must be >= 16")

    def replace(self, **kw):
        d = dict(rel_tol=self.rel_tol, abs_tol=self.abs_tol, max_periods=self.max_periods, max_rounds=self.max_rounds)
        d.update(kw)
        return QuadratureSpec(**d)


@dataclass(frozen=True)
class KernelSpec:
    """Description of one integrand of the kernel family.

    exp_terms holds (c, t, m) triples for factors (1 - exp(-c t xi^alpha))^m.
    weight, when given, is a vectorized extra factor; weight_head = (K, q)
    bounds it by K xi^q near zero, weight_tail lists (coefficient, power)
    pairs of its expansion at infinity, and weight_residual = (K, r) bounds
    |weight - expansion| by K xi^r for xi >= 1.
    """

    gamma: float
    alpha: float = 1.5
    cos_freqs: Tuple[float, ...] = ()
    exp_terms: Tuple[Tuple[float, float, int], ...] = ()
    damping: float = 0.0
    signed_cos: Optional[float] = None
    scale: float = 1.0
    weight: Optional[Callable] = field(default=None, compare=False)
    weight_head: Tuple[float, float] = (1.0, 0.0)
    weight_tail: Tuple[Tuple[float, float], ...] = ((1.0, 0.0),)
    weight_residual: Tuple[float, float] = (0.0, -1.0)

    def is_zero(self):
        if self.scale == 0.0:
            return True
        if any(a == 0.0 for a in self.cos_freqs):
            return True
        return any(m > 0 and (c * t == 0.0) for c, t, m in self.exp_terms)

    def head_exponent(self):
        return (-self.gamma - 1.0 + 2.0 * len(self.cos_freqs)
                + self.alpha * sum(m for _, _, m in self.exp_terms) + self.weight_head[1])

    def tail_exponent(self):
        lead = max(q for _, q in self.weight_tail) if self.weight_tail else 0.0
        return -self.gamma - 1.0 + lead

    def check_integrable(self):
        b0 = self.head_exponent()
        if b0 <= -1.0:
            raise NotIntegrable("0", b0)
        if self.damping <= 0.0:
            binf = self.tail_exponent()
            if binf >= -1.0:
                raise NotIntegrable("inf", binf)

    def evaluate(self, xi):
        """Integrand values at xi (> 0)."""
        xi = np.asarray(xi, dtype=float)
        b0 = self.head_exponent()
        out = self.scale * xi**b0
        for a in self.cos_freqs:
            out = out * (versine(a * xi) / (xi * xi))
        if self.exp_terms or self.damping:
            xa = xi**self.alpha
            for c, t, m in self.exp_terms:
                out = out * (one_minus_exp(c * t * xa) / xa) ** m
            if self.damping:
                out = out * np.exp(-self.damping * xa)
        if self.signed_cos is not None:
            out = out * np.cos(self.signed_cos * xi)
        if self.weight is not None:
            out = out * self.weight(xi) / xi ** self.weight_head[1]
        return out


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    panels: int = 0

    def __iter__(self):
        yield self.value
        yield self.error


def _head_constant(k):
    c = abs(k.scale) * k.weight_head[0]
    for a in k.cos_freqs:
        c *= 0.5 * a * a
    for cc, t, m in k.exp_terms:
        c *= (cc * t) ** m
    return c


def _head_edges(eps, xi0):
    edges = []
    x = xi0
    while x > eps:
        edges.append(x)
        x *= 0.5
    edges.append(eps)
    return np.array(edges[::-1])


def _geom_edges(lo, hi, ratio=2.0):
    edges = [lo]
    x = lo
    while x < hi:
        x = min(ratio * x, hi)
        edges.append(x)
    return np.array(edges)


def _osc_edges(lo, hi, wmax):
    """Geometric edges refined so no panel is wider than pi / wmax."""
    edges = _geom_edges(lo, hi)
    if wmax <= 0:
        return edges
    width = math.pi / wmax
    pieces = [edges[:1]]
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((b - a) / width)))
        pieces.append(np.linspace(a, b, n + 1)[1:])
    return np.concatenate(pieces)


def _osc_count(lo, hi, wmax):
    return wmax * max(hi - lo, 0.0) / math.pi + math.log2(max(hi / lo, 1.0)) + 1


def _pow(x, a):
    """x**a saturated at 1e300 instead of overflowing."""
    return math.exp(min(a * math.log(x), 690.0))


def _tail(k, X):
    """Analytic tail over [X, inf) for an undamped kernel (factors saturated)."""
    s = k.gamma + 1.0
    terms = cosine_expansion(k.cos_freqs, k.signed_cos)
    ws = np.array(list(terms.keys()))
    cs = np.array(list(terms.values()))
    val = 0.0
    err = 0.0
    for wc, q in k.weight_tail:
        v, e = power_cos_tail(s - q, ws, X)
        val += wc * float(np.dot(cs, v))
        err += abs(wc) * float(np.dot(np.abs(cs), e))
    # unsaturated exponential factors and weight residual
    bound_mass = 2.0 ** len(k.cos_freqs) * X ** (-k.gamma) / k.gamma
    for c, t, m in k.exp_terms:
        err += m * math.exp(-c * t * _pow(X, k.alpha)) * bound_mass
    rk, rp = k.weight_residual
    if rk:
        e = rk * 2.0 ** len(k.cos_freqs) * X ** (rp - k.gamma) / (k.gamma - rp)
        err += e
    return k.scale * val, abs(k.scale) * err


def _damped_cut(k, start, target):
    """Smallest X >= start (by factor 1.25 steps) with damped tail bound <= target."""
    a, al = k.damping, k.alpha
    c = abs(k.scale) * 2.0 ** len(k.cos_freqs) * k.weight_head[0] * max(1.0, max((abs(wc) for wc, _ in k.weight_tail), default=1.0))
    X = max(start, 1.0)
    for _ in range(400):
        bound = c * X ** (-k.gamma - 1.0) * math.exp(-a * _pow(X, al)) / (a * al * X ** (al - 1.0))
        if bound <= target:
            return X, bound
        X *= 1.25
    return X, bound


def integrate(k, spec=None):
    """Integrate a :class:`KernelSpec`; returns :class:`QuadResult` (value, error)."""
    spec = spec or QuadratureSpec()
    if k.is_zero():
        return QuadResult(0.0, 0.0, 0)
    k.check_integrable()
    resid_target = 1e-3 * spec.abs_tol
    if k.weight_residual[0] and k.damping <= 0:
        # the weight expansion residual decays slowly; size its cut relative to a rough value
        rough = _integrate(k, spec.replace(rel_tol=1e-3, abs_tol=max(spec.abs_tol, 1e-8)), 1e-5)
        resid_target = max(0.05 * spec.rel_tol * abs(rough.value), resid_target)
    return _integrate(k, spec, resid_target)


def _integrate(k, spec, resid_target):
    al = k.alpha
    freqs = [abs(a) for a in k.cos_freqs] + ([abs(k.signed_cos)] if k.signed_cos else [])
    wmax = sum(freqs)
    fmax = max(freqs) if freqs else 0.0
    scales = [1.0]
    if fmax > 0:
        scales.append(1.0 / fmax)
    for c, t, m in k.exp_terms:
        scales.append((c * t) ** (-1.0 / al))
    if k.damping:
        scales.append(k.damping ** (-1.0 / al))
    xi0 = min(scales)

    # head: |integral over [0, eps]| <= C eps^{b0+1} / (b0+1)
    b0 = k.head_exponent()
    hc = _head_constant(k)
    head_target = 1e-3 * spec.abs_tol
    eps = (head_target * (b0 + 1.0) / hc) ** (1.0 / (b0 + 1.0)) if hc > 0 else xi0
    eps = min(max(eps, 1e-300), xi0)
    head_err = hc * eps ** (b0 + 1.0) / (b0 + 1.0)

    if k.damping > 0:
        sat = [(_SAT / (c * t)) ** (1.0 / al) for c, t, m in k.exp_terms]
        X, tail_err = _damped_cut(k, max([xi0] + sat), 1e-3 * spec.abs_tol)
        tail_val = 0.0
    else:
        sat = [(_SAT / (c * t)) ** (1.0 / al) for c, t, m in k.exp_terms]
        X = max([xi0, 1.0] + sat)
        if fmax > 0:
            X = max(X, 4.0 * math.pi / fmax) if wmax * X / math.pi < spec.max_periods / 4 else X
        rk, rp = k.weight_residual
        if rk:
            # push X out until the weight-expansion residual is small
            need = (resid_target * (k.gamma - rp) / (rk * abs(k.scale) * 2.0 ** len(k.cos_freqs))) ** (1.0 / (rp - k.gamma))
            X = max(X, min(need, 1e7))
        tail_val, tail_err = _tail(k, X)

    count = _osc_count(xi0, X, wmax)
    if count > _SPLIT_FROM and k.weight is None:
        try:
            f, edges, tv, te, osc_err = _split_far_field(k, spec, eps, xi0, X, wmax, resid_target)
            return _adapt(f, edges, spec, head_err, tv, te, osc_err)
        except ToleranceNotMet:
            if count > spec.max_periods:
                raise
    elif count > spec.max_periods:
        raise ToleranceNotMet(f"{count:.3g} oscillation panels exceed max_periods={spec.max_periods}")
    edges = np.concatenate([_head_edges(eps, xi0)[:-1], _osc_edges(xi0, X, wmax)])
    return _adapt(k.evaluate, edges, spec, head_err, tail_val, tail_err, 0.0)


def _adapt(f, edges, spec, head_err, tail_val, tail_err, osc_err):
    """Adaptive Gauss-Kronrod over the panels until the total error meets the budget."""
    lo, hi = edges[:-1], edges[1:]
    vals, errs = gk21(f, lo, hi)
    for _ in range(spec.max_rounds):
        total = float(math.fsum(vals)) + tail_val
        budget = max(spec.rel_tol * abs(total), spec.abs_tol)
        err_total = float(errs.sum()) + head_err + tail_err + osc_err
        if osc_err > budget:
            raise ToleranceNotMet(f"far-field oscillation bound {osc_err:.3g} exceeds budget {budget:.3g}")
        if err_total <= budget:
            return QuadResult(total, err_total, len(lo))
        if len(lo) > 4 * spec.max_periods:
            break
        avail = budget - head_err - tail_err - osc_err
        if avail <= 0:
            break
        thresh = max(avail / (4.0 * len(lo)), 0.0)
        bad = errs > thresh
        if not np.any(bad):
            bad = errs >= errs.max()
        mid = 0.5 * (lo[bad] + hi[bad])
        nlo = np.concatenate([lo[~bad], lo[bad], mid])
        nhi = np.concatenate([hi[~bad], mid, hi[bad]])
        v_new, e_new = gk21(f, np.concatenate([lo[bad], mid]), np.concatenate([mid, hi[bad]]))
        vals = np.concatenate([vals[~bad], v_new])
        errs = np.concatenate([errs[~bad], e_new])
        lo, hi = nlo, nhi
    total = float(math.fsum(vals)) + tail_val
    err_total = float(errs.sum()) + head_err + tail_err + osc_err
    raise ToleranceNotMet(
        f"quadrature stalled: value {total:.12g}, error bound {err_total:.3g} > "
        f"{max(spec.rel_tol * abs(total), spec.abs_tol):.3g}"
    )


def _split_far_field(k, spec, eps, xi0, X, wmax, resid_target):
    """Integrand, edges and tail terms when oscillation panels up to saturation are too many.

    Beyond X_osc the trigonometric product is split into its mean c0 and
    cosine terms.  For each cosine term one integration by parts gives

        int_X^inf cos(w xi) F = -sin(w X) F(X) / w - (1/w) int_X^inf sin(w xi) F'(xi),

    where F collects the non-trigonometric factors.  The remainder is bounded
    by 2 P sup|F'| / w^2 with P the number of monotone pieces of F' (second
    mean value theorem on each piece).  The mean part c0 F has no oscillation
    and is integrated on geometric panels.
    """
    if k.weight is not None:
        raise ToleranceNotMet("far-field splitting is not available for weighted kernels")
    freqs = [abs(a) for a in k.cos_freqs] + ([abs(k.signed_cos)] if k.signed_cos else [])
    x_osc = max(xi0, 16.0 * math.pi / min(freqs))
    if _osc_count(xi0, x_osc, wmax) > spec.max_periods:
        raise ToleranceNotMet("oscillation panels exceed max_periods")
    terms = cosine_expansion(k.cos_freqs, k.signed_cos)
    c0 = terms.pop(0.0, 0.0)
    env = replace(k, cos_freqs=(), signed_cos=None, scale=1.0)
    grid = np.geomspace(x_osc, 64.0 * max(X, x_osc), 8192)
    fg = env.evaluate(grid)
    dfg = np.gradient(fg, grid)
    turns = int(np.count_nonzero(np.diff(np.sign(np.diff(dfg))) != 0))
    pieces = max(3, turns + 1)
    sup_df = 1.25 * float(np.max(np.abs(dfg)))
    f_x = float(env.evaluate(np.array([x_osc]))[0])
    ws = np.array(list(terms.keys()))
    cs = np.array(list(terms.values()))
    osc_val = k.scale * float(np.dot(cs, -np.sin(ws * x_osc) * f_x / ws)) if len(ws) else 0.0
    osc_err = abs(k.scale) * 2.0 * pieces * sup_df * float(np.sum(np.abs(cs) / ws**2)) if len(ws) else 0.0
    mean_k = replace(k, cos_freqs=(), signed_cos=None, scale=k.scale * c0)
    if k.damping > 0:
        X_end, tail_err = _damped_cut(mean_k, X, 1e-3 * spec.abs_tol)
        tail_val = osc_val
    else:
        X_end = X
        tail_val, tail_err = _tail(mean_k, X_end)
        tail_val += osc_val
    edges = np.concatenate([_head_edges(eps, xi0)[:-1], _osc_edges(xi0, x_osc, wmax)[:-1],
                            _geom_edges(x_osc, max(X_end, 2.0 * x_osc), 1.5)])

    def f(x):
        return np.where(x < x_osc, k.evaluate(x), mean_k.evaluate(x))

    return f, edges, tail_val, tail_err, osc_err
