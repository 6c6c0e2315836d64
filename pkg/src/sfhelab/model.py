"""Model parameters, closed-form constants and the scaling function Psi.

The equation is du = -(-Delta)^{alpha/2} u dt + dW with zero initial data,
where W is white in time and has the spatial covariance of a fractional
Brownian motion with Hurst index H.  Admissible parameters satisfy

    1 < alpha < 2,   (2 - alpha)/2 < H < 1/2.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange
from .special import gamma


@dataclass(frozen=True)
class ModelConstants:
    c1H: float
    c21: float
    kappa: float
    space_exp: float

    @property
    def gamma_exp(self):
        """2H + alpha - 2, the exponent of |x - y| in the increment variance."""
        return 2.0 * self.space_exp


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    hurst: float
    consts: ModelConstants = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a, h = float(self.alpha), float(self.hurst)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "hurst", h)
        if not (1.0 < a < 2.0):
            raise OutOfRange("alpha", a, (1.0, 2.0))
        if not ((2.0 - a) / 2.0 < h < 0.5):
            raise OutOfRange("hurst", h, ((2.0 - a) / 2.0, 0.5))
        object.__setattr__(self, "consts", constants(self))

    # shorthands used all over the package
    @property
    def gamma_exp(self):
        return self.consts.gamma_exp

    @property
    def kappa(self):
        return self.consts.kappa

    @property
    def c1H(self):
        return self.consts.c1H

    @property
    def p(self):
        """Decay power of the solution spectral density, 2H + alpha - 1."""
        return 2.0 * self.hurst + self.alpha - 1.0

    def length_scale(self, t):
        """Natural spatial scale t^{1/alpha}."""
        return float(t) ** (1.0 / self.alpha)


def validate(alpha, hurst):
    """Return :class:`ModelParams`, raising :class:`OutOfRange` otherwise."""
    return ModelParams(alpha, hurst)


def noise_constant(hurst):
    """Spectral constant of the noise, Gamma(2H+1) sin(pi H) / (2 pi)."""
    return gamma(2.0 * hurst + 1.0) * math.sin(math.pi * hurst) / (2.0 * math.pi)


def constants(p):
    a, h = p.alpha, p.hurst
    g = 2.0 * h + a - 2.0
    c1 = noise_constant(h)
    c21 = c1 / g * 2.0 ** (g / a) * gamma((2.0 - 2.0 * h) / a)
    return ModelConstants(c1H=c1, c21=c21, kappa=g / (2.0 * a), space_exp=g / 2.0)


def variance_law(p, t):
    """E[u(t, x)^2] = c21 t^{(2H+alpha-2)/alpha}; independent of x."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    out = p.consts.c21 * t ** (p.gamma_exp / p.alpha)
    return float(out) if out.ndim == 0 else out


def spectral_density(p, t, xi):
    """One-sided spectral density f_t(xi) of u(t, .) on xi >= 0.

    f_t(xi) = c1H (1 - exp(-2 t xi^alpha)) xi^{1 - 2H - alpha}, with f_t(0) = 0,
    so that the integral over (0, inf) equals the variance.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    pos = xi > 0
    x = xi[pos]
    out[pos] = p.c1H * -np.expm1(-2.0 * t * x**p.alpha) * x ** (-p.p)
    return float(out) if out.ndim == 0 else out


def psi(p, t, L):
    """Space-time scaling function 1 + sqrt(log2(L / t^{1/alpha} v 1))."""
    if t <= 0 or L <= 0:
        raise ValueError("psi needs t > 0 and L > 0")
    ratio = L / p.length_scale(t)
    return 1.0 + math.sqrt(math.log2(max(ratio, 1.0)))
