import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfhelab.errors import OutOfRange
from sfhelab.model import ModelParams, constants, noise_constant, psi, spectral_density, validate, variance_law
from sfhelab.quadrature import KernelSpec, integrate
from sfhelab.special import gamma


@pytest.mark.parametrize("x", [1e-3, 0.1, 0.5, 0.8, 1.0, 1.5, 2.5, 3.7, 7.25, 10.0])
def test_gamma_matches_mpmath(x):
    assert gamma(x) == pytest.approx(float(mp.gamma(x)), rel=1e-12)


def test_gamma_reflection_and_array():
    xs = np.array([-0.5, 0.25, 4.0])
    ref = [float(mp.gamma(x)) for x in xs]
    np.testing.assert_allclose(gamma(xs), ref, rtol=1e-12)
    with pytest.raises(ValueError):
        gamma(-2.0)


def test_validate_examples():
    p = validate(1.5, 0.4)
    assert p.kappa == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(OutOfRange) as e:
        validate(1.5, 0.25)
    assert e.value.which == "hurst"
    with pytest.raises(OutOfRange) as e:
        validate(2.0, 0.4)
    assert e.value.which == "alpha"
    with pytest.raises(OutOfRange):
        validate(1.5, 0.5)


def test_noise_constant_oracle():
    mp.mp.dps = 30
    ref = mp.gamma(mp.mpf(1.5)) * mp.sin(mp.pi / 4) / (2 * mp.pi)
    assert noise_constant(0.25) == pytest.approx(float(ref), rel=1e-13)
    assert noise_constant(0.25) == pytest.approx(0.099736, abs=5e-7)


def test_c21_oracle():
    mp.mp.dps = 30
    a, h = mp.mpf("1.5"), mp.mpf("0.4")
    g = 2 * h + a - 2
    c1 = mp.gamma(2 * h + 1) * mp.sin(mp.pi * h) / (2 * mp.pi)
    ref = c1 / g * mp.power(2, g / a) * mp.gamma((2 - 2 * h) / a)
    p = ModelParams(1.5, 0.4)
    assert p.consts.c21 == pytest.approx(float(ref), rel=1e-13)
    assert p.consts.c21 == pytest.approx(0.62850, abs=1e-4)


def test_c21_blows_up_at_boundary():
    a = 1.5
    h = (2 - a) / 2 + 0.5e-8
    assert constants(ModelParams(a, h)).c21 > 1e6


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("alpha,hurst", [(1.5, 0.4), (1.2, 0.45), (1.9, 0.1), (1.5, 0.3)])
def test_variance_law_matches_quadrature(alpha, hurst, t):
    p = ModelParams(alpha, hurst)
    k = KernelSpec(gamma=p.gamma_exp, alpha=alpha, exp_terms=((2.0, t, 1),), scale=p.c1H)
    v, err = integrate(k)
    assert v == pytest.approx(variance_law(p, t), rel=1e-6)


def test_variance_law_examples():
    p = ModelParams(1.5, 0.4)
    assert variance_law(p, 0.0) == 0.0
    assert variance_law(p, 1.0) == pytest.approx(0.62850, abs=1e-4)
    assert variance_law(p, 2.0) / variance_law(p, 1.0) == pytest.approx(2 ** (p.gamma_exp / p.alpha), rel=1e-14)
    np.testing.assert_allclose(variance_law(p, np.array([1.0, 2.0])), [variance_law(p, 1.0), variance_law(p, 2.0)])
    with pytest.raises(ValueError):
        variance_law(p, -1.0)


def test_spectral_density_mass_is_variance():
    from scipy.integrate import quad
    p = ModelParams(1.5, 0.4)
    f = lambda x: spectral_density(p, 1.0, x)
    mass = quad(f, 0, 1)[0] + quad(f, 1, 1e3, limit=200)[0]
    # f ~ c1H xi^{-1.3} beyond 1e3
    mass += p.c1H * 1e3 ** -0.3 / 0.3
    assert mass == pytest.approx(variance_law(p, 1.0), rel=1e-6)


def test_spectral_density_shape():
    p = ModelParams(1.5, 0.4)
    assert spectral_density(p, 1.0, 0.0) == 0.0
    xi = np.array([1e-8, 1e-3, 0.5, 3.0])
    f1, f2 = spectral_density(p, 1.0, xi), spectral_density(p, 2.0, xi)
    assert np.all(f2 >= f1) and np.all(f1 > 0)
    # small-frequency behaviour 2 t c1H xi^{1-2H}
    assert f1[0] == pytest.approx(2 * p.c1H * 1e-8 ** (1 - 0.8), rel=1e-6)


def test_psi_examples():
    p = ModelParams(1.5, 0.4)
    assert psi(p, 1.0, 1.0) == 1.0
    assert psi(p, 1.0, 8.0) == pytest.approx(1 + math.sqrt(3))
    assert psi(p, 8.0, 1.0) == 1.0
    assert psi(p, 8.0, 8.0 ** (1 / 1.5)) == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.01, 50), L=st.floats(0.01, 1e4), k=st.integers(0, 12))
def test_psi_monotone_and_concave(t, L, k):
    p = ModelParams(1.5, 0.4)
    assert psi(p, t, 2 * L) >= psi(p, t, L)
    assert psi(p, 2 * t, L) <= psi(p, t, L)
    # increments in log2 L shrink (concavity of sqrt)
    base = p.length_scale(t) * 2.0**k
    d1 = psi(p, t, 2 * base) - psi(p, t, base)
    d2 = psi(p, t, 4 * base) - psi(p, t, 2 * base)
    assert d2 <= d1 + 1e-12
