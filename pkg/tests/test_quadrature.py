import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfhelab.errors import NotIntegrable, ToleranceNotMet
from sfhelab.quadrature import (KernelSpec, QuadratureSpec, cosine_expansion, gk21, integrate,
                                one_minus_exp, power_cos_tail, riesz_identity, versine)


def test_kronrod_rule_is_exact_for_polynomials():
    for d in range(32):
        v, _ = gk21(lambda x: x**d, np.array([0.0]), np.array([1.0]))
        assert v[0] == pytest.approx(1.0 / (d + 1), abs=1e-14)


def test_stable_primitives():
    assert versine(1e-10) == pytest.approx(5e-21, rel=1e-12)
    assert one_minus_exp(1e-12) == pytest.approx(1e-12, rel=1e-12)


def test_riesz_examples():
    assert riesz_identity(0.5, 1.0) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)
    assert riesz_identity(0.5, 4.0) == pytest.approx(2 * math.sqrt(2 * math.pi), rel=1e-14)
    assert riesz_identity(0.3, 0.0) == 0.0


@pytest.mark.parametrize("g", [0.1, 0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("xi", [0.5, 1.0, 3.0])
def test_integrate_matches_riesz(g, xi):
    r = integrate(KernelSpec(gamma=g, cos_freqs=(xi,)))
    ref = riesz_identity(g, xi)
    assert abs(r.value / ref - 1) <= 1e-8
    assert abs(r.value - ref) <= r.error + 1e-15 * ref


def _tail_ref(s, w, x):
    return float(mp.re((-1j * w) ** (s - 1) * mp.gammainc(1 - s, -1j * w * x)))


@pytest.mark.parametrize("s", [0.3, 0.7, 1.3, 1.7])
@pytest.mark.parametrize("w", [0.01, 0.5, 3.0, 100.0, 1e4])
@pytest.mark.parametrize("x", [1e-3, 1.0, 50.0])
def test_power_cos_tail_matches_incomplete_gamma(s, w, x):
    mp.mp.dps = 25
    v, e = power_cos_tail(s, w, x)
    ref = _tail_ref(s, w, x)
    assert v == pytest.approx(ref, rel=1e-11, abs=1e-300)
    assert abs(v - ref) <= max(e, 1e-13 * abs(ref))


def test_power_cos_tail_zero_frequency():
    v, _ = power_cos_tail(1.5, 0.0, 4.0)
    assert v == pytest.approx(4.0**-0.5 / 0.5)
    with pytest.raises(NotIntegrable):
        power_cos_tail(0.5, 0.0, 1.0)


def test_cosine_expansion_reproduces_product():
    terms = cosine_expansion((0.7, 2.0), signed_cos=1.3)
    x = np.linspace(0, 20, 101)
    direct = (1 - np.cos(0.7 * x)) * (1 - np.cos(2.0 * x)) * np.cos(1.3 * x)
    expanded = sum(c * np.cos(w * x) for w, c in terms.items())
    np.testing.assert_allclose(expanded, direct, atol=1e-13)


def test_zero_kernels():
    assert integrate(KernelSpec(gamma=0.3, cos_freqs=(0.0, 1.0))).value == 0.0
    assert integrate(KernelSpec(gamma=0.3, exp_terms=((2.0, 0.0, 1),))).value == 0.0


def test_integrability_checks():
    with pytest.raises(NotIntegrable) as e:
        integrate(KernelSpec(gamma=-0.1, cos_freqs=(1.0,)))
    assert e.value.end == "inf"
    with pytest.raises(NotIntegrable) as e:
        integrate(KernelSpec(gamma=2.5, cos_freqs=(1.0,)))
    assert e.value.end == "0"
    # damping rescues the tail
    v, _ = integrate(KernelSpec(gamma=-0.5, cos_freqs=(1.0,), damping=1.0))
    assert v > 0


def test_panel_cap_raises():
    spec = QuadratureSpec(max_periods=16)
    with pytest.raises(ToleranceNotMet):
        integrate(KernelSpec(gamma=0.3, cos_freqs=(1000.0,), exp_terms=((2.0, 1e-6, 1),)), spec)


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0)
    with pytest.raises(ValueError):
        QuadratureSpec(max_periods=8)


def test_damped_signed_kernel_against_mpmath():
    mp.mp.dps = 20
    k = KernelSpec(gamma=0.3, alpha=1.5, exp_terms=((2.0, 0.5, 1),), damping=0.3, signed_cos=1.3)
    f = lambda x: (1 - mp.exp(-x**1.5)) * mp.exp(-0.3 * x**1.5) * mp.cos(1.3 * x) * x**-1.3
    ref = mp.quad(f, [0, 1, 5, 20, 60, 200])
    r = integrate(k)
    assert r.value == pytest.approx(float(ref), rel=1e-9)


kernels = st.builds(
    lambda g, a, t, b: KernelSpec(gamma=g, alpha=1.5, cos_freqs=(a,), exp_terms=((2.0, t, 1),), signed_cos=b),
    st.floats(0.1, 0.9), st.floats(0.05, 5.0), st.floats(0.05, 5.0),
    st.one_of(st.none(), st.floats(0.1, 10.0)),
)


@settings(max_examples=20, deadline=None)
@given(k=kernels)
def test_error_bound_is_honest(k):
    coarse = integrate(k, QuadratureSpec(rel_tol=1e-6))
    fine = integrate(k, QuadratureSpec(rel_tol=5e-7))
    assert abs(fine.value - coarse.value) <= coarse.error + fine.error
    assert coarse.error <= max(1e-6 * abs(coarse.value), 1e-12)


@settings(max_examples=20, deadline=None)
@given(g=st.floats(0.1, 0.9), a=st.floats(0.1, 4.0), t=st.floats(0.1, 4.0), lam=st.floats(0.3, 3.0))
def test_scaling_law(g, a, t, lam):
    base = integrate(KernelSpec(gamma=g, alpha=1.5, cos_freqs=(a,), exp_terms=((2.0, t, 1),))).value
    scaled = integrate(KernelSpec(gamma=g, alpha=1.5, cos_freqs=(lam * a,), exp_terms=((2.0, lam**1.5 * t, 1),))).value
    assert scaled == pytest.approx(lam**g * base, rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(t=st.floats(0.05, 4.0), dt=st.floats(0.01, 2.0), a=st.floats(0.1, 4.0))
def test_monotone_in_time(t, dt, a):
    lo = integrate(KernelSpec(gamma=0.3, alpha=1.5, cos_freqs=(a,), exp_terms=((2.0, t, 1),)))
    hi = integrate(KernelSpec(gamma=0.3, alpha=1.5, cos_freqs=(a,), exp_terms=((2.0, t + dt, 1),)))
    assert hi.value >= lo.value - lo.error - hi.error
