import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfhelab.errors import EdgeTooClose, NyquistViolation, PSDRepairExceeded, TruncationBudgetExceeded
from sfhelab.metrics import SpacetimePoint, d1
from sfhelab.model import ModelParams, variance_law
from sfhelab.sampler import (PointSet, SpacetimeGrid, completion_factor, covariance, covariance_matrix,
                             discretization_report, psd_factor, read_binary, sample_cholesky, sample_spectral_grid,
                             seminorm_estimate, seminorm_expectation, seminorm_mean, seminorm_profile,
                             seminorm_weights, spectral_plan, write_binary, write_csv)

P = ModelParams(1.5, 0.4)


def pt(t, x):
    return SpacetimePoint(t, x)


def test_point_set_drops_duplicates():
    ps = PointSet((pt(1, 0), pt(1, 0), pt(0.5, 1)))
    assert len(ps) == 2
    assert list(ps.t) == [1.0, 0.5]
    with pytest.raises(ValueError):
        PointSet(())


def test_grid_validation():
    g = SpacetimeGrid(1.0, 0.0, 1, 0.0, 0.5, 8)
    assert g.nyquist == pytest.approx(2 * math.pi)
    assert g.period == 4.0
    assert g.resolution == pytest.approx(math.pi / 2)
    with pytest.raises(NyquistViolation):
        SpacetimeGrid(1.0, 0.0, 1, 0.0, 0.5, 8, cutoff=7.0)
    with pytest.raises(ValueError):
        SpacetimeGrid(1.0, 0.0, 2, 0.0, 0.5, 8)
    with pytest.raises(ValueError):
        SpacetimeGrid(1.0, 0.1, 1, 0.0, -0.5, 8)


def test_covariance_matrix_examples():
    c = covariance_matrix(P, PointSet((pt(1, 0),)))
    assert c.shape == (1, 1)
    assert c[0, 0] == pytest.approx(variance_law(P, 1.0), rel=1e-12)
    c = covariance_matrix(P, PointSet((pt(1, 0), pt(1, 0.7))))
    d = d1(P, pt(1, 0), pt(1, 0.7)).value
    assert c[0, 1] == pytest.approx(variance_law(P, 1.0) - 0.5 * d * d, rel=1e-9)
    c = covariance_matrix(P, PointSet((pt(0, 0), pt(1, 0), pt(0, 2))))
    assert np.all(c[0] == 0) and np.all(c[:, 2] == 0)


def test_covariance_time_lag_against_metric():
    # polarization: Cov(a, b) = (Var a + Var b - d1(a, b)^2) / 2
    a, b = pt(1.0, 0.0), pt(0.6, 0.4)
    ref = 0.5 * (variance_law(P, 1.0) + variance_law(P, 0.6) - d1(P, a, b).value ** 2)
    assert covariance(P, a, b)[0] == pytest.approx(ref, rel=1e-9)


def test_psd_factor_jitter_and_cap():
    c = np.array([[1.0, 1.0], [1.0, 1.0]])
    f, jitter = psd_factor(c)
    assert np.allclose(f @ f.T, c, atol=1e-6)
    assert 0 < jitter <= 1e-6
    with pytest.raises(PSDRepairExceeded):
        psd_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_determinism_and_centering():
    pts = PointSet((pt(1, 0), pt(0.5, 1)))
    a = [s.values for s in sample_cholesky(P, pts, 7, 3)]
    b = [s.values for s in sample_cholesky(P, pts, 7, 3)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    vals = np.array([s.values for s in sample_cholesky(P, pts, 11, 10_000)])
    sd = np.sqrt(np.array([variance_law(P, 1.0), variance_law(P, 0.5)]))
    assert np.all(np.abs(vals.mean(axis=0)) <= 3 * sd / 100)


def test_seed_range():
    with pytest.raises(ValueError):
        next(sample_cholesky(P, PointSet((pt(1, 0),)), -1, 1))
    with pytest.raises(ValueError):
        next(sample_cholesky(P, PointSet((pt(1, 0),)), 2**64, 1))


@pytest.mark.parametrize("dx,nx", [(0.25, 64), (0.05, 256), (1.0, 32)])
def test_spectral_variance_and_report(dx, nx):
    g = SpacetimeGrid(1.0, 0.0, 1, 0.0, dx, nx)
    plan = spectral_plan(P, g)
    rep = discretization_report(P, plan)
    assert plan.variance[0] == pytest.approx(variance_law(P, 1.0), rel=1e-9)
    assert rep.relative <= 0.02
    assert rep.max_abs_error <= rep.bound


def test_spectral_time_lag_covariance():
    g = SpacetimeGrid(0.5, 0.25, 3, 0.0, 0.25, 64)
    plan = spectral_plan(P, g)
    lags = np.array([0.0, 0.5, 2.0])
    got = plan.covariance(0, 2, lags)
    ref = [covariance(P, pt(0.5, 0.0), pt(1.0, x))[0] for x in lags]
    assert np.allclose(got, ref, atol=2e-3 * variance_law(P, 1.0))


def test_truncated_mode_budget():
    g = SpacetimeGrid(1.0, 0.0, 1, 0.0, 0.05, 256, cutoff=2.0)
    with pytest.raises(TruncationBudgetExceeded):
        spectral_plan(P, g, mode="truncated")
    # the tail beyond pi/dx decays only like (pi/dx)^{-gamma}: about 7% of the variance at dx = 1e-3
    g = SpacetimeGrid(1.0, 0.0, 1, 0.0, 0.001, 4096)
    plan = spectral_plan(P, g, mode="truncated", budget=0.1)
    assert 0.01 * variance_law(P, 1.0) < plan.truncated_mass[0] <= 0.1 * variance_law(P, 1.0)
    assert plan.variance[0] + plan.truncated_mass[0] == pytest.approx(variance_law(P, 1.0), rel=1e-9)


def test_spectral_slices_follow_exact_time_correlation():
    # the field is only 0.1-Hoelder in time: corr(u(1, x), u(1.001, x)) is 0.78, not close to 1
    g = SpacetimeGrid(1.0, 1e-3, 2, 0.0, 0.1, 256)
    vals = np.array([s.values for s in sample_spectral_grid(P, g, 3, 400)])
    r = np.corrcoef(vals[:, 0].ravel(), vals[:, 1].ravel())[0, 1]
    exact = covariance(P, pt(1.0, 0.0), pt(1.001, 0.0))[0] / math.sqrt(variance_law(P, 1.0) * variance_law(P, 1.001))
    assert exact == pytest.approx(0.7813, abs=1e-3)
    assert r == pytest.approx(exact, abs=0.02)
    # for a tiny step the mass beyond the resolved alias orders is drawn white in time;
    # the lost correlation shows up in the discretization report
    g = SpacetimeGrid(1.0, 1e-12, 2, 0.0, 0.1, 256)
    plan = spectral_plan(P, g)
    lattice = plan.covariance(0, 1, np.array([0.0]))[0]
    vals = np.array([s.values for s in sample_spectral_grid(P, g, 3, 50, plan=plan)])
    assert np.mean(vals[:, 0] * vals[:, 1]) == pytest.approx(lattice, rel=0.05)
    exact = covariance(P, pt(1.0, 0.0), pt(1.0 + 1e-12, 0.0))[0]
    rep = discretization_report(P, plan, lags=[0], pairs=[(0, 1)])
    assert abs(lattice - exact) <= rep.bound


def test_spectral_stationarity_and_gaussianity():
    g = SpacetimeGrid(1.0, 0.0, 1, 0.0, 0.25, 64)
    vals = np.array([s.values[0] for s in sample_spectral_grid(P, g, 5, 10_000)])
    n = vals.shape[0]
    # equal-time covariance at lag 3 for several translates
    covs = np.array([np.mean(vals[:, j] * vals[:, j + 3]) for j in range(0, 60, 6)])
    se = variance_law(P, 1.0) * math.sqrt(2.0 / n)
    assert np.ptp(covs) <= 6 * se
    z = vals[:, 10] / vals[:, 10].std()
    assert abs(np.mean(z**4) - 3.0) <= 0.3


def test_spectral_determinism_and_serialization(tmp_path):
    g = SpacetimeGrid(1.0, 0.5, 2, -1.0, 0.25, 16)
    a = list(sample_spectral_grid(P, g, 42, 2))
    b = list(sample_spectral_grid(P, g, 42, 2))
    write_csv(a, tmp_path / "a.csv")
    write_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == "t,x,value,replicate,seed"
    write_binary(a[1], tmp_path / "a.bin")
    raw = (tmp_path / "a.bin").read_bytes()
    assert raw[:5] == b"SFHE1" and len(raw) == 32 + 8 * 32
    vals, seed = read_binary(tmp_path / "a.bin")
    assert seed == 42 and np.array_equal(vals, a[1].values)
    # replicate r is the same whichever block it is drawn in
    c = list(sample_spectral_grid(P, g, 42, 1, first_replicate=1))
    assert np.array_equal(c[0].values, a[1].values)


def test_seminorm_trivial_fields():
    v = np.zeros(512)
    assert np.all(seminorm_profile(P, v, 1 / 64, 1.0, 1.0) == 0)
    assert np.all(seminorm_profile(P, v + 3.5, 1 / 64, 1.0, 1.0) == 0)
    with pytest.raises(EdgeTooClose):
        seminorm_profile(P, v, 1 / 64, 1.0, 1.0, [10])
    with pytest.raises(ValueError):
        seminorm_profile(P, v, 1 / 32, 1.0, 1.0)


def test_seminorm_weights_sum():
    w = seminorm_weights(P, 0.01, 1.0)
    e = 2 * P.hurst - 1
    assert w.sum() == pytest.approx((1.0**e - 0.005**e) / e, rel=1e-12)


def test_seminorm_expectation_against_metric():
    # int_{a<=|h|<=b} d1(h)^2 |h|^{2H-2} dh by direct quadrature of the metric
    from scipy.integrate import quad
    a, b = 0.1, 1.0
    f = lambda h: d1(P, pt(1, 0), pt(1, h)).value ** 2 * h ** (2 * P.hurst - 2)
    ref = 2 * quad(f, a, b, epsrel=1e-9)[0]
    assert seminorm_expectation(P, 1.0, b, a) == pytest.approx(ref, rel=1e-6)


def test_seminorm_estimate_mean():
    dx, hm = 1 / 64, 1.0
    g = SpacetimeGrid(1.0, 0.0, 1, -8.0, dx, 1024)
    fac = completion_factor(P, 1.0, dx)
    vals = []
    for s in sample_spectral_grid(P, g, 9, 400):
        vals.append(seminorm_profile(P, s.values[0], dx, hm, 1.0, np.arange(100, 900, 50), fac))
    vals = np.ravel(vals)
    exact = seminorm_mean(P, 1.0, dx, hm)
    # the 16 points per replicate are correlated; bound the SE by the per-replicate one
    se = np.array(vals).reshape(400, -1).mean(axis=1).std() / math.sqrt(400) * 2
    assert abs(vals.mean() - exact) <= 3 * se + 3 * vals.std() / math.sqrt(400)
    s = next(sample_spectral_grid(P, g, 9, 1))
    assert seminorm_estimate(P, s, 0.0, hm) == pytest.approx(
        seminorm_profile(P, s.values[0], dx, hm, 1.0, [512], fac)[0], rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.0, 5.0), st.floats(0.5, 4.0))
def test_covariance_scaling(t, x, lam):
    # (t, x) -> (lam t, lam^{1/alpha} x) multiplies covariances by lam^{gamma/alpha}
    a, b = pt(t, 0.0), pt(t, x)
    s = lam ** (1 / P.alpha)
    la, lb = pt(lam * t, 0.0), pt(lam * t, s * x)
    assert covariance(P, la, lb)[0] == pytest.approx(lam ** (P.gamma_exp / P.alpha) * covariance(P, a, b)[0],
                                                  rel=1e-7, abs=1e-12)
