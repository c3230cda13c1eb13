import math

import numpy as np
import pytest
from scipy import stats

from hormander import mmatrix as MM
from hormander import scenarios
from hormander.rng import normals
from hormander.sde import GridSpec, integrate, iter_flows, sample_increments, simulate_ensemble


def _flow(name="langevin", N=128, path=0, **kw):
    sc = scenarios.get(name, **kw)
    return integrate(sc.system, sc.x0, sample_increments(GridSpec(1.0, N), 3, path, sc.system.m))


def test_brownian_reduced_matrix_is_time_times_identity():
    s = MM.reduced_matrix(_flow("brownian", dim=2))
    assert np.allclose(s.C, np.eye(2), atol=1e-12)
    assert np.allclose(s.M, np.eye(2), atol=1e-12)


def test_langevin_matrix_is_deterministic():
    # constant diffusion and linear drift: J and hence C do not see the noise
    a, b = MM.reduced_matrix(_flow(path=0)), MM.reduced_matrix(_flow(path=5))
    assert np.allclose(a.C, b.C, atol=1e-12)
    assert a.lambda_C == pytest.approx(0.1577, abs=2e-3)


def test_congruence_identity():
    for path in range(5):
        s = MM.reduced_matrix(_flow(quartic=1.0, path=path), seed=3, path_index=path)
        J = _flow(quartic=1.0, path=path).Js[-1]
        eta = np.array([0.6, -0.8])
        lhs = eta @ s.M @ eta
        rhs = (J.T @ eta) @ s.C @ (J.T @ eta)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_symmetric_psd_on_all_paths():
    sc = scenarios.langevin(quartic=1.0)
    ens = simulate_ensemble(sc.system, sc.x0, GridSpec(1.0, 64), 500, 1)
    samples = MM.covariance_samples(ens)
    assert len(samples) == 500
    for s in samples:
        assert np.array_equal(s.C, s.C.T) and s.lambda_C >= -MM.PSD_TOL and s.lambda_M >= -MM.PSD_TOL


def test_asymmetry_is_rejected():
    C = np.array([[1.0, 1e-6], [0.0, 1.0]])
    with pytest.raises(ValueError, match="asymmetric"):
        MM.CovarianceSample.build(C, np.eye(2), 0, 0)


def test_horizon_requires_flag():
    sc = scenarios.langevin()
    f = integrate(sc.system, sc.x0, sample_increments(GridSpec(2.0, 8), 0, 0))
    with pytest.raises(MM.HorizonError):
        MM.reduced_matrix(f)
    assert MM.reduced_matrix(f, allow_horizon=True).C.shape == (2, 2)


def test_quadratic_form_decomposition_needs_unit_eta():
    f = _flow()
    with pytest.raises(ValueError):
        MM.quadratic_form_decomposition(f, [1.0, 1.0])
    a, b = MM.quadratic_form_decomposition(f, [0.6, 0.8])
    assert a == pytest.approx(b, rel=1e-12)


def test_quadratic_form_on_counterexample_paths():
    sc = scenarios.counterexample()
    for f in iter_flows(sc.system, sc.x0, GridSpec(1.0, 64), 50, 2):
        a, b = MM.quadratic_form_decomposition(f, [1.0])
        assert a == pytest.approx(b, rel=1e-10)


def test_clopper_pearson_known_values():
    lo, hi = MM.clopper_pearson(np.array([0, 5]), 100)
    assert lo[0] == 0.0 and hi[0] == pytest.approx(1 - 0.025 ** (1 / 100), rel=1e-10)
    assert lo[1] == pytest.approx(stats.beta.ppf(0.025, 5, 96))
    assert hi[1] == pytest.approx(stats.beta.ppf(0.975, 6, 95))


def test_fit_recovers_power_law():
    eps = MM.geometric_eps(2, 10)
    hits = np.round(1e6 * eps**3).astype(int)
    fit = MM.fit_loglog(eps, hits, 1_000_000)
    assert fit.slope == pytest.approx(3.0, abs=0.02)


def test_fit_censoring():
    eps = MM.geometric_eps(2, 10)
    none = MM.fit_loglog(eps, np.zeros(eps.size, int), 1000)
    assert none.slope == math.inf and none.censored and none.reason == "no hits"
    few = MM.fit_loglog(eps, np.array([50] + [3] * (eps.size - 1)), 1000)
    assert math.isnan(few.slope) and few.censored


def test_eta_directions():
    d = MM.eta_directions(3, fixed=[[2.0, 0, 0]], K=4, seed=1)
    assert d.shape == (8, 3) and np.allclose(np.linalg.norm(d, axis=1), 1)
    assert np.array_equal(d, MM.eta_directions(3, fixed=[[2.0, 0, 0]], K=4, seed=1))


def test_tail_scaling_separation():
    dg = scenarios.degenerate()
    deg = MM.tail_scaling(dg.system, dg.x0, paths=2000, seed=1, K=4, N=64)
    assert deg.floor() and deg.p_hat.min() == 1.0
    br = scenarios.brownian(2)
    ell = MM.tail_scaling(br.system, br.x0, paths=2000, seed=1, K=4, N=64)
    assert not ell.floor() and ell.decays(2.0)
    with pytest.raises(ValueError):
        MM.tail_scaling(br.system, br.x0, paths=10)


def test_inverse_moment():
    lam = np.array([1.0, 0.5, 0.1, 0.0])
    im = MM.inverse_moment_estimate(lam, 1.0)
    assert im.estimate == pytest.approx((1 + 2 + 10) / 3)
    assert im.excluded == 1 and im.used == 3
    assert sum(c for c, _ in im.decades.values()) == 3


def test_ibp_probe_brownian_closed_form():
    br = scenarios.brownian(2)
    p = MM.ibp_density_probe(br.system, [0.5, 0.0], "x1^2", 1, GridSpec(1.0, 16), 20_000, 4)
    assert not p.bumped and abs(p.z) < 4
    assert abs(p.lhs - 1.0) < 4 * 2 / math.sqrt(20_000)


def test_ibp_probe_bump_route():
    sc = scenarios.langevin(quartic=1.0)
    p = MM.ibp_density_probe(sc.system, sc.x0, "x1", 1, GridSpec(1.0, 8), 2000, 4)
    assert p.bumped and abs(p.z) < 4
    with pytest.raises(IndexError):
        MM.ibp_density_probe(sc.system, sc.x0, "x1", 3, GridSpec(1.0, 8), 10, 0)


def test_kde_matches_standard_normal():
    x = normals(1, np.arange(1_000_000), 1, 1).ravel()
    grid = np.linspace(-4, 4, 161)
    est = MM.kde_density(x, 0.05, grid)
    assert np.abs(est - stats.norm.pdf(grid)).max() < 0.01


def test_kde_backends_agree():
    x = normals(2, np.arange(5000), 1, 1).ravel()
    grid = np.linspace(3, -3, 41)  # unsorted on purpose
    a = MM.kde_density(x, 0.2, grid, backend="numba")
    b = MM.kde_density(x, 0.2, grid, backend="numpy")
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
    with pytest.raises(ValueError):
        MM.kde_density(x, 0.0, grid)


def test_kde_mass_outside():
    x = np.zeros(10)
    assert MM.kde_mass_outside(x, 1.0, -1.0, 1.0) == pytest.approx(2 * stats.norm.cdf(-1.0))
