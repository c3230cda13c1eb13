import math

import numpy as np
import pytest

from hormander import norris as NR
from hormander import scenarios
from hormander.sde import GridSpec, integrate, iter_flows, sample_increments


def test_holder_constant_of_linear_function():
    # |t - s| / |t - s|^a peaks at the widest pair: 1
    t = np.linspace(0, 1, 201)
    assert NR.holder_constant(t, 0.5) == pytest.approx(1.0)
    assert NR.holder_constant(t, 1.0) == pytest.approx(1.0)


def test_holder_backends_agree():
    f = np.sin(7 * np.linspace(0, 1, 300)) + np.random.default_rng(0).normal(size=300) * 0.01
    a = NR.holder_constant(f, 1 / 3, backend="numba")
    b = NR.holder_constant(f, 1 / 3, backend="numpy")
    assert a == pytest.approx(b, rel=1e-13)


def test_holder_monotone_under_refinement():
    f = np.cos(13 * np.linspace(0, 1, 1025) ** 2)
    vals = [NR.holder_constant(f[::s], NR.ALPHA) for s in (16, 8, 4, 2, 1)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_profile_strides_long_series():
    p = NR.HoelderProfile.of(np.linspace(0, 1, 10_001), 0.5, max_points=1000)
    assert p.stride == 10 and p.holder == pytest.approx(1.0, rel=1e-3)
    with pytest.raises(ValueError):
        NR.HoelderProfile.of([0.0, 1.0], 1.5)


def test_dtf_examples():
    t = np.linspace(0, 1, 2049)
    r = NR.check_dtf(t**2, 2 * t)
    assert r.slack >= 0 and r.lhs == pytest.approx(2.0)
    z = NR.check_dtf(np.zeros(5), np.zeros(5))
    assert z.lhs == z.rhs == 0.0
    with pytest.raises(NR.InconsistentInputError):
        NR.check_dtf(np.zeros(5), np.ones(5))
    with pytest.raises(ValueError):
        NR.check_dtf(np.zeros(5), np.zeros(4))


def test_dtf_corpus_has_slack():
    corpus = NR.dtf_corpus(N=512)
    assert len(corpus) == 200
    assert min(NR.check_dtf(f, d).slack for _, f, d in corpus) >= 0


def test_fixture_matches_closed_form():
    eps = np.array([4, 2, 1, 0.5, 0.25, 0.125])
    for eps0 in (0.3, 1.5):
        for st in NR.deterministic_fixture(eps0, eps):
            a, b, v = NR.fixture_expected(eps0, eps, st.r)
            assert np.array_equal(st.count_a, a)
            assert np.array_equal(st.count_b, b)
            assert np.array_equal(st.count_violation, v)
    st = NR.deterministic_fixture(1.5, eps, r_grid=(0.2,))[0]
    assert st.count_violation.tolist() == [1, 1, 0, 0, 0, 0]


def test_envelope_check():
    eps = NR.norris_eps(6)
    z = np.concatenate([np.full(100, 0.3), np.full(900, 5.0)])
    a = np.full(1000, 10.0)
    st = NR.implication_table(eps, 0.1, z, a, np.zeros((1000, 1)))
    # A-events only above eps = 0.3, all violations: flat, so no eps^3 decay
    assert st.resolvable.tolist() == [True, True, False, False, False, False, False]
    assert not st.meets(3.0) and not st.vacuous
    # sup |Z| spread so that violations fall like eps^4 below eps = 1
    u = np.random.default_rng(0).uniform(size=200_000)
    dec = NR.implication_table(eps, 0.1, u**0.25, a[:1].repeat(u.size), np.zeros((u.size, 1)))
    assert dec.resolvable[:4].all() and dec.meets(3.0)
    empty = NR.implication_table(eps, 0.1, np.full(10, 9.0), np.ones(10), np.zeros((10, 1)))
    assert empty.vacuous and empty.meets(3.0)


def test_stratonovich_reconstruction_converges():
    sc = scenarios.langevin(quartic=1.0)
    F = sc.system.diffusions[0]
    errs = []
    for N in (64, 128, 256):
        g = sample_increments(GridSpec(1.0, N), 1, 0)
        f = integrate(sc.system, sc.x0, g)
        z, rec = NR.stratonovich_reconstruction(f, [1.0, 0.0], F)
        errs.append(np.abs(z - rec).max())
    assert errs[2] < errs[1] < errs[0] and errs[2] < 1e-4


def test_drift_regression_recovers_ito_drift():
    cal = NR.calibration()["z_drift_regression"]
    sc = scenarios.langevin(quartic=1.0)
    flows = list(iter_flows(sc.system, sc.x0, GridSpec(1.0, 64), 4000, 2))
    slope = NR.drift_regression(flows, [1.0, 0.0], sc.system.diffusions[0])
    assert slope == pytest.approx(cal["slope"], abs=2 * cal["tolerance"])


def test_langevin_events_are_empty_for_generic_eta():
    sc = scenarios.langevin()
    eta = np.array([0.6, 0.8])
    st = NR.norris_scaling(sc.system, sc.x0, sc.system.diffusions[0], eta, paths=2000, seed=1, N=64)
    # |Z_V1(0)| = |<eta, V1(x0)>| > 1 keeps every A-event empty below eps = 1
    assert all(s.count_a[1:].sum() == 0 for s in st)


def test_cascade_rows():
    sc = scenarios.langevin()
    eta = NR.weakest_direction(sc.system, sc.x0, N=64, paths=64)
    assert abs(np.linalg.norm(eta) - 1) < 1e-12
    rows = NR.hormander_cascade(sc.system, sc.x0, eta, 1, 0.25, 500, N=64)
    assert [r.level for r in rows][:1] == [0]
    assert rows[0].z0 == pytest.approx(eta @ sc.system.diffusions[0](sc.x0))
    assert all(r.conditioned <= r.paths for r in rows)
    assert any(r.identically_zero for r in rows)  # [V1, V1]
    empty = NR.hormander_cascade(sc.system, sc.x0, eta, 1, 1e-9, 100, N=32)
    assert all(math.isnan(r.q50) and r.conditioned == 0 for r in empty)


def test_calibration_is_frozen():
    cal = NR.calibration()
    assert cal["calibration_seed"] == 20261018
    assert cal["norris"]["r"] == pytest.approx(1 / 80)
