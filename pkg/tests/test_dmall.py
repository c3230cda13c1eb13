import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hormander import dmall as D
from hormander import suites


def pairings(items):
    """All perfect matchings of a list, enumerated recursively."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in pairings(rest[:i] + rest[i + 1:]):
            yield [(first, other)] + tail


def brute_moment(factors, dt):
    """Isserlis: E prod w_{v} as a sum over pairings of independent N(0, dt_v)."""
    if len(factors) % 2:
        return 0.0
    total = 0.0
    for p in pairings(list(factors)):
        term = 1.0
        for a, b in p:
            term *= dt[a] if a == b else 0.0
        total += term
    return total


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=0, max_size=8))
def test_wick_matches_pairing_enumeration(factors):
    g = D.Grid((0.3, 0.5, 1.7))
    F = g.constant(1.0)
    for v in factors:
        F = F * g.symbols()[v]
    assert D.wick_expectation(F) == pytest.approx(brute_moment(factors, g.dt), rel=1e-14, abs=0)


def test_double_factorial():
    assert [D.double_factorial(k) for k in (-1, 0, 1, 5, 6)] == [1, 1, 1, 15, 48]
    assert D.gaussian_moment(4, 2.0) == 12.0


def test_skorokhod_of_ones_is_sum():
    g = D.Grid((0.5, 0.25))
    S = D.skorokhod([g.constant(1.0), g.constant(1.0)])
    w = np.array([[0.3], [-1.2]])
    assert D.evaluate(S, w)[0] == pytest.approx(-0.9)


def test_skorokhod_trace_correction():
    # delta(F) for F_k = w_1 on both steps: w_1^2 + w_1 w_2 - dt_1
    g = D.Grid((0.5, 0.25))
    w1 = g.symbol(1)
    S = D.skorokhod([w1, w1])
    w = np.array([[0.7], [0.2]])
    assert D.evaluate(S, w)[0] == pytest.approx(0.49 + 0.14 - 0.5)


def test_ibp_by_hand():
    g = D.Grid((0.4,))
    w = g.symbol(1)
    c = D.check_ibp(w**3, [g.constant(1.0)])
    # E <D w^3, 1> = 3 E w^2 dt = 3 dt^2 ; E w^3 w = 3 dt^2
    assert c.route == "exact" and c.lhs == pytest.approx(3 * 0.16) and c.residual == 0.0


def test_transcendental_goes_to_monte_carlo():
    g = D.Grid((0.5,))
    w = g.symbol(1)
    G = D.WienerFunctional(D.E.sin(w.expr), g)
    c = D.check_ibp(G, [g.constant(1.0)], samples=200_000, seed=1)
    assert c.route == "mc"
    assert abs(c.z) < 4


def test_degree_budget():
    g = D.Grid((1.0,))
    with pytest.raises(D.DegreeBudgetError):
        D.wick_expectation(g.symbol(1) ** 14)
    with pytest.raises(D.NonPolynomialError):
        D.wick_expectation(D.WienerFunctional(D.E.exp(g.symbol(1).expr), g))


def test_grid_mismatch():
    a, b = D.Grid((1.0,)), D.Grid((1.0, 1.0))
    with pytest.raises(D.GridMismatchError):
        a.symbol(1) + b.symbol(1)
    with pytest.raises(IndexError):
        a.symbol(2)


def test_multi_noise_isometry():
    g = D.Grid((0.5, 0.5), m=2)
    w = g.symbols()
    F = [w[0] * w[3], w[1], w[2] ** 2, g.constant(1.0)]
    c = D.check_isometry(F)
    assert c.route == "exact" and abs(c.residual) <= 1e-12 and c.slack >= -1e-12


def test_refinement_of_single_step():
    g = D.Grid((1.0,))
    F = g.symbol(1) ** 2
    r = D.refine(F, 1, 0.25)
    assert r.grid.dt == (0.25, 0.75)
    # w = w' + w'' on the refined grid
    assert D.evaluate(r, np.array([[0.1], [0.2]]))[0] == pytest.approx(0.09)


def test_mean_zero_of_skorokhod():
    g = D.Grid((0.2, 0.3, 0.5))
    w = g.symbols()
    S = D.skorokhod([w[1] * w[2], w[0] ** 2, w[0] * w[1]])
    assert D.wick_expectation(S) == 0.0


def test_discrete_malliavin_matrix():
    g = D.Grid((0.5, 0.5))
    w1, w2 = g.symbols()
    M = D.discrete_malliavin_matrix([w1 + w2, w1 * w2])(np.array([[1.0], [2.0]]))[..., 0]
    # gradients (1, 1) and (w2, w1) = (2, 1), each step weighted by 0.5
    assert np.allclose(M, [[1.0, 1.5], [1.5, 2.5]])


def test_parse_corpus():
    text = """# two entries
@grid 0.5,0.5
w1^2 | 1 ; w1
w1*w2
@grid 1 m=2
w1_1 | w1_2 ; 1
"""
    entries = D.parse_corpus(text)
    assert len(entries) == 3
    out = suites.file_corpus(entries, points=20)
    assert out["ibp"].worst <= 1e-12 and out["dint"].worst <= 1e-12


@pytest.mark.parametrize("bad", ["w1 | 1", "@grid\nw1", "@grid 1\nw1 | 1 ; 1", "@grid 1\nw3"])
def test_parse_corpus_errors(bad):
    with pytest.raises(ValueError):
        D.parse_corpus(bad)


def test_small_corpus_all_identities():
    grids = (D.Grid((0.5, 0.5)), D.Grid((1.0,), m=2))
    out = suites.exact_corpus(grids, max_degree=3, points=20)
    for name, r in out.items():
        assert r.passed(), (name, r.worst, r.worst_case)
    assert out["isometry"].extra["min_slack"] >= -1e-12


def test_corpus_counts():
    corpus = D.polynomial_corpus(D.DEFAULT_GRIDS, 4)
    # every G and F pairing in the corpus has an exact route
    assert len(corpus) > 1000
    assert all(e.G.is_polynomial for e in itertools.islice(corpus, 100))
    assert math.isfinite(D.wick_expectation(corpus[-1].G))
