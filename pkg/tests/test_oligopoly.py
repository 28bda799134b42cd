import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oligofrag.oligopoly import (ConvergenceError, InfeasibleMarket, eta1_feasible, firm_profits,
                                 market_n_star, markup_of_share, max_feasible_n, shares_fixed_point,
                                 shares_newton, solve_market, solve_market_eta1)
from oracles import cournot_best_response
from conftest import eta1_params

RHO = 0.75


def test_markup_examples():
    assert markup_of_share(1.0, 1.0, RHO) == pytest.approx(4 / 3)
    assert markup_of_share(0.0, 1.0, RHO) == 1.0
    assert markup_of_share(0.5, 1.0, RHO) == pytest.approx(8 / 7, abs=1e-12)


def test_eta1_asymmetric_duopoly():
    eq = solve_market_eta1([1.2, 1.0], RHO)
    assert eq.g == pytest.approx(0.9545455, abs=1e-7)
    np.testing.assert_allclose(eq.shares, [0.8181818, 0.1818182], atol=1e-7)
    np.testing.assert_allclose(eq.markups, [1.2571429, 1.0476190], atol=1e-7)
    assert eq.foc_residual < 1e-12
    np.testing.assert_allclose(firm_profits(eq, 1.0, 1.0, RHO), [0.145556, 0.007188], atol=1e-6)


def test_eta1_symmetric_duopoly():
    eq = solve_market_eta1([1.0, 1.0], RHO)
    np.testing.assert_allclose(eq.shares, [0.5, 0.5])
    assert eq.g == pytest.approx(0.875)
    assert eq.hhi == pytest.approx(0.5)


def test_eta1_infeasible():
    with pytest.raises(InfeasibleMarket):
        solve_market_eta1([2.0, 1.0], RHO)
    assert not eta1_feasible([2.0, 1.0], RHO)
    assert max_feasible_n([1.3, 1.1, 0.9], RHO) == 2


@pytest.mark.parametrize("gamma", [[1.2, 1.0], [1.0, 1.0, 1.0], [1.1, 1.05, 0.97], [1.0]])
def test_eta1_matches_best_response_oracle(gamma):
    q, prof = cournot_best_response(gamma, RHO)
    eq = solve_market_eta1(gamma, RHO)
    np.testing.assert_allclose(q / q.sum(), eq.shares, atol=1e-3)
    np.testing.assert_allclose(prof, firm_profits(eq, 1.0, 1.0, RHO), atol=1e-4)


def test_general_eta_examples():
    eq = solve_market([1.3], 0.9, RHO)
    assert eq.shares[0] == 1.0 and eq.markups[0] == pytest.approx(1 / RHO)
    for n in (2, 3, 7):
        eq = solve_market(np.ones(n), 0.9, RHO)
        np.testing.assert_allclose(eq.shares, 1 / n, atol=1e-13)
        np.testing.assert_allclose(eq.markups, 1 / (0.9 - (0.9 - RHO) / n), rtol=1e-12)
    eq = solve_market([1.2, 1.0], 0.95, RHO)
    assert eq.foc_residual < 1e-10
    # eta -> rho: markups all equal 1/rho, shares proportional to gamma^(rho/(1-rho))
    e = RHO / (1 - RHO)
    s_mc = 1.2 ** e / (1.2 ** e + 1.0)
    assert s_mc < eq.shares[0] < 0.8181818


def test_leader_share_monotone_between_limits():
    etas = np.linspace(RHO + 1e-3, 1 - 1e-4, 60)
    s1 = [solve_market([1.2, 1.0], eta, RHO).shares[0] for eta in etas]
    assert np.all(np.diff(s1) > 0)
    assert s1[0] == pytest.approx(1.2 ** 3 / (1.2 ** 3 + 1), abs=1e-3)
    assert s1[-1] == pytest.approx(0.8181818, abs=1e-3)


def test_fixed_point_route_agrees_with_newton():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = rng.integers(2, 8)
        g = np.sort(np.exp(0.3 * rng.standard_normal(n)))[::-1]
        eta = rng.uniform(0.8, 0.97)
        a = solve_market(g, eta, RHO, method="newton")
        b = solve_market(g, eta, RHO, method="fixed_point")
        np.testing.assert_allclose(a.shares, b.shares, atol=1e-10)


def test_fixed_point_nonconvergence_reports_residual():
    with pytest.raises(ConvergenceError, match="last residual"):
        shares_fixed_point(np.array([3.0, 1.0, 0.5]), 0.98, 0.2, max_iter=3)


def test_market_n_star_examples():
    p = eta1_params(rho=RHO, M=3)
    g = np.ones(3)
    assert market_n_star(g, 0.05, 1.0, 1.0, p) == 1
    assert market_n_star(g, 0.03, 1.0, 1.0, p) == 2
    assert market_n_star(g, 0.0, 1.0, 1.0, p) == 3
    assert market_n_star(g, 0.2, 1.0, 1.0, p) == 0
    pr = [firm_profits(solve_market_eta1(g[:n], RHO), 1.0, 1.0, RHO)[-1] for n in (1, 2, 3)]
    np.testing.assert_allclose(pr[:2], [0.105469, 0.041870], atol=1e-6)
    # the reference triopoly figure 0.021392 is off in the sixth decimal;
    # closed form and the best-response oracle both give 0.0213961
    np.testing.assert_allclose(pr[2], 0.021392, atol=1e-5)
    oracle = [cournot_best_response(g[:n], RHO)[1][-1] for n in (1, 2, 3)]
    np.testing.assert_allclose(pr, oracle, atol=1e-7)


gammas = st.lists(st.floats(0.5, 2.0), min_size=1, max_size=8).map(
    lambda v: np.sort(np.array(v))[::-1])


@settings(max_examples=200, deadline=None)
@given(gammas, st.floats(0.55, 0.99), st.floats(0.1, 0.5))
def test_share_invariants(g, eta, rho):
    rho = min(rho, eta - 0.05)
    eq = solve_market(g, eta, rho)
    assert abs(eq.shares.sum() - 1) < 1e-12
    assert np.all(eq.shares >= 0) and np.all(eq.shares <= 1)
    np.testing.assert_allclose(eq.markups, 1 / (eta - (eta - rho) * eq.shares), rtol=1e-13)
    assert np.all(eq.markups >= 1 / eta - 1e-12)
    assert np.all(np.diff(eq.shares) <= 1e-12)
    assert np.all(np.diff(eq.markups) <= 1e-12)
    assert eq.foc_residual < 1e-10


@settings(max_examples=200, deadline=None)
@given(gammas, st.floats(0.1, 0.9))
def test_eta1_share_invariants(g, rho):
    n = max_feasible_n(g, rho)
    eq = solve_market_eta1(g[:n], rho)
    assert abs(eq.shares.sum() - 1) < 1e-12
    assert np.all(eq.shares > 0)
    assert np.all(np.diff(eq.shares) <= 1e-12)


@settings(max_examples=100, deadline=None)
@given(gammas)
def test_eta_to_one_continuity(g):
    n = max_feasible_n(g, RHO)
    g = g[:n]
    # share map Lipschitz constant ~ eta/(1-eta) = 1e6, so the attainable
    # first-order residual is ~1e6 * machine epsilon here
    a = solve_market(g, 1 - 1e-6, RHO, tol=1e-8)
    b = solve_market_eta1(g, RHO)
    assert np.max(np.abs(a.shares - b.shares)) < 1e-4
    assert np.max(np.abs(a.markups - b.markups)) < 1e-4


def test_batch_newton_matches_single():
    rng = np.random.default_rng(5)
    g = np.sort(np.exp(0.3 * rng.standard_normal((50, 6))), axis=1)[:, ::-1]
    s = shares_newton(g, 0.91, 0.27)
    for i in range(50):
        np.testing.assert_allclose(s[i], solve_market(g[i], 0.91, 0.27).shares, atol=1e-13)


def test_zero_firms_rejected():
    with pytest.raises(ValueError):
        solve_market(np.zeros(0), 0.9, RHO)
