import numpy as np
import pytest

from oligofrag.fragility import (SteadyState, SteadyStateSet, SymmetricEconomy, apply_mps, chi,
                                 find_steady_states, law_of_motion_deterministic,
                                 multiplicity_condition, rental_rate_map, steady_states,
                                 sufficient_conditions, toy_economy, toy_params,
                                 uniqueness_condition)
from oligofrag.params import ModelError
from oligofrag.oligopoly import solve_market_eta1


@pytest.fixture(scope="module")
def toy():
    return toy_economy()


def test_r_star_value():
    assert toy_params(beta=0.99).with_(delta=0.025).R_star == pytest.approx(0.0351010101, abs=1e-10)


def test_toy_steady_states(toy):
    ss = steady_states(toy, toy.p)
    assert ss.kinds == ["stable", "unstable", "stable"]
    assert [s.slope_sign for s in ss.states] == [-1, 1, -1]
    assert ss.states[0].n_concentrated == 1.0 and ss.states[2].n_concentrated == 2.0
    rep = chi(ss)
    assert len(rep.entries) == 1
    assert 0 < rep.chi[0] <= 1
    assert rep.entries[0]["min_shock"] == pytest.approx(1 - rep.chi[0])


def test_toy_chi_rises_with_fixed_cost(toy):
    a = chi(steady_states(toy, toy.p)).chi[0]
    t2 = toy.with_(c=0.016)
    b = chi(steady_states(t2, t2.p)).chi[0]
    assert b > a


def test_zero_fixed_cost_single_decreasing_state(toy):
    t0 = toy.with_(c=0.0)
    K = np.geomspace(1e-3, 1e3, 300)
    curve = rental_rate_map(t0, K)
    assert np.all(np.diff(curve.R) < 0)
    assert steady_states(t0, t0.p, K_grid=K).kinds == ["stable"]
    assert not multiplicity_condition(t0, 1)


def test_inada_endpoints(toy):
    lo, hi = toy.default_K_range()
    curve = rental_rate_map(toy, np.array([lo * 1e-3, lo, hi, hi * 1e3]))
    assert curve.R[0] > curve.R[1] > toy.p.R_star > curve.R[2] > curve.R[3]
    assert curve.R[0] > 10 * toy.p.R_star and curve.R[3] < 0.1 * toy.p.R_star


def test_no_crossing_is_an_error(toy):
    with pytest.raises(ModelError, match="does not cross"):
        steady_states(toy, toy.p, K_grid=np.geomspace(1e3, 1e4, 20))


def test_chi_ratio_and_empty_report():
    ss = SteadyStateSet([SteadyState(0.5, "stable", -1, 1, 1.0),
                         SteadyState(0.8, "unstable", 1, 1, 1.0),
                         SteadyState(1.0, "stable", -1, 2, 1.0)], 1.0)
    rep = chi(ss)
    assert rep.chi[0] == pytest.approx(0.8)
    assert rep.entries[0]["min_shock"] == pytest.approx(0.2)
    assert chi(SteadyStateSet([SteadyState(1.0, "stable", -1, 2, 1.0)], 1.0)).entries == []


def test_bounds(toy):
    p = toy.p
    ex = (p.nu + p.alpha) / (p.alpha * (1 + p.nu))
    lo1, hi1 = toy.bounds_K(1)
    lo2, hi2 = toy.with_(c=2 * toy.c).bounds_K(1)
    assert lo2 / lo1 == pytest.approx(2 ** ex, rel=1e-12)
    assert hi2 / hi1 == pytest.approx(2 ** ex, rel=1e-12)
    assert toy.with_(c=1e-12).bounds_K(1)[0] < 1e-12
    lo_c, hi_c = toy.with_(c=0.02).bounds_K(1)
    assert lo_c > lo1 and hi_c > hi1
    with pytest.raises(ModelError):
        toy.bounds_K(0)


def test_uniqueness_condition_orders_bounds(toy):
    flags = sufficient_conditions(toy.p)["uniqueness"]
    assert flags["lhs"] == pytest.approx(3.0) and flags["rhs"] == pytest.approx(0.9090909, abs=1e-7)
    assert flags["holds"]
    assert uniqueness_condition(toy, 1)
    assert toy.bounds_K(1)[1] < toy.bounds_K(2)[0]


def test_sufficient_condition_values():
    p = toy_params()
    f = sufficient_conditions(p)["mps_fragility"]
    assert f["rhs"] == pytest.approx(0.764706, abs=1e-6)
    assert not f["holds"]
    assert sufficient_conditions(p.with_(rho=0.80))["mps_fragility"]["holds"]
    lim = sufficient_conditions(p.with_(rho=0.999))
    assert lim["uniqueness"]["holds"] and lim["mps_fragility"]["holds"]


def test_multiplicity_condition_examples(toy):
    assert multiplicity_condition(toy, 1)
    assert not multiplicity_condition(toy.with_(c=0.0), 1)
    big = toy.with_(c=50.0)
    assert not any(multiplicity_condition(big, n) for n in range(1, big.nmax))


def test_apply_mps_examples():
    g = np.array([1.1, 0.9])
    np.testing.assert_array_equal(apply_mps(g, 0.0), g)
    np.testing.assert_allclose(apply_mps(g, 0.05), [1.15, 0.85], rtol=1e-14)
    g2 = apply_mps(g, 0.05)
    assert g2.mean() == pytest.approx(1.0, abs=1e-15)
    # (1.15, 0.85) is share-feasible for rho = 0.6 but not 0.75
    assert solve_market_eta1(g2, 0.6).g < solve_market_eta1(g, 0.6).g
    for eps in (1e-6, 0.01, 0.05):
        ge = apply_mps(g, eps)
        assert 1.0 / np.sum(1 / ge) < 1.0 / np.sum(1 / g)
    g5 = np.array([1.3, 1.2, 1.0, 0.9, 0.8])
    v = [apply_mps(g5, s).var() for s in (0.0, 0.02, 0.05, 0.1)]
    assert np.all(np.diff(v) > 0)
    out = apply_mps(g5, 0.05)
    assert out.mean() == pytest.approx(g5.mean(), rel=1e-14)
    assert out[0] / out[1] == pytest.approx(g5[0] / g5[1], rel=1e-14)
    with pytest.raises(ModelError):
        apply_mps(g, 0.5, rho=0.75)
    with pytest.raises(ModelError):
        apply_mps(g, -0.1)


def test_asymmetric_band(toy):
    A = toy.A
    lo, hi = toy.bounds_K(1)[1], toy.bounds_K(2)[0]
    assert toy.asymmetric_region_solve(1, lo)[0] == 0.0
    assert toy.asymmetric_region_solve(1, hi)[0] == 1.0
    r1 = toy.p.r1
    for K in np.linspace(lo, hi, 7)[1:-1]:
        m, Y, Phi, Theta = toy.asymmetric_region_solve(1, K)
        assert 0 < m < 1
        profit = toy.lam[2] * (A / Theta) ** r1 * Y
        assert profit == pytest.approx(toy.c, abs=1e-10)
    with pytest.raises(ModelError):
        toy.asymmetric_region_solve(1, 2 * hi)


def test_theta_continuous_across_band(toy):
    lo, hi = toy.bounds_K(1)[1], toy.bounds_K(2)[0]
    eps = 1e-9
    for K in (lo, hi):
        a, b = toy.state(K * (1 - eps)), toy.state(K * (1 + eps))
        assert a.Theta == pytest.approx(b.Theta, rel=1e-6)
        assert a.Y == pytest.approx(b.Y, rel=1e-6)


def test_law_of_motion_toy(toy):
    lo, hi = toy.default_K_range()
    ss = steady_states(toy, toy.p)
    K = np.linspace(0.5 * ss.states[0].K, 1.5 * ss.states[-1].K, 240)
    lom = law_of_motion_deterministic(toy, toy.p, K)
    kinds = [c["kind"] for c in lom.crossings]
    assert kinds == ["stable", "unstable", "stable"]
    assert abs(lom.crossings[0]["slope"]) < 1 and abs(lom.crossings[2]["slope"]) < 1
    assert lom.crossings[1]["slope"] > 1
    for c, s in zip(lom.crossings, ss.states):
        assert c["K"] == pytest.approx(s.K, rel=2 * (K[1] - K[0]) / s.K)


def test_law_of_motion_concave_within_regions(toy):
    ss = steady_states(toy, toy.p)
    K = np.linspace(0.5 * ss.states[0].K, 1.5 * ss.states[-1].K, 240)
    lom = law_of_motion_deterministic(toy, toy.p, K)
    n = np.array([toy.regime(k) for k in K])
    same = np.all(n[:-2] == n[2:], axis=1) & np.all(n[:-2] == n[1:-1], axis=1) & (n[1:-1, 1] == 0)
    d2 = lom.K_next[2:] - 2 * lom.K_next[1:-1] + lom.K_next[:-2]
    assert np.all(d2[same] <= 1e-8 * lom.K_next[1:-1][same])


def test_symmetric_economy_validation():
    p = toy_params()
    with pytest.raises(ModelError):
        SymmetricEconomy(np.array([1.0, 1.2]), 0.01, p)
    with pytest.raises(ModelError):
        SymmetricEconomy(np.ones(3), 0.01, p.with_(eta=0.9))
