"""Quantitative experiments on solved economies.

Each experiment works on a :class:`SolvedEconomy`, which bundles a drawn
economy, its static grid, the productivity chain and the savings policy.
Deviations are reported relative to the stochastic high steady state, the
capital level the policy settles at when log A stays at zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import brentq
from scipy.signal import find_peaks

from .aggregate import DrawnEconomy, _batch_shares
from .dynamics import (Interpolator, SimPath, chain_for, extend_policy, grid_columns,
                       policy_fixed_point, simulate, simulate_logY, solve_policy)
from .fragility import steady_states
from .oligopoly import markup_of_share
from .params import ModelError, ParamSet, preset
from .parallel import parallel_map
from .technology import draw_technology

TECH_SEED = 12345

# quarters after 2007Q4 (t = 1 is 2008Q1)
NAMED_OFFSETS = {"2009Q4": 8, "2015Q1": 29, "2016Q1": 33, "2019Q1": 45, "2040Q1": 129}

SERIES_MAPPING = {
    "hours": "L",
    "investment": "K' - (1 - delta) K",
    "labor_share": "(1 - alpha) * Omega",
    "profit_share": "1 - Omega - fixed costs / Y",
    "aggregate_markup": "1 / Omega",
    "measured_TFP": "A * Phi",
}


@dataclass(frozen=True)
class Scale:
    name: str
    n_markets: int | None
    n_K: int
    n_A: int
    reps: int
    horizons: tuple
    ergodic_reps: int
    ergodic_T: int
    burn_in: int
    welfare_reps: int
    welfare_T: int


SCALES = {
    "desk": Scale("desk", 2000, 50, 7, 10_000, (40,), 2000, 2200, 200, 1000, 1000),
    "full": Scale("full", None, 70, 11, 100_000, (40, 100), 10_000, 1200, 200, 4000, 1000),
    "smoke": Scale("smoke", 200, 20, 5, 500, (40,), 100, 400, 100, 100, 400),
}


def get_scale(scale):
    if isinstance(scale, Scale):
        return scale
    if scale not in SCALES:
        raise ModelError(f"unknown scale {scale!r}; choose from {tuple(SCALES)}")
    return SCALES[scale]


# ---------------------------------------------------------------------------
# solved economies


@dataclass
class SolvedEconomy:
    name: str
    p: ParamSet
    econ: DrawnEconomy
    K_det: float                  # highest stable deterministic steady state
    grid: object
    chain: object
    policy: object
    K_high: float                 # stochastic high steady state (log A = 0)
    tau_f: float = 0.0
    grid_ext: object = None       # grid and policy with extra log A nodes for shock paths
    policy_ext: object = None
    meta: dict = field(default_factory=dict)

    @property
    def continuous(self):
        """Grid and policy used for continuous log A paths."""
        if self.grid_ext is None:
            return self.grid, self.policy
        return self.grid_ext, self.policy_ext

    @property
    def high_state(self):
        itp = Interpolator(self.grid, self.p)
        return itp.at_logA(np.array([self.K_high]), 0.0)

    @property
    def logY_high(self):
        return float(np.log(self.high_state["Y"][0]))


def high_steady_state(econ, p, K_lo=10.0, K_hi=5000.0, n_points=400):
    """Highest stable deterministic steady state at A = 1."""
    for _ in range(4):
        K = np.geomspace(K_lo, K_hi, n_points)
        ss = steady_states(econ, p, K_grid=K, A=1.0)
        top = ss.stable[-1] if ss.stable else None
        if top is not None and top.K < 0.95 * K_hi:
            return top.K, ss
        K_hi *= 4.0
    raise ModelError("no stable steady state found in the capital scan")


def extended_logA(chain, lo=-0.08, hi=None):
    """Chain states plus equally spaced nodes reaching down to ``lo`` (and up to ``hi``)."""
    st = chain.states
    if st.size < 2:
        return st.copy()
    step = st[1] - st[0]
    below = st[0] - step * np.arange(1, int(np.ceil((st[0] - lo) / step)) + 1) if lo is not None else []
    above = st[-1] + step * np.arange(1, int(np.ceil((hi - st[-1]) / step)) + 1) if hi is not None else []
    return np.concatenate([np.sort(np.asarray(below)), st, np.asarray(above)])


def build_economy(p, scale="desk", seed=TECH_SEED, tau_f=0.0, threads=1, econ=None,
                  K_range=None, name=None, tol=1e-10, s0=None, ext_lo=-0.08, extend=True):
    """Draw, tabulate, grid and solve one economy.

    ``p`` is a ParamSet or a preset name.  The K grid spans 0.5 to 1.5 times
    the high steady state unless ``K_range`` is given.  With ``extend`` the
    policy is also solved at log A nodes below the chain down to ``ext_lo``
    so shock sequences can push A beyond the chain's support.
    """
    sc = get_scale(scale)
    if isinstance(p, str):
        name = name or p
        p = preset(p)
    t0 = time.perf_counter()
    if econ is None:
        n = None if sc.n_markets is None else min(sc.n_markets, p.I)
        tech = draw_technology(p, seed, n_markets=n)
        econ = DrawnEconomy(tech, p, tau_f)
    elif econ.tau_f != tau_f:
        econ = econ.with_tau(tau_f)
    K_det, _ = high_steady_state(econ, p)
    lo, hi = K_range if K_range is not None else (0.5 * K_det, 1.5 * K_det)
    chain = chain_for(p, sc.n_A)
    K_grid = np.linspace(lo, hi, sc.n_K)
    grid_ext = policy_ext = None
    if extend and chain.n > 1:
        la = extended_logA(chain, ext_lo)
        grid_ext = econ.grid(K_grid, la, threads=threads)
        cols = np.searchsorted(la, chain.states - 1e-13)
        grid = grid_columns(grid_ext, cols)
    else:
        grid = econ.grid(K_grid, chain.states, threads=threads)
    policy = solve_policy(grid, chain, p, tol=tol, s0=s0)
    if grid_ext is not None:
        policy_ext = extend_policy(policy, grid_ext, chain, p, tol=tol)
    K_high = policy_fixed_point(policy, grid, p, K_det, logA=0.0)
    meta = dict(scale=sc.name, seed=seed, n_markets=econ.tech.n_markets,
                solve_seconds=time.perf_counter() - t0, policy_iterations=policy.iterations,
                grid_warnings=grid.warnings)
    return SolvedEconomy(name or "custom", p, econ, float(K_det), grid, chain, policy,
                         float(K_high), float(tau_f), grid_ext, policy_ext, meta)


# ---------------------------------------------------------------------------
# ergodic distribution


@dataclass
class ErgodicSummary:
    edges: np.ndarray
    counts: np.ndarray
    modes: np.ndarray             # log-output gaps at the detected modes
    mean_gap: float
    std_logY: float
    n_obs: int
    clamped: int

    @property
    def n_modes(self):
        return int(self.modes.size)

    @property
    def bimodal(self):
        return self.n_modes >= 2


def count_modes(counts, edges, smooth=2.0, prominence=0.05):
    """Modes of a histogram after light Gaussian smoothing."""
    h = gaussian_filter1d(np.asarray(counts, dtype=float), smooth, mode="constant")
    if h.max() <= 0:
        return np.zeros(0)
    pk, _ = find_peaks(np.concatenate([[0.0], h, [0.0]]), prominence=prominence * h.max())
    mids = 0.5 * (edges[:-1] + edges[1:])
    return mids[pk - 1]


def ergodic(sol, T_long=None, burn_in=None, seed=0, reps=None, bin_width=0.005):
    sc = get_scale(sol.meta.get("scale", "desk"))
    T_long = sc.ergodic_T if T_long is None else T_long
    burn_in = sc.burn_in if burn_in is None else burn_in
    reps = sc.ergodic_reps if reps is None else reps
    if T_long <= burn_in:
        raise ModelError("T_long must exceed burn_in")
    logY, clamped = simulate_logY(sol.policy, sol.grid, sol.chain, sol.p, T_long, sol.K_high,
                                  seed=seed, reps=reps, burn=burn_in)
    gap = logY.ravel() - sol.logY_high
    lo = np.floor(gap.min() / bin_width) * bin_width - bin_width
    hi = np.ceil(gap.max() / bin_width) * bin_width + bin_width
    edges = np.arange(lo, hi + 0.5 * bin_width, bin_width)
    counts, edges = np.histogram(gap, bins=edges)
    return ErgodicSummary(edges, counts, count_modes(counts, edges), float(gap.mean()),
                          float(logY.std()), int(gap.size), int(clamped))


# ---------------------------------------------------------------------------
# deep recessions


@dataclass(frozen=True)
class RecessionSpec:
    thresholds: tuple = (0.10, 0.15, 0.20)
    min_duration: int = 4
    horizons: tuple = (40,)
    n_sims: int = 10_000

    def __post_init__(self):
        for k in self.thresholds:
            if not 0.0 <= k < 1.0:
                raise ModelError(f"thresholds must lie in [0,1), got {k}")
        if self.min_duration < 1:
            raise ModelError("min_duration must be at least 1")
        if any(T < 1 for T in self.horizons):
            raise ModelError("horizons must be positive")


def recession_probabilities(sol, spec=None, seed=0):
    """Share of paths with log output at least kappa below its initial level
    for ``min_duration`` consecutive quarters within the horizon.

    Shorter horizons are prefixes of the longest simulated path.
    """
    if spec is None:
        sc = get_scale(sol.meta.get("scale", "desk"))
        spec = RecessionSpec(horizons=sc.horizons, n_sims=sc.reps)
    Tmax = max(spec.horizons)
    logY, _ = simulate_logY(sol.policy, sol.grid, sol.chain, sol.p, Tmax + 1, sol.K_high,
                            seed=seed, reps=spec.n_sims)
    dev = logY[:, 1:] - logY[:, :1]
    rows = []
    for k in spec.thresholds:
        below = dev <= -k
        run = np.zeros(spec.n_sims, dtype=np.int64)
        hit = np.zeros(spec.n_sims, dtype=bool)
        first = np.full(spec.n_sims, np.iinfo(np.int64).max)
        for t in range(Tmax):
            run = np.where(below[:, t], run + 1, 0)
            new = (run >= spec.min_duration) & ~hit
            first[new] = t + 1
            hit |= new
        for T in sorted(spec.horizons):
            pr = float(np.mean(first <= T))
            hw = 1.96 * np.sqrt(pr * (1.0 - pr) / spec.n_sims)
            rows.append(dict(threshold=k, T=T, probability=pr, half_width=hw,
                             n_sims=spec.n_sims))
    return rows


# ---------------------------------------------------------------------------
# deviations, impulse responses and the crisis exercise


_LOG_SERIES = ("K", "Y", "L", "W", "C", "investment", "Theta", "Omega", "Phi",
               "measured_TFP", "n_firms_concentrated")
_LEVEL_SERIES = ("R", "savings", "labor_share", "capital_share", "profit_share", "logA")


def deviations(path, base):
    """Deviation of every series from a baseline (log for quantities).

    The aggregate markup is reported in points, 100 * (mu - mu_base).
    """
    out = {}
    for k in _LOG_SERIES:
        out[k] = np.log(path[k]) - np.log(base[k])
    for k in _LEVEL_SERIES:
        out[k] = path[k] - base[k]
    out["aggregate_markup"] = 100.0 * (path["aggregate_markup"] - base["aggregate_markup"])
    return out


def logA_from_shocks(eps, phi, T, logA0=0.0):
    """log A_t = phi log A_{t-1} + eps_t for t = 1..T (t = 0 is the start)."""
    eps = np.asarray(eps, dtype=float)
    la = np.empty(T + 1)
    la[0] = logA0
    for t in range(1, T + 1):
        la[t] = phi * la[t - 1] + (eps[t - 1] if t - 1 < eps.size else 0.0)
    return la


def shock_profile(kind, p):
    """Innovation sequences: ``small`` is -sigma for 4 quarters, ``large`` -2 sigma for 6."""
    if kind == "small":
        return np.full(4, -p.sigma_eps)
    if kind == "large":
        return np.full(6, -2.0 * p.sigma_eps)
    if kind == "zero":
        return np.zeros(1)
    raise ModelError(f"unknown shock profile {kind!r}")


def run_shocks(sol, eps, horizon):
    """Simulate from the high steady state under a continuous log A path."""
    la = logA_from_shocks(eps, sol.p.phi_A, horizon)
    grid, pol = sol.continuous
    path = simulate(pol, grid, sol.chain, sol.p, horizon + 1, sol.K_high,
                    logA_path=la[None, :])
    return path, la


@dataclass
class IRFResult:
    h: np.ndarray
    dev: dict
    path: SimPath
    baseline: SimPath
    shocks: np.ndarray


def irf(sol, shocks, horizon=100):
    """Responses to an innovation sequence against the no-shock path.

    Period 0 is the pre-shock steady state; innovations hit from period 1.
    """
    shocks = np.asarray(shocks, dtype=float)
    path, _ = run_shocks(sol, shocks, horizon)
    base, _ = run_shocks(sol, np.zeros(1), horizon)
    dev = deviations(path.rep(0), base.rep(0))
    return IRFResult(np.arange(horizon + 1), dev, path, base, shocks)


def _measured_tfp(itp, K, logA):
    agg = itp.at_logA(np.array([K]), logA)
    return float(np.log(agg["A"][0] * agg["Phi"][0]))


def invert_tfp_shocks(sol, target, K0=None, logA0=0.0, xtol=1e-14):
    """Innovations that make log measured TFP (relative to period 0) track ``target``.

    ``target[t-1]`` is the deviation wanted in period t.  Solved one quarter
    at a time; capital follows the savings policy in between.
    """
    target = np.asarray(target, dtype=float)
    if target.size > 24:
        raise ModelError("target path is limited to 24 quarters")
    p = sol.p
    grid, pol = sol.continuous
    itp = Interpolator(grid, p)
    K = sol.K_high if K0 is None else float(K0)
    la = float(logA0)
    base = _measured_tfp(itp, K, la)
    lo_A, hi_A = grid.logA[0], grid.logA[-1]
    eps = np.empty(target.size)
    for t in range(target.size):
        agg = itp.at_logA(np.array([K]), la)
        s = pol.savings_logA(np.array([K]), la)
        K = float((1.0 - p.delta) * K + s[0] * agg["Y"][0])
        if not grid.K[0] <= K <= grid.K[-1]:
            raise ModelError(f"quarter {t + 1}: capital {K:.6g} left the grid")
        f = lambda e: _measured_tfp(itp, K, p.phi_A * la + e) - base - target[t]
        e_lo, e_hi = lo_A - p.phi_A * la, hi_A - p.phi_A * la
        f_lo, f_hi = f(e_lo), f(e_hi)
        if f_lo > 0 or f_hi < 0:
            bound = f_lo + target[t] if f_lo > 0 else f_hi + target[t]
            raise ModelError(f"quarter {t + 1}: target {target[t]:.6g} outside the reachable "
                             f"range (bound {bound:.6g}) within the chain support")
        eps[t] = brentq(f, e_lo, e_hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
        la = p.phi_A * la + eps[t]
    return eps


@dataclass
class CrisisReport:
    shocks: np.ndarray
    ramp_depth: float
    h: np.ndarray
    dev: dict
    table: list
    meta: dict = field(default_factory=dict)


REPORT_SERIES = ("Y", "measured_TFP", "L", "investment", "labor_share", "profit_share",
                 "aggregate_markup", "n_firms_concentrated")


def crisis_table(dev, offsets=None):
    offsets = NAMED_OFFSETS if offsets is None else offsets
    rows = []
    for q, h in offsets.items():
        if h >= dev["Y"].size:
            continue
        rows.append(dict(quarter=q, offset=h, **{k: float(dev[k][h]) for k in REPORT_SERIES}))
    return rows


def ramp_target(depth, quarters=6):
    return depth * np.arange(1, quarters + 1) / quarters


def crisis_experiment(sol, tfp_anchor=-0.039, anchor_offset=8, ramp_quarters=6,
                      horizon=130, shocks=None):
    """Shock inversion exercise.

    The target for log measured TFP falls linearly over ``ramp_quarters``;
    its depth is chosen so the model's measured TFP sits at ``tfp_anchor``
    in period ``anchor_offset``.  Passing ``shocks`` skips the inversion and
    feeds the given innovations (the counterfactual for other economies).
    """
    depth = float("nan")
    if shocks is None:
        if tfp_anchor == 0.0:
            shocks, depth = np.zeros(ramp_quarters), 0.0
        else:
            def gap(d):
                e = invert_tfp_shocks(sol, ramp_target(d, ramp_quarters))
                path, _ = run_shocks(sol, e, anchor_offset)
                tfp = np.log(path.measured_TFP[0])
                return tfp[anchor_offset] - tfp[0] - tfp_anchor
            d_hi = 0.0
            d_lo = tfp_anchor
            while gap(d_lo) > 0:
                d_lo *= 1.5
            depth = brentq(gap, d_lo, d_hi, xtol=1e-12)
            shocks = invert_tfp_shocks(sol, ramp_target(depth, ramp_quarters))
    res = irf(sol, shocks, horizon)
    return CrisisReport(np.asarray(shocks, dtype=float), depth, res.h, res.dev,
                        crisis_table(res.dev), dict(series_mapping=SERIES_MAPPING))


# ---------------------------------------------------------------------------
# moments of the high steady state


@dataclass
class MomentReport:
    sales_weighted_markup: float
    cost_weighted_markup: float
    std_log_revenue: float
    fixed_to_total_cost_ratio: float
    emp_share_concentrated: float
    hhi_percentiles: dict
    firms_per_concentrated_market: float
    markup_concentrated: float

    def as_dict(self):
        d = dict(self.__dict__)
        d["hhi_percentiles"] = dict(self.hhi_percentiles)
        return d


HHI_PERCENTILES = (10, 25, 50, 75, 90)


def moments(tech, p, firm_set, state):
    """Firm-level moments of a solved static equilibrium.

    Revenue of firm j in market i is ``s_ij * s_i * Y``; variable cost is
    revenue over the markup.  Drawn markets carry equal weight.
    """
    n = np.asarray(firm_set.n)
    c = tech.fixed_cost
    s_i = state.market_shares
    rev, mus, hhi, fc_ratio, conc_vc, conc_rev, conc_mu = [], [], [], [], [], [], []
    for k in np.unique(n[n > 0]):
        idx = np.flatnonzero(n == k)
        s, _ = _batch_shares(tech.gamma[idx, :k], p.eta, p.rho)
        mu = markup_of_share(s, p.eta, p.rho)
        r = s * (s_i[idx] * state.Y)[:, None]
        rev.append(r.ravel())
        mus.append(mu.ravel())
        hhi.append((s ** 2).sum(axis=1))
        cm = c[idx] > 0
        if cm.any():
            vc = r[cm] / mu[cm]
            fc_ratio.append((c[idx][cm][:, None] / (c[idx][cm][:, None] + vc)).ravel())
            conc_vc.append(vc.ravel())
            conc_rev.append(r[cm].ravel())
            conc_mu.append(mu[cm].ravel())
    rev = np.concatenate(rev)
    mus = np.concatenate(mus)
    hhi = np.concatenate(hhi)
    vc_all = rev / mus
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0)
    fc_ratio, conc_vc, conc_rev, conc_mu = map(cat, (fc_ratio, conc_vc, conc_rev, conc_mu))
    conc = c > 0
    return MomentReport(
        sales_weighted_markup=float(np.sum(rev * mus) / rev.sum()),
        cost_weighted_markup=float(rev.sum() / vc_all.sum()),
        std_log_revenue=float(np.std(np.log(rev))),
        fixed_to_total_cost_ratio=float(fc_ratio.mean()) if fc_ratio.size else 0.0,
        emp_share_concentrated=float(conc_vc.sum() / vc_all.sum()),
        hhi_percentiles={f"p{q}": float(v) for q, v in
                         zip(HHI_PERCENTILES, np.percentile(hhi, HHI_PERCENTILES))},
        firms_per_concentrated_market=float(n[conc].mean()) if conc.any() else 0.0,
        markup_concentrated=(float(np.sum(conc_rev * conc_mu) / conc_rev.sum())
                             if conc_rev.size else float("nan")),
    )


def steady_state_moments(econ, p, K=None):
    """Moments at the highest stable deterministic steady state (A = 1)."""
    if K is None:
        K, _ = high_steady_state(econ, p)
    res = econ.solve(K, 1.0)
    return moments(econ.tech, p, res.firm_set, res.state), res


# ---------------------------------------------------------------------------
# entry subsidy


def policy_taxes(Omega, Y, fixed_costs, tau_f):
    """Profit tax balancing the subsidy each period, plus the budget residual.

    Gross profits are (1 - Omega) Y, the subsidy pays tau_f of every active
    firm's fixed cost, and the tax applies to profits net of the unsubsidized
    fixed cost.  Households receive (1 - tau_pi) * net taxable profit.
    """
    gross = (1.0 - Omega) * Y
    taxable = gross - (1.0 - tau_f) * fixed_costs
    subsidy = tau_f * fixed_costs
    with np.errstate(divide="ignore", invalid="ignore"):
        tau_pi = np.where(subsidy > 0, subsidy / taxable, 0.0)
    household = (1.0 - tau_pi) * taxable
    resid = household - (gross - fixed_costs)
    return tau_pi, resid


def utility(B, psi):
    B = np.asarray(B, dtype=float)
    if psi == 1.0:
        return np.log(B)
    return (B ** (1.0 - psi) - 1.0) / (1.0 - psi)


def discounted_utility(C, disutil, beta, psi, lam=0.0, scale="consumption"):
    """Mean over replications of sum_t beta^t u(bundle)."""
    if scale == "consumption":
        B = (1.0 + lam) * C - disutil
    elif scale == "bundle":
        B = (1.0 + lam) * (C - disutil)
    else:
        raise ModelError(f"unknown CEV scaling {scale!r}")
    if np.any(B <= 0):
        return -np.inf
    disc = beta ** np.arange(C.shape[1])
    return float(np.mean(utility(B, psi) @ disc))


def cev(C0, D0, V1, beta, psi, scale="consumption"):
    """Uniform scaling of baseline consumption that delivers welfare V1."""
    f = lambda lam: discounted_utility(C0, D0, beta, psi, lam, scale) - V1
    lo, hi = -0.5, 1.0
    while f(lo) > 0:
        lo = -1.0 + 0.5 * (1.0 + lo)
    while f(hi) < 0:
        hi *= 2.0
    return brentq(f, lo, hi, xtol=1e-13)


@dataclass
class PolicyResult:
    rows: list
    baseline: dict
    meta: dict = field(default_factory=dict)

    @property
    def cev(self):
        return np.array([r["cev"] for r in self.rows])

    @property
    def tau_f(self):
        return np.array([r["tau_f"] for r in self.rows])


def _welfare_paths(sol, K0, seed, reps, T):
    path = simulate(sol.policy, sol.grid, sol.chain, sol.p, T, K0, seed=seed, reps=reps)
    C = path.C
    D = path.L ** (1.0 + sol.p.nu) / (1.0 + sol.p.nu)
    tau_pi, resid = policy_taxes(path.Omega, path.Y, path.fixed_costs, sol.tau_f)
    return path, C, D, tau_pi, resid


def policy_experiment(p, tau_grid=None, scale="desk", seed=TECH_SEED, sim_seed=1, reps=None,
                      T=None, threads=1, cev_scale="consumption", base=None):
    """Welfare of entry subsidies tau_f relative to no subsidy.

    Every subsidy level starts from the unsubsidized high steady state and
    faces the same productivity draws.
    """
    sc = get_scale(scale)
    tau_grid = np.round(np.arange(0.0, 1.0, 0.1), 10) if tau_grid is None else np.asarray(tau_grid)
    if np.any(tau_grid < 0) or np.any(tau_grid >= 1):
        raise ModelError("tau_f values must lie in [0,1)")
    reps = sc.welfare_reps if reps is None else reps
    T = sc.welfare_T if T is None else T
    if base is None:
        base = build_economy(p, sc, seed=seed, extend=False)
    p = base.p
    K0 = base.K_high
    econ = base.econ

    def solve_tau(tf):
        if tf == base.tau_f:
            return base
        e = econ.with_tau(tf)
        K_det, _ = high_steady_state(e, p)
        lo = min(0.5 * K_det, 0.5 * base.K_det)
        hi = max(1.5 * K_det, 1.5 * base.K_det)
        return build_economy(p, sc, seed=seed, tau_f=tf, econ=e, K_range=(lo, hi),
                             name=base.name, extend=False)

    sols = parallel_map(solve_tau, list(tau_grid), threads)
    _, C0, D0, _, _ = _welfare_paths(base, K0, sim_seed, reps, T)
    V0 = discounted_utility(C0, D0, p.beta, p.psi, 0.0, cev_scale)
    rows = []
    for tf, s in zip(tau_grid, sols):
        path, C, D, tau_pi, resid = _welfare_paths(s, K0, sim_seed, reps, T)
        V = discounted_utility(C, D, p.beta, p.psi, 0.0, cev_scale)
        feasible = bool(np.all((tau_pi >= 0) & (tau_pi <= 1)))
        lam = 0.0 if tf == base.tau_f else cev(C0, D0, V, p.beta, p.psi, cev_scale)
        rows.append(dict(tau_f=float(tf), welfare=V, cev=float(lam),
                         tau_pi_mean=float(np.mean(tau_pi)), tau_pi_max=float(np.max(tau_pi)),
                         budget_residual=float(np.max(np.abs(resid))), feasible=feasible,
                         K_high=s.K_high, mean_logY=float(np.mean(np.log(path.Y)))))
    return PolicyResult(rows, dict(welfare=V0, K0=K0), dict(cev_scale=cev_scale, reps=reps, T=T))
