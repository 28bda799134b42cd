"""AR(1) discretization, savings policy from the Euler equation, simulation.

Savings accounting: ``s`` is investment over output, so
``K' = (1-delta) K + s Y`` holds exactly and consumption is
``C = (1 - s) Y - FC`` where FC is the final-good fixed cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from .aggregate import factor_market
from .params import ModelError

SIM_CHUNK = 256   # replications per independent random stream


# ---------------------------------------------------------------------------
# Markov chain


@dataclass(frozen=True)
class MarkovChain:
    states: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        P = np.asarray(self.transition, dtype=float)
        if P.shape != (s.size, s.size):
            raise ModelError("transition matrix must be n_states x n_states")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ModelError("transition rows must be nonnegative and sum to one")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "transition", P)

    @property
    def n(self):
        return self.states.size

    @property
    def mid(self):
        """Index of the state closest to log A = 0."""
        return int(np.argmin(np.abs(self.states)))

    def stationary(self):
        w, v = np.linalg.eig(self.transition.T)
        k = int(np.argmin(np.abs(w - 1.0)))
        pi = np.real(v[:, k])
        return pi / pi.sum()

    def draw(self, a0, u):
        """Index paths driven by uniforms ``u`` of shape (reps, T)."""
        cum = np.cumsum(self.transition, axis=1)
        cum[:, -1] = 1.0
        reps, T = u.shape
        out = np.empty((reps, T), dtype=np.int64)
        a = np.broadcast_to(np.asarray(a0, dtype=np.int64), (reps,)).copy()
        for t in range(T):
            out[:, t] = a
            a = (u[:, t][:, None] > cum[a]).sum(axis=1)
        return out


def tauchen(phi_A, sigma_eps, n_states=11, width="match"):
    """Tauchen discretization of log A' = phi log A + eps, eps ~ N(0, sigma^2).

    The grid spans +-width unconditional standard deviations.  The default
    ``width="match"`` picks the width at which the chain's stationary
    standard deviation equals the AR(1) value; a number gives the classic
    fixed-width grid.
    """
    if width == "match":
        return _tauchen_matched(phi_A, sigma_eps, n_states)
    if n_states < 2:
        raise ModelError("n_states must be at least 2")
    if not 0.0 <= phi_A < 1.0:
        raise ModelError("phi_A must lie in [0,1)")
    if sigma_eps <= 0:
        raise ModelError("sigma_eps must be positive")
    sd = sigma_eps / np.sqrt(1.0 - phi_A ** 2)
    y = np.linspace(-width * sd, width * sd, n_states)
    step = y[1] - y[0]
    mean = phi_A * y[:, None]
    up = norm.cdf((y[None, :] - mean + step / 2.0) / sigma_eps)
    dn = norm.cdf((y[None, :] - mean - step / 2.0) / sigma_eps)
    P = up - dn
    P[:, 0] = up[:, 0]
    P[:, -1] = 1.0 - dn[:, -1]
    P = P / P.sum(axis=1, keepdims=True)
    return MarkovChain(y, P)


def _stationary_sd(chain):
    pi = chain.stationary()
    return float(np.sqrt(pi @ chain.states ** 2))


def _tauchen_matched(phi_A, sigma_eps, n_states):
    target = sigma_eps / np.sqrt(1.0 - phi_A ** 2)
    f = lambda w: _stationary_sd(tauchen(phi_A, sigma_eps, n_states, w)) / target - 1.0
    lo, hi = 0.5, 6.0
    if f(lo) * f(hi) > 0:
        return tauchen(phi_A, sigma_eps, n_states, 3.0)
    w = brentq(f, lo, hi, xtol=1e-12)
    return tauchen(phi_A, sigma_eps, n_states, w)


def degenerate_chain():
    return MarkovChain(np.zeros(1), np.ones((1, 1)))


def chain_for(p, n_states=11, width="match"):
    if p.sigma_eps == 0.0 or n_states == 1:
        return degenerate_chain()
    return tauchen(p.phi_A, p.sigma_eps, n_states, width)


# ---------------------------------------------------------------------------
# interpolation of static solutions


_BLEND = ("Omega", "Phi", "fc_goods", "Xc", "n_conc")


class Interpolator:
    """Static aggregates off the grid.

    Omega, Phi, fixed costs and firm counts are blended linearly between
    neighbouring nodes; Theta = Omega A Phi and (L, Y, W, R) then follow
    from the closed forms so the factor-market equations hold exactly.
    """

    def __init__(self, grid, p):
        self.grid = grid
        self.p = p
        self.K = np.asarray(grid.K, dtype=float)
        self.logA = np.asarray(grid.logA, dtype=float)
        self.A_level = float(getattr(grid, "A_level", 1.0))
        self.fields = {f: np.asarray(getattr(grid, f), dtype=float) for f in _BLEND}
        self.clamped_K = 0
        self.clamped_A = 0

    def locate_K(self, K):
        K = np.asarray(K, dtype=float)
        Kg = self.K
        if Kg.size == 1:
            return np.zeros(K.shape, dtype=np.int64), np.zeros(K.shape)
        out = (K < Kg[0]) | (K > Kg[-1])
        self.clamped_K += int(np.count_nonzero(out))
        Kc = np.clip(K, Kg[0], Kg[-1])
        i = np.clip(np.searchsorted(Kg, Kc, side="right") - 1, 0, Kg.size - 2)
        w = (Kc - Kg[i]) / (Kg[i + 1] - Kg[i])
        return i, w

    def locate_A(self, logA):
        logA = np.asarray(logA, dtype=float)
        g = self.logA
        if g.size == 1:
            return np.zeros(logA.shape, dtype=np.int64), np.zeros(logA.shape)
        out = (logA < g[0] - 1e-15) | (logA > g[-1] + 1e-15)
        self.clamped_A += int(np.count_nonzero(out))
        x = np.clip(logA, g[0], g[-1])
        j = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 2)
        w = (x - g[j]) / (g[j + 1] - g[j])
        return j, w

    def _finish(self, K, A, b):
        Theta = b["Omega"] * A * b["Phi"]
        L, Y, W, R = factor_market(K, A, Theta, b["Phi"], self.p, b["Xc"])
        b.update(K=K, A=A, Theta=Theta, L=L, Y=Y, W=W, R=R)
        return b

    def at(self, K, a_idx):
        """Aggregates at capital K with A on chain state ``a_idx``."""
        K = np.asarray(K, dtype=float)
        a = np.broadcast_to(np.asarray(a_idx, dtype=np.int64), K.shape)
        i, w = self.locate_K(K)
        b = {f: (1.0 - w) * v[i, a] + w * v[np.minimum(i + 1, self.K.size - 1), a]
             for f, v in self.fields.items()}
        return self._finish(np.clip(K, self.K[0], self.K[-1]),
                            self.A_level * np.exp(self.logA[a]), b)

    def at_logA(self, K, logA):
        """Aggregates at (K, log A) with bilinear blending across A nodes."""
        K = np.asarray(K, dtype=float)
        logA = np.broadcast_to(np.asarray(logA, dtype=float), K.shape)
        i, w = self.locate_K(K)
        j, v = self.locate_A(logA)
        i1 = np.minimum(i + 1, self.K.size - 1)
        j1 = np.minimum(j + 1, self.logA.size - 1)
        b = {}
        for f, arr in self.fields.items():
            b[f] = ((1 - w) * (1 - v) * arr[i, j] + w * (1 - v) * arr[i1, j]
                    + (1 - w) * v * arr[i, j1] + w * v * arr[i1, j1])
        lA = np.clip(logA, self.logA[0], self.logA[-1])
        return self._finish(np.clip(K, self.K[0], self.K[-1]), self.A_level * np.exp(lA), b)


# ---------------------------------------------------------------------------
# savings policy


@dataclass
class SavingsPolicy:
    K: np.ndarray
    logA: np.ndarray
    s: np.ndarray                 # (nK, nA) investment over output
    iterations: int = 0
    sup_change: float = 0.0
    corner_nodes: int = 0
    method: str = "implicit"
    meta: dict = field(default_factory=dict)

    def _wK(self, K):
        Kg = self.K
        if Kg.size == 1:
            z = np.zeros(np.shape(K))
            return z.astype(np.int64), z
        Kc = np.clip(K, Kg[0], Kg[-1])
        i = np.clip(np.searchsorted(Kg, Kc, side="right") - 1, 0, Kg.size - 2)
        return i, (Kc - Kg[i]) / (Kg[i + 1] - Kg[i])

    def savings(self, K, a_idx):
        K = np.asarray(K, dtype=float)
        a = np.broadcast_to(np.asarray(a_idx, dtype=np.int64), K.shape)
        i, w = self._wK(K)
        i1 = np.minimum(i + 1, self.K.size - 1)
        return (1.0 - w) * self.s[i, a] + w * self.s[i1, a]

    def savings_logA(self, K, logA):
        K = np.asarray(K, dtype=float)
        logA = np.broadcast_to(np.asarray(logA, dtype=float), K.shape)
        i, w = self._wK(K)
        i1 = np.minimum(i + 1, self.K.size - 1)
        g = self.logA
        if g.size == 1:
            j = np.zeros(K.shape, dtype=np.int64)
            v = np.zeros(K.shape)
        else:
            x = np.clip(logA, g[0], g[-1])
            j = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 2)
            v = (x - g[j]) / (g[j + 1] - g[j])
        j1 = np.minimum(j + 1, g.size - 1)
        s = self.s
        return ((1 - w) * (1 - v) * s[i, j] + w * (1 - v) * s[i1, j]
                + (1 - w) * v * s[i, j1] + w * v * s[i1, j1])


def _bundle(p, agg, s):
    """GHH bundle C - L^(1+nu)/(1+nu) with C = (1-s) Y - FC."""
    return (1.0 - s) * agg["Y"] - agg["fc_goods"] - agg["L"] ** (1.0 + p.nu) / (1.0 + p.nu)


def _marginal(B, psi):
    return B ** (-psi)


def _expected_rhs(itp, pol, chain, p, K_next, a_idx):
    """beta E[(R' + 1 - delta) B'^-psi] for next-period capital K_next."""
    nA = chain.n
    P = chain.transition[a_idx]                        # (..., nA)
    tot = np.zeros(K_next.shape)
    bad = 0
    for b in range(nA):
        agg = itp.at(K_next, b)
        s_n = pol.savings(K_next, b) if pol is not None else None
        B = _bundle(p, agg, s_n)
        bad += int(np.count_nonzero(B <= 0))
        B = np.maximum(B, 1e-300)
        tot = tot + P[..., b] * (agg["R"] + 1.0 - p.delta) * _marginal(B, p.psi)
    return p.beta * tot, bad


def steady_state_savings(p, Omega):
    """s* = beta delta alpha Omega / (1 - (1-delta) beta)."""
    return p.beta * p.delta * p.alpha * Omega / (1.0 - (1.0 - p.delta) * p.beta)


def solve_policy(grid, chain, p, tol=1e-10, max_iter=5000, method="implicit",
                 damping=1.0, s0=None, bisect_tol=1e-14):
    """Savings policy by iterating on the Euler equation.

    ``method="implicit"`` (default) solves, at every node, for the savings
    rate whose implied K' satisfies the Euler equation given the previous
    policy next period.  ``method="explicit"`` evaluates K' with the
    previous policy and inverts the Euler equation once, optionally damped.
    """
    if p.psi <= 0:
        raise ModelError("psi must be positive for the Euler equation to pin down savings")
    if grid.logA.size != chain.n or np.max(np.abs(grid.logA - chain.states)) > 1e-12:
        raise ModelError("grid A nodes must coincide with the chain states")
    itp = Interpolator(grid, p)
    nK, nA = grid.K.size, chain.n
    Kn = np.repeat(grid.K[:, None], nA, axis=1)
    an = np.repeat(np.arange(nA)[None, :], nK, axis=0)
    node = itp.at(Kn, an)
    extra = node["fc_goods"] + node["L"] ** (1.0 + p.nu) / (1.0 + p.nu)
    s_hi = 1.0 - extra / node["Y"]
    if np.any(s_hi <= 0):
        k, a = np.argwhere(s_hi <= 0)[0]
        raise ModelError(f"GHH bundle is nonpositive at every savings rate at node "
                         f"(K={grid.K[k]:.6g}, logA={grid.logA[a]:.6g})")
    s_lo = np.zeros_like(s_hi)
    if s0 is None:
        s = np.clip(steady_state_savings(p, node["Omega"]), 0.05 * s_hi, 0.95 * s_hi)
    else:
        s = np.array(s0, dtype=float)
    pol = SavingsPolicy(grid.K.copy(), grid.logA.copy(), s, method=method)
    change = np.inf
    corner = 0
    for it in range(1, max_iter + 1):
        if method == "implicit":
            rhs_fn = lambda K_next, a: _expected_rhs(itp, pol, chain, p, K_next, a)[0]
            s_new, corner = _implicit_step(rhs_fn, pol.s, p, node, Kn, an, s_lo, s_hi,
                                           bisect_tol)
        elif method == "explicit":
            K_next = (1.0 - p.delta) * Kn + s * node["Y"]
            rhs, _ = _expected_rhs(itp, pol, chain, p, K_next, an)
            B_t = rhs ** (-1.0 / p.psi)
            s_new = 1.0 - (B_t + extra) / node["Y"]
            s_new = (1.0 - damping) * s + damping * s_new
            corner = int(np.count_nonzero((s_new <= s_lo) | (s_new >= s_hi)))
            s_new = np.clip(s_new, s_lo, s_hi * (1 - 1e-12))
        else:
            raise ValueError(f"unknown method {method!r}")
        change = float(np.max(np.abs(s_new - s)))
        s = s_new
        pol = SavingsPolicy(grid.K.copy(), grid.logA.copy(), s, method=method)
        if change < tol:
            break
    else:
        raise ModelError(f"savings policy did not converge in {max_iter} iterations "
                         f"(last sup-norm change {change:.3e})")
    B = _bundle(p, node, s)
    if np.any(B <= 0):
        raise ModelError("GHH bundle is nonpositive at a grid node; grid too wide")
    pol.iterations = it
    pol.sup_change = change
    pol.corner_nodes = corner
    pol.meta = dict(clamped_K=itp.clamped_K)
    return pol


def _implicit_step(rhs_fn, s_prev, p, node, Kn, an, s_lo, s_hi, tol, n_scan=48):
    """Euler root at every node, continuing from the previous iterate.

    Where R rises with K' the node equation can have several roots; the
    bracket closest to the current policy is refined, which keeps the
    policy on one continuous branch.  ``rhs_fn(K_next, a)`` returns the
    discounted expected marginal return.
    """
    def gap(s, nd, K, a):
        K_next = (1.0 - p.delta) * K + s * nd["Y"]
        B = np.maximum(_bundle(p, nd, s), 1e-300)
        return _marginal(B, p.psi) - rhs_fn(K_next, a)

    x = np.linspace(0.0, 1.0, n_scan + 1)
    span = (s_hi - s_lo)[..., None]
    pts = s_lo[..., None] + span * x * (1.0 - 1e-12)
    nd3 = {k: v[..., None] for k, v in node.items()}
    g = gap(pts, nd3, Kn[..., None], an[..., None])
    g[..., -1] = np.inf
    corner = g[..., 0] > 0
    up = (g[..., :-1] <= 0) & (g[..., 1:] > 0)
    mids = 0.5 * (pts[..., :-1] + pts[..., 1:])
    dist = np.where(up, np.abs(mids - s_prev[..., None]), np.inf)
    j = np.argmin(dist, axis=-1)
    lo = np.take_along_axis(pts, j[..., None], -1)[..., 0]
    hi = np.take_along_axis(pts, j[..., None] + 1, -1)[..., 0]
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        pos = gap(mid, node, Kn, an) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    s = np.where(corner, s_lo, 0.5 * (lo + hi))
    return s, int(np.count_nonzero(corner))


def grid_columns(grid, cols):
    """Sub-grid made of the given log A columns."""
    cols = np.asarray(cols)
    kw = {f: getattr(grid, f)[:, cols] for f in grid.fields()}
    n_i = grid.n_i[:, cols] if grid.n_i is not None else None
    return replace(grid, logA=grid.logA[cols], n_i=n_i, meta=dict(grid.meta), **kw)


def extend_policy(policy, grid_ext, chain, p, n_quad=9, tol=1e-10, max_iter=5000,
                  bisect_tol=1e-14):
    """Savings at log A nodes outside the chain's support.

    Chain nodes keep the chain solution.  At an added node x the Euler
    expectation integrates log A' = phi x + eps, eps ~ N(0, sigma^2), by
    Gauss-Hermite quadrature, with aggregates and savings interpolated over
    all nodes.  Used for continuous log A paths that leave the chain grid.
    """
    la = np.asarray(grid_ext.logA, dtype=float)
    pos = np.array([np.argmin(np.abs(la - x)) for x in chain.states])
    if np.max(np.abs(la[pos] - chain.states)) > 1e-12 or np.any(np.diff(pos) <= 0):
        raise ModelError("extended grid must contain every chain state")
    if grid_ext.K.size != policy.K.size or np.max(np.abs(grid_ext.K - policy.K)) > 0:
        raise ModelError("extended grid must share the policy's capital nodes")
    off = np.setdiff1d(np.arange(la.size), pos)
    s = np.empty((grid_ext.K.size, la.size))
    s[:, pos] = policy.s
    for j in off:
        s[:, j] = policy.s[:, np.argmin(np.abs(chain.states - la[j]))]
    ext = SavingsPolicy(grid_ext.K.copy(), la.copy(), s, method=policy.method,
                        meta=dict(policy.meta, chain_columns=pos.tolist()))
    if off.size == 0:
        return ext
    itp = Interpolator(grid_ext, p)
    z, w = np.polynomial.hermite_e.hermegauss(n_quad)
    w = w / w.sum()
    nK = grid_ext.K.size
    Kn = np.repeat(grid_ext.K[:, None], off.size, axis=1)
    an = np.repeat(off[None, :], nK, axis=0)
    node = itp.at(Kn, an)
    s_hi = 1.0 - (node["fc_goods"] + node["L"] ** (1.0 + p.nu) / (1.0 + p.nu)) / node["Y"]
    if np.any(s_hi <= 0):
        raise ModelError("GHH bundle is nonpositive at an added log A node")
    s_lo = np.zeros_like(s_hi)

    def rhs_fn(K_next, a):
        x = la[a]
        tot = np.zeros(np.shape(K_next))
        for zq, wq in zip(z, w):
            xq = p.phi_A * x + p.sigma_eps * zq
            agg = itp.at_logA(K_next, xq)
            B = np.maximum(_bundle(p, agg, ext.savings_logA(K_next, xq)), 1e-300)
            tot = tot + wq * (agg["R"] + 1.0 - p.delta) * _marginal(B, p.psi)
        return p.beta * tot

    change = np.inf
    for it in range(1, max_iter + 1):
        s_new, _ = _implicit_step(rhs_fn, ext.s[:, off], p, node, Kn, an, s_lo, s_hi,
                                  bisect_tol)
        change = float(np.max(np.abs(s_new - ext.s[:, off])))
        ext.s[:, off] = s_new
        if change < tol:
            break
    else:
        raise ModelError(f"extended policy did not converge (last change {change:.3e})")
    ext.meta["extension_iterations"] = it
    return ext


def euler_residuals(policy, grid, chain, p, K_probe, a_idx=None):
    """Relative consumption error of the Euler equation at probe points.

    Returns ``|C_implied / C - 1|`` with shape (n_probe, n_states) and a
    summary dict.
    """
    itp = Interpolator(grid, p)
    K_probe = np.asarray(K_probe, dtype=float)
    states = np.arange(chain.n) if a_idx is None else np.atleast_1d(a_idx)
    Kp = np.repeat(K_probe[:, None], states.size, axis=1)
    ap = np.repeat(states[None, :], K_probe.size, axis=0)
    agg = itp.at(Kp, ap)
    s = policy.savings(Kp, ap)
    K_next = (1.0 - p.delta) * Kp + s * agg["Y"]
    rhs, _ = _expected_rhs(itp, policy, chain, p, K_next, ap)
    disutil = agg["L"] ** (1.0 + p.nu) / (1.0 + p.nu)
    C = (1.0 - s) * agg["Y"] - agg["fc_goods"]
    C_impl = rhs ** (-1.0 / p.psi) + disutil
    res = np.abs(C_impl / C - 1.0)
    return res, dict(median=float(np.median(res)), mean=float(np.mean(res)),
                     max=float(np.max(res)))


# ---------------------------------------------------------------------------
# simulation

SIM_FIELDS = ("K", "logA", "Y", "L", "W", "R", "C", "investment", "savings", "Theta",
              "Omega", "Phi", "labor_share", "capital_share", "profit_share",
              "aggregate_markup", "n_firms_concentrated", "measured_TFP", "fixed_costs")


@dataclass
class SimPath:
    """Simulated series, each an array of shape (reps, T)."""

    data: dict
    clamped_K: int = 0
    clamped_A: int = 0
    seed: int | None = None

    def __getattr__(self, name):
        d = self.__dict__.get("data")
        if d is not None and name in d:
            return d[name]
        raise AttributeError(name)

    @property
    def T(self):
        return self.data["K"].shape[1]

    @property
    def reps(self):
        return self.data["K"].shape[0]

    def rep(self, r=0):
        return {k: v[r] for k, v in self.data.items()}


def _derived(p, agg, s):
    Y = agg["Y"]
    fc_val = agg["fc_goods"] + agg["Theta"] * agg["Xc"]
    C = (1.0 - s) * Y - agg["fc_goods"]
    Om = agg["Omega"]
    return dict(Y=Y, L=agg["L"], W=agg["W"], R=agg["R"], C=C, investment=s * Y, savings=s,
                Theta=agg["Theta"], Omega=Om, Phi=agg["Phi"],
                labor_share=(1.0 - p.alpha) * Om, capital_share=p.alpha * Om,
                profit_share=1.0 - Om - fc_val / Y, aggregate_markup=1.0 / Om,
                n_firms_concentrated=agg["n_conc"], measured_TFP=agg["A"] * agg["Phi"],
                fixed_costs=fc_val)


def chunk_seeds(seed, reps, chunk=SIM_CHUNK):
    """One independent generator per fixed-size block of replications."""
    n_chunks = (reps + chunk - 1) // chunk
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n_chunks)]


def chain_uniforms(seed, reps, T, chunk=SIM_CHUNK):
    gens = chunk_seeds(seed, reps, chunk)
    out = np.empty((reps, T))
    for c, g in enumerate(gens):
        lo = c * chunk
        hi = min(reps, lo + chunk)
        out[lo:hi] = g.random((hi - lo, T))
    return out


def simulate(policy, grid, chain, p, T, K0, a0=None, seed=None, reps=1,
             a_path=None, logA_path=None, record=True):
    """Simulate the economy for T periods.

    A follows the chain (driven by ``seed``), an explicit index path
    ``a_path`` of shape (reps, T), or a continuous ``logA_path`` (reps, T)
    that is interpolated between chain nodes.
    """
    if T < 1:
        raise ModelError("T must be at least 1")
    itp = Interpolator(grid, p)
    K = np.broadcast_to(np.asarray(K0, dtype=float), (reps,)).copy()
    if np.any(K < grid.K[0]) or np.any(K > grid.K[-1]):
        raise ModelError("initial capital lies outside the grid")
    cont = logA_path is not None
    if cont:
        lp = np.broadcast_to(np.asarray(logA_path, dtype=float), (reps, T))
    else:
        if a_path is None:
            a0 = chain.mid if a0 is None else a0
            if seed is None:
                raise ModelError("a seed is required for chain simulation")
            a_path = chain.draw(a0, chain_uniforms(seed, reps, T))
        ap = np.broadcast_to(np.asarray(a_path, dtype=np.int64), (reps, T))
    out = {f: np.empty((reps, T)) for f in SIM_FIELDS} if record else None
    for t in range(T):
        if cont:
            agg = itp.at_logA(K, lp[:, t])
            s = policy.savings_logA(K, lp[:, t])
            la = lp[:, t]
        else:
            agg = itp.at(K, ap[:, t])
            s = policy.savings(K, ap[:, t])
            la = grid.logA[ap[:, t]]
        if record:
            der = _derived(p, agg, s)
            out["K"][:, t] = K
            out["logA"][:, t] = la
            for k, v in der.items():
                out[k][:, t] = v
        K = (1.0 - p.delta) * K + s * agg["Y"]
    path = SimPath(out if record else {"K_final": K[:, None]}, itp.clamped_K, itp.clamped_A, seed)
    return path


def simulate_logY(policy, grid, chain, p, T, K0, a0=None, seed=None, reps=1, burn=0):
    """Lean simulation returning only log output (reps, T - burn)."""
    itp = Interpolator(grid, p)
    K = np.broadcast_to(np.asarray(K0, dtype=float), (reps,)).copy()
    a0 = chain.mid if a0 is None else a0
    u = chain_uniforms(seed, reps, T)
    cum = np.cumsum(chain.transition, axis=1)
    cum[:, -1] = 1.0
    a = np.full(reps, a0, dtype=np.int64)
    out = np.empty((reps, T - burn))
    for t in range(T):
        agg = itp.at(K, a)
        s = policy.savings(K, a)
        if t >= burn:
            out[:, t - burn] = np.log(agg["Y"])
        K = (1.0 - p.delta) * K + s * agg["Y"]
        a = (u[:, t][:, None] > cum[a]).sum(axis=1)
    return out, itp.clamped_K


def policy_fixed_point(policy, grid, p, K_guess, a_idx=None, logA=None, tol=1e-12, max_iter=100000):
    """Capital at which K' = K under a constant A (iterating the policy)."""
    itp = Interpolator(grid, p)
    K = float(K_guess)
    for _ in range(max_iter):
        if logA is None:
            agg = itp.at(np.array([K]), a_idx)
            s = policy.savings(np.array([K]), a_idx)
        else:
            agg = itp.at_logA(np.array([K]), logA)
            s = policy.savings_logA(np.array([K]), logA)
        Kn = float((1.0 - p.delta) * K + s[0] * agg["Y"][0])
        if abs(Kn - K) <= tol * K:
            return Kn
        K = Kn
    raise ModelError("capital did not settle under constant productivity")
