"""Deterministic steady states, fragility and the symmetric eta=1 economy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .aggregate import AggregateState, GridSolution, factor_market
from .oligopoly import eta1_feasible, max_feasible_n, solve_market_eta1
from .params import ModelError, ParamSet

# level of A that puts the toy economy's increasing rental-rate segment
# around R* = 1/beta when delta = 1 (with A = 1 the segment sits near 0.29)
TOY_A = 1.53


class SymmetricEconomy:
    """Unit mass of identical markets with eta = 1 and common productivities.

    Between the symmetric regions ``[K_lo(n), K_hi(n)]`` a fraction ``m`` of
    markets hosts ``n + 1`` firms, with ``m`` set so the marginal entrant
    breaks even.  Where the symmetric regions overlap the largest firm count
    is selected.

    ``min_firms=1`` keeps a monopolist in every market below the monopoly
    region, so R(K) grows without bound as K falls.  With ``min_firms=0``
    markets may empty out; R then falls to zero as K goes to zero and an
    extra unstable crossing appears near K = 0.
    """

    def __init__(self, gamma_row, c, p, A=1.0, min_firms=1):
        if p.eta < 1.0:
            raise ModelError("the symmetric economy requires eta = 1")
        g = np.asarray(gamma_row, dtype=float)
        if g.ndim != 1 or g.size < 1 or np.any(g <= 0) or np.any(np.diff(g) > 0):
            raise ModelError("gamma_row must be positive and sorted descending")
        if c < 0:
            raise ModelError("fixed cost must be nonnegative")
        self.gamma = g
        self.c = float(c)
        self.p = p
        self.A = float(A)
        if min_firms not in (0, 1):
            raise ModelError("min_firms must be 0 or 1")
        self.min_firms = int(min_firms)
        rho = p.rho
        self.nmax = max_feasible_n(g, rho)
        n_top = self.nmax
        self.g = np.zeros(n_top + 1)
        self.lam = np.full(n_top + 2, np.nan)     # coefficient of the n-th firm at n
        self.phi = np.zeros(n_top + 1)
        self.omega = np.zeros(n_top + 1)
        self.hhi = np.zeros(n_top + 1)
        for n in range(1, n_top + 1):
            eq = solve_market_eta1(g[:n], rho)
            self.g[n] = eq.g
            self.lam[n] = eq.profit_coeff[-1]
            self.phi[n] = 1.0 / np.sum(eq.shares / g[:n])
            self.omega[n] = eq.factor_share
            self.hhi[n] = eq.hhi
        self.r1 = p.r1

    # -- symmetric objects ---------------------------------------------
    def with_(self, **kw):
        args = dict(gamma_row=self.gamma, c=self.c, p=self.p, A=self.A,
                    min_firms=self.min_firms)
        args.update(kw)
        return SymmetricEconomy(**args)

    def Theta_n(self, n, A=None):
        A = self.A if A is None else A
        return A * self.g[n]

    def _k_for(self, lam, n, A):
        """Capital at which a firm with coefficient ``lam`` earns exactly c at n."""
        p = self.p
        a, nu = p.alpha, p.nu
        q = (1.0 - a) / (nu + a)
        Theta = A * self.g[n]
        val = (self.c / lam) * (A / Theta) ** (-self.r1) / (A * self.phi[n]) * ((1.0 - a) * Theta) ** (-q)
        return val ** ((nu + a) / (a * (1.0 + nu)))

    def bounds_K(self, n, A=None):
        """Capital range that sustains n firms in every market.

        The lower bound makes the n-th firm break even at the n-firm
        aggregates; the upper bound makes an (n+1)-th entrant break even at
        the same aggregates.  Returns ``inf`` for the upper bound when no
        further firm is feasible.
        """
        A = self.A if A is None else A
        if not 1 <= n <= self.nmax:
            raise ModelError(f"n={n} is not a feasible firm count (max {self.nmax})")
        lo = self._k_for(self.lam[n], n, A)
        if n + 1 > self.nmax:
            return lo, np.inf
        eq = solve_market_eta1(self.gamma[: n + 1], self.p.rho)
        hi = self._k_for(eq.profit_coeff[-1], n, A)
        return lo, hi

    def _mix(self, n, m, A):
        """Aggregates with fraction m of markets at n+1 firms and 1-m at n."""
        r1 = self.r1
        S0 = self.g[n] ** r1 if n > 0 else 0.0
        S1 = self.g[n + 1] ** r1
        S = (1.0 - m) * S0 + m * S1
        SO = (1.0 - m) * S0 * self.omega[n] + m * S1 * self.omega[n + 1]
        Theta = A * S ** ((1.0 - self.p.rho) / self.p.rho)
        Omega = SO / S
        Phi = Theta / (Omega * A)
        return Theta, Phi, Omega

    def _entrant_gap(self, n, m, K, A):
        """log profit of the (n+1)-th firm minus log c at mixture m."""
        Theta, Phi, Omega = self._mix(n, m, A)
        _, Y, _, _ = factor_market(K, A, Theta, Phi, self.p)
        return np.log(self.lam[n + 1]) + self.r1 * np.log(A / Theta) + np.log(Y) - np.log(self.c)

    def asymmetric_region_solve(self, n, K, A=None):
        """Fraction of markets with n+1 firms inside the transition band."""
        A = self.A if A is None else A
        if n + 1 > self.nmax:
            raise ModelError(f"no transition band above n={n}")
        lo = 0.0 if n == 0 else self.bounds_K(n, A)[1]
        hi = self.bounds_K(n + 1, A)[0]
        if not lo <= K <= hi:
            raise ModelError(f"K={K} lies outside the transition band [{lo}, {hi}]")
        if n > 0 and K == lo:
            m = 0.0
        elif K == hi:
            m = 1.0
        elif n == 0:
            t = brentq(lambda t: self._entrant_gap(0, np.exp(t), K, A), -700.0, 0.0,
                       xtol=1e-14, rtol=1e-15)
            m = float(np.exp(t))
        else:
            m = brentq(lambda m: self._entrant_gap(n, m, K, A), 0.0, 1.0, xtol=1e-15, rtol=1e-15)
        Theta, Phi, Omega = self._mix(n, m, A)
        _, Y, _, _ = factor_market(K, A, Theta, Phi, self.p)
        return m, float(Y), Phi, Theta

    def regime(self, K, A=None):
        """(n, m): n firms everywhere plus fraction m of markets with n+1."""
        A = self.A if A is None else A
        if self.c == 0.0:
            return self.nmax, 0.0
        n = 0
        for k in range(1, self.nmax + 1):
            if K >= self.bounds_K(k, A)[0]:
                n = k
            else:
                break
        if n == 0 and self.min_firms == 1:
            return 1, 0.0
        if n > 0 and K <= self.bounds_K(n, A)[1]:
            return n, 0.0
        m = self.asymmetric_region_solve(n, K, A)[0]
        return n, m

    def state(self, K, A=None):
        A = self.A if A is None else A
        if K <= 0:
            raise ModelError("capital must be positive")
        n, m = self.regime(K, A)
        if m == 0.0:
            Theta, Phi, Omega = A * self.g[n], self.phi[n], self.omega[n]
        else:
            Theta, Phi, Omega = self._mix(n, m, A)
        L, Y, W, R = factor_market(K, A, Theta, Phi, self.p)
        n_eff = n + m
        fc = self.c * n_eff
        hhi = (1.0 - m) * self.hhi[n] + m * self.hhi[min(n + 1, self.nmax)]
        return AggregateState(
            K=float(K), A=float(A), Theta=float(Theta), Phi=float(Phi), Omega=float(Omega),
            Y=float(Y), L=float(L), W=float(W), R=float(R), market_shares=np.ones(1),
            gross_profits=None, net_profit_total=(1.0 - Omega) * Y - fc,
            Omega_hhi=float(1.0 - (1.0 - self.p.rho) * hhi) if m == 0.0 else float(Omega),
            Phi_weights=float("nan"), fixed_cost_total=fc, fc_goods=fc, Xc=0.0,
            n_total=float(n_eff), n_concentrated=float(n_eff))

    def rental_rate(self, K, A=None):
        return self.state(K, A).R

    def symmetric_root(self, lo, hi, R_star, A=None):
        """Exact crossing of R* when [lo, hi] lies in one symmetric region."""
        A = self.A if A is None else A
        n_lo, m_lo = self.regime(lo, A)
        n_hi, m_hi = self.regime(hi, A)
        if n_lo != n_hi or m_lo != 0.0 or m_hi != 0.0:
            return None
        p = self.p
        e = p.nu * (1.0 - p.alpha) / (p.nu + p.alpha)
        top = rental_rate_formula(A * self.g[n_lo], 1.0, p)
        K = (top / R_star) ** (1.0 / e)
        return K if lo <= K <= hi else None

    def grid(self, K_grid, logA_grid, threads=1, keep_counts=True):
        K_grid = np.asarray(K_grid, dtype=float)
        logA_grid = np.asarray(logA_grid, dtype=float)
        nK, nA = K_grid.size, logA_grid.size
        names = ("Theta", "Phi", "Omega", "Y", "L", "W", "R", "fc_goods", "Xc",
                 "n_total", "n_conc")
        out = {k: np.empty((nK, nA)) for k in names}
        for a in range(nA):
            A = self.A * float(np.exp(logA_grid[a]))
            for k in range(nK):
                st = self.state(K_grid[k], A)
                for f in names:
                    out[f][k, a] = getattr(st, "n_concentrated" if f == "n_conc" else f)
        return GridSolution(K=K_grid, logA=logA_grid, params=self.p, conc_mass=1.0,
                            A_level=self.A, **out)

    def breakpoints(self, A=None):
        """Capital levels where the firm-count regime changes."""
        A = self.A if A is None else A
        if self.c == 0.0:
            return np.zeros(0)
        out = []
        for n in range(1, self.nmax + 1):
            lo, hi = self.bounds_K(n, A)
            out += [lo, hi]
        out = np.array(out)
        return out[np.isfinite(out)]

    def default_K_range(self, A=None):
        """Capital range spanning every firm-count region with some margin."""
        A = self.A if A is None else A
        if self.c == 0.0:
            return 1e-3, 1e3
        top = min(self.nmax, 8)
        lo = self.bounds_K(1, A)[0]
        hi = self.bounds_K(top, A)[0]
        return lo / 20.0, hi * 20.0


def toy_params(c=0.015, beta=0.99, M=20):
    """Parameters of the textbook two-regime toy economy."""
    return ParamSet(beta=beta, psi=1.0, nu=0.4, alpha=1.0 / 3.0, delta=1.0, rho=0.75,
                    eta=1.0, I=1, M=M, f=1.0, lam=0.0, c=c, phi_A=0.0, sigma_eps=0.0)


def toy_economy(c=0.015, beta=0.99, A=TOY_A, M=20):
    p = toy_params(c, beta, M)
    return SymmetricEconomy(np.ones(M), c, p, A=A)


# ---------------------------------------------------------------------------
# rental-rate map and steady states


@dataclass
class RentalCurve:
    K: np.ndarray
    R: np.ndarray
    A: float
    model: object = field(repr=False, default=None)
    n_conc: np.ndarray | None = None


def rental_rate_map(model, K_grid, A=None):
    """R(K) with the equilibrium firm set at each K."""
    A = getattr(model, "A", 1.0) if A is None else A
    K_grid = np.asarray(K_grid, dtype=float)
    states = [model.state(k, A) for k in K_grid]
    return RentalCurve(K=K_grid, R=np.array([s.R for s in states]), A=A, model=model,
                       n_conc=np.array([s.n_concentrated for s in states]))


@dataclass
class SteadyState:
    K: float
    kind: str               # "stable", "unstable" or "degenerate"
    slope_sign: int
    n_concentrated: float
    Y: float


@dataclass
class SteadyStateSet:
    states: list
    R_star: float

    @property
    def K(self):
        return np.array([s.K for s in self.states])

    @property
    def kinds(self):
        return [s.kind for s in self.states]

    @property
    def stable(self):
        return [s for s in self.states if s.kind == "stable"]

    @property
    def unstable(self):
        return [s for s in self.states if s.kind == "unstable"]

    @property
    def highest_stable(self):
        st = self.stable
        if not st:
            raise ModelError("no stable steady state")
        return st[-1]

    def as_dict(self):
        return [dict(K=s.K, kind=s.kind, slope_sign=s.slope_sign,
                     n_concentrated=s.n_concentrated, Y=s.Y) for s in self.states]


def find_steady_states(curve, params, rtol=1e-8, R_star=None):
    """Bracket sign changes of R(K) - R* on the curve and refine by bisection.

    A crossing from above (R falling through R*) is stable, one from below
    unstable.  Grid points where the gap is zero without a sign change are
    reported as degenerate tangencies.
    """
    R_star = params.R_star if R_star is None else R_star
    d = curve.R - R_star
    K = curve.K
    model, A = curve.model, curve.A
    sgn = np.sign(d)
    found = []
    k = 0
    n = K.size
    while k < n - 1:
        if sgn[k] == 0:
            left = sgn[k - 1] if k > 0 else 0
            right = sgn[k + 1]
            if left != 0 and right != 0 and left != right:
                found.append((K[k], "stable" if left > 0 else "unstable"))
            else:
                found.append((K[k], "degenerate"))
            k += 1
            continue
        if sgn[k + 1] != 0 and sgn[k] != sgn[k + 1]:
            lo, hi = K[k], K[k + 1]
            s_lo = sgn[k]
            while (hi - lo) > rtol * lo:
                mid = 0.5 * (lo + hi)
                dm = model.rental_rate(mid, A) - R_star
                if dm == 0.0:
                    lo = hi = mid
                    break
                if np.sign(dm) == s_lo:
                    lo = mid
                else:
                    hi = mid
            root = 0.5 * (lo + hi)
            if hasattr(model, "symmetric_root"):
                exact = model.symmetric_root(lo, hi, R_star, A)
                root = root if exact is None else exact
            found.append((root, "stable" if s_lo > 0 else "unstable"))
        k += 1
    if sgn[-1] == 0 and n > 1:
        found.append((K[-1], "degenerate"))
    if not found:
        raise ModelError(
            f"R(K) does not cross R*={R_star:.6g} on [{K[0]:.6g}, {K[-1]:.6g}]")
    out = []
    for k_ss, kind in found:
        st = model.state(k_ss, A)
        sign = {"stable": -1, "unstable": 1, "degenerate": 0}[kind]
        out.append(SteadyState(K=float(k_ss), kind=kind, slope_sign=sign,
                               n_concentrated=float(st.n_concentrated), Y=float(st.Y)))
    return SteadyStateSet(out, R_star)


def steady_states(model, params, K_grid=None, A=None, n_points=400):
    A = getattr(model, "A", 1.0) if A is None else A
    if K_grid is None:
        lo, hi = model.default_K_range(A)
        K_grid = np.geomspace(lo, hi, n_points)
    if hasattr(model, "breakpoints"):
        # regime boundaries bracket every rising segment, however narrow
        K_grid = np.asarray(K_grid, dtype=float)
        bp = model.breakpoints(A)
        bp = bp[(bp > K_grid[0]) & (bp < K_grid[-1])]
        K_grid = np.unique(np.concatenate([K_grid, bp, bp * (1 + 1e-9), bp * (1 - 1e-9)]))
    return find_steady_states(rental_rate_map(model, K_grid, A), params)


@dataclass
class FragilityReport:
    entries: list

    @property
    def chi(self):
        return np.array([e["chi"] for e in self.entries])

    def as_dict(self):
        return list(self.entries)


def chi(ss):
    """chi_n = K^U_{n-1} / K^S_n for every stable state preceded by an unstable one."""
    out = []
    states = ss.states
    for k in range(1, len(states)):
        if states[k].kind == "stable" and states[k - 1].kind == "unstable":
            r = states[k - 1].K / states[k].K
            out.append(dict(K_stable=states[k].K, K_unstable=states[k - 1].K, chi=r,
                            min_shock=1.0 - r))
    return FragilityReport(out)


# ---------------------------------------------------------------------------
# analytic conditions


def rental_rate_formula(Theta, K, p):
    """R = alpha (1-alpha)^((1-alpha)/(nu+alpha)) Theta^((1+nu)/(nu+alpha)) K^(-nu(1-alpha)/(nu+alpha))."""
    a, nu = p.alpha, p.nu
    return (a * (1.0 - a) ** ((1.0 - a) / (nu + a)) * Theta ** ((1.0 + nu) / (nu + a))
            * K ** (-nu * (1.0 - a) / (nu + a)))


def multiplicity_condition(econ, n, A=None):
    """Increasing rental-rate segment between n and n+1 firms straddles R*."""
    A = econ.A if A is None else A
    p = econ.p
    if econ.c == 0.0 or n < 1 or n + 1 > econ.nmax:
        return False
    a, nu = p.alpha, p.nu
    e1 = (1.0 + nu) / (nu + a)
    e2 = -nu * (1.0 - a) / (nu + a)
    K_hi_n = econ.bounds_K(n, A)[1]
    K_lo_n1 = econ.bounds_K(n + 1, A)[0]
    mid = p.R_star / (a * (1.0 - a) ** ((1.0 - a) / (nu + a)))
    left = econ.Theta_n(n, A) ** e1 * K_hi_n ** e2
    right = econ.Theta_n(n + 1, A) ** e1 * K_lo_n1 ** e2
    return bool(left < mid < right)


def multiplicity_any(econ, A=None):
    return any(multiplicity_condition(econ, n, A) for n in range(1, econ.nmax))


def uniqueness_condition(econ, n, A=None):
    """Phi(n)/Phi(n+1) > [Theta(n)/Theta(n+1)]^(rho/(1-rho) - (1-alpha)/(nu+alpha))."""
    A = econ.A if A is None else A
    p = econ.p
    ex = p.r1 - (1.0 - p.alpha) / (p.nu + p.alpha)
    lhs = econ.phi[n] / econ.phi[n + 1]
    rhs = (econ.Theta_n(n, A) / econ.Theta_n(n + 1, A)) ** ex
    return bool(lhs > rhs)


def sufficient_conditions(p):
    """Parameter-only conditions with both sides reported."""
    u_l, u_r = p.r1, (1.0 - p.alpha) / (p.nu + p.alpha)
    m_l, m_r = p.rho, 1.0 - p.nu * (1.0 - p.alpha) / (1.0 + p.nu * p.alpha)
    return {
        "uniqueness": dict(lhs=u_l, rhs=u_r, holds=bool(u_l > u_r)),
        "mps_fragility": dict(lhs=m_l, rhs=m_r, holds=bool(m_l > m_r)),
    }


def apply_mps(gamma, spread, rho=None):
    """Mean-preserving spread of an active productivity vector.

    The top half of firms is scaled up by ``1 + spread/gamma_1`` (so their
    relative productivities are unchanged) and the bottom half absorbs the
    total increment in proportion to productivity.  With two firms this is
    ``(g1 + spread, g2 - spread)``.  The middle firm of an odd vector is
    left unchanged.
    """
    g = np.asarray(gamma, dtype=float)
    if spread < 0:
        raise ModelError("spread must be nonnegative")
    n = g.size
    if n < 2 or spread == 0.0:
        return g.copy()
    h = n // 2
    out = g.copy()
    inc = spread * g[:h] / g[0]
    out[:h] += inc
    bottom = g[n - h:]
    out[n - h:] -= inc.sum() * bottom / bottom.sum()
    if np.any(out <= 0) or np.any(np.diff(out) > 0):
        raise ModelError(f"spread {spread} breaks positivity or the productivity ordering")
    if rho is not None and not eta1_feasible(out, rho):
        raise ModelError(f"spread {spread} leaves the least productive firm with a negative share")
    return out


# ---------------------------------------------------------------------------
# deterministic law of motion


@dataclass
class LawOfMotion:
    K: np.ndarray
    K_next: np.ndarray
    crossings: list
    policy: object = field(repr=False, default=None)


def law_of_motion_deterministic(model, params, K_grid, n_eval=None, tol=1e-10, max_iter=5000):
    """K' = (1-delta) K + s(K) Y(K) from the deterministic savings policy."""
    from .dynamics import degenerate_chain, solve_policy, Interpolator

    K_grid = np.asarray(K_grid, dtype=float)
    grid = model.grid(K_grid, np.zeros(1))
    chain = degenerate_chain()
    pol = solve_policy(grid, chain, params, tol=tol, max_iter=max_iter)
    Kf = K_grid if n_eval is None else np.linspace(K_grid[0], K_grid[-1], n_eval)
    itp = Interpolator(grid, params)
    agg = itp.at(Kf, np.zeros(Kf.size, dtype=int))
    s = pol.savings(Kf, np.zeros(Kf.size, dtype=int))
    Kn = (1.0 - params.delta) * Kf + s * agg["Y"]
    d = Kn - Kf
    cross = []
    for k in range(Kf.size - 1):
        if d[k] == 0 or d[k] * d[k + 1] < 0:
            # linear root and slope from the bracketing segment
            w = d[k] / (d[k] - d[k + 1]) if d[k] != d[k + 1] else 0.0
            Kc = Kf[k] + w * (Kf[k + 1] - Kf[k])
            slope = (Kn[k + 1] - Kn[k]) / (Kf[k + 1] - Kf[k])
            cross.append(dict(K=float(Kc), slope=float(slope),
                              kind="stable" if abs(slope) < 1.0 else "unstable"))
    return LawOfMotion(K=Kf, K_next=Kn, crossings=cross, policy=pol)
