"""Within-market Cournot equilibrium with nested CES demand.

Prices are expressed relative to the factor price index: a firm with
productivity ``gamma`` charges ``p = mu * Theta / (A * gamma)``.  The market
aggregate ``g`` plays the role of a productivity index for the whole market,
so that the market price index is ``Theta / (A * g)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelError


class InfeasibleMarket(ModelError):
    """The trailing firm would have a negative share at this firm count."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (last residual {residual:.3e})")
        self.residual = residual


def markup_of_share(s, eta, rho):
    return 1.0 / (eta - (eta - rho) * np.asarray(s, dtype=float))


@dataclass(frozen=True)
class MarketEquilibrium:
    n: int
    shares: np.ndarray
    markups: np.ndarray
    rel_price: np.ndarray       # mu_j / gamma_j = A p_j / Theta
    g: float                    # market productivity aggregate
    profit_coeff: np.ndarray    # gross profit per unit (A/Theta)^(rho/(1-rho)) Y
    foc_residual: float = 0.0

    @property
    def hhi(self):
        return float(np.sum(self.shares ** 2))

    @property
    def factor_share(self):
        """Variable cost over revenue for the market, sum_j s_j / mu_j."""
        return float(np.sum(self.shares / self.markups))


def eta1_feasible(gamma, rho):
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.size
    return bool(gamma[-1] * np.sum(1.0 / gamma) > n - (1.0 - rho))


def max_feasible_n(gamma, rho):
    """Largest prefix of ``gamma`` whose eta=1 equilibrium has positive shares."""
    gamma = np.asarray(gamma, dtype=float)
    inv = np.cumsum(1.0 / gamma)
    n = np.arange(1, gamma.size + 1)
    ok = gamma * inv > n - (1.0 - rho)
    # ok is a prefix property for descending gamma; count leading True
    bad = np.flatnonzero(~ok)
    return int(gamma.size if bad.size == 0 else bad[0])


def solve_market_eta1(gamma, rho):
    """Closed-form Cournot equilibrium without within-market differentiation."""
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.size
    if n < 1:
        raise ValueError("a market needs at least one firm")
    g = (n - (1.0 - rho)) / np.sum(1.0 / gamma)
    s = (1.0 - g / gamma) / (1.0 - rho)
    if n > 1 and (not eta1_feasible(gamma, rho) or s.min() <= 0.0):
        raise InfeasibleMarket(
            f"firm {int(np.argmin(s)) + 1} would have share {s.min():.3e} <= 0 "
            f"with {n} active firms")
    if n == 1:
        s = np.ones(1)
    mu = markup_of_share(s, 1.0, rho)
    r1 = rho / (1.0 - rho)
    lam = (1.0 - g / gamma) ** 2 / (1.0 - rho) * g ** r1
    if n == 1:
        lam = np.array([(1.0 - rho) * g ** r1])
    res = float(np.max(np.abs(gamma / mu - g)))
    return MarketEquilibrium(n=n, shares=s, markups=mu, rel_price=mu / gamma,
                             g=float(g), profit_coeff=lam, foc_residual=res)


def _share_residual(gamma, s, eta, rho):
    e = eta / (1.0 - eta)
    mu = markup_of_share(s, eta, rho)
    lx = e * (np.log(gamma) - np.log(mu))
    lx = lx - lx.max(axis=-1, keepdims=True)
    t = np.exp(lx)
    target = t / t.sum(axis=-1, keepdims=True)
    return np.max(np.abs(target - s), axis=-1)


def shares_newton(gamma, eta, rho, tol=1e-13, max_iter=200):
    """Solve the share fixed point for a batch of markets (rows of ``gamma``).

    Writes D = sum_k (gamma_k/mu_k)^e with e = eta/(1-eta).  Given D each
    firm's share solves log s + e log mu(s) = e log gamma - log D, which is
    monotone in s; the outer Newton step picks D so shares add up to one.
    """
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    n = gamma.shape[1]
    if n == 1:
        return np.ones_like(gamma)
    e = eta / (1.0 - eta)
    d = eta - rho
    lg = np.log(gamma)
    mu0 = 1.0 / (eta - d / n)
    lx0 = e * (lg - np.log(mu0))
    m0 = lx0.max(axis=1, keepdims=True)
    x = (m0 + np.log(np.exp(lx0 - m0).sum(axis=1, keepdims=True)))
    y = np.full(gamma.shape, -np.log(n))
    for _ in range(max_iter):
        target = e * lg - x
        for _ in range(100):
            s = np.exp(y)
            mu = 1.0 / (eta - d * s)
            step = (y + e * np.log(mu) - target) / (1.0 + e * d * mu * s)
            y = np.minimum(y - step, 0.0)
            if np.max(np.abs(step)) < 1e-15:
                break
        s = np.exp(y)
        mu = 1.0 / (eta - d * s)
        dh = 1.0 + e * d * mu * s
        tot = s.sum(axis=1, keepdims=True)
        F = np.log(tot)
        if np.max(np.abs(F)) < tol:
            break
        x = x + F / ((s / dh).sum(axis=1, keepdims=True) / tot)
    else:
        raise ConvergenceError("share solver did not converge", float(np.max(np.abs(F))))
    return s / s.sum(axis=1, keepdims=True)


def shares_fixed_point(gamma, eta, rho, damping=0.5, tol=1e-12, max_iter=10000):
    """Plain damped iteration s <- (1-w) s + w T(s) on one market."""
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.size
    e = eta / (1.0 - eta)
    s = np.full(n, 1.0 / n)
    res = np.inf
    for _ in range(max_iter):
        mu = markup_of_share(s, eta, rho)
        lx = e * (np.log(gamma) - np.log(mu))
        t = np.exp(lx - lx.max())
        new = t / t.sum()
        res = float(np.max(np.abs(new - s)))
        if res < tol:
            return new
        s = (1.0 - damping) * s + damping * new
    raise ConvergenceError("damped share iteration did not converge", res)


def _bisect_duopoly(gamma, eta, rho, tol=1e-15):
    # s1 - T_1(s1, 1 - s1) is increasing in s1
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = np.array([mid, 1.0 - mid])
        mu = markup_of_share(s, eta, rho)
        e = eta / (1.0 - eta)
        r = e * (np.log(gamma[0] / mu[0]) - np.log(gamma[1] / mu[1]))
        t1 = 1.0 / (1.0 + np.exp(-r))
        if mid > t1:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    m = 0.5 * (lo + hi)
    return np.array([m, 1.0 - m])


def solve_market(gamma, eta, rho, tol=1e-10, method="newton"):
    """Cournot equilibrium for one market with productivities ``gamma``.

    ``method`` is ``"newton"`` (nested monotone Newton, the default) or
    ``"fixed_point"`` (damped iteration, falling back to bisection when
    there are two firms).
    """
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.size
    if n < 1:
        raise ValueError("a market needs at least one firm")
    if eta >= 1.0:
        return solve_market_eta1(gamma, rho)
    if method == "newton":
        s = shares_newton(gamma[None, :], eta, rho)[0]
    elif method == "fixed_point":
        try:
            s = shares_fixed_point(gamma, eta, rho)
        except ConvergenceError:
            if n != 2:
                raise
            s = _bisect_duopoly(gamma, eta, rho)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = float(_share_residual(gamma, s, eta, rho))
    if res > tol:
        raise ConvergenceError("share solution misses the first-order conditions", res)
    return _assemble(gamma, s, eta, rho, res)


def _assemble(gamma, s, eta, rho, res):
    mu = markup_of_share(s, eta, rho)
    G = float(market_aggregate(gamma, s, eta, rho)[0])
    r1 = rho / (1.0 - rho)
    kappa = (1.0 - 1.0 / mu) * s * G ** r1
    return MarketEquilibrium(n=gamma.size, shares=s, markups=mu, rel_price=mu / gamma,
                             g=G, profit_coeff=kappa, foc_residual=res)


def market_aggregate(gamma, shares, eta, rho):
    """Market productivity aggregate G from solved shares (batch over rows)."""
    gamma = np.atleast_2d(gamma)
    mu = markup_of_share(shares, eta, rho)
    if eta >= 1.0:
        return (gamma / mu).mean(axis=1)
    e = eta / (1.0 - eta)
    lx = e * (np.log(gamma) - np.log(mu))
    m = lx.max(axis=1)
    return np.exp((m + np.log(np.exp(lx - m[:, None]).sum(axis=1))) / e)


def firm_profits(eq, Theta, Y, rho, A=1.0):
    """Gross profits of every firm in a market facing aggregates (Theta, Y)."""
    return eq.profit_coeff * (A / Theta) ** (rho / (1.0 - rho)) * Y


def market_n_star(gamma, c_i, Theta, Y, params, A=1.0):
    """Equilibrium firm count of one market at given aggregates.

    Returns the largest n <= M at which firm n covers ``c_i`` while an
    (n+1)-th entrant would not; 0 if even a monopolist cannot.
    """
    gamma = np.asarray(gamma, dtype=float)
    M = min(gamma.size, params.M)
    eta, rho = params.eta, params.rho
    last = np.full(M + 2, -np.inf)
    for n in range(1, M + 1):
        try:
            eq = solve_market(gamma[:n], eta, rho)
        except InfeasibleMarket:
            break
        last[n] = firm_profits(eq, Theta, Y, rho, A)[-1]
    best = 0
    for n in range(1, M + 1):
        if last[n] >= c_i and (n == M or last[n + 1] < c_i):
            best = n
    return best
