"""Static general equilibrium: aggregate indices, factor markets, firm sets.

Aggregation normalization
-------------------------
Each drawn market is a discrete market whose sales share of the economy is
``s_i = G_i^r1 / sum_k G_k^r1`` (``r1 = rho/(1-rho)``), so a firm's gross
profit is ``(1 - 1/mu) s_ij s_i Y``.  The factor price index is reported per
unit mass of markets,

    Theta = A * (mean_i G_i^r1)^((1-rho)/rho),

which keeps the level of output independent of the number of markets.  The
literal sum over markets only rescales ``Theta`` and ``Phi`` by
``I^((1-rho)/rho)`` (a change in the level of A) and is available through
``normalize=False`` in :func:`aggregate_indices`.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field

import numpy as np

from .oligopoly import markup_of_share, max_feasible_n, shares_newton, solve_market
from .params import ModelError
from .parallel import parallel_map


class NoProduction(ModelError):
    """Every market is empty, so the economy produces nothing."""


@dataclass(frozen=True)
class FirmSet:
    """Active firm counts per drawn market; the top ``n_i`` firms are active."""

    n: np.ndarray

    def active(self, M):
        return np.arange(M)[None, :] < np.asarray(self.n)[:, None]

    @property
    def total(self):
        return int(np.sum(self.n))


@dataclass
class MarketAggregates:
    omega_weights: list        # per market: quantity weights of active firms
    price_index: np.ndarray    # market price index relative to Theta/A, 1/G_i


@dataclass
class AggregateState:
    K: float
    A: float
    Theta: float
    Phi: float
    Omega: float
    Y: float
    L: float
    W: float
    R: float
    market_shares: np.ndarray
    gross_profits: np.ndarray | None
    net_profit_total: float
    Omega_hhi: float
    Phi_weights: float
    fixed_cost_total: float
    fc_goods: float
    Xc: float
    n_total: float
    n_concentrated: float
    warning: str | None = None

    @property
    def labor_share(self):
        return self.W * self.L / self.Y

    @property
    def measured_tfp(self):
        return self.A * self.Phi


# ---------------------------------------------------------------------------
# closed forms


def factor_market(K, A, Theta, Phi, p, Xc=0.0):
    """Labor, output and factor prices given the aggregate indices.

    ``Xc`` is composite input absorbed by fixed costs (factor-bundle mode).
    """
    a, nu = p.alpha, p.nu
    K = np.asarray(K, dtype=float)
    if np.any(K <= 0):
        raise ModelError("capital must be positive")
    L = ((1.0 - a) * Theta) ** (1.0 / (nu + a)) * K ** (a / (nu + a))
    X = K ** a * L ** (1.0 - a)
    Y = A * Phi * (X - Xc)
    W = (1.0 - a) * Theta * X / L
    R = a * Theta * X / K
    return L, Y, W, R


def _thresholds(c, Theta, p, tau_f):
    scale = Theta if p.fixed_cost_mode == "factor_bundle" else 1.0
    return (1.0 - tau_f) * c * scale


# ---------------------------------------------------------------------------
# reference route: solve every active market directly


def _solve_all(tech, n, p):
    eqs = []
    for i in range(tech.n_markets):
        k = int(n[i])
        eqs.append(solve_market(tech.gamma[i, :k], p.eta, p.rho) if k > 0 else None)
    return eqs


def aggregate_indices(tech, firm_set, p, A=1.0, markets=None, normalize=True):
    """Theta, Phi and Omega for a firm set (reference computation).

    Returns ``(Theta, Phi, Omega, extras)`` where ``extras`` carries the
    HHI form of Omega, Phi rebuilt from quantity weights, market shares and
    the per-market equilibria.
    """
    n = np.asarray(firm_set.n)
    if np.all(n == 0):
        raise NoProduction("all markets are empty")
    eqs = markets if markets is not None else _solve_all(tech, n, p)
    rho, eta, r1 = p.rho, p.eta, p.r1
    nd = tech.n_markets
    S = np.array([e.g ** r1 if e is not None else 0.0 for e in eqs])
    fshare = np.array([e.factor_share if e is not None else 0.0 for e in eqs])
    hhi = np.array([e.hhi if e is not None else 0.0 for e in eqs])
    S_tot = S.sum()
    scale = nd if normalize else 1.0 / tech.weight
    Theta = A * (S_tot / scale) ** ((1.0 - rho) / rho)
    s_i = S / (tech.weight * S_tot)
    Omega = tech.weight * np.sum(s_i * fshare)
    Omega_hhi = tech.weight * np.sum(s_i * np.where(n > 0, eta - (eta - rho) * hhi, 0.0))
    Phi = Theta / (Omega * A)

    # rebuild Phi from quantity weights w_ij ~ s_ij s_i gamma_ij / mu_ij
    omegas = []
    num = 0.0
    den = 0.0
    for i, e in enumerate(eqs):
        if e is None:
            omegas.append(np.zeros(0))
            continue
        w = e.shares * s_i[i] * tech.gamma[i, : e.n] / e.markups
        omegas.append(w)
        if eta < 1.0:
            num += np.sum(w ** eta) ** (rho / eta)
        else:
            num += np.sum(w) ** rho
        den += np.sum(w / tech.gamma[i, : e.n])
    if normalize:
        Phi_w = (num / nd) ** (1.0 / rho) / (den / nd)
    else:
        Phi_w = (tech.weight * num) ** (1.0 / rho) / (tech.weight * den)
    price_index = np.array([1.0 / e.g if e is not None else np.inf for e in eqs])
    extras = dict(Omega_hhi=Omega_hhi, Phi_weights=Phi_w, market_shares=s_i,
                  markets=eqs, aggregates=MarketAggregates(omegas, price_index))
    return Theta, Phi, Omega, extras


def static_equilibrium(K, A, tech, firm_set, p, tau_f=0.0, markets=None):
    """Aggregate state at capital ``K`` and TFP level ``A`` for a given firm set."""
    if K <= 0:
        raise ModelError("capital must be positive")
    n = np.asarray(firm_set.n)
    Theta, Phi, Omega, ex = aggregate_indices(tech, firm_set, p, A, markets=markets)
    c = tech.fixed_cost
    fc_sum = tech.weight * float(np.sum(n * c))
    Xc = fc_sum if p.fixed_cost_mode == "factor_bundle" else 0.0
    L, Y, W, R = factor_market(K, A, Theta, Phi, p, Xc)
    if Y <= 0:
        raise ModelError("fixed costs exhaust aggregate factor capacity")
    fc_goods = fc_sum if p.fixed_cost_mode == "final_good" else 0.0
    fc_value = fc_goods + Theta * Xc
    s_i = ex["market_shares"]
    prof = np.zeros(tech.gamma.shape)
    for i, e in enumerate(ex["markets"]):
        if e is not None:
            prof[i, : e.n] = (1.0 - 1.0 / e.markups) * e.shares * s_i[i] * Y
    gross_total = tech.weight * prof.sum()
    conc = tech.concentrated
    return AggregateState(
        K=float(K), A=float(A), Theta=Theta, Phi=Phi, Omega=Omega, Y=float(Y),
        L=float(L), W=float(W), R=float(R), market_shares=s_i, gross_profits=prof,
        net_profit_total=gross_total - fc_value, Omega_hhi=ex["Omega_hhi"],
        Phi_weights=ex["Phi_weights"], fixed_cost_total=fc_value, fc_goods=fc_goods,
        Xc=Xc, n_total=tech.weight * float(n.sum()),
        n_concentrated=tech.weight * float(n[conc].sum()))


def static_equilibrium_variable_fc(K, A, tech, firm_set, p, tau_f=0.0):
    """Static equilibrium when fixed costs use the production factor bundle.

    Each active firm in a concentrated market uses ``c_f`` units of the
    composite input (cost ``Theta * c_f``).  Both uses of factors share the
    capital-labor ratio, so factor prices and labor follow the usual closed
    forms and output is produced with what remains after fixed costs.
    """
    return static_equilibrium(K, A, tech, firm_set, p.with_(fixed_cost_mode="factor_bundle"),
                              tau_f=tau_f)


# ---------------------------------------------------------------------------
# tabulated route used by the firm-set and grid solvers


class MarketTables:
    """Per-market equilibrium summaries for every firm count 0..M.

    ``S[i, n]`` is the market's sales weight G^r1, ``OM[i, n]`` its factor
    share sum_j s_j/mu_j, ``KL[i, n]`` the profit coefficient of its n-th
    (least productive) firm, and ``HHI[i, n]`` its concentration.
    """

    def __init__(self, tech, p):
        self.tech = tech
        self.p = p
        nd, M = tech.gamma.shape
        self.nmax = np.full(nd, M, dtype=np.int64)
        if p.eta >= 1.0:
            self.nmax = np.array([max_feasible_n(row, p.rho) for row in tech.gamma])
        S = np.zeros((nd, M + 1))
        OM = np.zeros((nd, M + 1))
        KL = np.full((nd, M + 1), -np.inf)
        HHI = np.zeros((nd, M + 1))
        r1 = p.r1
        for n in range(1, M + 1):
            rows = np.flatnonzero(self.nmax >= n)
            if rows.size == 0:
                break
            g = tech.gamma[rows, :n]
            s, G = _batch_shares(g, p.eta, p.rho)
            mu = markup_of_share(s, p.eta, p.rho)
            S[rows, n] = G ** r1
            OM[rows, n] = (s / mu).sum(axis=1)
            KL[rows, n] = (1.0 - 1.0 / mu[:, -1]) * s[:, -1] * G ** r1
            HHI[rows, n] = (s ** 2).sum(axis=1)
        self.S, self.OM, self.KL, self.HHI = S, OM, KL, HHI
        c = tech.fixed_cost
        self.conc = c > 0
        self._seq = None
        pos = c[self.conc]
        self.common_c = bool(pos.size == 0 or np.all(pos == pos[0]))

    # -- aggregates from firm counts -------------------------------------
    def sums(self, n):
        idx = np.arange(self.tech.n_markets)
        S = self.S[idx, n]
        return S.sum(), (S * self.OM[idx, n]).sum(), float(np.sum(n * self.tech.fixed_cost))

    def evaluate(self, S_tot, SO_tot, fc_sum, K, A, tau_f=0.0):
        """Aggregates for given market sums (vectorized over the sums)."""
        p, tech = self.p, self.tech
        S_tot = np.asarray(S_tot, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            Theta = A * (S_tot / tech.n_markets) ** ((1.0 - p.rho) / p.rho)
            Omega = SO_tot / S_tot
            Phi = Theta / (Omega * A)
        fc_sum = tech.weight * np.asarray(fc_sum, dtype=float)
        Xc = fc_sum if p.fixed_cost_mode == "factor_bundle" else 0.0 * fc_sum
        L, Y, W, R = factor_market(K, A, Theta, Phi, p, Xc)
        Z = Y / (tech.weight * S_tot)
        return dict(Theta=Theta, Omega=Omega, Phi=Phi, L=L, Y=Y, W=W, R=R, Z=Z,
                    Xc=Xc, fc_sum=fc_sum)

    def state(self, n, K, A, tau_f=0.0, warning=None):
        n = np.asarray(n)
        if np.all(n == 0):
            raise NoProduction("all markets are empty")
        S_tot, SO_tot, fcs = self.sums(n)
        ev = self.evaluate(S_tot, SO_tot, fcs, K, A, tau_f)
        p, tech = self.p, self.tech
        if ev["Y"] <= 0:
            raise ModelError("fixed costs exhaust aggregate factor capacity")
        idx = np.arange(tech.n_markets)
        hhi_om = np.where(n > 0, p.eta - (p.eta - p.rho) * self.HHI[idx, n], 0.0)
        s_i = self.S[idx, n] / (tech.weight * S_tot)
        fc_goods = float(ev["fc_sum"]) if p.fixed_cost_mode == "final_good" else 0.0
        Xc = float(ev["Xc"])
        fc_value = fc_goods + float(ev["Theta"]) * Xc
        Y = float(ev["Y"])
        Omega = float(ev["Omega"])
        return AggregateState(
            K=float(K), A=float(A), Theta=float(ev["Theta"]), Phi=float(ev["Phi"]),
            Omega=Omega, Y=Y, L=float(ev["L"]), W=float(ev["W"]), R=float(ev["R"]),
            market_shares=s_i, gross_profits=None,
            net_profit_total=(1.0 - Omega) * Y - fc_value,
            Omega_hhi=float(tech.weight * np.sum(s_i * hhi_om)), Phi_weights=float("nan"),
            fixed_cost_total=fc_value, fc_goods=fc_goods, Xc=Xc,
            n_total=tech.weight * float(n.sum()),
            n_concentrated=tech.weight * float(n[self.conc].sum()), warning=warning)

    # -- deletion order ----------------------------------------------------
    def deletion_sequence(self):
        """Greedy deletion order from the full matrix when fixed costs are common.

        With a common fixed cost every firm's loss is ``c - kappa * Z`` with
        the same scalar Z, so the worst-loss firm is always the lowest
        profit coefficient among the markets' marginal firms, whatever the
        aggregates.  Ties go to the lowest market index.
        """
        if self._seq is not None:
            return self._seq
        n = self.nmax.copy()
        heap = [(self.KL[i, n[i]], i) for i in np.flatnonzero(self.conc & (n > 0))]
        heapq.heapify(heap)
        seq, kap = [], []
        while heap:
            k, i = heapq.heappop(heap)
            seq.append(i)
            kap.append(k)
            n[i] -= 1
            if n[i] > 0:
                heapq.heappush(heap, (self.KL[i, n[i]], i))
        seq = np.array(seq, dtype=np.int64)
        kap = np.array(kap, dtype=float)
        # market sums after k deletions, k = 0..D
        n = self.nmax.copy()
        S0, SO0, fc0 = self.sums(n)
        dS = np.empty(seq.size)
        dSO = np.empty(seq.size)
        for k, i in enumerate(seq):
            a, b = n[i], n[i] - 1
            dS[k] = self.S[i, b] - self.S[i, a]
            dSO[k] = self.S[i, b] * self.OM[i, b] - self.S[i, a] * self.OM[i, a]
            n[i] = b
        c = self.tech.fixed_cost
        S_cum = S0 + np.concatenate([[0.0], np.cumsum(dS)])
        SO_cum = SO0 + np.concatenate([[0.0], np.cumsum(dSO)])
        fc_cum = fc0 - np.concatenate([[0.0], np.cumsum(c[seq])])
        self._seq = dict(seq=seq, kappa=kap, S=S_cum, SO=SO_cum, fc=fc_cum)
        return self._seq


def _batch_shares(g, eta, rho):
    n = g.shape[1]
    if eta >= 1.0:
        G = (n - (1.0 - rho)) / (1.0 / g).sum(axis=1)
        s = (1.0 - G[:, None] / g) / (1.0 - rho)
        if n == 1:
            s = np.ones_like(g)
        return s, G
    s = shares_newton(g, eta, rho)
    mu = markup_of_share(s, eta, rho)
    e = eta / (1.0 - eta)
    lx = e * (np.log(g) - np.log(mu))
    m = lx.max(axis=1)
    G = np.exp((m + np.log(np.exp(lx - m[:, None]).sum(axis=1))) / e)
    return s, G


# ---------------------------------------------------------------------------
# firm-set solver


@dataclass
class FirmSetResult:
    firm_set: FirmSet
    state: AggregateState
    deletions: int = 0
    readmissions: int = 0
    rounds: int = 0
    warning: str | None = None


def _loss_last(tables, n, ev, tau_f):
    """Net loss of each market's marginal firm (nan where not applicable)."""
    idx = np.arange(tables.tech.n_markets)
    thr = _thresholds(tables.tech.fixed_cost, ev["Theta"], tables.p, tau_f)
    kl = tables.KL[idx, n]
    cand = tables.conc & (n > 0)
    loss = np.where(cand, thr - kl * ev["Z"], -np.inf)
    return loss


def _entry_surplus(tables, n, K, A, tau_f):
    """Profit minus threshold of each market's best inactive firm if it entered."""
    tech = tables.tech
    idx = np.arange(tech.n_markets)
    cand = np.flatnonzero(tables.conc & (n < tables.nmax))
    if cand.size == 0:
        return cand, np.zeros(0)
    S_tot, SO_tot, fcs = tables.sums(n)
    a, b = n[cand], n[cand] + 1
    S_new = S_tot - tables.S[cand, a] + tables.S[cand, b]
    SO_new = (SO_tot - tables.S[cand, a] * tables.OM[cand, a]
              + tables.S[cand, b] * tables.OM[cand, b])
    fc_new = fcs + tech.fixed_cost[cand]
    ev = tables.evaluate(S_new, SO_new, fc_new, K, A, tau_f)
    thr = _thresholds(tech.fixed_cost[cand], ev["Theta"], tables.p, tau_f)
    prof = tables.KL[cand, b] * ev["Z"]
    return cand, prof - thr


def _sequential_deletion(tables, n, K, A, tau_f, budget):
    """Delete the single worst-loss firm per round until no firm makes a loss."""
    rounds = 0
    while rounds < budget:
        if np.all(n == 0):
            raise NoProduction("every firm was deleted")
        S_tot, SO_tot, fcs = tables.sums(n)
        ev = tables.evaluate(S_tot, SO_tot, fcs, K, A, tau_f)
        loss = _loss_last(tables, n, ev, tau_f)
        j = int(np.argmax(loss))
        if not loss[j] > 0.0:
            return n, rounds, True
        n[j] -= 1
        rounds += 1
    return n, rounds, False


def solve_firm_set(K, A, tech, p, tau_f=0.0, tables=None, method="auto"):
    """Equilibrium firm set at (K, A) by iterative deletion plus entry audit.

    Starting from every feasible firm active, the firm with the largest
    loss is removed one at a time (ties: lowest market index) until all
    active firms cover their fixed cost.  An entry audit then re-admits the
    most profitable marginal entrant, if any, and deletion resumes.
    """
    if K <= 0:
        raise ModelError("capital must be positive")
    tables = tables if tables is not None else MarketTables(tech, p)
    budget = 10 * tech.n_markets * tech.M
    n = tables.nmax.copy()
    deletions = 0
    if method == "auto" and tables.common_c:
        n, deletions = _fast_deletion(tables, K, A, tau_f)
    elif method not in ("auto", "sequential"):
        raise ValueError(f"unknown method {method!r}")
    rounds = deletions
    n, r, ok = _sequential_deletion(tables, n, K, A, tau_f, budget - rounds)
    rounds += r
    deletions += r
    readmit = 0
    last_ok = n.copy()
    warning = None
    while True:
        if not ok:
            warning = "deletion/entry loop hit its round bound; returning last loss-free set"
            n = last_ok
            break
        last_ok = n.copy()
        cand, surplus = _entry_surplus(tables, n, K, A, tau_f)
        if surplus.size == 0 or not np.any(surplus >= 0.0):
            break
        j = cand[int(np.argmax(surplus))]
        n[j] += 1
        readmit += 1
        rounds += 1
        n, r, ok = _sequential_deletion(tables, n, K, A, tau_f, budget - rounds)
        rounds += r
        deletions += r
    if warning:
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    st = tables.state(n, K, A, tau_f, warning=warning)
    return FirmSetResult(FirmSet(n), st, deletions, readmit, rounds, warning)


def _fast_deletion(tables, K, A, tau_f):
    sq = tables.deletion_sequence()
    seq, kap = sq["seq"], sq["kappa"]
    D = seq.size
    n = tables.nmax.copy()
    if D == 0:
        return n, 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ev = tables.evaluate(sq["S"], sq["SO"], sq["fc"], K, A, tau_f)
        c = tables.tech.fixed_cost[tables.conc][0]
        thr = _thresholds(c, ev["Theta"], tables.p, tau_f)
        thr = np.broadcast_to(thr, (D + 1,))
        stop = kap * ev["Z"][:D] >= thr[:D]
    k = int(np.argmax(stop)) if np.any(stop) else D
    if k == D and sq["S"][D] <= 0:
        raise NoProduction("every firm was deleted")
    n -= np.bincount(seq[:k], minlength=n.size).astype(n.dtype)
    return n, k


def audit_free_entry(tech, p, n, K, A, tau_f=0.0, tables=None):
    """Independent check of both free-entry conditions for a firm set.

    Recomputes every market with the reference solver.  Returns a dict with
    the worst active-firm margin (profit - threshold, must be >= 0) and the
    best entrant margin (must be < 0).
    """
    n = np.asarray(n)
    st = static_equilibrium(K, A, tech, FirmSet(n), p, tau_f)
    c = tech.fixed_cost
    thr = _thresholds(c, st.Theta, p, tau_f)
    worst = np.inf
    for i in np.flatnonzero(c > 0):
        if n[i] > 0:
            worst = min(worst, st.gross_profits[i, n[i] - 1] - thr[i])
    best = -np.inf
    nmax = tables.nmax if tables is not None else MarketTables(tech, p).nmax
    for i in np.flatnonzero((c > 0) & (n < nmax)):
        n2 = n.copy()
        n2[i] += 1
        try:
            st2 = static_equilibrium(K, A, tech, FirmSet(n2), p, tau_f)
        except ModelError:
            continue        # the entrant's fixed cost would absorb all factors
        thr2 = _thresholds(c[i], st2.Theta, p, tau_f)
        best = max(best, st2.gross_profits[i, n2[i] - 1] - thr2)
    return dict(worst_active_margin=worst, best_entrant_margin=best,
                ok=bool(worst >= -1e-12 * max(1.0, abs(st.Y)) and best < 0))


# ---------------------------------------------------------------------------
# grid


_GRID_FIELDS = ("Theta", "Phi", "Omega", "Y", "L", "W", "R",
                "fc_goods", "Xc", "n_total", "n_conc")


@dataclass
class GridSolution:
    """Static solutions on a (K, A) grid."""

    K: np.ndarray
    logA: np.ndarray
    Theta: np.ndarray
    Phi: np.ndarray
    Omega: np.ndarray
    Y: np.ndarray
    L: np.ndarray
    W: np.ndarray
    R: np.ndarray
    fc_goods: np.ndarray
    Xc: np.ndarray
    n_total: np.ndarray
    n_conc: np.ndarray
    params: object
    tau_f: float = 0.0
    conc_mass: float = 0.0
    n_i: np.ndarray | None = None
    warnings: int = 0
    A_level: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def A(self):
        return self.A_level * np.exp(self.logA)

    @property
    def shape(self):
        return (self.K.size, self.logA.size)

    def fields(self):
        return {k: getattr(self, k) for k in _GRID_FIELDS}

    def node_rows(self):
        """Rows of the node table in (k_index, a_index) order."""
        nK, nA = self.shape
        for k in range(nK):
            for a in range(nA):
                yield dict(k_index=k, a_index=a, K=self.K[k], A=float(self.A[a]),
                           Theta=self.Theta[k, a], Phi=self.Phi[k, a], Omega=self.Omega[k, a],
                           Y=self.Y[k, a], L=self.L[k, a], W=self.W[k, a], R=self.R[k, a],
                           n_total=self.n_total[k, a], n_concentrated=self.n_conc[k, a])


def solve_grid(tech, p, K_grid, logA_grid, tau_f=0.0, tables=None, threads=1, keep_counts=True):
    """Solve the firm set and aggregates at every (K, A) node."""
    K_grid = np.asarray(K_grid, dtype=float)
    logA_grid = np.asarray(logA_grid, dtype=float)
    if np.any(np.diff(K_grid) <= 0) or np.any(np.diff(logA_grid) <= 0):
        raise ModelError("grids must be strictly increasing")
    tables = tables if tables is not None else MarketTables(tech, p)
    if tables.common_c:
        tables.deletion_sequence()
    nK, nA = K_grid.size, logA_grid.size

    def node(ka):
        k, a = ka
        try:
            return solve_firm_set(K_grid[k], np.exp(logA_grid[a]), tech, p, tau_f, tables)
        except ModelError as exc:
            raise type(exc)(f"node (k={k}, a={a}, K={K_grid[k]:.6g}, "
                            f"logA={logA_grid[a]:.6g}): {exc}") from exc

    jobs = [(k, a) for k in range(nK) for a in range(nA)]
    res = parallel_map(node, jobs, threads)
    out = {f: np.empty((nK, nA)) for f in _GRID_FIELDS}
    counts = np.empty((nK, nA, tech.n_markets), dtype=np.int16) if keep_counts else None
    nwarn = 0
    for (k, a), r in zip(jobs, res):
        st = r.state
        for f in _GRID_FIELDS:
            src = {"n_conc": "n_concentrated"}.get(f, f)
            out[f][k, a] = getattr(st, src)
        if keep_counts:
            counts[k, a] = r.firm_set.n
        nwarn += r.warning is not None
    return GridSolution(K=K_grid, logA=logA_grid, params=p, tau_f=tau_f,
                        conc_mass=tech.weight * float(np.sum(tables.conc)),
                        n_i=counts, warnings=nwarn, **out)


class DrawnEconomy:
    """Heterogeneous-draw economy with cached market tables.

    Shares the ``state``/``rental_rate``/``grid`` interface of
    :class:`oligofrag.fragility.SymmetricEconomy`.
    """

    def __init__(self, tech, p, tau_f=0.0, tables=None):
        if not 0.0 <= tau_f < 1.0:
            raise ModelError(f"tau_f must lie in [0,1), got {tau_f}")
        self.tech = tech
        self.p = p
        self.tau_f = float(tau_f)
        self.tables = tables if tables is not None else MarketTables(tech, p)
        if self.tables.common_c:
            self.tables.deletion_sequence()

    def with_tau(self, tau_f):
        return DrawnEconomy(self.tech, self.p, tau_f, self.tables)

    def solve(self, K, A=1.0):
        return solve_firm_set(K, A, self.tech, self.p, self.tau_f, self.tables)

    def state(self, K, A=1.0):
        return self.solve(K, A).state

    def rental_rate(self, K, A=1.0):
        return self.state(K, A).R

    def grid(self, K_grid, logA_grid, threads=1, keep_counts=True):
        return solve_grid(self.tech, self.p, K_grid, logA_grid, self.tau_f, self.tables,
                          threads=threads, keep_counts=keep_counts)
