"""Idiosyncratic productivity draws and fixed-cost assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TechnologySet:
    """Productivity matrix and per-market fixed costs.

    ``gamma`` has one row per drawn market, sorted descending.  When fewer
    markets are drawn than the economy has (``weight > 1``) each drawn
    market stands in for ``weight`` identical markets.
    """

    gamma: np.ndarray
    fixed_cost: np.ndarray
    seed: int
    weight: float = 1.0

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 2:
            raise ValueError("gamma must be a 2-d array")
        if not np.all(g > 0):
            raise ValueError("all productivities must be positive")
        if g.shape[1] > 1 and np.any(np.diff(g, axis=1) > 0):
            raise ValueError("gamma rows must be sorted in descending order")
        fc = np.asarray(self.fixed_cost, dtype=float)
        if fc.shape != (g.shape[0],):
            raise ValueError("fixed_cost must have one entry per market")
        g.setflags(write=False)
        fc.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "fixed_cost", fc)

    @property
    def n_markets(self):
        return self.gamma.shape[0]

    @property
    def M(self):
        return self.gamma.shape[1]

    @property
    def concentrated(self):
        return self.fixed_cost > 0

    @property
    def I_total(self):
        return self.weight * self.n_markets


def n_concentrated(f, n):
    # round half up so that 0.5 boundaries do not depend on banker's rounding
    return int(np.floor(f * n + 0.5))


def draw_technology(p, seed, n_markets=None):
    """Draw log-normal productivities (log gamma ~ N(0, lam^2)).

    The first round(f * n) markets carry fixed cost ``c``.  ``n_markets``
    below ``p.I`` draws a subsample whose markets each represent
    ``p.I / n_markets`` markets of the economy.
    """
    n = p.I if n_markets is None else int(n_markets)
    if n < 1 or n > p.I:
        raise ValueError(f"n_markets must lie in [1, {p.I}], got {n}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, p.M))
    logg = p.lam * z
    # stable sort on the negated draws keeps draw order among ties
    order = np.argsort(-logg, axis=1, kind="stable")
    gamma = np.exp(np.take_along_axis(logg, order, axis=1))
    fc = np.zeros(n)
    fc[:n_concentrated(p.f, n)] = p.c
    return TechnologySet(gamma=gamma, fixed_cost=fc, seed=seed, weight=p.I / n)


def symmetric_technology(gamma_row, n_markets, c, n_conc=None, weight=1.0):
    """Economy of identical markets sharing one productivity row."""
    row = np.asarray(gamma_row, dtype=float)
    gamma = np.tile(row, (n_markets, 1))
    fc = np.zeros(n_markets)
    fc[: n_markets if n_conc is None else n_conc] = c
    return TechnologySet(gamma=gamma, fixed_cost=fc, seed=-1, weight=weight)
