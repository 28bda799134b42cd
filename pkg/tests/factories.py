"""Random small economies for identity and property checks."""

import numpy as np

from oligofrag.aggregate import FirmSet, static_equilibrium
from oligofrag.params import ParamSet
from oligofrag.technology import draw_technology


def random_params(rng, eta1=None, **kw):
    rho = rng.uniform(0.2, 0.8)
    if eta1 is None:
        eta1 = rng.random() < 0.3
    eta = 1.0 if eta1 else rng.uniform(rho + 0.05, 0.98)
    vals = dict(beta=0.99, psi=1.0, nu=rng.uniform(0.2, 1.0), alpha=rng.uniform(0.2, 0.45),
                delta=0.025, rho=rho, eta=eta, I=int(rng.integers(2, 12)),
                M=int(rng.integers(1, 6)), f=rng.uniform(0.3, 1.0), lam=rng.uniform(0.0, 0.5),
                c=0.0, phi_A=0.95, sigma_eps=0.003,
                fixed_cost_mode="factor_bundle" if rng.random() < 0.25 else "final_good")
    vals.update(kw)
    return ParamSet(**vals)


def random_economy(rng, **kw):
    """(params, tech, K) with a fixed cost near the typical firm profit."""
    p = random_params(rng, **kw)
    tech = draw_technology(p, int(rng.integers(1 << 30)))
    K = float(np.exp(rng.uniform(np.log(5.0), np.log(500.0))))
    full = static_equilibrium(K, 1.0, tech, FirmSet(np.full(p.I, p.M)), p) \
        if p.eta < 1 else None
    scale = full.Y / (p.I * p.M) if full is not None else K ** p.alpha / (p.I * p.M)
    c = float(rng.uniform(0.005, 0.3) * scale)
    p = p.with_(c=c)
    tech = draw_technology(p, tech.seed)
    return p, tech, K


def symmetric_params(rng, rho=None, delta=None):
    from oligofrag.fragility import toy_params
    rho = rng.uniform(0.6, 0.9) if rho is None else rho
    return toy_params().__class__(
        beta=0.99, psi=1.0, nu=rng.uniform(0.3, 1.0), alpha=rng.uniform(0.25, 0.4),
        delta=rng.choice([0.025, 1.0]) if delta is None else delta, rho=rho, eta=1.0,
        I=1, M=8, f=1.0, lam=0.0, c=rng.uniform(0.005, 0.03), phi_A=0.0, sigma_eps=0.0)


def rising_segment(econ, n, A):
    """R at the top of the n-firm region and at the bottom of the (n+1)-firm region."""
    from oligofrag.fragility import rental_rate_formula
    lo = econ.bounds_K(n, A)[1]
    hi = econ.bounds_K(n + 1, A)[0]
    return (rental_rate_formula(econ.Theta_n(n, A), lo, econ.p),
            rental_rate_formula(econ.Theta_n(n + 1, A), hi, econ.p))


def place_A(econ, n, u):
    """Productivity level that puts R* a fraction ``u`` (in logs) up the rising
    segment between n and n+1 firms; None if the segment does not rise."""
    r0 = np.array(rising_segment(econ, n, 1.0))
    r1 = np.array(rising_segment(econ, n, 2.0))
    if not r0[1] > 1.01 * r0[0]:
        return None
    k = np.log(r1[0] / r0[0]) / np.log(2.0)
    target = np.exp(np.log(r0[0]) + u * np.log(r0[1] / r0[0]))
    return float((econ.p.R_star / target) ** (1.0 / k))


def symmetric_instance(rng, M=None, lam=None, multiplicity=True, rho=None, n=1):
    """Random eta=1 symmetric economy; with ``multiplicity`` R* sits inside the
    rising segment above n firms, otherwise A is drawn freely."""
    from oligofrag.fragility import SymmetricEconomy
    while True:
        p = symmetric_params(rng, rho=rho)
        M_ = int(rng.integers(2, 6)) if M is None else M
        lam_ = rng.uniform(0.0, 0.15) if lam is None else lam
        g = np.sort(np.exp(lam_ * rng.standard_normal(M_)))[::-1]
        econ = SymmetricEconomy(g, p.c, p.with_(M=M_))
        if econ.nmax < n + 1:
            continue
        if multiplicity:
            A = place_A(econ, n, rng.uniform(0.15, 0.85))
            if A is None:
                continue
        else:
            A = float(np.exp(rng.uniform(-1.0, 1.5)))
        return econ.with_(A=A)
