"""Parameter sets, presets and config-file parsing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

MODEL_VERSION = "1.0.0"

FIXED_COST_MODES = ("final_good", "factor_bundle")


class ModelError(ValueError):
    """Domain error raised by the model (reported with exit code 1 by the CLI)."""


class ParamError(ModelError):
    """Raised for parameter values outside the model's domain."""


@dataclass(frozen=True)
class ParamSet:
    """Structural parameters of the economy (quarterly frequency).

    ``rho`` and ``eta`` are the across- and within-market CES exponents,
    ``rho = 1 - 1/sigma_I`` and ``eta = 1 - 1/sigma_G``.
    """

    beta: float
    psi: float
    nu: float
    alpha: float
    delta: float
    rho: float
    eta: float
    I: int
    M: int
    f: float
    lam: float
    c: float
    phi_A: float
    sigma_eps: float
    fixed_cost_mode: str = "final_good"

    def __post_init__(self):
        check_params(self)

    @property
    def r1(self):
        """Exponent rho/(1-rho) that maps market price indices to sales shares."""
        return self.rho / (1.0 - self.rho)

    @property
    def R_star(self):
        """Steady-state rental rate 1/beta - (1 - delta)."""
        return 1.0 / self.beta - (1.0 - self.delta)

    @property
    def sigma_I(self):
        return 1.0 / (1.0 - self.rho)

    @property
    def sigma_G(self):
        return 1.0 / (1.0 - self.eta) if self.eta < 1.0 else float("inf")

    def with_(self, **kw):
        return replace(self, **kw)

    def as_dict(self):
        return asdict(self)


def check_params(p):
    if not 0.0 < p.beta < 1.0:
        raise ParamError(f"beta must lie in (0,1), got {p.beta}")
    if not 0.0 <= p.delta <= 1.0:
        raise ParamError(f"delta must lie in [0,1], got {p.delta}")
    if not p.nu > 0.0:
        raise ParamError(f"nu must be positive, got {p.nu}")
    if not 0.0 < p.alpha < 1.0:
        raise ParamError(f"alpha must lie in (0,1), got {p.alpha}")
    if not 0.0 < p.rho:
        raise ParamError(f"rho must be positive, got {p.rho}")
    if not p.rho < p.eta:
        raise ParamError(
            "within-market substitution must exceed across-market "
            f"(need rho < eta, got rho={p.rho}, eta={p.eta})")
    if not p.eta <= 1.0:
        raise ParamError(f"eta must not exceed 1, got {p.eta}")
    if int(p.I) != p.I or p.I < 1:
        raise ParamError(f"I must be a positive integer, got {p.I}")
    if int(p.M) != p.M or p.M < 1:
        raise ParamError(f"M must be a positive integer, got {p.M}")
    if not 0.0 <= p.f <= 1.0:
        raise ParamError(f"f must lie in [0,1], got {p.f}")
    if p.lam < 0.0:
        raise ParamError(f"lambda must be nonnegative, got {p.lam}")
    if p.c < 0.0:
        raise ParamError(f"c must be nonnegative, got {p.c}")
    if not 0.0 <= p.phi_A < 1.0:
        raise ParamError(f"phi_A must lie in [0,1), got {p.phi_A}")
    if p.sigma_eps < 0.0:
        raise ParamError(f"sigma_eps must be nonnegative, got {p.sigma_eps}")
    if not 0.0 <= p.psi <= 1.0:
        raise ParamError(f"psi must lie in [0,1], got {p.psi}")
    if p.fixed_cost_mode not in FIXED_COST_MODES:
        raise ParamError(f"fixed_cost_mode must be one of {FIXED_COST_MODES}")


_SHARED = dict(beta=0.99, psi=1.0, nu=0.352, alpha=0.3, delta=0.025,
               sigma_I=1.38, sigma_G=11.13, I=10000, M=20,
               phi_A=0.95, sigma_eps=0.003)

# (f, lambda, c) by calibration year
_VARIABLE = {
    "y1975": (0.110, 0.190, 0.00047),
    "y1990": (0.135, 0.283, 0.00096),
    "y2007": (0.140, 0.328, 0.00134),
}

PRESET_NAMES = tuple(_VARIABLE)


def preset_raw(name):
    """Raw key/value map of a calibration preset (sigma form)."""
    if name not in _VARIABLE:
        raise ParamError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    f, lam, c = _VARIABLE[name]
    raw = dict(_SHARED)
    raw.update(f=f, lam=lam, c=c)
    return raw


def preset(name):
    return validate_params({"preset": name})


_INT_KEYS = {"I", "M"}
_STR_KEYS = {"fixed_cost_mode", "preset"}
_ALIASES = {"lambda": "lam", "phi_a": "phi_A"}


def _coerce(key, value):
    if key in _STR_KEYS:
        return str(value).strip()
    if key in _INT_KEYS:
        v = float(value)
        if v != int(v):
            raise ParamError(f"{key} must be an integer, got {value}")
        return int(v)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParamError(f"{key}: cannot parse {value!r} as a number") from None


def validate_params(raw):
    """Build a validated ParamSet from a key/value map.

    Missing keys default from ``raw['preset']`` when given.  Exactly one of
    ``rho``/``sigma_I`` (and ``eta``/``sigma_G``) may be supplied explicitly;
    a sigma key in ``raw`` overrides the preset's exponent.
    """
    raw = {_ALIASES.get(k, k): v for k, v in dict(raw).items()}
    for a, b in (("rho", "sigma_I"), ("eta", "sigma_G")):
        if a in raw and b in raw:
            raise ParamError(f"supply either {a} or {b}, not both")
    base = {}
    if "preset" in raw:
        base = preset_raw(str(raw.pop("preset")).strip())
    for a, b in (("rho", "sigma_I"), ("eta", "sigma_G")):
        if a in raw:
            base.pop(b, None)
        if b in raw:
            base.pop(a, None)
    base.update(raw)
    vals = {k: _coerce(k, v) for k, v in base.items()}

    if "sigma_I" in vals:
        s = vals.pop("sigma_I")
        if s <= 1.0:
            raise ParamError(f"sigma_I must exceed 1, got {s}")
        vals["rho"] = 1.0 - 1.0 / s
    if "sigma_G" in vals:
        s = vals.pop("sigma_G")
        if s <= 1.0:
            raise ParamError(f"sigma_G must exceed 1, got {s}")
        vals["eta"] = 1.0 if s == float("inf") else 1.0 - 1.0 / s

    names = [f.name for f in fields(ParamSet)]
    unknown = sorted(set(vals) - set(names))
    if unknown:
        raise ParamError(f"unknown parameter keys: {unknown}")
    missing = [n for n in names if n not in vals and n != "fixed_cost_mode"]
    if missing:
        raise ParamError(f"missing parameter keys (and no preset given): {missing}")
    return ParamSet(**vals)


def parse_config_text(text):
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamError(f"config line {lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        k = k.strip()
        if not k:
            raise ParamError(f"config line {lineno}: empty key")
        out[k] = v.strip()
    return out


def load_config(path):
    return parse_config_text(Path(path).read_text())


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def param_hash(p, **extra):
    """Stable hex digest of a ParamSet plus any solver settings."""
    payload = {"model_version": MODEL_VERSION, "params": p.as_dict(), "extra": extra}
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()
