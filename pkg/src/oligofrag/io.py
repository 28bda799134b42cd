"""Binary cache of solved economies and deterministic CSV/JSON output.

Cache layout::

    MAGIC (8 bytes) | format version (uint32 LE) | header length (uint64 LE)
    | header JSON | array payload | sha256 of everything before (32 bytes)

The header lists every array with dtype, shape, offset and length inside
the payload, so a short file can be reported with the array it cuts into.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np

from .aggregate import GridSolution
from .dynamics import MarkovChain, SavingsPolicy
from .params import MODEL_VERSION, ModelError, ParamSet

MAGIC = b"OLIGOFR\x01"
CACHE_FORMAT = 1
_PREFIX = struct.Struct("<IQ")
_DIGEST = 32


class CacheError(ModelError):
    """Unreadable, truncated, corrupt or mismatched cache file."""


# ---------------------------------------------------------------------------
# JSON / CSV


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if not math.isfinite(v):
            raise ModelError(f"refusing to write non-finite number {v}")
        return v
    return x


def dumps_json(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.write_text(dumps_json(obj), encoding="utf-8", newline="\n")
    return path


def format_number(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            raise ModelError(f"refusing to write non-finite number {v}")
        return format(v, ".17g")
    return str(v)


def write_csv(path, columns, rows=None):
    """Write rows (dicts or sequences) under the given column names.

    With ``rows=None``, ``columns`` is a dict of equal-length 1-d arrays.
    """
    path = Path(path)
    if rows is None:
        names = list(columns)
        cols = [np.asarray(columns[k]).ravel() for k in names]
        n = cols[0].size if cols else 0
        if any(c.size != n for c in cols):
            raise ValueError("CSV columns must have equal length")
        body = [[c[i] for c in cols] for i in range(n)]
    else:
        names = list(columns)
        body = [[r[k] for k in names] if isinstance(r, dict) else list(r) for r in rows]
    lines = [",".join(names)]
    lines += [",".join(format_number(v) for v in r) for r in body]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_csv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    names = lines[0].split(",")
    return [dict(zip(names, ln.split(","))) for ln in lines[1:]]


# ---------------------------------------------------------------------------
# binary cache


def save_arrays(path, header, arrays):
    """Write named arrays plus a JSON header; returns the file digest."""
    entries = []
    blobs = []
    off = 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        if a.dtype.kind == "f":
            a = a.astype("<f8")
        elif a.dtype.kind in "iu":
            a = a.astype("<i8")
        elif a.dtype.kind == "b":
            a = a.astype("u1")
        else:
            raise CacheError(f"array {name!r} has unsupported dtype {a.dtype}")
        b = a.tobytes()
        entries.append(dict(name=name, dtype=a.dtype.str, shape=list(a.shape),
                            offset=off, nbytes=len(b)))
        blobs.append(b)
        off += len(b)
    head = dict(header, arrays=entries, payload_bytes=off)
    hj = json.dumps(_plain(head), sort_keys=True, separators=(",", ":")).encode()
    body = MAGIC + _PREFIX.pack(CACHE_FORMAT, len(hj)) + hj + b"".join(blobs)
    dig = hashlib.sha256(body).digest()
    Path(path).write_bytes(body + dig)
    return dig.hex()


def load_arrays(path):
    """Read a cache file; raises CacheError with byte offsets on damage."""
    path = Path(path)
    if not path.exists():
        raise CacheError(f"cache file {path} does not exist")
    data = path.read_bytes()
    size = len(data)
    pre = len(MAGIC) + _PREFIX.size
    if size < pre:
        raise CacheError(f"{path}: truncated at byte {size}; the fixed prefix needs {pre} bytes")
    if data[:len(MAGIC)] != MAGIC:
        raise CacheError(f"{path}: bad magic bytes at offset 0; not an oligofrag cache")
    version, hlen = _PREFIX.unpack_from(data, len(MAGIC))
    if version != CACHE_FORMAT:
        raise CacheError(f"{path}: cache format {version}, this build reads {CACHE_FORMAT}")
    if size < pre + hlen:
        raise CacheError(f"{path}: truncated at byte {size} inside the header "
                         f"(header spans bytes {pre}..{pre + hlen})")
    try:
        header = json.loads(data[pre:pre + hlen])
    except ValueError as exc:
        raise CacheError(f"{path}: header at offset {pre} is not valid JSON ({exc})") from None
    start = pre + hlen
    expected = start + header["payload_bytes"] + _DIGEST
    if size != expected:
        where = ""
        for e in header["arrays"]:
            lo = start + e["offset"]
            if lo <= size < lo + e["nbytes"]:
                where = f" inside array {e['name']!r} (bytes {lo}..{lo + e['nbytes']})"
        if not where and size > expected - _DIGEST - 1:
            where = f" inside the checksum (bytes {expected - _DIGEST}..{expected})"
        kind = "truncated" if size < expected else "has trailing bytes"
        raise CacheError(f"{path}: file {kind}: {size} bytes, expected {expected}{where}")
    if hashlib.sha256(data[:-_DIGEST]).digest() != data[-_DIGEST:]:
        raise CacheError(f"{path}: checksum mismatch; file is corrupt")
    arrays = {}
    for e in header["arrays"]:
        lo = start + e["offset"]
        a = np.frombuffer(data, dtype=np.dtype(e["dtype"]), count=int(np.prod(e["shape"], dtype=np.int64)),
                          offset=lo)
        arrays[e["name"]] = a.reshape(e["shape"]).copy()
    return header, arrays


# ---------------------------------------------------------------------------
# solved economies


_GRID_ARRAYS = ("K", "logA", "Theta", "Phi", "Omega", "Y", "L", "W", "R", "fc_goods", "Xc",
                "n_total", "n_conc")


def _grid_arrays(prefix, g):
    return {f"{prefix}.{k}": getattr(g, k) for k in _GRID_ARRAYS}


def _grid_from(prefix, arrays, meta, p):
    kw = {k: arrays[f"{prefix}.{k}"] for k in _GRID_ARRAYS}
    return GridSolution(params=p, tau_f=meta["tau_f"], conc_mass=meta["conc_mass"],
                        warnings=meta["warnings"], A_level=meta["A_level"], **kw)


def _grid_meta(g):
    return dict(tau_f=g.tau_f, conc_mass=g.conc_mass, warnings=g.warnings, A_level=g.A_level)


def save_solved(path, sol, key):
    """Persist grid, chain and policies of a SolvedEconomy under hash ``key``."""
    arrays = _grid_arrays("grid", sol.grid)
    arrays.update({"chain.states": sol.chain.states, "chain.transition": sol.chain.transition,
                   "policy.s": sol.policy.s})
    header = dict(model_version=MODEL_VERSION, key=key, name=sol.name, params=sol.p.as_dict(),
                  K_det=sol.K_det, K_high=sol.K_high, tau_f=sol.tau_f, meta=sol.meta,
                  grid=_grid_meta(sol.grid),
                  policy=dict(iterations=sol.policy.iterations, sup_change=sol.policy.sup_change,
                              corner_nodes=sol.policy.corner_nodes, method=sol.policy.method),
                  extended=sol.grid_ext is not None)
    if sol.grid_ext is not None:
        arrays.update(_grid_arrays("grid_ext", sol.grid_ext))
        arrays["policy_ext.s"] = sol.policy_ext.s
        header["grid_ext"] = _grid_meta(sol.grid_ext)
    return save_arrays(path, header, arrays)


def load_solved(path, key=None, econ=None):
    """Load a cached SolvedEconomy; ``key`` must match when given.

    ``econ`` (the drawn economy) is not stored; pass it when the caller
    needs market-level detail.
    """
    from .experiments import SolvedEconomy
    header, arrays = load_arrays(path)
    if header.get("model_version") != MODEL_VERSION:
        raise CacheError(f"{path}: written by model version {header.get('model_version')}, "
                         f"this build is {MODEL_VERSION}")
    if key is not None and header["key"] != key:
        raise CacheError(f"{path}: cache hash {header['key'][:12]} does not match the "
                         f"configuration hash {key[:12]}")
    p = ParamSet(**header["params"])
    grid = _grid_from("grid", arrays, header["grid"], p)
    chain = MarkovChain(arrays["chain.states"], arrays["chain.transition"])
    ph = header["policy"]
    policy = SavingsPolicy(grid.K.copy(), grid.logA.copy(), arrays["policy.s"],
                           ph["iterations"], ph["sup_change"], ph["corner_nodes"], ph["method"])
    grid_ext = policy_ext = None
    if header["extended"]:
        grid_ext = _grid_from("grid_ext", arrays, header["grid_ext"], p)
        policy_ext = SavingsPolicy(grid_ext.K.copy(), grid_ext.logA.copy(),
                                   arrays["policy_ext.s"], method=ph["method"])
    return SolvedEconomy(header["name"], p, econ, header["K_det"], grid, chain, policy,
                         header["K_high"], header["tau_f"], grid_ext, policy_ext,
                         dict(header["meta"], cache_key=header["key"]))


# ---------------------------------------------------------------------------
# manifest


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_manifest(subcommand, param_hash, seeds, outputs, settings, runtime_file=None):
    """Manifest contents; wall-clock time lives in the runtime sidecar so the
    manifest itself stays byte-identical across reruns."""
    files = [dict(name=Path(f).name, sha256=file_digest(f)) for f in outputs]
    return dict(model_version=MODEL_VERSION, subcommand=subcommand, param_hash=param_hash,
                seeds=seeds, settings=settings, outputs=files,
                runtime_file=Path(runtime_file).name if runtime_file else None)
