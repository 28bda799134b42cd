"""Command-line front end.

Exit codes: 0 success, 1 model or cache error (JSON on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .dynamics import SIM_FIELDS, simulate
from .fragility import TOY_A, chi, steady_states, sufficient_conditions, toy_economy, toy_params
from .io import (CacheError, load_solved, run_manifest, save_solved, write_csv, write_json)
from .params import (MODEL_VERSION, ModelError, load_config, param_hash, parse_config_text,
                     validate_params)
from .parallel import default_threads

SUBCOMMANDS = ("solve-grid", "simulate", "irf", "ergodic", "recessions", "fragility", "crisis",
               "policy", "moments")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _common(sp):
    sp.add_argument("--config", help="file of key=value parameter lines")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="parameter override (repeatable)")
    sp.add_argument("--preset", default=None, help="calibration preset (y1975, y1990, y2007, toy)")
    sp.add_argument("--scale", default="desk", choices=tuple(ex.SCALES))
    sp.add_argument("--seed", type=int, default=0, help="simulation seed")
    sp.add_argument("--tech-seed", type=int, default=ex.TECH_SEED,
                    help="seed of the productivity draws")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (default from OLIGOFRAG_THREADS, else 1)")
    sp.add_argument("--out", default="out", help="output directory")
    sp.add_argument("--cache", default=None, help="cache file (default: inside --out)")


def build_parser():
    ap = _Parser(prog="oligofrag", description="Oligopoly, entry and aggregate fragility.")
    ap.add_argument("--version", action="version", version=MODEL_VERSION)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sp = sub.add_parser("solve-grid", help="solve grid and savings policy, write the cache")
    _common(sp)
    sp = sub.add_parser("simulate", help="simulate paths from the high steady state")
    _common(sp)
    sp.add_argument("--T", type=int, default=200)
    sp.add_argument("--reps", type=int, default=1)
    sp = sub.add_parser("irf", help="impulse responses to a TFP innovation profile")
    _common(sp)
    sp.add_argument("--shock", default="small", choices=("small", "large", "zero"))
    sp.add_argument("--horizon", type=int, default=100)
    sp = sub.add_parser("ergodic", help="ergodic distribution of log output")
    _common(sp)
    sp.add_argument("--T", type=int, default=None)
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--burn-in", type=int, default=None)
    sp = sub.add_parser("recessions", help="deep-recession probabilities")
    _common(sp)
    sp.add_argument("--thresholds", default="0.10,0.15,0.20")
    sp.add_argument("--horizons", default=None, help="comma-separated quarters")
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--min-duration", type=int, default=4)
    sp = sub.add_parser("fragility", help="steady states and fragility ratios")
    _common(sp)
    sp.add_argument("--points", type=int, default=400)
    sp = sub.add_parser("crisis", help="shock inversion and crisis deviations")
    _common(sp)
    sp.add_argument("--tfp-anchor", type=float, default=-0.039)
    sp.add_argument("--horizon", type=int, default=130)
    sp = sub.add_parser("policy", help="welfare of entry subsidies")
    _common(sp)
    sp.add_argument("--tau", default=None, help="comma-separated subsidy rates")
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--T", type=int, default=None)
    sp.add_argument("--cev-scale", default="consumption", choices=("consumption", "bundle"))
    sp = sub.add_parser("moments", help="firm-level moments at the high steady state")
    _common(sp)
    return ap


# ---------------------------------------------------------------------------


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def resolve_params(args):
    """ParamSet and a label from --preset, --config and --set (later wins)."""
    raw = {}
    if args.config:
        raw.update(load_config(args.config))
    if args.preset and args.preset != "toy":
        raw["preset"] = args.preset
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        raw.update(parse_config_text(item))
    if args.preset == "toy":
        base = toy_params().as_dict()
        base.update(raw)
        raw = base
    if not raw:
        raise UsageError("give --preset or --config")
    p = validate_params(raw)
    label = args.preset or (Path(args.config).stem if args.config else "custom")
    return p, label


def _key(p, args):
    return param_hash(p, scale=args.scale, tech_seed=args.tech_seed)


def _cache_path(label, args, key, out):
    if args.cache:
        return Path(args.cache)
    return out / f"{label}_{args.scale}_{key[:12]}.cache"


def _solved(p, label, args, threads, out, log):
    key = _key(p, args)
    path = _cache_path(label, args, key, out)
    if path.exists():
        sol = load_solved(path, key)
        log["cache"] = "hit"
    elif args.cache:
        raise CacheError(f"cache file {path} does not exist")
    else:
        sol = ex.build_economy(p, args.scale, seed=args.tech_seed, threads=threads, name=label)
        save_solved(path, sol, key)
        log["cache"] = "miss"
    log["cache_file"] = str(path)
    return sol, path


def _econ(p, args):
    sc = ex.get_scale(args.scale)
    from .aggregate import DrawnEconomy
    from .technology import draw_technology
    n = None if sc.n_markets is None else min(sc.n_markets, p.I)
    return DrawnEconomy(draw_technology(p, args.tech_seed, n_markets=n), p)


def _stem(label, cmd, args):
    return f"{label}_{cmd}_s{args.seed}"


def run(args):
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        raise UsageError("--threads must be at least 1")
    p, label = resolve_params(args)
    if args.preset == "toy" and args.command != "fragility":
        raise UsageError("the toy preset only supports the fragility subcommand")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    stem = _stem(label, cmd.replace("-", "_"), args)
    if cmd == "irf":
        stem = f"{label}_irf_{args.shock}_s{args.seed}"
    log = {}
    outputs = []
    settings = dict(scale=args.scale, tech_seed=args.tech_seed, preset=label)
    t0 = time.perf_counter()

    if cmd == "solve-grid":
        key = _key(p, args)
        path = _cache_path(label, args, key, out)
        if path.exists():
            try:
                sol = load_solved(path, key)
                log["cache"] = "hit"
            except CacheError as exc:
                if "does not match" not in str(exc):
                    raise
                sol = None
        else:
            sol = None
        if sol is None:
            sol = ex.build_economy(p, args.scale, seed=args.tech_seed, threads=threads, name=label)
            save_solved(path, sol, key)
            log["cache"] = "miss"
        print(f"cache {log['cache']}: {path}")
        summary = dict(K_det=sol.K_det, K_high=sol.K_high, policy_iterations=sol.policy.iterations,
                       grid_shape=list(sol.grid.shape), cache_key=key)
        outputs.append(write_json(out / f"{label}_solve_grid.json", summary))
        nodes = list(sol.grid.node_rows())
        outputs.append(write_csv(out / f"{label}_grid.csv", list(nodes[0]), nodes))

    elif cmd == "simulate":
        sol, _ = _solved(p, label, args, threads, out, log)
        if args.T < 1 or args.reps < 1:
            raise UsageError("--T and --reps must be positive")
        path = simulate(sol.policy, sol.grid, sol.chain, p, args.T, sol.K_high, seed=args.seed,
                        reps=args.reps)
        cols = {"rep": np.repeat(np.arange(args.reps), args.T),
                "t": np.tile(np.arange(args.T), args.reps)}
        cols.update({f: path.data[f].ravel() for f in SIM_FIELDS})
        outputs.append(write_csv(out / f"{stem}.csv", cols))

    elif cmd == "irf":
        sol, _ = _solved(p, label, args, threads, out, log)
        res = ex.irf(sol, ex.shock_profile(args.shock, p), args.horizon)
        cols = {"h": res.h}
        cols.update({k: res.dev[k] for k in sorted(res.dev)})
        outputs.append(write_csv(out / f"{stem}.csv", cols))
        settings.update(shock=args.shock, horizon=args.horizon)

    elif cmd == "ergodic":
        sol, _ = _solved(p, label, args, threads, out, log)
        e = ex.ergodic(sol, args.T, args.burn_in, seed=args.seed, reps=args.reps)
        outputs.append(write_csv(out / f"{stem}_hist.csv",
                                 {"gap_lo": e.edges[:-1], "gap_hi": e.edges[1:], "count": e.counts}))
        outputs.append(write_json(out / f"{stem}.json", dict(
            modes=e.modes, n_modes=e.n_modes, mean_gap=e.mean_gap, std_logY=e.std_logY,
            n_obs=e.n_obs, clamped=e.clamped)))

    elif cmd == "recessions":
        sol, _ = _solved(p, label, args, threads, out, log)
        sc = ex.get_scale(args.scale)
        horizons = tuple(int(h) for h in _floats(args.horizons)) if args.horizons else sc.horizons
        spec = ex.RecessionSpec(_floats(args.thresholds), args.min_duration, horizons,
                                args.reps or sc.reps)
        rows = ex.recession_probabilities(sol, spec, seed=args.seed)
        outputs.append(write_csv(out / f"{stem}.csv", list(rows[0]), rows))

    elif cmd == "fragility":
        if args.preset == "toy":
            model = toy_economy(c=p.c, beta=p.beta, M=p.M)
            ss = steady_states(model, p, n_points=args.points)
            A = TOY_A
        else:
            model = _econ(p, args)
            _, ss = ex.high_steady_state(model, p, n_points=args.points)
            A = 1.0
        rep = chi(ss)
        outputs.append(write_json(out / f"{label}_fragility.json", dict(
            A=A, steady_states=ss.as_dict(), n_stable=len(ss.stable),
            n_unstable=len(ss.unstable), chi=rep.as_dict(), conditions=sufficient_conditions(p))))

    elif cmd == "crisis":
        sol, _ = _solved(p, label, args, threads, out, log)
        rep = ex.crisis_experiment(sol, tfp_anchor=args.tfp_anchor, horizon=args.horizon)
        cols = {"h": rep.h}
        cols.update({k: rep.dev[k] for k in sorted(rep.dev)})
        outputs.append(write_csv(out / f"{label}_crisis_path.csv", cols))
        outputs.append(write_csv(out / f"{label}_crisis_table.csv", list(rep.table[0]), rep.table))
        outputs.append(write_json(out / f"{label}_crisis.json", dict(
            shocks=rep.shocks, ramp_depth=rep.ramp_depth, tfp_anchor=args.tfp_anchor,
            table=rep.table, series_mapping=ex.SERIES_MAPPING)))

    elif cmd == "policy":
        sol, _ = _solved(p, label, args, threads, out, log)
        tau = np.array(_floats(args.tau)) if args.tau else None
        res = ex.policy_experiment(p, tau, scale=args.scale, seed=args.tech_seed,
                                   sim_seed=args.seed, reps=args.reps, T=args.T, threads=threads,
                                   cev_scale=args.cev_scale,
                                   base=_with_econ(sol, p, args))
        outputs.append(write_csv(out / f"{stem}.csv", list(res.rows[0]), res.rows))

    elif cmd == "moments":
        econ = _econ(p, args)
        m, res = ex.steady_state_moments(econ, p)
        outputs.append(write_json(out / f"{label}_moments.json", dict(
            m.as_dict(), K=res.state.K, Y=res.state.Y, n_markets=econ.tech.n_markets)))

    runtime = out / f"{stem}.runtime.txt"
    runtime.write_text(f"wall_clock_seconds {time.perf_counter() - t0:.3f}\n"
                       f"threads {threads}\n" + "".join(f"{k} {v}\n" for k, v in log.items()))
    man = run_manifest(cmd, _key(p, args), dict(seed=args.seed, tech_seed=args.tech_seed),
                       outputs, settings, runtime)
    write_json(out / f"{stem}.manifest.json", man)
    return 0


def _with_econ(sol, p, args):
    if sol.econ is None:
        sol.econ = _econ(p, args)
    return sol


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"oligofrag: error: {exc}", file=sys.stderr)
        return 2
    except (ModelError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
