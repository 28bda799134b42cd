"""Run the quantitative experiments for the three calibrations through the CLI.

    python scripts/run_experiments.py --scale desk --out results/desk

Each subcommand writes its CSV/JSON plus a manifest into ``--out``; the
solved economy is cached there and reused across subcommands.
"""

import argparse
import sys

from oligofrag.cli import main

PRESETS = ("y1975", "y1990", "y2007")
STEPS = (("solve-grid",), ("moments",), ("fragility",), ("ergodic",), ("recessions",),
         ("irf", "--shock", "small"), ("irf", "--shock", "large"), ("crisis",), ("policy",))


def run(scale, out, presets, seed, threads, only):
    failed = []
    for nm in presets:
        for step in STEPS:
            if only and step[0] not in only:
                continue
            argv = [*step, "--preset", nm, "--scale", scale, "--seed", str(seed), "--out", out]
            if threads:
                argv += ["--threads", str(threads)]
            print(">>", " ".join(argv), flush=True)
            if main(argv) != 0:
                failed.append((nm, step[0]))
    main(["fragility", "--preset", "toy", "--out", out])
    return failed


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", default="desk", choices=("smoke", "desk", "full"))
    ap.add_argument("--out", default="results")
    ap.add_argument("--presets", default=",".join(PRESETS))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--only", default="", help="comma-separated subcommands to run")
    a = ap.parse_args()
    bad = run(a.scale, a.out, a.presets.split(","), a.seed, a.threads,
              [s for s in a.only.split(",") if s])
    if bad:
        print("failed:", bad, file=sys.stderr)
    sys.exit(1 if bad else 0)
