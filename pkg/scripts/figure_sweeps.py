"""Fidelity sweeps along the four protocol knobs (T, 1/kappa, x, dtau/tau).

Each sweep writes ``<out>/<name>/sweep.csv``, ``sweep.svg`` and a manifest by
calling the ``catqudit sweep`` subcommand.  Effective level by default; the
intermediate and full levels are far slower.

    python3 scripts/figure_sweeps.py --out runs/figs --jobs 4
"""

import argparse
import sys

from catqudit.cli import main as cli

SWEEPS = {
    # name: (axis, points, extra args)
    "vs_T": ("T", "1.5,2,2.5,3,4,5", ["--kappa-inv", "10"]),
    "vs_kappa_inv": ("kappa_inv", "5,10,20,50", ["--T", "2.5"]),
    "vs_x": ("x", "-0.06..0.06:7", ["--T", "2.5", "--kappa-inv", "10"]),
    "vs_dtau": ("dtau_frac", "-0.05..0.05:5", ["--T", "2.5", "--kappa-inv", "10"]),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/figures")
    ap.add_argument("--level", default="effective", choices=("effective", "intermediate", "full"))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--only", nargs="*", choices=sorted(SWEEPS), default=None)
    ap.add_argument("--gcr-series", action="store_true",
                    help="add g_cr/g_max = 0, 0.001, 0.01 series (not for the effective level)")
    args = ap.parse_args(argv)
    status = 0
    for name in args.only or SWEEPS:
        axis, points, extra = SWEEPS[name]
        cmd = ["-v", "sweep", "--axis", axis, f"--points={points}", "--level", args.level,
               "--jobs", str(args.jobs), "--out", f"{args.out}/{name}", *extra]
        if args.gcr_series:
            cmd += ["--series-axis", "g_cr", "--series", "0,0.001,0.01"]
        status = max(status, cli(cmd))
    return status


if __name__ == "__main__":
    sys.exit(main())
