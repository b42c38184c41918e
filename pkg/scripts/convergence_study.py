"""Numerical convergence checks.

1. Approximation chain: infidelity between the two-term interaction
   Hamiltonian and its twice time-averaged form for couplings scaled by
   ``eps``, averaged over a window of end times.
2. Integrator: fidelity of the noisy effective-level run against the RK4
   step density.

    python3 scripts/convergence_study.py --out runs/convergence
"""

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

from catqudit.dynamics import IntegratorConfig, trajectory_infidelity
from catqudit.model import NoiseParams, build_step1, step1_dispersive, table1
from catqudit.protocol import ProtocolConfig, initial_state, run


def chain(out: Path, window_ns: float, n_times: int, eps_list):
    cfg = ProtocolConfig()
    space = cfg.space
    psi0 = initial_state(3, cfg.alpha_value, 0.0, space)
    p0 = table1()
    rows = []
    for eps in eps_list:
        p = replace(p0, g1=p0.g1 * eps, g2=p0.g2 * eps)
        inf = trajectory_infidelity(psi0, build_step1(p, space), step1_dispersive(p, space), (0.0, window_ns * 1e-9), n_times)
        rows.append({"eps": eps, "mean_infidelity": inf.mean(), "final_infidelity": inf[-1]})
        print(f"eps={eps:<8g} mean infidelity {inf.mean():.4g}  at window end {inf[-1]:.4g}")
    for a, b in zip(rows, rows[1:]):
        print(f"  reduction {a['eps']:g} -> {b['eps']:g}: {a['mean_infidelity'] / b['mean_infidelity']:.3f}")
    _write(out / "approximation_chain.csv", rows)


def integrator(out: Path, spps):
    rows = []
    for spp in spps:
        cfg = ProtocolConfig(noise=NoiseParams.from_times(2.5, 10.0),
                             integrator=IntegratorConfig(steps_per_fastest_period=spp))
        res = run(cfg)
        rows.append({"steps_per_fastest_period": spp, "F": res.F, "steps": res.diagnostics["steps"],
                     "runtime_s": res.runtime})
        print(f"spp={spp:<4d} F={res.F:.8f} steps={res.diagnostics['steps']} ({res.runtime:.1f} s)")
    _write(out / "integrator.csv", rows)


def _write(path: Path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/convergence")
    ap.add_argument("--window-ns", type=float, default=10.0)
    ap.add_argument("--n-times", type=int, default=397)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 0.25, 0.125, 0.0625])
    ap.add_argument("--spp", type=int, nargs="+", default=[20, 50, 100])
    args = ap.parse_args(argv)
    out = Path(args.out)
    chain(out, args.window_ns, args.n_times, args.eps)
    integrator(out, args.spp)
    return 0


if __name__ == "__main__":
    sys.exit(main())
