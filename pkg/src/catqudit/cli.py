"""Command-line front end.

Subcommands: ``certify``, ``derive``, ``simulate``, ``sweep``.  Every run
writes its files plus ``manifest.json`` into the output directory, which
defaults to ``$CATQUDIT_OUT/<command>`` (``./catqudit_out/<command>`` when the
variable is unset).

Exit codes: 0 success, 1 failed or partial science result, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cat_algebra import CatParams, certify_quasiorthogonality, choose_parameters
from .dynamics import IntegratorConfig, write_trajectory
from .model import (GHz, MHz, NoiseParams, RunConfig, check_printed, derived_params, load_config,
                    load_preset, matched_cavity_frequency, quality_factors, us)
from .protocol import (AXES, LEVELS, RESULT_COLUMNS, ProtocolConfig, config_dict, result_row, run,
                       sweep)

log = logging.getLogger("catqudit")

EXIT_OK, EXIT_SCIENCE, EXIT_USAGE = 0, 1, 2

# CSV column holding each sweep axis's value
AXIS_COLUMNS = {"T": "T_us", "kappa_inv": "kappa_inv_us", "x": "x", "dtau_frac": "dtau_frac",
                "g_cr": "g_cr_frac"}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    argv: list
    config_path: str | None
    preset: str | None
    output_dir: str
    deterministic: bool = True
    tool_version: str = __version__
    resolved: dict | None = None

    def write(self) -> Path:
        path = Path(self.output_dir) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, default=_json_default) + "\n", encoding="utf-8")
        return path


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    return str(o)


def parse_points(text: str) -> list[float]:
    """``"5,10,20"`` or ``"a..b"`` / ``"a..b:n"`` (``n`` evenly spaced points, default 7)."""
    text = text.strip()
    if ".." in text:
        rng, _, n = text.partition(":")
        a, _, b = rng.partition("..")
        try:
            lo, hi = float(a), float(b)
            count = int(n) if n else 7
        except ValueError:
            raise UsageError(f"bad point range {text!r}") from None
        if count < 1:
            raise UsageError("point count must be >= 1")
        return [float(v) for v in np.linspace(lo, hi, count)]
    try:
        pts = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad point list {text!r}") from None
    if not pts:
        raise UsageError("empty point list")
    return pts


def _out_dir(args, command: str) -> Path:
    base = args.out or os.path.join(os.environ.get("CATQUDIT_OUT", "catqudit_out"), command)
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> RunConfig:
    if args.config:
        return load_config(args.config)
    return load_preset(args.preset)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path: Path, rows: list[dict], columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


# ---------------------------------------------------------------- certify

def cmd_certify(args) -> int:
    if args.d < 2 or args.s < 1:
        raise UsageError("need d >= 2 and s >= 1")
    base = choose_parameters(args.d, args.s)
    alpha = args.alpha if args.alpha is not None else base.alpha
    phi = args.phi if args.phi is not None else base.phi
    try:
        params = CatParams(alpha, phi, args.d, args.s)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep = certify_quasiorthogonality(params, args.threshold)
    out = _out_dir(args, "certify")
    (out / "overlaps.csv").write_text(rep.to_csv(), encoding="utf-8")
    (out / "report.txt").write_text(rep.to_text(), encoding="utf-8")
    RunManifest("certify", sys.argv[1:], None, None, str(out),
                resolved={"alpha": alpha, "phi": phi, "d": args.d, "s": args.s,
                          "threshold": args.threshold}).write()
    print(rep.to_text(), end="")
    return EXIT_OK if rep.passed else EXIT_SCIENCE


# ---------------------------------------------------------------- derive

def derive_report(rc: RunConfig, kappa_inv_us: float | None) -> list[str]:
    p = rc.params
    dp = derived_params(p)
    lines = ["[detunings / 2pi GHz]"]
    for k in ("Delta1", "Delta2", "delta", "Delta1t", "Delta1p", "Delta2t", "Delta2p", "Delta12",
              "Delta12t", "delta1", "delta1t", "delta1p", "delta2", "delta2t", "delta2p"):
        lines.append(f"{k} = {getattr(dp, k) / GHz:.6g}")
    lines.append("[shifts / 2pi MHz]")
    for k in ("lam1", "lam2", "lam", "chi", "lam1t"):
        lines.append(f"{k} = {getattr(dp, k) / MHz:.6g}")
    lines.append(f"lam1+chi = {(dp.lam1 + dp.chi) / MHz:.6g}")
    lines.append(f"mu1 = {p.mu1_eff / MHz:.6g}")
    lines.append(f"mu2 = {p.mu2_eff / MHz:.6g}")
    lines.append(f"g_max = {p.g_max / MHz:.6g}")
    lines.append("[timing / us]")
    lines.append(f"tau = {dp.tau / us:.6g}")
    lines.append(f"2tau = {2 * dp.tau / us:.6g}")
    lines.append("[validity ratios]")
    for k, v in dp.ratios.items():
        lines.append(f"{k} = {v:.4g}")
    m = matched_cavity_frequency(p)
    lines.append("[frequency matching]")
    lines.append(f"w_c1t_matched / 2pi GHz = {m.w_c1t / GHz:.6g}")
    lines.append(f"w_c1t_supplied / 2pi GHz = {p.w_c1t / GHz:.6g}")
    lines.append(f"relative_offset = {(m.w_c1t - p.w_c1t) / p.w_c1t:+.4g}")
    lines.append(f"mu1_matched / 2pi MHz = {m.mu1 / MHz:.6g}")
    lines.append(f"residual_at_supplied = {m.residual_supplied:.4g}")
    if kappa_inv_us:
        lines.append(f"[quality factors, 1/kappa = {kappa_inv_us:g} us]")
        for k, v in quality_factors(p, 1 / (kappa_inv_us * us)).items():
            lines.append(f"{k} = {v:.4g}")
    if rc.checks:
        lines.append("[printed vs recomputed / 2pi GHz]")
        for k, (pv, cv, ok) in check_printed(p, rc.checks).items():
            lines.append(f"{k}: printed {pv / GHz:.6g} computed {cv / GHz:.6g} {'ok' if ok else 'MISMATCH'}")
    return lines


def cmd_derive(args) -> int:
    rc = _load(args)
    kinv = args.kappa_inv if args.kappa_inv is not None else rc.kappa_inv_us
    lines = derive_report(rc, kinv)
    out = _out_dir(args, "derive")
    (out / "derived.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    RunManifest("derive", sys.argv[1:], args.config, None if args.config else args.preset, str(out)).write()
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------- simulate / sweep

def _protocol_config(args, rc: RunConfig) -> ProtocolConfig:
    T = args.T if args.T is not None else rc.T_us
    kinv = args.kappa_inv if args.kappa_inv is not None else rc.kappa_inv_us
    icfg = IntegratorConfig(method=args.method, max_step=args.max_step,
                            steps_per_fastest_period=args.spp)
    try:
        return ProtocolConfig(params=rc.params, noise=NoiseParams.from_times(T, kinv),
                              model_level=args.level, x=args.x, dtau_frac=args.dtau_frac,
                              g_cr_frac=args.gcr, alpha=args.alpha, n1=args.n1, n2=args.n2,
                              matching=args.matching, integrator=icfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    rc = _load(args)
    cfg = _protocol_config(args, rc)
    out = _out_dir(args, "simulate")
    manifest = RunManifest("simulate", sys.argv[1:], args.config, None if args.config else args.preset,
                           str(out), resolved=config_dict(cfg))
    manifest.write()
    try:
        res = run(cfg)
    except Exception as exc:
        (out / "diagnostics.txt").write_text(f"{type(exc).__name__}: {exc}\n", encoding="utf-8")
        _write_rows(out / "result.csv", [result_row(None, cfg, "", str(exc))], RESULT_COLUMNS)
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_SCIENCE
    _write_rows(out / "result.csv", [result_row(res, cfg, "")], RESULT_COLUMNS)
    write_trajectory(res.samples, out / "trajectory.csv")
    (out / "diagnostics.txt").write_text(
        "\n".join(f"{k} = {_fmt(v)}" for k, v in res.diagnostics.items()) + "\n", encoding="utf-8")
    print(f"F = {res.F:.6f}  leakage = {res.leakage:.3g}  runtime = {res.runtime:.1f} s"
          + ("  [FLAGGED]" if res.flagged else ""))
    return EXIT_SCIENCE if res.flagged else EXIT_OK


def plot_sweep(csv_path: str | Path, svg_path: str | Path, axis: str, series_column: str | None = None) -> None:
    """Line chart of F against ``axis_value`` from a sweep CSV, one line per series value."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "catqudit"

    with open(csv_path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(fh) if r["F"] != ""]
    groups: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        key = r[series_column] if series_column else ""
        groups.setdefault(key, []).append((float(r["axis_value"]), float(r["F"])))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key, pts in groups.items():
        pts.sort()
        xs, ys = zip(*pts)
        ax.plot(xs, ys, marker="o", label=f"{series_column} = {key}" if series_column else None)
    ax.set_xlabel(AXIS_COLUMNS.get(axis, axis))
    ax.set_ylabel("F")
    if series_column:
        ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_sweep(args) -> int:
    rc = _load(args)
    cfg = _protocol_config(args, rc)
    points = parse_points(args.points)
    series = [None]
    series_col = None
    if args.series_axis:
        if args.series_axis not in AXES:
            raise UsageError(f"unknown series axis {args.series_axis!r}")
        if not args.series:
            raise UsageError("--series-axis needs --series")
        series = parse_points(args.series)
        series_col = AXIS_COLUMNS[args.series_axis]
    out = _out_dir(args, "sweep")
    RunManifest("sweep", sys.argv[1:], args.config, None if args.config else args.preset, str(out),
                resolved={"template": config_dict(cfg), "axis": args.axis, "points": points,
                          "series_axis": args.series_axis, "series": series}).write()
    rows = []
    failed = False
    for sv in series:
        tmpl = cfg if sv is None else cfg.with_axis(args.series_axis, sv)
        for pt in sweep(tmpl, args.axis, points, jobs=args.jobs):
            pcfg = pt.result.config if pt.result is not None else tmpl
            row = result_row(pt.result, pcfg, pt.value, pt.error)
            row[AXIS_COLUMNS[args.axis]] = pt.value
            rows.append(row)
            failed |= pt.error is not None or (pt.result is not None and pt.result.flagged)
            if pt.result is not None:
                log.info("%s = %g: F = %.6f", args.axis, pt.value, pt.result.F)
            else:
                log.warning("%s = %g failed: %s", args.axis, pt.value, pt.error)
    csv_path = out / "sweep.csv"
    _write_rows(csv_path, rows, RESULT_COLUMNS)
    plot_sweep(csv_path, out / "sweep.svg", args.axis, series_col)
    for r in rows:
        print(f"{args.axis} = {_fmt(r['axis_value'])}: F = {_fmt(r['F'])} {r['error']}".rstrip())
    return EXIT_SCIENCE if failed else EXIT_OK


# ---------------------------------------------------------------- parser

def _add_config_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", default="table1", help="bundled parameter preset (default: table1)")
    g.add_argument("--config", help="key = value config file with unit suffixes")


def _add_run_args(p):
    _add_config_args(p)
    p.add_argument("--level", choices=LEVELS, default="effective")
    p.add_argument("--T", type=float, default=None, help="qutrit decoherence scale T in us (default: off)")
    p.add_argument("--kappa-inv", type=float, default=None, help="cavity lifetime 1/kappa in us (default: off)")
    p.add_argument("--x", type=float, default=0.0, help="initial Fock-weight skew (d = 3)")
    p.add_argument("--dtau-frac", type=float, default=0.0, help="timing error dtau/tau")
    p.add_argument("--gcr", type=float, default=0.0, help="crosstalk as a fraction of g_max")
    p.add_argument("--alpha", type=float, default=None, help="cat amplitude override")
    p.add_argument("--n1", type=int, default=None)
    p.add_argument("--n2", type=int, default=None)
    p.add_argument("--matching", choices=("exact", "as-printed"), default="exact")
    p.add_argument("--method", choices=("rk4", "adaptive"), default="rk4")
    p.add_argument("--spp", type=int, default=IntegratorConfig.steps_per_fastest_period,
                   help="RK4 steps per fastest period")
    p.add_argument("--max-step", type=float, default=IntegratorConfig.max_step, help="largest step in s")
    p.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="catqudit", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="check cat-state quasiorthogonality")
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--s", type=float, default=1.0)
    c.add_argument("--alpha", type=float, default=None)
    c.add_argument("--phi", type=float, default=None)
    c.add_argument("--threshold", type=float, default=4e-4)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_certify)

    d = sub.add_parser("derive", help="derived parameters of a config")
    _add_config_args(d)
    d.add_argument("--kappa-inv", type=float, default=None, help="1/kappa in us for quality factors")
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_derive)

    s = sub.add_parser("simulate", help="single protocol run")
    _add_run_args(s)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="protocol runs along one axis")
    _add_run_args(w)
    w.add_argument("--axis", choices=AXES, required=True)
    w.add_argument("--points", required=True,
                   help="'v1,v2,...' or 'a..b[:n]'; write --points=-0.06..0.06 for negative starts")
    w.add_argument("--series-axis", choices=AXES, default=None)
    w.add_argument("--series", default=None, help="values of the series axis")
    w.add_argument("--jobs", type=int, default=1)
    w.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
