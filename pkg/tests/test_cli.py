import csv
import json

import pytest

from catqudit.cli import build_parser, main, parse_points, plot_sweep, UsageError


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_parse_points():
    assert parse_points("5,10,20") == [5.0, 10.0, 20.0]
    assert parse_points("-0.06..0.06:5") == pytest.approx([-0.06, -0.03, 0.0, 0.03, 0.06])
    assert len(parse_points("0..1")) == 7
    for bad in ("", "a,b", "1..x", "0..1:0"):
        with pytest.raises(UsageError):
            parse_points(bad)


def test_certify_pass(tmp_path, capsys):
    assert main(["certify", "--d", "3", "--s", "1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    val = float(next(ln for ln in out.splitlines() if ln.startswith("max_offdiag=")).split("=")[1])
    assert val == pytest.approx(6.5e-6, rel=0.01)
    assert len(read_csv(tmp_path / "overlaps.csv")) == 3
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "certify" and man["deterministic"] is True


def test_certify_fail_and_d2(tmp_path):
    assert main(["certify", "--d", "3", "--alpha", "2.108", "--phi", "1.0472", "--out", str(tmp_path)]) == 1
    assert main(["certify", "--d", "2", "--s", "1", "--out", str(tmp_path)]) == 0


def test_certify_usage_errors(tmp_path):
    assert main(["certify", "--d", "1", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["certify"])
    assert exc.value.code == 2


def test_derive_table1(tmp_path, capsys):
    assert main(["derive", "--preset", "table1", "--kappa-inv", "10", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "derived.txt").read_text()
    vals = dict(ln.split(" = ", 1) for ln in text.splitlines() if " = " in ln)
    assert float(vals["2tau"]) == pytest.approx(0.69, abs=0.01)
    assert float(vals["delta"]) == pytest.approx(1.0)
    assert float(vals["Q2t"]) == pytest.approx(2.51e5, rel=0.01)
    assert "MISMATCH" not in text


def test_derive_inconsistent_config(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("w_fg = 12 GHz\nw_fe = 7 GHz\nw_eg = 4 GHz\nw_c1 = 15 GHz\nw_c2 = 9 GHz\n"
                   "w_c1t = 9.96 GHz\nw_c2t = 4 GHz\ng1 = 236 MHz\ng2 = 223 MHz\n")
    assert main(["derive", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert main(["derive", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2
    assert main(["derive", "--preset", "nope", "--out", str(tmp_path)]) == 2


def test_simulate_effective(tmp_path, capsys):
    assert main(["simulate", "--level", "effective", "--out", str(tmp_path)]) == 0
    row, = read_csv(tmp_path / "result.csv")
    assert float(row["F"]) > 1 - 1e-6
    traj = read_csv(tmp_path / "trajectory.csv")
    assert float(traj[-1]["fidelity_to_target"]) == pytest.approx(float(row["F"]), abs=1e-9)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["resolved"]["model_level"] == "effective"
    assert (tmp_path / "diagnostics.txt").exists()


def test_simulate_bad_args(tmp_path):
    assert main(["simulate", "--x", "0.7", "--out", str(tmp_path)]) == 2


def test_out_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CATQUDIT_OUT", str(tmp_path))
    assert main(["certify", "--d", "2"]) == 0
    assert (tmp_path / "certify" / "manifest.json").exists()


def test_sweep_with_series(tmp_path):
    rc = main(["sweep", "--axis", "x", "--points=-0.04,0,0.04", "--alpha", "1.5", "--n2", "22",
               "--series-axis", "dtau_frac", "--series", "0,0.01", "--out", str(tmp_path)])
    assert rc == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 6
    assert {r["dtau_frac"] for r in rows} == {"0.0", "0.01"}
    assert (tmp_path / "sweep.svg").read_text().lstrip().startswith("<?xml")


def test_sweep_failed_row_exit_code(tmp_path):
    rc = main(["sweep", "--axis", "x", "--points", "0,0.9", "--alpha", "1.5", "--n2", "22",
               "--out", str(tmp_path)])
    assert rc == 1
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0]["error"] == "" and rows[1]["error"]


def test_plot_regenerates_from_csv(tmp_path):
    csv_path = tmp_path / "s.csv"
    csv_path.write_text("axis_value,F,g_cr_frac\n0,0.9,0\n1,0.8,0\n0,0.85,0.01\n1,0.75,0.01\n")
    plot_sweep(csv_path, tmp_path / "a.svg", "T", "g_cr_frac")
    plot_sweep(csv_path, tmp_path / "b.svg", "T", "g_cr_frac")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_parser_lists_subcommands():
    help_text = build_parser().format_help()
    for cmd in ("certify", "derive", "simulate", "sweep"):
        assert cmd in help_text
