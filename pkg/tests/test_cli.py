"""End-to-end command tests, run in process through main(argv).

Heavy physics lives in the acceptance suite; these pin the command surface:
exit codes (0 pass, 1 config, 2 failed check, 3 solver), report files, CSV
shapes, and the config round trip.
"""

import json
import math

import numpy as np
import pytest

from diraclab import __version__
from diraclab.cli import main

FREE = '{"variant": "scaled", "t": 0.0, "inner": {"variant": "loss_yau"}}'
LY = '{"variant": "loss_yau"}'


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0
    assert __version__ in out


def test_no_command_is_config_error(capsys):
    code, _, err = run(capsys)
    assert code == 1
    assert "usage" in err


def test_unknown_flag_is_config_error(capsys):
    code, _, err = run(capsys, "potential-info", "--no-such-flag")
    assert code == 1


def test_potential_info(tmp_path, capsys):
    out_path = tmp_path / "info.json"
    code, out, _ = run(capsys, "potential-info", "--potential", LY,
                       "--out", str(out_path))
    assert code == 0
    assert "rho" in out
    report = json.loads(out_path.read_text())
    assert report["passed"] is True
    assert report["version"] == __version__


def test_potential_inline_json_malformed(capsys):
    code, _, err = run(capsys, "potential-info", "--potential", '{"variant": bad')
    assert code == 1
    assert "malformed potential" in err


def test_potential_file_missing(capsys):
    code, _, err = run(capsys, "potential-info", "--potential", "/no/such/file.json")
    assert code == 1
    assert "cannot read potential file" in err


def test_weyl_free_exact_lattice(tmp_path, capsys):
    # smallest dual-lattice wavenumber of the L=5 box; off by even 1e-6 the
    # quasi-mode residual jumps above the free tolerance
    nu0 = 2.0 * math.pi / 10.0
    lam0 = math.sqrt(1.0 + nu0**2)
    code, out, _ = run(capsys, "weyl", "--grid-n", "16", "--box-l", "5",
                       "--potential", FREE, "--lambda0", repr(lam0),
                       "--out", str(tmp_path / "w.json"))
    assert code == 0
    assert "PASS free_residual" in out


def test_weyl_free_off_lattice_fails(tmp_path, capsys):
    nu0 = 2.0 * math.pi / 10.0
    lam0 = math.sqrt(1.0 + nu0**2) + 1e-6
    code, out, _ = run(capsys, "weyl", "--grid-n", "16", "--box-l", "5",
                       "--potential", FREE, "--lambda0", repr(lam0),
                       "--out", str(tmp_path / "w.json"))
    assert code == 2
    assert "FAIL free_residual" in out


def test_weyl_rejects_csv_format(tmp_path, capsys):
    code, _, err = run(capsys, "weyl", "--grid-n", "16", "--box-l", "5",
                       "--potential", FREE, "--lambda0", "1.5",
                       "--format", "csv", "--out", str(tmp_path / "w.csv"))
    assert code == 1
    assert "no CSV table" in err


def test_spectrum_free_supercharge(tmp_path, capsys):
    out_path = tmp_path / "spec.json"
    code, out, _ = run(capsys, "spectrum", "--grid-n", "16", "--box-l", "5",
                       "--potential", FREE, "--operator", "t_a",
                       "--target", "0", "--count", "2", "--out", str(out_path))
    assert code == 0
    report = json.loads(out_path.read_text())
    assert report["passed"] is True
    solve = report["result"]["eigensolve"]
    assert solve["kernel_dim_estimate"] == 2
    assert all(abs(e) < 1e-8 for e in solve["eigenvalues"])


def test_gap_scan_csv_table(tmp_path, capsys):
    out_path = tmp_path / "gap.json"
    code, out, _ = run(capsys, "gap-scan", "--grid-n", "16", "--box-l", "5",
                       "--potential", FREE, "--lambdas=-0.5,0,0.5",
                       "--out", str(out_path), "--format", "both")
    assert code == 0
    assert out.count("PASS proxy_at_") == 3
    rows = (tmp_path / "gap.csv").read_text().strip().splitlines()
    assert rows[0] == "lambda,proxy"
    assert len(rows) == 4
    # free gap edge sits exactly at +-m, so every proxy is exactly 1
    assert all(float(r.split(",")[1]) == 1.0 for r in rows[1:])


def test_gap_scan_endpoint_rejected(capsys):
    code, _, err = run(capsys, "gap-scan", "--grid-n", "16", "--box-l", "5",
                       "--potential", FREE, "--lambdas", "0.99")
    assert code == 1
    assert "endpoints" in err


def test_config_round_trip(tmp_path, capsys):
    cfg = {
        "command": "gap-scan",
        "grid_n": 16,
        "box_l": 5.0,
        "mass": 1.0,
        "potential": json.loads(FREE),
        "options": {"lambdas": [0.0, 0.5]},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "gap-scan", "--config", str(cfg_path),
                       "--out", str(tmp_path / "gap.json"))
    assert code == 0

    code, _, err = run(capsys, "spectrum", "--config", str(cfg_path))
    assert code == 1
    assert "is for command 'gap-scan'" in err


def test_decay_fit_analytic_mode(tmp_path, capsys):
    out_path = tmp_path / "decay.csv"
    code, out, _ = run(capsys, "decay-fit", "--potential", LY,
                       "--expect", "mode_tail",
                       "--out", str(out_path), "--format", "csv")
    assert code == 0
    assert "verdict mode_tail" in out
    assert out_path.exists()  # suffix must not be doubled to .csv.csv
    rows = out_path.read_text().strip().splitlines()
    assert rows[0] == "r,amplitude"
    assert len(rows) == 25


def test_decay_fit_wrong_expectation_fails(tmp_path, capsys):
    code, out, _ = run(capsys, "decay-fit", "--potential", LY,
                       "--expect", "resonance_tail",
                       "--out", str(tmp_path / "d.json"))
    assert code == 2
    assert "FAIL verdict" in out


def test_asymptotics_closed_form_agreement(tmp_path, capsys):
    out_path = tmp_path / "asym.json"
    code, out, _ = run(capsys, "asymptotics", "--out", str(out_path),
                       "--format", "both")
    assert code == 0
    assert "PASS sup_deviation_vs_closed_form" in out
    rows = (tmp_path / "asym.csv").read_text().strip().splitlines()
    assert rows[0] == "r,sup_deviation"
    devs = [float(r.split(",")[1]) for r in rows[1:]]
    assert devs == sorted(devs, reverse=True)


def test_gauge_small_grid_flags_coarse_residual(tmp_path, capsys):
    # n=16 resolves the gauge calculus (div, curl) but not the zero mode,
    # so the command must report the failure through exit code 2
    code, out, _ = run(capsys, "gauge", "--grid-n", "16", "--box-l", "5",
                       "--potential", LY, "--out", str(tmp_path / "g.json"))
    assert code == 2
    assert "PASS divergence_relative" in out
    assert "PASS curl_deviation" in out
    assert "FAIL gauged_grid_residual" in out


def test_verify_zero_mode_coarse_grid_fails(tmp_path, capsys):
    code, out, _ = run(capsys, "verify-zero-mode", "--grid-n", "8",
                       "--box-l", "20", "--potential", LY,
                       "--out", str(tmp_path / "v.json"))
    assert code == 2
    assert "PASS analytic_residual" in out
    report = json.loads((tmp_path / "v.json").read_text())
    assert report["passed"] is False


def test_coupling_scan_minimum_at_unit_coupling(tmp_path, capsys):
    out_path = tmp_path / "cs.json"
    code, out, _ = run(capsys, "coupling-scan", "--grid-n", "16", "--box-l", "5",
                       "--potential", LY, "--t-values", "0.5,1.0,1.5",
                       "--out", str(out_path), "--format", "both")
    assert code == 0
    assert "minimum |lambda_min|" in out
    rows = (tmp_path / "cs.csv").read_text().strip().splitlines()
    assert rows[0] == "t,lambda_min"
    lam = {float(t): float(v) for t, v in (r.split(",") for r in rows[1:])}
    assert lam[1.0] < lam[0.5] and lam[1.0] < lam[1.5]


def test_tolerance_override_flag(tmp_path, capsys):
    # loosening the norm tolerance turns the n=8 failure into a pass of
    # that clause; the grid clause keeps its own verdict
    code, out, _ = run(capsys, "verify-zero-mode", "--grid-n", "8",
                       "--box-l", "20", "--potential", LY,
                       "--tol-norm", "10", "--out", str(tmp_path / "v.json"))
    assert "PASS norm_deviation" in out


def test_unknown_tolerance_name(capsys):
    code, _, err = run(capsys, "gap-scan", "--grid-n", "16", "--box-l", "5",
                       "--potential", FREE, "--lambdas", "0",
                       "--tol-bogus", "1")
    assert code == 1
