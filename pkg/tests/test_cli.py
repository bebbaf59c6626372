import csv
import subprocess
import sys

import pytest

from mzsplit import read_mzwf
from mzsplit.bench import checks, cli
from mzsplit.propagators import NumericalFailure

FAST = ["--preset", "double_well_chirp", "--eps", "0.05", "--grid-points", "128",
        "--t-final", "0.4"]


def test_module_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "mzsplit.bench", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    for name in ("run", "table", "converge", "reference", "verify", "dump"):
        assert name in out.stdout


def test_run_with_reference(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = cli.main(["run", *FAST, "--steps", "4", "--cache-dir", str(tmp_path / "c"),
                     "--out", str(out)])
    assert code == 0
    assert "L2 error" in capsys.readouterr().out
    row = next(csv.DictReader(out.open()))
    assert row["n_steps"] == "4" and float(row["l2_error"]) > 0


def test_table_writes_every_combination(tmp_path):
    out = tmp_path / "t.csv"
    code = cli.main(["table", *FAST, "--scheme", "mz2,mz6", "--steps", "3,6",
                     "--cache-dir", str(tmp_path), "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert [(r["scheme"], r["n_steps"]) for r in rows] == [
        ("mz2", "3"), ("mz2", "6"), ("mz6", "3"), ("mz6", "6")]


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("eps = 0.05\ngrid_points = 128\nt_final = 0.4\nsteps = 3\nscheme = mz4\n")
    assert cli.main(["run", "--config", str(cfg), "--steps", "5", "--no-reference"]) == 0
    assert "mz4 eps=0.05 M=128 N=5" in capsys.readouterr().out


def test_dump_writes_mzwf_with_snapshots(tmp_path):
    out = tmp_path / "psi.mzwf"
    code = cli.main(["dump", *FAST, "--steps", "4", "--snapshots", "2", "--out", str(out)])
    assert code == 0
    with out.open("rb") as fh:
        u, eps, t = read_mzwf(fh)
    assert (u.grid.n_points, eps, t) == (128, 0.05, 0.4)
    snaps = sorted(tmp_path.glob("psi.*.mzwf"))
    assert [p.name for p in snaps] == ["psi.0000.mzwf", "psi.0001.mzwf", "psi.0002.mzwf"]


def test_reference_subcommand(tmp_path, capsys):
    args = ["reference", *FAST, "--steps", "2", "--cache-dir", str(tmp_path)]
    assert cli.main(args) == 0
    assert cli.main(args) == 0
    assert "(cached)" in capsys.readouterr().out.splitlines()[-1]


@pytest.mark.parametrize("argv", [
    ["run", "--bogus"],
    ["frobnicate"],
    ["run", "--eps", "0"],
    ["run", "--scheme", "mz5"],
    ["run", "--config", "/nonexistent/file.cfg"],
    ["dump", *FAST],
    ["converge", "--steps", "1,2,3"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert cli.main(argv) == 1
    assert capsys.readouterr().err


def test_unwritable_output_exits_1(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert cli.main(["run", *FAST, "--steps", "2", "--no-reference",
                     "--out", str(blocker / "x.csv")]) == 1


def test_degenerate_convergence_exits_2(capsys):
    # free flight is exact for every step size, so no point lies above the floor
    code = cli.main(["converge", "--preset", "free", "--eps", "0.1", "--grid-points", "64",
                     "--steps", "2,3,5,10,20"])
    assert code == 2
    assert "degenerate" in capsys.readouterr().err


def test_verify_exit_codes(monkeypatch, capsys):
    monkeypatch.setattr(cli, "verify_checks", lambda: [checks.Check("ok", 1.0, True, "")])
    assert cli.main(["verify"]) == 0
    monkeypatch.setattr(cli, "verify_checks", lambda: [checks.Check("bad", 1.0, False, "")])
    assert cli.main(["verify"]) == 2
    assert "0/1 checks passed" in capsys.readouterr().out


def test_numerical_failure_exits_3(monkeypatch):
    def boom(*a, **k):
        raise NumericalFailure("non-finite state")
    monkeypatch.setattr(cli, "run_single", boom)
    assert cli.main(["run", *FAST, "--no-reference"]) == 3


@pytest.mark.slow
def test_full_verify_passes(capsys):
    assert cli.main(["verify"]) == 0
    assert "20/20 checks passed" in capsys.readouterr().out
