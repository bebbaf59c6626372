import csv
import logging

import numpy as np
import pytest

from mzsplit import Wavefunction, l2_error
from mzsplit.bench.config import (ConfigError, RunConfig, build_config, parse_int_list,
                                  parse_lanczos, parse_scheme_list, read_config_file)
from mzsplit.bench.experiments import (DegenerateFitError, ExperimentResult, fit_slope,
                                       run_convergence, run_single, run_sweep, write_csv)
from mzsplit.bench.presets import (check_resolution, chirp, double_well, free_evolution,
                                   make_problem)
from mzsplit.bench.reference import ReferenceCache, ReferenceSpec, make_reference

SMALL = dict(preset="double_well_chirp", eps=0.05, n_grid=128, t_final=0.5, n_steps=5)


# ---------------------------------------------------------------------------
# configuration

def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nscheme = mz4\ngrid-points = 256  # trailing\n\nsteps=40\n"
                    "eps = 0.05\nlanczos_w2 = adaptive\n", encoding="utf-8")
    values = read_config_file(path)
    assert values == {"scheme": "mz4", "n_grid": "256", "n_steps": "40", "eps": "0.05",
                      "lanczos_w2": "adaptive"}
    cfg = build_config(values, {"n_steps": 80, "eps": None})
    assert (cfg.scheme, cfg.n_grid, cfg.n_steps, cfg.eps) == ("mz4", 256, 80, 0.05)
    assert cfg.step_context().w2_config.mode == "adaptive"


@pytest.mark.parametrize("text", ["colour = red\n", "just words\n"])
def test_config_file_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        read_config_file(path)
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "missing.cfg")


@pytest.mark.parametrize("kw", [dict(scheme="rk4"), dict(eps=0.0), dict(n_grid=7),
                                dict(n_steps=0), dict(t_final=0.0), dict(sigma=-1.0),
                                dict(lanczos_w3="many"), dict(lanczos_w2="0")])
def test_run_config_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw)


def test_bad_value_type():
    with pytest.raises(ConfigError):
        build_config({"n_grid": "lots"})


def test_sigma_sets_step_count():
    cfg = RunConfig(eps=0.01, sigma=0.5, t_final=2.5, n_steps=3)
    assert cfg.steps == 25 and cfg.h == pytest.approx(0.1)
    assert cfg.with_(sigma_mult=2.0).steps == 50
    assert cfg.echo()["n_steps"] == 25
    assert cfg.step_context().sigma is None
    assert cfg.with_(prune=True).step_context().sigma == 0.5


def test_list_parsers():
    assert parse_int_list("60, 75 100") == [60, 75, 100]
    assert parse_scheme_list("mz2,mz6") == ["mz2", "mz6"]
    with pytest.raises(ConfigError):
        parse_int_list("6x")
    with pytest.raises(ConfigError):
        parse_scheme_list("mz3")
    assert parse_lanczos("auto") is None
    assert parse_lanczos("7").max_iters == 7


# ---------------------------------------------------------------------------
# presets

def test_chirp_and_double_well():
    assert chirp(1.0) == pytest.approx(10 * np.sin(10.0))
    assert chirp(1.0) == pytest.approx(-5.4402, abs=1e-4)
    x = np.linspace(-3, 3, 11)
    h = 1e-5
    for a in range(4):
        fd = (double_well(a, x + h) - double_well(a, x - h)) / (2 * h)
        np.testing.assert_allclose(double_well(a + 1, x), fd, rtol=1e-6, atol=1e-6)
    assert not np.any(double_well(5, x))


def test_resolution_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="mzsplit.bench.presets"):
        assert not check_resolution(1e-3, 1000)
        assert check_resolution(1e-2, 1000)
    assert len(caplog.records) == 1 and "too coarse" in caplog.records[0].message


def test_make_problem():
    pb = make_problem("double_well_chirp", 0.01, 1000)
    assert (pb.grid.x_min, pb.grid.x_max, pb.t_final) == (-5.0, 5.0, 2.5)
    assert abs(np.sum(np.abs(pb.u0.values) ** 2) * pb.grid.dx - 1) < 1e-14
    assert pb.grid.nodes[np.argmax(np.abs(pb.u0.values))] == pytest.approx(-2.5)
    assert make_problem("smooth", 0.1, 64, t_final=0.3).t_final == 0.3
    with pytest.raises(ValueError):
        make_problem("triple_well", 0.1, 64)


# ---------------------------------------------------------------------------
# references and the cache

def test_free_reference_matches_exact_solution():
    ref = make_reference("free", 0.05, 256, 1.0, 10, factor=2)
    pb = make_problem("free", 0.05, 256)
    exact = free_evolution(pb.u0, 0.05, 1.0)
    assert l2_error(ref.u, Wavefunction(ref.u.grid, exact.values)) < 1e-11
    assert ref.spec.n_steps == 20


def test_cache_round_trip_and_corruption(tmp_path, caplog):
    kw = dict(preset="double_well_chirp", eps=0.05, n_grid=64, t_final=0.2, max_steps=2,
              factor=5, cache_dir=tmp_path)
    first = make_reference(**kw)
    assert not first.from_cache
    second = make_reference(**kw)
    assert second.from_cache and np.array_equal(second.u.values, first.u.values)
    data = next(tmp_path.glob("*.mzwf"))
    raw = bytearray(data.read_bytes())
    raw[-3] ^= 0xFF
    data.write_bytes(bytes(raw))
    with caplog.at_level(logging.WARNING):
        third = make_reference(**kw)
    assert not third.from_cache and "corrupt" in caplog.text
    assert np.array_equal(third.u.values, first.u.values)
    assert make_reference(**kw).from_cache


def test_cache_keys_separate_step_counts():
    a = ReferenceSpec("free", 0.1, 64, 1.0, 100)
    assert a.key() == ReferenceSpec("free", 0.1, 64, 1.0, 100).key()
    assert a.key() != ReferenceSpec("free", 0.1, 64, 1.0, 200).key()


def test_cache_store_reports_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    ref = make_reference("free", 0.1, 16, 0.1, 1, factor=1)
    with pytest.raises(OSError, match="cannot write reference cache"):
        ReferenceCache(blocker / "sub").store(ref)


def test_doubling_check_is_recorded(tmp_path):
    ref = make_reference("free", 0.1, 32, 0.5, 2, factor=2, check_doubling=True, cache_dir=tmp_path)
    assert ref.doubling_change is not None and ref.doubling_change < 1e-12
    again = make_reference("free", 0.1, 32, 0.5, 2, factor=2, check_doubling=True, cache_dir=tmp_path)
    assert again.from_cache and again.doubling_change == ref.doubling_change


# ---------------------------------------------------------------------------
# experiments

def test_run_single_without_reference():
    res = run_single(RunConfig(**SMALL), keep_state=True)
    assert res.l2_error is None and res.energy_error is None
    assert res.norm_drift < 1e-12 and res.u is not None
    assert res.row()["n_steps"] == 5


def test_run_single_against_itself_is_exact():
    cfg = RunConfig(**SMALL)
    first = run_single(cfg, keep_state=True)
    res = run_single(cfg, first.u.values)
    assert res.l2_error == 0.0 and res.energy_error == 0.0


def test_non_finite_result_is_rejected():
    with pytest.raises(FloatingPointError):
        ExperimentResult(RunConfig(**SMALL), float("nan"), 0.0, 0.0, 0.0)


def test_sweep_is_sorted_and_independent_of_jobs(tmp_path):
    base = RunConfig(**SMALL)
    configs = [base.with_(scheme=s, n_steps=n) for s in ("mz6", "mz2") for n in (4, 2)]
    ref = run_single(base.with_(n_steps=50), keep_state=True).u.values
    serial = run_sweep(configs, ref, jobs=1)
    parallel = run_sweep(configs, ref, jobs=2)
    assert [(r.config.scheme, r.config.steps) for r in serial] == [
        ("mz2", 2), ("mz2", 4), ("mz6", 2), ("mz6", 4)]
    assert [r.l2_error for r in serial] == [r.l2_error for r in parallel]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(serial, a)
    write_csv(parallel, b)
    rows_a = list(csv.DictReader(a.open()))
    rows_b = list(csv.DictReader(b.open()))
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_seconds"} for r in rows]  # noqa: E731
    assert strip(rows_a) == strip(rows_b)
    assert float(rows_a[0]["l2_error"]) == serial[0].l2_error


def test_csv_leaves_missing_errors_blank(tmp_path):
    out = tmp_path / "deep" / "r.csv"
    write_csv([run_single(RunConfig(**SMALL))], out)
    row = next(csv.DictReader(out.open()))
    assert row["l2_error"] == "" and row["energy_error"] == "" and row["scheme"] == "mz6"


def test_fit_slope():
    hs = np.geomspace(0.01, 0.1, 6)
    fit = fit_slope(hs, 3 * hs**4)
    assert fit.slope == pytest.approx(4) and fit.used.all()
    fit = fit_slope(hs, np.where(hs < 0.02, 1e-15, hs**2), floor=1e-12)
    assert fit.slope == pytest.approx(2) and fit.used.sum() == 4
    with pytest.raises(DegenerateFitError):
        fit_slope(hs, np.full(6, 1e-15), floor=1e-12)


def test_convergence_input_checks():
    base = RunConfig(preset="smooth", eps=0.1, n_grid=32, t_final=0.2)
    with pytest.raises(ValueError, match="at least 5"):
        run_convergence(base, [1, 2, 4, 8])
    with pytest.raises(ValueError, match="decade"):
        run_convergence(base, [2, 3, 4, 5, 6])


@pytest.mark.parametrize("scheme,steps,order,tol", [
    ("mz2", [8, 12, 20, 40, 80], 2, 0.2),
    ("mz4", [4, 6, 10, 16, 40], 4, 0.3),
    ("mz6", [4, 6, 10, 16, 40], 6, 0.5),
])
def test_convergence_recovers_order(scheme, steps, order, tol):
    base = RunConfig(scheme=scheme, preset="smooth", eps=0.05, n_grid=128, t_final=1.0)
    conv = run_convergence(base, steps, ref_factor=20)
    assert abs(conv.fit.slope - order) <= tol
