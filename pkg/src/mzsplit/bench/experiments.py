"""Error and cost measurement, sweeps, tables and convergence fits."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..grid import Wavefunction, l2_error, l2_norm, total_energy
from ..propagators import evolve
from .config import RunConfig
from .presets import make_problem
from .reference import make_reference

log = logging.getLogger(__name__)

CSV_COLUMNS = ("scheme", "eps", "n_grid", "n_steps", "h", "gl_nodes",
               "l2_error", "energy_error", "norm_drift", "wall_seconds")


class DegenerateFitError(ValueError):
    """Fewer than three usable points remain for a slope fit."""


@dataclass
class ExperimentResult:
    config: RunConfig
    l2_error: float | None
    energy_error: float | None
    norm_drift: float
    wall_seconds: float
    u: Wavefunction | None = field(default=None, repr=False)
    snapshots: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        for name in ("l2_error", "energy_error", "norm_drift", "wall_seconds"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise FloatingPointError(f"{name} is not finite for {self.config}")

    def row(self) -> dict:
        c = self.config
        return {
            "scheme": c.scheme, "eps": c.eps, "n_grid": c.n_grid, "n_steps": c.steps,
            "h": c.h, "gl_nodes": c.gl_nodes, "l2_error": self.l2_error,
            "energy_error": self.energy_error, "norm_drift": self.norm_drift,
            "wall_seconds": self.wall_seconds,
        }

    def sort_key(self):
        c = self.config
        return (c.scheme, c.eps, c.n_grid, c.steps, c.gl_nodes)


def run_single(cfg: RunConfig, ref_values: np.ndarray | None = None,
               keep_state: bool = False) -> ExperimentResult:
    """Run one configuration and measure it against ``ref_values`` (if any).

    Wall time covers the stepping loop only.  The energy error compares the
    total energy of both states under ``V(., t_final)``.
    """
    pb = make_problem(cfg.preset, cfg.eps, cfg.n_grid, cfg.t_final)
    ctx = cfg.step_context()
    n = cfg.steps
    every = max(1, n // cfg.snapshots) if cfg.snapshots else 0
    start = time.perf_counter()
    ev = evolve(pb.u0, pb.potential, cfg.t0, cfg.t_final, n, ctx, snapshot_every=every)
    wall = time.perf_counter() - start
    u = ev.u
    drift = abs(l2_norm(u) - l2_norm(pb.u0))
    err = en_err = None
    if ref_values is not None:
        ref = Wavefunction(pb.grid, ref_values)
        V = pb.potential.at(pb.grid, cfg.t_final)
        err = float(l2_error(u, ref))
        en_err = float(abs(total_energy(u, V, cfg.eps) - total_energy(ref, V, cfg.eps)))
    return ExperimentResult(cfg, err, en_err, drift, wall,
                            u if keep_state else None, ev.snapshots if keep_state else [])


def _run_point(args):
    cfg, ref_values = args
    return run_single(cfg, ref_values)


def run_sweep(configs: list[RunConfig], ref_values: np.ndarray | None, jobs: int = 1) -> list[ExperimentResult]:
    """Run independent points, in a process pool when ``jobs > 1``; rows come back sorted."""
    work = [(c, ref_values) for c in configs]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, work))
    else:
        results = [_run_point(w) for w in work]
    return sorted(results, key=ExperimentResult.sort_key)


def write_csv(results: list[ExperimentResult], path) -> None:
    path = Path(path)
    try:
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            w.writeheader()
            for r in results:
                w.writerow({k: "" if v is None else repr(v) if isinstance(v, float) else v
                            for k, v in r.row().items()})
    except OSError as exc:
        raise OSError(f"cannot write CSV {path}: {exc}") from exc


def run_table(base: RunConfig, schemes: list[str], steps_list: list[int], cache_dir=None,
              jobs: int = 1, ref_factor: int = 50) -> list[ExperimentResult]:
    """Errors of every scheme and step count against one cached MZ6 reference."""
    ref = make_reference(base.preset, base.eps, base.n_grid, base.t_final, max(steps_list),
                         cache_dir=cache_dir, factor=ref_factor, t0=base.t0)
    configs = [base.with_(scheme=s, n_steps=n, sigma=None) for s in schemes for n in steps_list]
    return run_sweep(configs, ref.u.values, jobs)


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    used: np.ndarray

    def __str__(self) -> str:
        return f"slope {self.slope:.3f} over {int(self.used.sum())} points"


def fit_slope(hs, errors, floor: float = 0.0) -> SlopeFit:
    """Least-squares slope of ``log(error)`` against ``log(h)`` over the points above ``floor``."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    used = np.isfinite(errors) & (errors > floor) & (errors > 0)
    if used.sum() < 3:
        raise DegenerateFitError(
            f"only {int(used.sum())} of {len(hs)} points lie above the saturation level {floor:.1e}")
    slope, intercept = np.polyfit(np.log(hs[used]), np.log(errors[used]), 1)
    return SlopeFit(float(slope), float(intercept), used)


@dataclass
class Convergence:
    results: list[ExperimentResult]
    fit: SlopeFit
    ref_tol: float


def run_convergence(base: RunConfig, steps_list: list[int], ref_factor: int = 100,
                    ref_tol: float = 1e-13, jobs: int = 1) -> Convergence:
    """Self-convergence of ``base.scheme``: the reference uses the same scheme at ``h / ref_factor``.

    Points whose error is below ``10 * ref_tol`` count as saturated and are
    left out of the fit.
    """
    steps_list = sorted(set(int(n) for n in steps_list))
    if len(steps_list) < 5:
        raise ValueError("a convergence study needs at least 5 step sizes")
    if steps_list[-1] / steps_list[0] < 10 - 1e-9:
        raise ValueError("the step sizes must span at least one decade")
    pb = make_problem(base.preset, base.eps, base.n_grid, base.t_final)
    n_ref = ref_factor * steps_list[-1]
    ref = evolve(pb.u0, pb.potential, base.t0, base.t_final, n_ref,
                 base.with_(n_steps=n_ref, sigma=None).step_context()).u
    configs = [base.with_(n_steps=n, sigma=None) for n in steps_list]
    results = run_sweep(configs, ref.values, jobs)
    results.sort(key=lambda r: r.config.h)
    fit = fit_slope([r.config.h for r in results], [r.l2_error for r in results], 10 * ref_tol)
    return Convergence(results, fit, ref_tol)
