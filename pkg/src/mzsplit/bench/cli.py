"""``mzbench`` command-line harness."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ..grid import write_mzwf
from ..propagators import NumericalFailure, assemble_exponents
from . import checks
from .config import (ConfigError, RunConfig, build_config, parse_int_list,
                     parse_scheme_list, read_config_file)
from .experiments import (DegenerateFitError, run_convergence, run_single, run_table,
                          write_csv)
from .presets import make_problem
from .reference import make_reference

log = logging.getLogger("mzsplit.bench")

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULT_TABLE_STEPS = "60,75,100"
DEFAULT_CONVERGE_STEPS = "4,6,10,16,25,40"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved for failed checks
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="double_well_chirp (default), double_well, smooth or free")
    p.add_argument("--scheme", help="mz2, mz4 or mz6; comma list for table")
    p.add_argument("--eps", type=float, help="semiclassical parameter")
    p.add_argument("--grid-points", type=int, dest="grid_points", help="spatial points M")
    p.add_argument("--steps", help="time steps N; comma list for table and converge")
    p.add_argument("--t-final", type=float, dest="t_final")
    p.add_argument("--gl-nodes", type=int, dest="gl_nodes")
    p.add_argument("--lanczos-w2", dest="lanczos_w2", help="iterations or 'adaptive'")
    p.add_argument("--lanczos-w3", dest="lanczos_w3", help="iterations or 'adaptive'")
    p.add_argument("--sigma", type=float, help="step size h = eps**sigma / sigma_mult")
    p.add_argument("--sigma-mult", type=float, dest="sigma_mult")
    p.add_argument("--out", help="output path (CSV, or MZWF for dump/reference)")
    p.add_argument("--cache-dir", dest="cache_dir", help="reference cache directory")
    p.add_argument("--snapshots", type=int, help="number of intermediate states to keep")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--jobs", type=int, help="worker processes for sweeps")
    p.add_argument("--verbose", "-v", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mzbench", description="Magnus-Zassenhaus splitting benchmarks")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    specs = {
        "run": "one run, measured against a cached reference",
        "table": "errors for several schemes and step counts (CSV)",
        "converge": "self-convergence study with a fitted order",
        "reference": "compute or load the fine-step reference solution",
        "verify": "run the invariant and order checks",
        "dump": "write the final (and snapshot) wavefunctions in MZWF format",
    }
    for name, text in specs.items():
        p = sub.add_parser(name, help=text, description=text)
        _common(p)
        if name == "run":
            p.add_argument("--no-reference", action="store_true", dest="no_reference",
                           help="skip the reference and error columns")
        if name == "reference":
            p.add_argument("--check-doubling", action="store_true", dest="check_doubling")
    return parser


def _settings(args) -> dict:
    """File values overridden by explicit flags."""
    values: dict = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in ("preset", "scheme", "eps", "grid_points", "steps", "t_final", "gl_nodes",
                "lanczos_w2", "lanczos_w3", "sigma", "sigma_mult", "out", "cache_dir",
                "snapshots", "jobs"):
        v = getattr(args, key, None)
        if v is not None:
            values[{"grid_points": "n_grid", "steps": "n_steps"}.get(key, key)] = v
    return values


def _config(values: dict, **defaults) -> RunConfig:
    merged = {**defaults, **values}
    for key in ("scheme", "n_steps"):
        if isinstance(merged.get(key), str) and ("," in merged[key] or " " in merged[key].strip()):
            merged[key] = merged[key].replace(",", " ").split()[0]
    return build_config(overrides=merged)


def _summary(res) -> str:
    c = res.config
    parts = [f"{c.scheme} eps={c.eps:g} M={c.n_grid} N={c.steps} h={c.h:.4g}"]
    if res.l2_error is not None:
        parts.append(f"L2 error {res.l2_error:.3e}, energy error {res.energy_error:.3e}")
    parts.append(f"norm drift {res.norm_drift:.1e}, {res.wall_seconds:.2f}s")
    return "; ".join(parts)


def _print_exponents(cfg: RunConfig) -> None:
    """Show the inner exponents of the first step."""
    pb = make_problem(cfg.preset, cfg.eps, cfg.n_grid, cfg.t_final)
    ctx = cfg.step_context()
    ex = assemble_exponents(ctx.tables(pb.potential, pb.grid, cfg.t0), ctx)
    print(f"first step [{cfg.t0:g}, {cfg.t0 + cfg.h:g}]: kinetic {ex.kinetic:.6g} * <1>_2")
    for j, S in enumerate(ex.inner, start=2):
        print(f"W{j}:")
        print(S.pretty())


def cmd_run(args, values) -> int:
    cfg = _config(values)
    if args.verbose >= 2:
        _print_exponents(cfg)
    ref = None
    if not args.no_reference:
        ref = make_reference(cfg.preset, cfg.eps, cfg.n_grid, cfg.t_final, cfg.steps,
                             cache_dir=values.get("cache_dir"), t0=cfg.t0).u.values
    res = run_single(cfg, ref)
    print(_summary(res))
    if values.get("out"):
        write_csv([res], values["out"])
    return EXIT_OK


def cmd_table(args, values) -> int:
    schemes = parse_scheme_list(values.get("scheme", values.get("schemes", "mz6")))
    steps = parse_int_list(values.get("n_steps", values.get("steps_list", DEFAULT_TABLE_STEPS)))
    cfg = _config(values)
    results = run_table(cfg, schemes, steps, cache_dir=values.get("cache_dir"),
                        jobs=int(values.get("jobs", 1)),
                        ref_factor=int(values.get("ref_factor", 50)))
    for r in results:
        print(_summary(r))
    if values.get("out"):
        write_csv(results, values["out"])
    return EXIT_OK


def cmd_converge(args, values) -> int:
    steps = parse_int_list(values.get("n_steps", values.get("steps_list", DEFAULT_CONVERGE_STEPS)))
    defaults = {"preset": "smooth", "eps": 0.05, "n_grid": 512, "t_final": 1.0}
    cfg = _config(values, **defaults)
    try:
        conv = run_convergence(cfg, steps, ref_factor=int(values.get("ref_factor", 100)),
                               jobs=int(values.get("jobs", 1)))
    except DegenerateFitError as exc:
        print(f"degenerate fit: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for r in conv.results:
        print(_summary(r))
    print(f"{cfg.scheme}: {conv.fit}")
    if values.get("out"):
        write_csv(conv.results, values["out"])
    return EXIT_OK


def cmd_reference(args, values) -> int:
    cfg = _config(values)
    ref = make_reference(cfg.preset, cfg.eps, cfg.n_grid, cfg.t_final, cfg.steps,
                         cache_dir=values.get("cache_dir"), t0=cfg.t0,
                         check_doubling=args.check_doubling)
    print(f"reference: {ref.spec.n_steps} MZ6 steps, key {ref.spec.key()}"
          + (" (cached)" if ref.from_cache else ""))
    if ref.doubling_change is not None:
        print(f"change when doubling the steps: {ref.doubling_change:.2e}")
    if values.get("out"):
        _write_wavefunction(values["out"], ref.u, cfg.eps, cfg.t_final)
    return EXIT_OK


def _write_wavefunction(path, u, eps, t):
    path = Path(path)
    try:
        with path.open("wb") as fh:
            write_mzwf(fh, u, eps, t)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def cmd_dump(args, values) -> int:
    cfg = _config(values)
    out = values.get("out")
    if not out:
        raise ConfigError("dump needs --out")
    res = run_single(cfg, None, keep_state=True)
    _write_wavefunction(out, res.u, cfg.eps, cfg.t_final)
    base = Path(out)
    for i, (t, u) in enumerate(res.snapshots):
        _write_wavefunction(base.with_name(f"{base.stem}.{i:04d}{base.suffix}"), u, cfg.eps, t)
    print(f"wrote {out}" + (f" and {len(res.snapshots)} snapshots" if res.snapshots else ""))
    return EXIT_OK


def verify_checks() -> list[checks.Check]:
    """The invariant suite with its thresholds."""
    out = []
    for n in (64, 256):
        err = max(checks.commutator_identity_errors(n).values())
        out.append(checks.Check(f"commutator identities n={n}", err, err <= 1e-9,
                                f"max relative error {err:.2e} (<= 1e-9)"))
    hs = np.geomspace(1e-3, 1e-1, 7)
    s = checks.slope(hs, checks.sbch_errors(hs))
    out.append(checks.Check("sBCH local order", s, abs(s - 5) <= 0.3, f"slope {s:.3f} (5 +- 0.3)"))
    err = checks.parity_reconstruction_error()
    out.append(checks.Check("parity reconstruction mu = mu^e + mu^o", err, err <= 1e-14,
                            f"max deviation {err:.1e}"))
    for label, got, want in checks.scaling_slopes():
        out.append(checks.Check(f"scaling of {label}", got, abs(got - want) <= 0.2,
                                f"slope {got:.3f} ({want} +- 0.2)"))
    for scheme, want, tol in (("mz4", 5, 0.3), ("mz6", 7, 0.4)):
        s, _ = checks.oracle_slope(scheme)
        out.append(checks.Check(f"{scheme} splitting vs Magnus exponential", s,
                                abs(s - want) <= tol, f"slope {s:.3f} ({want} +- {tol})"))
    for scheme in ("mz4", "mz6"):
        d = checks.unitarity_drift(scheme)
        out.append(checks.Check(f"{scheme} unitarity over 1000 steps", d, d <= 1e-11,
                                f"max drift per step {d:.1e}"))
    for scheme in ("mz4", "mz6"):
        d = checks.time_independent_mismatch(scheme)
        out.append(checks.Check(f"{scheme} static-potential exponents", d, d <= 1e-13,
                                f"max relative mismatch {d:.1e}"))
        d = checks.reversibility_defect(scheme)
        out.append(checks.Check(f"{scheme} step(-h) after step(h)", d, d <= 1e-10,
                                f"defect {d:.1e}"))
    return out


def cmd_verify(args, values) -> int:
    start = time.perf_counter()
    results = verify_checks()
    for c in results:
        print(c.line())
    failed = sum(not c.passed for c in results)
    print(f"{len(results) - failed}/{len(results)} checks passed in {time.perf_counter() - start:.1f}s")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "run": cmd_run, "table": cmd_table, "converge": cmd_converge,
    "reference": cmd_reference, "verify": cmd_verify, "dump": cmd_dump,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        values = _settings(args)
        return COMMANDS[args.command](args, values)
    except ConfigError as exc:
        print(f"mzbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"mzbench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"mzbench: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
