from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mzsplit import (Grid, LanczosConfig, PotentialModel, StepContext, Wavefunction, evolve,
                     l2_error, l2_norm, step)
from mzsplit.bench import checks
from mzsplit.bench.presets import free_evolution, make_problem
from mzsplit.propagators import NumericalFailure, assemble_exponents

SCHEMES = ("mz2", "mz4", "mz6")
CONVERGED = LanczosConfig(max_iters=60, mode="adaptive", adaptive_tol=1e-15)


@pytest.fixture(scope="module")
def chirp_problem():
    return make_problem("double_well_chirp", 0.05, 256)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_zero_potential_is_exact_free_flow(scheme):
    pb = make_problem("free", 0.05, 128)
    ev = evolve(pb.u0, pb.potential, 0.0, 1.0, 7, StepContext(eps=0.05, h=0.1, scheme=scheme))
    assert l2_error(ev.u, free_evolution(pb.u0, 0.05, 1.0)) < 1e-12


@pytest.mark.parametrize("scheme", SCHEMES)
def test_zero_step_is_identity(scheme, chirp_problem):
    pb = chirp_problem
    u, rep = step(pb.u0, pb.potential, 0.3, StepContext(eps=0.05, h=0.0, scheme=scheme))
    assert np.array_equal(u.values, pb.u0.values) and u is not pb.u0
    assert rep.norm_drift == 0.0


@settings(max_examples=15, deadline=None)
@given(h=st.floats(1e-3, 0.3), t=st.floats(0.0, 2.0))
def test_midpoint_free_scheme_is_linear_unitary_and_reversible(h, t):
    # MZ2 uses no Krylov step, so these hold to rounding for any h
    pb = make_problem("double_well_chirp", 0.05, 128)
    ctx = StepContext(eps=0.05, h=h, scheme="mz2")
    g = pb.grid
    v = Wavefunction(g, np.exp(1j * g.nodes) * pb.u0.values[::-1])
    su, _ = step(pb.u0, pb.potential, t, ctx)
    sv, _ = step(v, pb.potential, t, ctx)
    s_mix, _ = step(Wavefunction(g, 2 * pb.u0.values - 1j * v.values), pb.potential, t, ctx)
    np.testing.assert_allclose(s_mix.values, 2 * su.values - 1j * sv.values, atol=1e-12)
    assert abs(l2_norm(su) - l2_norm(pb.u0)) < 1e-13
    back, _ = step(su, pb.potential, t + h, replace(ctx, h=-h))
    assert l2_error(back, pb.u0) < 1e-12


@pytest.mark.parametrize("scheme", ["mz4", "mz6"])
def test_converged_steps_are_reversible_with_time_dependence(scheme, chirp_problem):
    pb = chirp_problem
    ctx = StepContext(eps=0.05, h=0.04, scheme=scheme, lanczos_w2=CONVERGED, lanczos_w3=CONVERGED)
    u1, _ = step(pb.u0, pb.potential, 0.9, ctx)
    u2, _ = step(u1, pb.potential, 0.94, replace(ctx, h=-0.04))
    assert l2_error(u2, pb.u0) < 1e-11


@pytest.mark.parametrize("scheme", SCHEMES)
def test_unitarity_on_chirp(scheme, chirp_problem):
    pb = chirp_problem
    ev = evolve(pb.u0, pb.potential, 0.0, 1.0, 40, StepContext(eps=0.05, h=0.0, scheme=scheme))
    assert ev.max_norm_drift < 1e-12


def test_higher_orders_are_more_accurate(chirp_problem):
    pb = chirp_problem
    ref = evolve(pb.u0, pb.potential, 0.0, 0.5, 400, StepContext(eps=0.05, h=0.0)).u
    errs = {s: l2_error(evolve(pb.u0, pb.potential, 0.0, 0.5, 20,
                               StepContext(eps=0.05, h=0.0, scheme=s)).u, ref) for s in SCHEMES}
    assert errs["mz6"] < errs["mz4"] < errs["mz2"]


def test_nan_potential_raises(chirp_problem):
    bad = PotentialModel(lambda x, t: np.where(x > 0, np.nan, 0.0 * x + 0.0 * t))
    u = chirp_problem.u0
    with pytest.raises(NumericalFailure):
        step(u, bad, 0.0, StepContext(eps=0.05, h=0.1, scheme="mz2"))
    with pytest.raises(FloatingPointError):
        step(u, bad, 0.0, StepContext(eps=0.05, h=0.1, scheme="mz6"))


def test_tables_on_other_grid_are_rejected(chirp_problem):
    pb = chirp_problem
    ctx = StepContext(eps=0.05, h=0.1)
    tab = ctx.tables(pb.potential, Grid(-5.0, 5.0, 256), 0.0)
    with pytest.raises(ValueError):
        step(pb.u0, pb.potential, 0.0, ctx, tables=tab)


@pytest.mark.parametrize("kw", [dict(eps=0.0), dict(eps=2.0), dict(scheme="mz8"),
                                dict(scheme="mz4", midpoint=True)])
def test_context_validation(kw):
    with pytest.raises(ValueError):
        StepContext(**{"eps": 0.1, "h": 0.1, **kw})


def test_default_lanczos_iterations_follow_step_size():
    assert StepContext(eps=0.01, h=0.05).w2_config.max_iters == 3
    assert StepContext(eps=0.01, h=0.1).w2_config.max_iters == 5
    cfg = LanczosConfig(9)
    assert StepContext(eps=0.01, h=0.1, lanczos_w2=cfg).w2_config is cfg


def test_sigma_policy_prunes_small_terms(chirp_problem):
    pb = chirp_problem
    sizes = {}
    for sigma in (None, 1.0, 0.5):
        ctx = StepContext(eps=0.05, h=0.1, sigma=sigma)
        ex = assemble_exponents(ctx.tables(pb.potential, pb.grid, 0.0), ctx)
        sizes[sigma] = len(ex.inner[-1])
    # all 17 kept; sigma = 1 drops the six O(h^5) terms; sigma = 1/2 also the d^4 mu term
    assert sizes == {None: 17, 1.0: 11, 0.5: 10}


def test_evolve_snapshots_and_callback(chirp_problem):
    pb = chirp_problem
    seen = []
    ev = evolve(pb.u0, pb.potential, 0.0, 0.6, 6, StepContext(eps=0.05, h=0.0, scheme="mz4"),
                snapshot_every=2, callback=lambda n, t, u: seen.append((n, round(t, 12))))
    assert [round(t, 12) for t, _ in ev.snapshots] == [0.0, 0.2, 0.4, 0.6]
    assert seen[-1] == (5, 0.6)
    u, reports, snaps = ev
    assert len(reports) == 6 and u is ev.u
    assert ev.wall_time > 0
    with pytest.raises(ValueError):
        evolve(pb.u0, pb.potential, 0.0, 1.0, 0, StepContext(eps=0.05, h=0.1))


@pytest.mark.slow
def test_mutated_central_term_breaks_sixth_order():
    s, _ = checks.oracle_slope("mz6", mutate=(3, 1.1))
    assert s < 6


def test_time_independent_forms_match():
    for scheme in ("mz4", "mz6"):
        assert checks.time_independent_mismatch(scheme, n_grid=128) < 1e-13
