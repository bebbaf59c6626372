import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mzsplit import (Grid, GridFunction, GridMismatchError, Wavefunction, deriv, energy,
                     exp_circulant, exp_diag, l2_error, l2_norm, read_mzwf, total_energy,
                     write_mzwf)
from mzsplit.grid import apply_grouped, spectral_deriv


def gaussian(grid, delta, x0=0.0):
    x = grid.nodes
    return Wavefunction(grid, (delta * np.pi) ** -0.25 * np.exp(-((x - x0) ** 2) / (2 * delta)))


@pytest.mark.parametrize("n", [3, 2, 7, 0])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, n)


def test_grid_rejects_empty_interval():
    with pytest.raises(ValueError):
        Grid(1.0, 1.0, 8)


def test_nodes_and_spacing():
    g = Grid(-1.0, 3.0, 8)
    assert g.dx == 0.5
    np.testing.assert_allclose(g.nodes, -1.0 + 0.5 * np.arange(8))
    assert g.frequencies[4] == 4


@given(m=st.integers(0, 15), k=st.integers(0, 6))
def test_derivative_of_resolved_mode_is_exact(m, k):
    g = Grid(0.0, 2 * np.pi, 32)
    u = np.exp(1j * m * g.nodes)
    want = (1j * m) ** k * u
    got = spectral_deriv(g, u, k)
    np.testing.assert_allclose(got, want, atol=1e-11 * max(1, m**k))


def test_real_input_gives_real_derivative():
    g = Grid(0.0, 2 * np.pi, 16)
    out = deriv(np.sin(g.nodes), 1, g)
    assert not np.iscomplexobj(out)
    np.testing.assert_allclose(out, np.cos(g.nodes), atol=1e-13)


def test_deriv_order_limits():
    g = Grid(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        spectral_deriv(g, np.zeros(8), 9)
    with pytest.raises(ValueError):
        g.symbol(-1)


@given(seed=st.integers(0, 2**32 - 1))
def test_odd_symbols_are_skew_adjoint(seed):
    g = Grid(0.0, 1.0, 16)
    rng = np.random.default_rng(seed)
    v, w = rng.normal(size=(2, 16)) + 1j * rng.normal(size=(2, 16))
    for k in (1, 3):
        lhs = np.vdot(v, spectral_deriv(g, w, k))
        rhs = -np.vdot(spectral_deriv(g, v, k), w)
        assert abs(lhs - rhs) < 1e-9 * (1 + abs(lhs))


def test_functions_on_distinct_grids_do_not_mix():
    a, b = Grid(0.0, 1.0, 8), Grid(0.0, 1.0, 8)
    u = Wavefunction(a, np.ones(8))
    v = Wavefunction(b, np.ones(8))
    with pytest.raises(GridMismatchError):
        l2_error(u, v)
    with pytest.raises(GridMismatchError):
        Wavefunction(a, np.ones(6))


def test_normalize_and_norm():
    g = Grid(-8.0, 8.0, 128)
    u = Wavefunction(g, np.exp(-g.nodes**2)).normalize()
    assert abs(l2_norm(u) - 1) < 1e-14
    assert l2_error(u, u) == 0.0


def test_gaussian_energy_matches_closed_form():
    # psi = (delta pi)^(-1/4) exp(-x^2 / (2 delta)): <|psi'|^2> = 1/(2 delta), <x^2> = delta/2
    g = Grid(-12.0, 12.0, 256)
    delta, eps = 0.7, 0.3
    u = gaussian(g, delta)
    V = GridFunction(g, g.nodes**2)
    want = eps / (2 * delta) + delta / (2 * eps)
    assert abs(energy(u, V, eps) - want) < 1e-12
    assert abs(total_energy(u, V, eps) - eps * want) < 1e-12
    assert abs(energy(gaussian(g, 1.0), GridFunction(g, 0 * g.nodes), 1.0) - 0.5) < 1e-12


def test_exp_circulant_is_free_flow():
    g = Grid(0.0, 2 * np.pi, 32)
    u = Wavefunction(g, np.exp(3j * g.nodes))
    out = exp_circulant(0.1j, 2, u)
    np.testing.assert_allclose(out.values, np.exp(-0.9j) * u.values, atol=1e-13)
    with pytest.raises(ValueError):
        exp_circulant(0.1j, 1, u)


def test_exp_diag_requires_real_coefficient():
    g = Grid(0.0, 1.0, 8)
    u = Wavefunction(g, np.ones(8))
    out = exp_diag(GridFunction(g, g.nodes), -1j, u)
    np.testing.assert_allclose(out.values, np.exp(-1j * g.nodes))
    with pytest.raises(ValueError):
        exp_diag(GridFunction(g, 1j * g.nodes + 1), 1.0, u)


def test_apply_grouped_matches_naive_sum():
    g = Grid(0.0, 2 * np.pi, 32)
    rng = np.random.default_rng(4)
    v = rng.normal(size=32) + 1j * rng.normal(size=32)
    diag = np.cos(g.nodes)
    groups = {1: np.sin(g.nodes) + 0j, 2: 1j * np.cos(2 * g.nodes), 4: 0.1 + 0j * g.nodes}
    want = diag * v
    for k, c in groups.items():
        want = want + 0.5 * (c * spectral_deriv(g, v, k) + spectral_deriv(g, c * v, k))
    np.testing.assert_allclose(apply_grouped(g, diag, groups, v), want, atol=1e-11)


@settings(max_examples=30)
@given(n_half=st.integers(2, 40), seed=st.integers(0, 2**32 - 1),
       eps=st.floats(1e-4, 1.0), t=st.floats(-10, 10))
def test_mzwf_round_trip(n_half, seed, eps, t):
    g = Grid(-2.5, 4.0, 2 * n_half)
    rng = np.random.default_rng(seed)
    u = Wavefunction(g, rng.normal(size=g.n_points) + 1j * rng.normal(size=g.n_points))
    buf = io.BytesIO()
    write_mzwf(buf, u, eps, t)
    raw = buf.getvalue()
    assert len(raw) == 48 + 16 * g.n_points
    v, eps2, t2 = read_mzwf(io.BytesIO(raw))
    assert (eps2, t2) == (eps, t)
    assert (v.grid.x_min, v.grid.x_max, v.grid.n_points) == (g.x_min, g.x_max, g.n_points)
    assert np.array_equal(v.values, u.values)


def test_mzwf_layout_is_little_endian():
    g = Grid(0.0, 1.0, 4)
    u = Wavefunction(g, np.array([1 + 2j, 3, 4j, -1]))
    buf = io.BytesIO()
    write_mzwf(buf, u, 0.01, 2.5)
    raw = buf.getvalue()
    assert struct.unpack("<4sIQdddd", raw[:48]) == (b"MZWF", 1, 4, 0.01, 2.5, 0.0, 1.0)
    assert struct.unpack("<2d", raw[48:64]) == (1.0, 2.0)


@pytest.mark.parametrize("mangle", [
    lambda raw: b"XXXX" + raw[4:],
    lambda raw: raw[:20],
    lambda raw: raw[:-8],
    lambda raw: raw[:4] + struct.pack("<I", 9) + raw[8:],
])
def test_mzwf_rejects_damaged_input(mangle):
    g = Grid(0.0, 1.0, 4)
    buf = io.BytesIO()
    write_mzwf(buf, Wavefunction(g, np.ones(4)), 0.1, 0.0)
    with pytest.raises(ValueError):
        read_mzwf(io.BytesIO(mangle(buf.getvalue())))
