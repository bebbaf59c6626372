import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mzsplit import Grid, PotentialModel, build_tables, gl_rule
from mzsplit.bench.presets import chirp, double_well
from mzsplit.integrals import (KERNELS, PSI, QuadratureRule, bernoulli, eval_lambda, eval_mu,
                               kernel_matrix, mu_weights, rescaled_bernoulli,
                               triangle_monomial)

GRID = Grid(0.0, 2 * np.pi, 16)


def _d_cos(a, x):
    return [np.cos(x), -np.sin(x), -np.cos(x), np.sin(x)][a % 4]


def time_profile(t):
    return mpmath.exp(mpmath.sin(t))


# V(x, t) = cos(x) exp(sin t): every integral factors into a scalar times a derivative of cos
POT = PotentialModel(lambda x, t: np.cos(x) * np.exp(np.sin(t)),
                     dx=lambda a, x, t: _d_cos(a, x) * np.exp(np.sin(t)))


def _parts(t, h, parity):
    def g(z):
        a, b = time_profile(t + z), time_profile(t + h - z)
        return {"none": a, "e": (a + b) / 2, "o": (a - b) / 2}[parity]
    return g


def test_bernoulli_polynomials():
    x = np.linspace(0, 1, 7)
    np.testing.assert_allclose(bernoulli(2, x), x**2 - x + 1 / 6, atol=1e-15)
    np.testing.assert_allclose(bernoulli(3, x), x**3 - 1.5 * x**2 + 0.5 * x, atol=1e-15)
    rule = gl_rule(8, 1.0)
    for j in range(1, 5):
        assert abs(rule.weights @ bernoulli(j, rule.nodes)) < 1e-15
    with pytest.raises(ValueError):
        bernoulli(5, x)


@given(j=st.integers(0, 4), h=st.floats(1e-3, 2.0))
def test_rescaled_bernoulli_parity(j, h):
    z = np.linspace(0, h, 9)
    sign = (-1) ** j
    np.testing.assert_allclose(rescaled_bernoulli(j, h, h - z), sign * rescaled_bernoulli(j, h, z),
                               atol=1e-13 * max(1, h**j))


@given(n=st.integers(1, 20), h=st.floats(1e-3, 3.0))
def test_gauss_legendre_exactness_and_symmetry(n, h):
    rule = gl_rule(n, h)
    assert rule.is_symmetric()
    for p in range(2 * n):
        assert abs(rule.weights @ rule.nodes**p - h ** (p + 1) / (p + 1)) <= 1e-12 * h ** (p + 1)


def test_gl_rule_validation():
    with pytest.raises(ValueError):
        gl_rule(0, 1.0)
    with pytest.raises(ValueError):
        gl_rule(3, 0.0)
    with pytest.raises(ValueError):
        mu_weights(5, 1, gl_rule(3, 1.0))


@pytest.mark.parametrize("j,k,parity", [(0, 0, "none"), (1, 1, "none"), (0, 0, "e"), (1, 1, "o"),
                                        (1, 2, "e"), (2, 1, "e"), (3, 1, "o"), (4, 1, "none")])
def test_mu_against_mpmath(j, k, parity):
    t, h = 0.4, 0.3
    g = _parts(t, h, parity)
    B = [lambda z: 1, lambda z: z - h / 2, lambda z: z**2 - h * z + h**2 / 6,
         lambda z: z**3 - 1.5 * h * z**2 + h**2 * z / 2,
         lambda z: z**4 - 2 * h * z**3 + h**2 * z**2 - h**4 / 30][j]
    scalar = float(mpmath.quad(lambda z: B(z) ** k * g(z), [0, h]))
    for deriv in (0, 1):
        got = eval_mu(POT, GRID, t, h, j, k, gl_rule(11, h), parity, deriv).values
        np.testing.assert_allclose(got, scalar * _d_cos(deriv, GRID.nodes),
                                   atol=1e-14 * max(1, abs(scalar)) + 1e-15)


@pytest.mark.parametrize("name,a,b,parity", [("psi", 1, 1, "e"), ("varphi1+phi1", 1, 2, "o"),
                                             ("varphi2+phi2", 2, 1, "o"), ("phi1", 2, 2, "none")])
def test_lambda_against_mpmath(name, a, b, parity):
    t, h = 0.1, 0.25
    kernel = KERNELS[name]
    ge = _parts(t, h, "e")
    go = _parts(t, h, "o")
    gn = _parts(t, h, "none")

    def prod(z, s):
        if parity == "none":
            return gn(z) * gn(s)
        if parity == "e":
            return ge(z) * ge(s) + go(z) * go(s)
        return ge(z) * go(s) + go(z) * ge(s)

    scalar = float(mpmath.quad(lambda z: mpmath.quad(
        lambda s: kernel(h, z, s) * prod(z, s), [0, z]), [0, h]))
    got = eval_lambda(POT, GRID, t, h, kernel, a, b, gl_rule(11, h), parity).values
    want = scalar * _d_cos(a, GRID.nodes) * _d_cos(b, GRID.nodes)
    np.testing.assert_allclose(got, want, atol=1e-13 * abs(scalar) + 1e-17)


def test_mu_parity_parts_add_up():
    t, h = 0.2, 0.4
    for j, k in ((0, 0), (1, 1), (2, 1), (3, 1)):
        parts = [eval_mu(POT, GRID, t, h, j, k, parity=p).values for p in ("none", "e", "o")]
        np.testing.assert_allclose(parts[1] + parts[2], parts[0], atol=1e-15)


def test_parity_needs_symmetric_rule():
    rule = QuadratureRule(1.0, np.array([0.1, 0.5]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        eval_mu(POT, GRID, 0.0, 1.0, 0, 0, rule, "e")


def test_kernel_homogeneity_and_triangle_integrals():
    for kernel in KERNELS.values():
        assert kernel(2.0, 1.0, 0.6) == pytest.approx(2.0 ** kernel.degree * kernel(1.0, 0.5, 0.3))
        exact = mpmath.quad(lambda z: mpmath.quad(lambda s: kernel(1.0, z, s), [0, z]), [0, 1])
        assert kernel.triangle_integral() == pytest.approx(float(exact), abs=1e-14)
    assert PSI.parity == "odd"
    assert triangle_monomial(1, 2, 0, 1.0) == pytest.approx(1 / 15)


def test_kernel_matrix_integrates_polynomials():
    # C_ij sums against node samples; exact for polynomials of degree < n in each variable
    h = 0.7
    rule = gl_rule(6, h)
    C = kernel_matrix(PSI, rule)
    z = rule.nodes
    got = (z**2) @ C @ (z**3)
    want = mpmath.quad(lambda a: mpmath.quad(lambda s: PSI(h, a, s) * a**2 * s**3, [0, a]), [0, h])
    assert got == pytest.approx(float(want), rel=1e-12)


def _separable():
    return PotentialModel.from_separable(double_well, chirp)


def test_separable_and_generic_paths_agree():
    grid = Grid(-5.0, 5.0, 64)
    pot = _separable()
    a = build_tables(pot, grid, 0.9, 0.1, "mz6", use_separable=True)
    b = build_tables(pot, grid, 0.9, 0.1, "mz6", use_separable=False)
    for name in a.mu:
        for d in range(5):
            np.testing.assert_allclose(a[name].d(d).values, b[name].d(d).values,
                                       atol=1e-12 * (1 + np.max(np.abs(b[name].d(d).values))))
    for name in a.lam:
        np.testing.assert_allclose(a[name], b[name], atol=1e-12 * (1 + np.max(np.abs(b[name]))))


def test_separable_structure_is_validated():
    with pytest.raises(ValueError):
        PotentialModel(lambda x, t: x * t**2, separable=_separable().separable)


def test_negative_step_integrates_backwards():
    grid = Grid(-5.0, 5.0, 32)
    pot = _separable()
    fwd = build_tables(pot, grid, 0.7, 0.2, "mz4")
    back = build_tables(pot, grid, 0.9, -0.2, "mz4")
    np.testing.assert_allclose(back["mu00"].values, -fwd["mu00"].values, atol=1e-13)
    # every exponent flips sign under reversal, which makes the step reversible
    np.testing.assert_allclose(back["mu11"].values, -fwd["mu11"].values, atol=1e-13)


def test_midpoint_tables_sample_once():
    grid = Grid(-5.0, 5.0, 32)
    pot = _separable()
    tab = build_tables(pot, grid, 1.0, 0.2, "mz2", midpoint=True)
    np.testing.assert_allclose(tab["mu00"].values, 0.2 * pot.samples(grid, [1.1])[0])
    with pytest.raises(ValueError):
        build_tables(pot, grid, 1.0, 0.2, "mz6", midpoint=True)
    with pytest.raises(ValueError):
        build_tables(pot, grid, 1.0, 0.2, "mz6", rule=gl_rule(2, 0.2))
