"""Potentials and the time integrals that enter the exponents.

Line integrals
    ``mu_{j,k}(x) = int_0^h Bt_j(h, z)**k V(x, t + z) dz`` with the rescaled
    Bernoulli polynomials ``Bt_j(h, z) = h**j B_j(z / h)``.
Triangle integrals
    ``Lambda[f]^{a,b}(x) = int_0^h int_0^z f(h, z, s) d_x^a V(x, t+z) d_x^b V(x, t+s) ds dz``.

Parity variants (``"e"``/``"o"``) use the even/odd part of the potential
about the step midpoint.  With a rule symmetric about ``h/2`` the parts are
obtained by pairing node ``i`` with node ``n-1-i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import mpmath
import numpy as np

from .grid import Grid, GridFunction, spectral_deriv
from .kernels import bilinear_contract, node_contract, parity_split
from .symops import Coefficient

PARITIES = ("none", "e", "o")
MAX_SPATIAL_DERIV = 8

# ---------------------------------------------------------------------------
# Bernoulli polynomials and Gauss-Legendre rules

_BERNOULLI = (
    (Fraction(1),),
    (Fraction(-1, 2), Fraction(1)),
    (Fraction(1, 6), Fraction(-1), Fraction(1)),
    (Fraction(0), Fraction(1, 2), Fraction(-3, 2), Fraction(1)),
    (Fraction(-1, 30), Fraction(0), Fraction(1), Fraction(-2), Fraction(1)),
)


def bernoulli(j: int, x):
    """Classical Bernoulli polynomial ``B_j(x)`` for ``0 <= j <= 4``."""
    if not 0 <= j < len(_BERNOULLI):
        raise ValueError(f"Bernoulli order {j} outside 0..4")
    x = np.asarray(x, dtype=float)
    coeffs = [float(c) for c in _BERNOULLI[j]]
    return np.polynomial.polynomial.polyval(x, coeffs)


def rescaled_bernoulli(j: int, h: float, z):
    return h**j * bernoulli(j, np.asarray(z) / h)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on ``[0, h]``; nodes are symmetric about ``h/2``."""

    h: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def unit_nodes(self) -> np.ndarray:
        return self.nodes / self.h

    def is_symmetric(self, tol: float = 1e-13) -> bool:
        return bool(
            np.allclose(self.nodes + self.nodes[::-1], self.h, rtol=0, atol=tol * abs(self.h))
            and np.allclose(self.weights, self.weights[::-1], rtol=tol, atol=0)
        )


@lru_cache(maxsize=None)
def _unit_gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    s = 0.5 * (1.0 + x)
    s[n // 2:] = 1.0 - s[: (n + 1) // 2][::-1]
    return s, 0.5 * w


def gl_rule(n_nodes: int, h: float) -> QuadratureRule:
    """Gauss-Legendre rule with ``n_nodes`` knots mapped to ``[0, h]``."""
    if not 1 <= n_nodes <= 64:
        raise ValueError(f"unsupported node count {n_nodes}")
    if not h > 0:
        raise ValueError("step must be positive")
    s, w = _unit_gauss_legendre(n_nodes)
    return QuadratureRule(float(h), h * s, h * w)


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Separable:
    """``V(x, t) = V_static(x) + field(t) * x``.

    ``static(a, x)`` returns the ``a``-th derivative of ``V_static``.
    """

    static: Callable
    field: Callable


class PotentialModel:
    """Real potential ``V(x, t)`` with optional exact spatial derivatives.

    Parameters
    ----------
    fn : callable
        ``fn(x, t)``, vectorised with numpy broadcasting.
    dx : callable, optional
        ``dx(a, x, t)`` giving ``d^a V / dx^a``.  Without it derivatives
        are taken spectrally, which assumes ``V`` is periodic in ``x``.
    separable : Separable, optional
        Enables the scalar fast path for the time integrals.
    dt_resolution_hint : float, optional
        Shortest time scale of the potential, informational.
    """

    def __init__(self, fn, dx=None, separable: Separable | None = None,
                 dt_resolution_hint: float | None = None, name: str = "V"):
        self.fn = fn
        self.dx = dx
        self.separable = separable
        self.dt_resolution_hint = dt_resolution_hint
        self.name = name
        if separable is not None:
            self._check_separable()

    @classmethod
    def from_separable(cls, static, field, name: str = "V", **kw) -> "PotentialModel":
        sep = Separable(static, field)

        def fn(x, t):
            return static(0, x) + field(t) * x

        def dx(a, x, t):
            out = static(a, x) + 0.0 * np.asarray(t)
            if a == 1:
                out = out + field(t)
            return out

        return cls(fn, dx=dx, separable=sep, name=name, **kw)

    def _check_separable(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-3, 3, 7)
        t = rng.uniform(0, 3, 7)
        direct = self.fn(x, t)
        split = self.separable.static(0, x) + self.separable.field(t) * x
        if not np.allclose(direct, split, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(direct)))):
            raise ValueError("separable structure does not reproduce the potential")

    def __call__(self, x, t):
        return self.fn(x, t)

    @property
    def has_analytic_dx(self) -> bool:
        return self.dx is not None

    def samples(self, grid: Grid, times, a: int = 0) -> np.ndarray:
        """``d^a V`` on the grid at each of ``times``; shape ``(len(times), N)``."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        x = grid.nodes[None, :]
        t = times[:, None]
        if a == 0:
            return np.broadcast_to(np.asarray(self.fn(x, t), float), (len(times), grid.n_points)).copy()
        if self.dx is not None:
            out = np.asarray(self.dx(a, x, t), dtype=float)
            return np.broadcast_to(out, (len(times), grid.n_points)).copy()
        base = self.samples(grid, times, 0)
        return np.stack([spectral_deriv(grid, row, a) for row in base])

    def at(self, grid: Grid, t: float) -> GridFunction:
        return GridFunction(grid, self.samples(grid, [t])[0])


# ---------------------------------------------------------------------------
# triangle kernels


@dataclass(frozen=True)
class TriangleKernel:
    """Homogeneous polynomial ``f(h, z, s)`` stored as monomials.

    Each monomial is ``(coeff, p_h, p_z, p_s)``.
    """

    name: str
    monomials: tuple

    def __post_init__(self):
        degrees = {ph + pz + ps for _, ph, pz, ps in self.monomials}
        if len(degrees) != 1:
            raise ValueError(f"kernel {self.name} is not homogeneous")

    @property
    def degree(self) -> int:
        _, ph, pz, ps = self.monomials[0]
        return ph + pz + ps

    @property
    def parity(self) -> str:
        return "even" if self.degree % 2 == 0 else "odd"

    def __call__(self, h, z, s):
        return sum(float(c) * h**ph * z**pz * s**ps for c, ph, pz, ps in self.monomials)

    def __add__(self, other: "TriangleKernel") -> "TriangleKernel":
        merged: dict = {}
        for c, *powers in self.monomials + other.monomials:
            key = tuple(powers)
            merged[key] = merged.get(key, 0) + c
        monos = tuple((c, *p) for p, c in merged.items() if c != 0)
        return TriangleKernel(f"{self.name}+{other.name}", monos)

    def triangle_integral(self, h: float = 1.0) -> float:
        return float(sum(
            Fraction(c) * Fraction(1, (ps + 1) * (pz + ps + 2))
            for c, ph, pz, ps in self.monomials
        )) * h ** (self.degree + 2)


def _k(name, *monos):
    return TriangleKernel(name, tuple((Fraction(c), ph, pz, ps) for c, ph, pz, ps in monos))


PSI = _k("psi", (1, 0, 1, 0), (-1, 0, 0, 1), (Fraction(-1, 3), 1, 0, 0))
VARPHI1 = _k("varphi1", (1, 2, 0, 0), (-4, 1, 0, 1), (2, 0, 1, 1))
VARPHI2 = _k("varphi2", (1, 2, 0, 0), (-4, 1, 1, 0), (4, 0, 2, 0), (-2, 0, 1, 1))
PHI1 = _k("phi1", (1, 2, 0, 0), (-6, 1, 1, 0), (6, 1, 0, 1), (6, 0, 1, 1),
          (3, 0, 2, 0), (-12, 0, 0, 2))
PHI2 = _k("phi2", (1, 2, 0, 0), (-6, 1, 1, 0), (6, 1, 0, 1), (-6, 0, 1, 1),
          (5, 0, 2, 0))
VARPHI1_PHI1 = VARPHI1 + PHI1
VARPHI2_PHI2 = VARPHI2 + PHI2

KERNELS = {k.name: k for k in (PSI, VARPHI1, VARPHI2, PHI1, PHI2, VARPHI1_PHI1, VARPHI2_PHI2)}


def triangle_monomial(p: int, q: int, r: int, h: float) -> float:
    """``h**r * int_0^h int_0^z z**p s**q ds dz``."""
    if min(p, q, r) < 0:
        raise ValueError("powers must be non-negative")
    return h ** (p + q + r + 2) / ((q + 1) * (p + q + 2))


def _lagrange_coeffs(nodes, prec):
    """Monomial coefficients (ascending) of the Lagrange basis, in mpmath."""
    n = len(nodes)
    basis = []
    for i in range(n):
        poly = [mpmath.mpf(1)]
        denom = mpmath.mpf(1)
        for m in range(n):
            if m == i:
                continue
            # multiply by (s - s_m)
            nxt = [mpmath.mpf(0)] * (len(poly) + 1)
            for d, c in enumerate(poly):
                nxt[d + 1] += c
                nxt[d] -= c * nodes[m]
            poly = nxt
            denom *= nodes[i] - nodes[m]
        basis.append([c / denom for c in poly])
    return basis


@lru_cache(maxsize=64)
def _unit_kernel_matrix(kernel: TriangleKernel, unit_nodes: tuple) -> np.ndarray:
    with mpmath.workdps(60):
        nodes = [mpmath.mpf(s) for s in unit_nodes]
        L = _lagrange_coeffs(nodes, 60)
        n = len(nodes)
        # M[p, q] = sum over monomials of c * int int s^(p+pz) r^(q+ps) over the unit triangle
        M = [[mpmath.mpf(0)] * n for _ in range(n)]
        for c, ph, pz, ps in kernel.monomials:
            cm = mpmath.mpf(c.numerator) / c.denominator
            for p in range(n):
                for q in range(n):
                    P, Q = p + pz, q + ps
                    M[p][q] += cm / ((Q + 1) * (P + Q + 2))
        C = np.empty((n, n))
        for i in range(n):
            Li = L[i]
            row = [mpmath.fsum(Li[p] * M[p][q] for p in range(n)) for q in range(n)]
            for j in range(n):
                C[i, j] = float(mpmath.fsum(row[q] * L[j][q] for q in range(n)))
    C.setflags(write=False)
    return C


def kernel_matrix(kernel: TriangleKernel, rule: QuadratureRule) -> np.ndarray:
    """``C_ij = int_triangle f(h, z, s) l_i(z) l_j(s)`` for the rule's Lagrange basis."""
    unit = _unit_kernel_matrix(kernel, tuple(float(s) for s in rule.unit_nodes))
    return unit * rule.h ** (kernel.degree + 2)


# ---------------------------------------------------------------------------
# line and triangle integrals


def _require_symmetric(rule: QuadratureRule, parity: str):
    if parity not in PARITIES:
        raise ValueError(f"unknown parity {parity!r}")
    if parity != "none" and not rule.is_symmetric():
        raise ValueError("parity integrals need a rule symmetric about h/2")


def mu_weights(j: int, k: int, rule: QuadratureRule) -> np.ndarray:
    if not (0 <= j <= 4 and 0 <= k <= 2):
        raise ValueError(f"mu_{{{j},{k}}} is outside the supported range")
    return rule.weights * rescaled_bernoulli(j, rule.h, rule.nodes) ** k


def _select(samples: np.ndarray, parity: str) -> np.ndarray:
    if parity == "none":
        return samples
    even, odd = parity_split(samples)
    return even if parity == "e" else odd


def eval_mu(pot: PotentialModel, grid: Grid, t: float, h: float, j: int, k: int,
            rule: QuadratureRule | None = None, parity: str = "none",
            deriv: int = 0) -> GridFunction:
    """``d_x^deriv`` of the line integral ``mu_{j,k}`` (or a parity part) over ``[t, t+h]``."""
    rule = rule or gl_rule(11, h)
    _require_symmetric(rule, parity)
    w = mu_weights(j, k, rule)
    samples = pot.samples(grid, t + rule.nodes, deriv)
    return GridFunction(grid, node_contract(w, _select(samples, parity)))


def _lambda_from_samples(C, A, B, parity):
    if parity == "none":
        return bilinear_contract(C, A, B)
    Ae, Ao = parity_split(A)
    Be, Bo = parity_split(B)
    if parity == "e":
        return bilinear_contract(C, Ae, Be) + bilinear_contract(C, Ao, Bo)
    return bilinear_contract(C, Ae, Bo) + bilinear_contract(C, Ao, Be)


def eval_lambda(pot: PotentialModel, grid: Grid, t: float, h: float,
                kernel: TriangleKernel, a: int, b: int,
                rule: QuadratureRule | None = None, parity: str = "none") -> GridFunction:
    """Triangle integral ``Lambda[kernel]^{a,b}`` over ``[t, t+h]`` via node interpolation."""
    rule = rule or gl_rule(11, h)
    _require_symmetric(rule, parity)
    if a not in (1, 2) or b not in (1, 2):
        raise ValueError("derivative orders a, b must be 1 or 2")
    C = kernel_matrix(kernel, rule)
    A = pot.samples(grid, t + rule.nodes, a)
    B = pot.samples(grid, t + rule.nodes, b)
    return GridFunction(grid, _lambda_from_samples(C, A, B, parity))


# ---------------------------------------------------------------------------
# per-step tables

# (name, j, k, parity) of the line integrals each scheme needs
MU_SPECS = {
    "mz2": (("mu00", 0, 0, "none"),),
    "mz4": (("mu00", 0, 0, "none"), ("mu11", 1, 1, "none")),
    "mz6": (
        ("mu00e", 0, 0, "e"),
        ("mu11o", 1, 1, "o"),
        ("mu12e", 1, 2, "e"),
        ("mu21e", 2, 1, "e"),
        ("mu31o", 3, 1, "o"),
    ),
}

# (name, kernel, a, b, parity)
LAMBDA_SPECS = {
    "mz2": (),
    "mz4": (),
    "mz6": (
        ("lam_psi_e", PSI, 1, 1, "e"),
        ("lam_phi12_o", VARPHI1_PHI1, 1, 2, "o"),
        ("lam_phi21_o", VARPHI2_PHI2, 2, 1, "o"),
    ),
}


@dataclass
class MuLambdaTables:
    """Line and triangle integrals for one step ``[t, t+h]``.

    ``mu[name]`` are :class:`Coefficient` objects whose exact spatial
    derivatives (up to order 4) are available through ``.d(a)``;
    ``lam[name]`` are plain arrays.
    """

    grid: Grid
    t: float
    h: float
    mu: dict = field(default_factory=dict)
    lam: dict = field(default_factory=dict)

    def __getitem__(self, name):
        if name in self.mu:
            return self.mu[name]
        return self.lam[name]

    def __contains__(self, name):
        return name in self.mu or name in self.lam


def _scalar_parts(values: np.ndarray):
    """Even/odd/plain node samples of a scalar time function."""
    return {"none": values, "e": 0.5 * (values + values[::-1]), "o": 0.5 * (values - values[::-1])}


def _static_derivs(sep: Separable, grid: Grid, upto: int):
    x = grid.nodes
    static = [np.broadcast_to(np.asarray(sep.static(a, x), float), x.shape) for a in range(upto + 1)]
    lin = [x, np.ones_like(x)] + [np.zeros_like(x)] * max(0, upto - 1)
    return static, lin[: upto + 1]


def _build_separable(tables, pot, rule, mu_specs, lam_specs):
    grid = tables.grid
    sep = pot.separable
    ones = np.ones(rule.n_nodes)
    fvals = np.asarray(sep.field(tables.t + rule.nodes), dtype=float) * ones
    parts = (_scalar_parts(ones), _scalar_parts(fvals))
    static, lin = _static_derivs(sep, grid, MAX_SPATIAL_DERIV)
    spatial = (static, lin)
    for name, j, k, parity in mu_specs:
        w = mu_weights(j, k, rule)
        s_static = float(w @ parts[0][parity])
        s_field = float(w @ parts[1][parity])
        derivs = [s_static * static[a] + s_field * lin[a] for a in range(MAX_SPATIAL_DERIV + 1)]
        tables.mu[name] = Coefficient.from_derivatives(grid, derivs, name, key=(name, id(tables)))
    for name, kernel, a, b, parity in lam_specs:
        C = kernel_matrix(kernel, rule)
        total = np.zeros(grid.n_points)
        for r in range(2):
            for q in range(2):
                A = parts[r]
                B = parts[q]
                if parity == "none":
                    s = A["none"] @ C @ B["none"]
                elif parity == "e":
                    s = A["e"] @ C @ B["e"] + A["o"] @ C @ B["o"]
                else:
                    s = A["e"] @ C @ B["o"] + A["o"] @ C @ B["e"]
                if s != 0.0:
                    total = total + s * spatial[r][a] * spatial[q][b]
        tables.lam[name] = total


def _build_generic(tables, pot, rule, mu_specs, lam_specs):
    grid = tables.grid
    times = tables.t + rule.nodes
    samples = [pot.samples(grid, times, a) for a in range(MAX_SPATIAL_DERIV + 1)]
    split = {}
    for name, j, k, parity in mu_specs:
        w = mu_weights(j, k, rule)
        derivs = []
        for a in range(MAX_SPATIAL_DERIV + 1):
            if parity == "none":
                src = samples[a]
            else:
                if a not in split:
                    split[a] = parity_split(samples[a])
                src = split[a][0] if parity == "e" else split[a][1]
            derivs.append(node_contract(w, src))
        tables.mu[name] = Coefficient.from_derivatives(grid, derivs, name, key=(name, id(tables)))
    for name, kernel, a, b, parity in lam_specs:
        C = kernel_matrix(kernel, rule)
        tables.lam[name] = _lambda_from_samples(C, samples[a], samples[b], parity)


def build_tables(pot: PotentialModel, grid: Grid, t: float, h: float, scheme: str,
                 rule: QuadratureRule | None = None, midpoint: bool = False,
                 use_separable: bool = True) -> MuLambdaTables:
    """Compute every integral ``scheme`` needs for the step ``[t, t+h]``."""
    scheme = scheme.lower()
    if scheme not in MU_SPECS:
        raise ValueError(f"unknown scheme {scheme!r}")
    tables = MuLambdaTables(grid, t, h)
    if h == 0:
        return tables
    if midpoint:
        if scheme != "mz2":
            raise ValueError("the midpoint variant exists only for mz2")
        derivs = [h * pot.samples(grid, [t + 0.5 * h], a)[0] for a in range(MAX_SPATIAL_DERIV + 1)]
        tables.mu["mu00"] = Coefficient.from_derivatives(grid, derivs, "mu00", key=("mu00", id(tables)))
        return tables
    if rule is None:
        rule = gl_rule(11, abs(h))
    if h < 0:
        # integrals over [t, t+h] with h < 0: reflect the rule onto [t+h, t]
        rule = QuadratureRule(h, rule.nodes * (h / rule.h), rule.weights * (h / rule.h))
    if scheme == "mz6" and rule.n_nodes < 3:
        raise ValueError("the sixth-order scheme needs at least three quadrature nodes")
    if pot.separable is not None and use_separable:
        _build_separable(tables, pot, rule, MU_SPECS[scheme], LAMBDA_SPECS[scheme])
    else:
        _build_generic(tables, pot, rule, MU_SPECS[scheme], LAMBDA_SPECS[scheme])
    return tables
