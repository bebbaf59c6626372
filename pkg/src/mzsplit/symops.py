"""Linear combinations of symmetrised differential operators.

``<f>_k = (f d^k + d^k f) / 2`` discretises to ``(D_f K_k + K_k D_f) / 2``,
which is Hermitian for even ``k`` and skew-Hermitian for odd ``k`` when
``f`` is real.  Commutators of two such operators are simplified with a
fixed table of closed-form rules; anything outside the table is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import Grid, GridMismatchError, Wavefunction, apply_grouped, spectral_deriv

MAX_ORDER = 6

DerivProvider = Callable[[int], np.ndarray]


class RuleNotInTableError(ValueError):
    """A commutator was requested for an order pair without a closed form."""


class Coefficient:
    """Real coefficient function ``f`` sampled on a grid.

    ``provider(a)`` optionally returns the exact ``a``-th derivative samples;
    without it derivatives fall back to spectral differentiation, which is
    only appropriate for periodic functions.
    """

    __slots__ = ("grid", "values", "label", "provider", "_key", "_cache")

    def __init__(self, grid: Grid, values, label: str = "f",
                 provider: DerivProvider | None = None, key=None):
        values = np.asarray(grid.check(values))
        if np.iscomplexobj(values):
            if np.any(values.imag):
                raise ValueError(f"coefficient {label!r} must be real")
            values = values.real
        self.grid = grid
        self.values = np.asarray(values, dtype=np.float64)
        self.label = label
        self.provider = provider
        self._key = key
        self._cache: dict[int, Coefficient] = {}

    @classmethod
    def constant(cls, grid: Grid, value: float = 1.0) -> "Coefficient":
        def provider(a, _v=float(value)):
            return np.full(grid.n_points, _v if a == 0 else 0.0)

        label = f"{value:g}"
        return cls(grid, provider(0), label, provider, key=("const", float(value)))

    @classmethod
    def from_derivatives(cls, grid: Grid, derivs: Sequence[np.ndarray], label: str,
                         key=None) -> "Coefficient":
        """Coefficient whose derivatives are the given arrays (zero beyond them)."""
        derivs = [np.asarray(d, dtype=np.float64) for d in derivs]

        def provider(a):
            if a < len(derivs):
                return derivs[a]
            raise ValueError(f"derivative {a} of {label!r} not available")

        return cls(grid, derivs[0], label, provider, key=key)

    @property
    def analytic(self) -> bool:
        return self.provider is not None

    @property
    def key(self):
        if self._key is not None:
            return self._key
        return ("samples", self.values.tobytes())

    def d(self, a: int = 1) -> "Coefficient":
        """The ``a``-th derivative, exact when a provider exists."""
        if a == 0:
            return self
        hit = self._cache.get(a)
        if hit is not None:
            return hit
        label = f"d{a}({self.label})" if a > 1 else f"d({self.label})"
        if self.provider is not None:
            base = self.provider
            key = None if self._key is None else ("d", a, self._key)
            out = Coefficient(self.grid, base(a), label,
                              lambda b, _a=a: base(b + _a), key=key)
        else:
            out = Coefficient(self.grid, spectral_deriv(self.grid, self.values, a), label)
        self._cache[a] = out
        return out

    def _check(self, other: "Coefficient"):
        if other.grid is not self.grid:
            raise GridMismatchError("coefficients live on different grids")

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            other_c = float(other)
            prov = None
            if self.provider is not None:
                base = self.provider
                prov = lambda a: other_c * base(a)  # noqa: E731
            return Coefficient(self.grid, other_c * self.values,
                               f"{other_c:g}*{self.label}", prov)
        self._check(other)
        prov = None
        if self.provider is not None and other.provider is not None:
            pf, pg = self.provider, other.provider

            def prov(a):
                return sum(comb(a, i) * pf(i) * pg(a - i) for i in range(a + 1))

        return Coefficient(self.grid, self.values * other.values,
                           f"{self.label}*{other.label}", prov)

    __rmul__ = __mul__

    def _combine(self, other, sign):
        self._check(other)
        prov = None
        if self.provider is not None and other.provider is not None:
            pf, pg = self.provider, other.provider
            prov = lambda a: pf(a) + sign * pg(a)  # noqa: E731
        op = "+" if sign > 0 else "-"
        return Coefficient(self.grid, self.values + sign * other.values,
                           f"({self.label}{op}{other.label})", prov)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"Coefficient({self.label!r}, analytic={self.analytic})"


@dataclass(frozen=True)
class SizeTag:
    """Magnitude ``O(h**h_power * eps**eps_power)`` of a term."""

    eps_power: Fraction
    h_power: Fraction

    def at_sigma(self, sigma) -> Fraction:
        """Exponent of eps once ``h = O(eps**sigma)`` is substituted."""
        return self.eps_power + Fraction(sigma) * self.h_power


@dataclass(frozen=True)
class SymTerm:
    """``coeff * <f>_k``."""

    coeff: complex
    f: Coefficient
    k: int

    def __post_init__(self):
        if not 0 <= self.k <= MAX_ORDER:
            raise ValueError(f"order {self.k} outside 0..{MAX_ORDER}")


@dataclass
class SymOpSum:
    """Ordered linear combination of :class:`SymTerm`."""

    terms: list[SymTerm] = field(default_factory=list)

    @classmethod
    def of(cls, *terms: SymTerm) -> "SymOpSum":
        return cls(list(terms))

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    @property
    def grid(self) -> Grid | None:
        return self.terms[0].f.grid if self.terms else None

    def __add__(self, other: "SymOpSum") -> "SymOpSum":
        return SymOpSum(self.terms + list(other.terms))

    def __sub__(self, other: "SymOpSum") -> "SymOpSum":
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar: complex) -> "SymOpSum":
        return SymOpSum([SymTerm(scalar * t.coeff, t.f, t.k) for t in self.terms])

    __rmul__ = __mul__

    def collect(self) -> "SymOpSum":
        """Merge terms sharing ``(k, f)`` identity and drop zero coefficients."""
        merged: dict = {}
        order = []
        for t in self.terms:
            key = (t.k, t.f.key)
            if key in merged:
                c, f = merged[key]
                merged[key] = (c + t.coeff, f)
            else:
                merged[key] = (t.coeff, t.f)
                order.append(key)
        out = []
        for key in order:
            c, f = merged[key]
            if c != 0:
                out.append(SymTerm(c, f, key[0]))
        return SymOpSum(out)

    def grouped(self) -> tuple[np.ndarray | None, dict[int, np.ndarray]]:
        """Combined complex samples per order: ``(g_0, {k: g_k})``."""
        g0 = None
        groups: dict[int, np.ndarray] = {}
        for t in self.terms:
            contrib = t.coeff * t.f.values
            if t.k == 0:
                g0 = contrib if g0 is None else g0 + contrib
            else:
                groups[t.k] = contrib if t.k not in groups else groups[t.k] + contrib
        return g0, groups

    def matvec(self, grid: Grid | None = None) -> "SymOpMatvec":
        grid = grid or self.grid
        if grid is None:
            raise ValueError("empty operator needs an explicit grid")
        for t in self.terms:
            if t.f.grid is not grid:
                raise GridMismatchError("term sampled on a different grid")
        return SymOpMatvec(grid, *self.grouped())

    def pretty(self) -> str:
        lines = []
        for t in self.terms:
            c = complex(t.coeff)
            lines.append(f"({c.real:+.6g}{c.imag:+.6g}j) * <{t.f.label}>_{t.k}")
        return "\n".join(lines) if lines else "0"


class SymOpMatvec:
    """Precomputed ``v -> S v`` for a fixed :class:`SymOpSum`."""

    def __init__(self, grid: Grid, g0, groups):
        self.grid = grid
        self.g0 = g0
        self.groups = groups

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return apply_grouped(self.grid, self.g0, self.groups, v)


def apply_symop(S: SymOpSum, u: Wavefunction) -> Wavefunction:
    """Apply ``S`` to ``u`` using four (batched) FFT calls."""
    return Wavefunction(u.grid, S.matvec(u.grid)(u.values))


# ---------------------------------------------------------------------------
# commutator rules: [<f>_a, <g>_b] for (a, b) in the table below


def _rule_10(f, g):
    return [(1.0, f * g.d(1), 0)]


def _rule_11(f, g):
    return [(1.0, f * g.d(1) - f.d(1) * g, 1)]


def _rule_20(f, g):
    return [(2.0, f * g.d(1), 1)]


def _rule_21(f, g):
    return [
        (1.0, 2.0 * (f * g.d(1)) - f.d(1) * g, 2),
        (-0.5, 2.0 * (f.d(1) * g.d(2)) + f * g.d(3), 0),
    ]


def _rule_22(f, g):
    return [
        (2.0, f * g.d(1) - f.d(1) * g, 3),
        (1.0, 2.0 * (f.d(2) * g.d(1)) - 2.0 * (f.d(1) * g.d(2))
         + f.d(3) * g - f * g.d(3), 1),
    ]


def _rule_30(f, g):
    return [
        (3.0, f * g.d(1), 2),
        (-0.5, 3.0 * (f.d(1) * g.d(2)) + f * g.d(3), 0),
    ]


def _rule_40(f, g):
    return [
        (4.0, f * g.d(1), 3),
        (-2.0, 3.0 * (f.d(1) * g.d(2)) + f * g.d(3), 1),
    ]


RULES = {
    (1, 0): _rule_10,
    (1, 1): _rule_11,
    (2, 0): _rule_20,
    (2, 1): _rule_21,
    (2, 2): _rule_22,
    (3, 0): _rule_30,
    (4, 0): _rule_40,
}


def bracket(A: SymTerm, B: SymTerm) -> SymOpSum:
    """Closed-form commutator ``[A, B]``."""
    if A.f.grid is not B.f.grid:
        raise GridMismatchError("terms live on different grids")
    if A.k == 0 and B.k == 0:
        return SymOpSum()
    pair = (A.k, B.k)
    if pair in RULES:
        rule, f, g, sign = RULES[pair], A.f, B.f, 1.0
    elif pair[::-1] in RULES:
        rule, f, g, sign = RULES[pair[::-1]], B.f, A.f, -1.0
    else:
        raise RuleNotInTableError(f"rule not in table for orders {pair}")
    scale = sign * A.coeff * B.coeff
    return SymOpSum([SymTerm(scale * c, fn, k) for c, fn, k in rule(f, g)]).collect()


def bracket_sums(A: SymOpSum, B: SymOpSum) -> SymOpSum:
    """Bilinear extension of :func:`bracket` to sums."""
    out = SymOpSum()
    for a in A:
        for b in B:
            out = out + bracket(a, b)
    return out.collect()


def nested_bracket(seq: Iterable[SymTerm | SymOpSum]) -> SymOpSum:
    """Left-nested ``[[[s0, s1], s2], ...]``."""
    items = [s if isinstance(s, SymOpSum) else SymOpSum.of(s) for s in seq]
    if not items:
        raise ValueError("empty bracket sequence")
    acc = items[0]
    for nxt in items[1:]:
        acc = bracket_sums(acc, nxt)
    return acc


def size_of(term: SymTerm, coeff_eps_power, coeff_h_power=0, f_h_power=0) -> SizeTag:
    """Size of ``term`` given the eps/h exponents of its scalar and of ``f``.

    ``<f>_k`` contributes ``eps**-k`` after spatial discretisation.
    """
    return SizeTag(Fraction(coeff_eps_power) - term.k,
                   Fraction(coeff_h_power) + Fraction(f_h_power))


def bracket_size(a: SizeTag, b: SizeTag) -> SizeTag:
    """Size bound of ``[A, B]``: one derivative is lost in every bracket."""
    return SizeTag(a.eps_power + b.eps_power + 1, a.h_power + b.h_power)
