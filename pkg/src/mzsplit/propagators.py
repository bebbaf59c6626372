"""Magnus-Zassenhaus time steppers of orders 2, 4 and 6.

Every step is a palindromic product of exponentials.  The outermost factor
is the free flow ``exp(i h eps K_2)`` (applied by FFT), the next one the
potential phase ``exp(-i/eps mu_00)`` (pointwise), and the remaining small
exponents are symmetrised-operator sums exponentiated with Lanczos.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .grid import Grid, Wavefunction, l2_norm
from .integrals import MuLambdaTables, PotentialModel, build_tables, gl_rule
from .krylov import LanczosConfig, LanczosReport, lanczos_expv
from .symops import Coefficient, SizeTag, SymOpSum, SymTerm

log = logging.getLogger(__name__)

SCHEMES = ("mz2", "mz4", "mz6")
NORM_DRIFT_WARN = 1e-10

# error exponent (in eps, after h = eps**sigma) of each scheme: eps**(a*sigma - 1)
_ERROR_SIGMA_POWER = {"mz2": 3, "mz4": 5, "mz6": 7}


class NumericalFailure(FloatingPointError):
    """A step produced non-finite values."""


@dataclass(frozen=True)
class StepContext:
    """Everything a step needs apart from the state and the potential.

    ``sigma`` selects the pruning policy for the small terms of the inner
    exponents: the ``h**2 eps d^4 mu_00`` term and, for the sixth-order
    scheme, the O(h^5 eps) and O(h^5 eps^3) terms.  ``None`` keeps all of
    them; otherwise a term is kept only when it is larger than the scheme's
    local error under ``h = eps**sigma``.
    """

    eps: float
    h: float
    scheme: str = "mz6"
    gl_nodes: int = 11
    lanczos_w2: LanczosConfig | None = None
    lanczos_w3: LanczosConfig = field(default_factory=lambda: LanczosConfig(max_iters=2))
    sigma: float | None = None
    midpoint: bool = False
    use_separable: bool = True
    printed_coefficients: bool = False

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.midpoint and self.scheme != "mz2":
            raise ValueError("the midpoint variant exists only for mz2")

    @property
    def w2_config(self) -> LanczosConfig:
        if self.lanczos_w2 is not None:
            return self.lanczos_w2
        # 3 iterations for small steps, 5 once h >= sqrt(eps)
        return LanczosConfig(max_iters=5 if abs(self.h) >= np.sqrt(self.eps) else 3)

    def tables(self, pot: PotentialModel, grid: Grid, t: float) -> MuLambdaTables:
        rule = None if self.h == 0 or self.midpoint else gl_rule(self.gl_nodes, abs(self.h))
        return build_tables(pot, grid, t, self.h, self.scheme, rule=rule,
                            midpoint=self.midpoint, use_separable=self.use_separable)


@dataclass
class StepReport:
    t: float
    h: float
    norm_before: float
    norm_after: float
    lanczos_reports: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def norm_drift(self) -> float:
        if self.norm_before == 0:
            return 0.0
        return abs(self.norm_after - self.norm_before) / self.norm_before


@dataclass
class Exponents:
    """Exponents of one step.

    ``kinetic`` is the scalar ``a`` of the circulant exponent ``a K_2``;
    ``phase`` is the coefficient ``g`` of the diagonal exponent
    ``phase_scale * D_g``.  ``inner`` lists the remaining operator sums from
    the outside in; the last one is the central exponent.
    """

    kinetic: complex
    phase: Coefficient | None
    phase_scale: complex
    inner: list[SymOpSum]


# Sizes O(eps**e h**p) of the terms whose inclusion depends on the sigma
# policy, counting eps**-k for every <.>_k.  A sigma policy keeps only the
# terms that are larger than the local error when h = eps**sigma, sigma <= 1;
# at fixed eps and small h the O(h^5 eps) ones dominate the local error of
# the sixth-order scheme, so "always include" keeps all of them.
_SIZE_D4 = SizeTag(Fraction(1), Fraction(3))
_SIZE_H5_EPS = SizeTag(Fraction(1), Fraction(5))
_SIZE_H5_EPS3 = SizeTag(Fraction(3), Fraction(5))

# An older, incorrect pair of coefficients for two sixth-order terms, kept
# for comparison; the defaults come from the exact expansion of exp(Theta_4).
PRINTED_MZ6 = {"d1d1d2": -2.0 / 45, "mu0_mu11": -1.0}
CORRECTED_MZ6 = {"d1d1d2": -7.0 / 120, "mu0_mu11": 1.0}


def _magnus_h5_eps(m21: Coefficient, m31: Coefficient, eps: float) -> list[SymTerm]:
    """The O(h^5 eps) part of the sixth-order Magnus exponent left out of ``Theta_4``.

    Obtained by matching against the exact logarithm of the propagator for a
    potential polynomial in time.  A single ``(1/4) i eps d^4 mu_21`` term
    does not reproduce that logarithm; these two do.
    """
    return [
        SymTerm(-0.5j * eps, m21.d(4), 0),
        SymTerm(-eps**2, m31.d(5), 1),
    ]


def _kept(scheme: str, sigma: float | None, size: SizeTag) -> bool:
    """Whether a term of the given size exceeds the local error under ``h = eps**sigma``."""
    if sigma is None:
        return True
    return size.at_sigma(sigma) < _ERROR_SIGMA_POWER[scheme] * Fraction(sigma) - 1


def _mz4_w2(mu, mu11, h, eps, sigma):
    i = 1j
    d1 = mu.d(1)
    terms = [
        SymTerm(i * h / (6 * eps), d1 * d1, 0),
        SymTerm(-2.0, mu11.d(1), 1),
        SymTerm(i * h**2 * eps / 6, mu.d(2), 2),
    ]
    if _kept("mz4", sigma, _SIZE_D4):
        terms.append(SymTerm(-i * h**2 * eps / 24, mu.d(4), 0))
    return SymOpSum(terms)


def assemble_mz2_exponents(tables: MuLambdaTables, ctx: StepContext) -> Exponents:
    h, eps = tables.h, ctx.eps
    return Exponents(1j * h * eps, tables["mu00"], -1j / eps, [])


def assemble_mz4_exponents(tables: MuLambdaTables, ctx: StepContext) -> Exponents:
    """``W0 = i h eps K_2``, ``W1 = -i/eps mu_00`` and the central ``W2``."""
    h, eps = tables.h, ctx.eps
    w2 = _mz4_w2(tables["mu00"], tables["mu11"], h, eps, ctx.sigma)
    return Exponents(1j * h * eps, tables["mu00"], -1j / eps, [w2])


def assemble_mz6_exponents(tables: MuLambdaTables, ctx: StepContext) -> Exponents:
    """Exponents of the seven-factor sixth-order splitting.

    ``W2`` has three terms.  The central exponent holds twelve terms (two
    coefficients set by ``CORRECTED_MZ6``) plus the O(h^5 eps) terms
    selected by the sigma policy.
    """
    h, eps = tables.h, ctx.eps
    i = 1j
    m0 = tables["mu00e"]
    m11 = tables["mu11o"]
    m21 = tables["mu21e"]
    m31 = tables["mu31o"]
    c = PRINTED_MZ6 if ctx.printed_coefficients else CORRECTED_MZ6
    d = {a: m0.d(a) for a in range(1, 9)}
    w2 = SymOpSum([
        SymTerm(i * h / (6 * eps), d[1] * d[1], 0),
        SymTerm(-2.0, m11.d(1), 1),
        SymTerm(i * h**2 * eps / 6, d[2], 2),
    ])
    grid = tables.grid
    lam_psi = Coefficient(grid, tables["lam_psi_e"], "Lpsi_e")
    lam_k1 = Coefficient(grid, tables["lam_phi12_o"] + tables["lam_phi21_o"], "Lphi_o")
    w3 = [SymTerm(i / eps, lam_psi, 0)]
    if _kept("mz6", ctx.sigma, _SIZE_D4):
        w3.append(SymTerm(-i * h**2 * eps / 24, d[4], 0))
    w3 += [
        SymTerm(-i / (6 * eps), d[1] * d[1] * m21.d(2), 0),
        SymTerm(c["d1d1d2"] * i * h**2 / eps, d[1] * d[1] * d[2], 0),
        SymTerm(1.0 / 6, lam_k1, 1),
        SymTerm(c["mu0_mu11"] * h, d[1] * m11.d(2) - (1.0 / 3) * (d[2] * m11.d(1)), 1),
        SymTerm(i * h**3 * eps / 30, d[2] * d[2] - 2.0 * (d[1] * d[3]), 2),
        SymTerm(2 * i * eps, m21.d(2), 2),
        SymTerm(4.0 / 3 * eps**2, m31.d(3), 3),
        SymTerm(h**2 * eps**2 / 3, m11.d(3), 3),
        SymTerm(-i * h**4 * eps**3 / 120, d[4], 4),
    ]
    if _kept("mz6", ctx.sigma, _SIZE_H5_EPS):
        w3 += [
            SymTerm(i * h**3 * eps / 60,
                    d[1] * d[5] + d[2] * d[4] - 0.5 * (d[3] * d[3]), 0),
            SymTerm(-h**2 * eps**2 / 4, m11.d(5), 1),
            SymTerm(i * h**4 * eps**3 / 80, d[6], 2),
        ] + _magnus_h5_eps(m21, m31, eps)
    if _kept("mz6", ctx.sigma, _SIZE_H5_EPS3):
        w3.append(SymTerm(-i * h**4 * eps**3 / 384, d[8], 0))
    return Exponents(1j * h * eps, m0, -1j / eps, [w2, SymOpSum(w3)])


ASSEMBLERS = {
    "mz2": assemble_mz2_exponents,
    "mz4": assemble_mz4_exponents,
    "mz6": assemble_mz6_exponents,
}


def assemble_exponents(tables: MuLambdaTables, ctx: StepContext) -> Exponents:
    return ASSEMBLERS[ctx.scheme](tables, ctx)


def time_independent_exponents(V: Coefficient, h: float, ctx: StepContext) -> Exponents:
    """Exponents of the symmetric Zassenhaus splitting for a static ``V``.

    These are written directly in terms of ``V`` and serve as a cross-check
    of the assembled exponents when the potential does not depend on time.
    """
    eps, i = ctx.eps, 1j
    mu = V * h
    if ctx.scheme == "mz2":
        return Exponents(i * h * eps, mu, -i / eps, [])
    d = {a: V.d(a) for a in range(1, 9)}
    w2 = [
        SymTerm(i * h**3 / (6 * eps), d[1] * d[1], 0),
        SymTerm(i * h**3 * eps / 6, d[2], 2),
    ]
    keep4 = _kept(ctx.scheme, ctx.sigma, _SIZE_D4)
    if ctx.scheme == "mz4":
        if keep4:
            w2.append(SymTerm(-i * h**3 * eps / 24, d[4], 0))
        return Exponents(i * h * eps, mu, -i / eps, [SymOpSum(w2)])
    c = PRINTED_MZ6 if ctx.printed_coefficients else CORRECTED_MZ6
    w3 = []
    if keep4:
        w3.append(SymTerm(-i * h**3 * eps / 24, d[4], 0))
    w3 += [
        SymTerm(c["d1d1d2"] * i * h**5 / eps, d[1] * d[1] * d[2], 0),
        SymTerm(i * h**5 * eps / 30, d[2] * d[2] - 2.0 * (d[1] * d[3]), 2),
        SymTerm(-i * h**5 * eps**3 / 120, d[4], 4),
    ]
    if _kept("mz6", ctx.sigma, _SIZE_H5_EPS):
        w3 += [
            SymTerm(i * h**5 * eps / 60, d[1] * d[5] + d[2] * d[4] - 0.5 * (d[3] * d[3]), 0),
            SymTerm(i * h**5 * eps**3 / 80, d[6], 2),
        ]
    if _kept("mz6", ctx.sigma, _SIZE_H5_EPS3):
        w3.append(SymTerm(-i * h**5 * eps**3 / 384, d[8], 0))
    return Exponents(i * h * eps, mu, -i / eps, [SymOpSum(w2), SymOpSum(w3)])


def apply_exponents(ex: Exponents, u: np.ndarray, grid: Grid, ctx: StepContext,
                    reports: list | None = None) -> np.ndarray:
    """Apply the palindromic product defined by ``ex`` to raw samples ``u``."""
    half_kin = np.exp(0.5 * ex.kinetic * grid.symbol(2))
    half_phase = None
    if ex.phase is not None:
        half_phase = np.exp(0.5 * ex.phase_scale * ex.phase.values)
    n_inner = len(ex.inner)
    configs = [ctx.w2_config, ctx.lanczos_w3][:n_inner] if n_inner == 2 else [ctx.w2_config]
    ops = []
    for idx, S in enumerate(ex.inner):
        central = idx == n_inner - 1
        op = S.matvec(grid) if S.terms else None
        ops.append((op, 1.0 if central else 0.5, configs[idx]))

    def kinetic(v):
        return np.fft.ifft(half_kin * np.fft.fft(v))

    def inner(v, op, scale, cfg):
        if op is None:
            return v
        mv = op if scale == 1.0 else (lambda w: scale * op(w))
        out, rep = lanczos_expv(mv, v, cfg)
        if reports is not None:
            reports.append(rep)
        return out

    v = kinetic(u)
    if half_phase is not None:
        v = half_phase * v
    for op, scale, cfg in ops[:-1]:
        v = inner(v, op, scale, cfg)
    if ops:
        v = inner(v, *ops[-1])
    for op, scale, cfg in reversed(ops[:-1]):
        v = inner(v, op, scale, cfg)
    if half_phase is not None:
        v = half_phase * v
    return kinetic(v)


def step(u: Wavefunction, pot: PotentialModel, t: float, ctx: StepContext,
         tables: MuLambdaTables | None = None) -> tuple[Wavefunction, StepReport]:
    """Advance ``u`` from ``t`` to ``t + ctx.h``."""
    start = time.perf_counter()
    norm0 = l2_norm(u)
    if ctx.h == 0:
        return u.copy(), StepReport(t, 0.0, norm0, norm0)
    if tables is None:
        tables = ctx.tables(pot, u.grid, t)
    elif tables.grid is not u.grid:
        raise ValueError("tables were built on a different grid")
    ex = assemble_exponents(tables, ctx)
    reports: list[LanczosReport] = []
    out = apply_exponents(ex, u.values, u.grid, ctx, reports)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure(f"non-finite state after step at t={t}")
    res = Wavefunction(u.grid, out)
    return res, StepReport(t, ctx.h, norm0, l2_norm(res), reports,
                           time.perf_counter() - start)


def step_mz2(u, pot, t, ctx: StepContext, tables=None):
    return step(u, pot, t, replace(ctx, scheme="mz2"), tables)


def step_mz4(u, pot, t, ctx: StepContext, tables=None):
    return step(u, pot, t, replace(ctx, scheme="mz4"), tables)


def step_mz6(u, pot, t, ctx: StepContext, tables=None):
    return step(u, pot, t, replace(ctx, scheme="mz6"), tables)


@dataclass
class Evolution:
    u: Wavefunction
    reports: list[StepReport]
    snapshots: list[tuple[float, Wavefunction]]

    @property
    def max_norm_drift(self) -> float:
        return max((r.norm_drift for r in self.reports), default=0.0)

    @property
    def wall_time(self) -> float:
        return sum(r.wall_time for r in self.reports)

    def __iter__(self):
        # allows ``u, reports, snaps = evolve(...)``
        return iter((self.u, self.reports, self.snapshots))


def evolve(u0: Wavefunction, pot: PotentialModel, t0: float, t_final: float,
           n_steps: int, ctx: StepContext, snapshot_every: int = 0,
           callback=None) -> Evolution:
    """Uniform stepping from ``t0`` to ``t_final``; ``ctx.h`` is overridden."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    h = (t_final - t0) / n_steps
    ctx = replace(ctx, h=h)
    u = u0
    reports = []
    snaps = [(t0, u0.copy())] if snapshot_every else []
    for n in range(n_steps):
        t = t0 + n * h
        u, rep = step(u, pot, t, ctx)
        if rep.norm_drift > NORM_DRIFT_WARN:
            log.warning("norm drift %.3e at step %d (t=%.6g)", rep.norm_drift, n, t)
        reports.append(rep)
        if snapshot_every and (n + 1) % snapshot_every == 0:
            snaps.append((t + h, u.copy()))
        if callback is not None:
            callback(n, t + h, u)
    return Evolution(u, reports, snaps)


# ---------------------------------------------------------------------------
# Magnus truncations, used by the dense oracle


def theta2(tables: MuLambdaTables, eps: float) -> SymOpSum:
    """Fourth-order Magnus exponent ``i h eps d^2 - i/eps mu_00 - 2 <d mu_11>_1``."""
    grid, h = tables.grid, tables.h
    return SymOpSum([
        SymTerm(1j * h * eps, Coefficient.constant(grid), 2),
        SymTerm(-1j / eps, tables["mu00"], 0),
        SymTerm(-2.0, tables["mu11"].d(1), 1),
    ])


def theta4_odd(tables: MuLambdaTables, eps: float, complete: bool = True) -> SymOpSum:
    """Sixth-order Magnus exponent in odd powers of ``h``.

    With ``complete`` the O(h^5 eps) terms are included, so the truncation
    error is O(h^7) at fixed ``eps``; without them it is O(h^5 eps).
    """
    grid, h = tables.grid, tables.h
    lam_psi = Coefficient(grid, tables["lam_psi_e"], "Lpsi_e")
    lam_k1 = Coefficient(grid, tables["lam_phi12_o"] + tables["lam_phi21_o"], "Lphi_o")
    return SymOpSum([
        SymTerm(1j * h * eps, Coefficient.constant(grid), 2),
        SymTerm(-1j / eps, tables["mu00e"], 0),
        SymTerm(-2.0, tables["mu11o"].d(1), 1),
        SymTerm(1j / eps, lam_psi, 0),
        SymTerm(2j * eps, tables["mu21e"].d(2), 2),
        SymTerm(1.0 / 6, lam_k1, 1),
        SymTerm(4.0 / 3 * eps**2, tables["mu31o"].d(3), 3),
    ] + (_magnus_h5_eps(tables["mu21e"], tables["mu31o"], eps) if complete else []))


def splitting_operators(ex: Exponents, grid: Grid) -> list[tuple[SymOpSum, float]]:
    """The factors of a step as ``(operator, weight)`` pairs, outermost first."""
    ops: list[tuple[SymOpSum, float]] = [
        (SymOpSum([SymTerm(ex.kinetic, Coefficient.constant(grid), 2)]), 0.5)
    ]
    if ex.phase is not None:
        ops.append((SymOpSum([SymTerm(ex.phase_scale, ex.phase, 0)]), 0.5))
    for idx, S in enumerate(ex.inner):
        ops.append((S, 1.0 if idx == len(ex.inner) - 1 else 0.5))
    return ops
