"""Measurements behind the ``verify`` subcommand and the acceptance suite.

Every function returns measured numbers; pass/fail thresholds are applied by
the caller.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..grid import Grid, Wavefunction, l2_error, l2_norm
from ..krylov import LanczosConfig
from ..integrals import (PSI, VARPHI1_PHI1, PotentialModel, eval_lambda, eval_mu,
                         gl_rule)
from ..oracle import (DenseOperator, brute_commutator, dense_expm, dense_of_symop,
                      dense_of_symop_extended, expv_extended, extended_distance, sbch3)
from ..propagators import (Exponents, StepContext, assemble_exponents, evolve,
                           splitting_operators, step, theta2, theta4_odd,
                           time_independent_exponents)
from ..symops import RULES, Coefficient, SymOpSum, SymTerm, bracket
from .presets import make_problem


@dataclass
class Check:
    name: str
    value: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail or f'{self.value:.3e}'}"


def slope(hs, errs) -> float:
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


# ---------------------------------------------------------------------------
# commutator identities


def random_trig(grid: Grid, rng: np.random.Generator, modes: int = 3, label: str = "f") -> Coefficient:
    """Random real trigonometric polynomial of degree ``modes`` with exact derivatives."""
    a = rng.normal(size=modes + 1)
    b = rng.normal(size=modes + 1)
    x = grid.nodes
    w = 2 * np.pi / grid.length

    def provider(d):
        out = np.full_like(x, a[0] if d == 0 else 0.0)
        for m in range(1, modes + 1):
            k = m * w
            ph = d * np.pi / 2
            out = out + k**d * (a[m] * np.cos(k * x + ph) + b[m] * np.sin(k * x + ph))
        return out

    return Coefficient(grid, provider(0), label, provider)


def low_mode_basis(grid: Grid) -> np.ndarray:
    """Orthonormal columns spanning the Fourier modes ``|m| <= n/4``.

    Products with band-limited coefficients stay alias-free on this subspace.
    """
    n = grid.n_points
    m = np.fft.fftfreq(n, 1.0 / n)
    F = np.fft.ifft(np.eye(n), axis=0) * np.sqrt(n)
    return F[:, np.abs(m) <= n // 4]


def commutator_identity_errors(n_points: int, seed: int = 0) -> dict:
    """Relative Frobenius error of every closed-form rule against the dense commutator."""
    rng = np.random.default_rng(seed)
    grid = Grid(0.0, 2 * np.pi, n_points)
    P = low_mode_basis(grid)
    out = {}
    for (a, b) in RULES:
        f = random_trig(grid, rng, label="f")
        g = random_trig(grid, rng, label="g")
        A = SymTerm(1.0, f, a)
        B = SymTerm(1.0, g, b)
        brute = brute_commutator(dense_of_symop(SymOpSum([A]), grid),
                                 dense_of_symop(SymOpSum([B]), grid)).entries
        closed = dense_of_symop(bracket(A, B), grid).entries
        bp = P.conj().T @ brute @ P
        cp = P.conj().T @ closed @ P
        out[(a, b)] = float(np.linalg.norm(bp - cp) / np.linalg.norm(bp))
    return out


# ---------------------------------------------------------------------------
# sBCH


def random_skew_hermitian(n: int, rng: np.random.Generator) -> DenseOperator:
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return DenseOperator((M - M.conj().T) / 2, "skew_hermitian")


def sbch_errors(hs, seed: int = 0, n: int = 6) -> np.ndarray:
    """``|| exp(hX/2) exp(hY) exp(hX/2) - exp(sbch3(X, Y, h)) ||`` for each ``h``."""
    rng = np.random.default_rng(seed)
    X = random_skew_hermitian(n, rng)
    Y = random_skew_hermitian(n, rng)
    errs = []
    for h in hs:
        half = dense_expm(X.scaled(h / 2)).entries
        lhs = half @ dense_expm(Y.scaled(h)).entries @ half
        errs.append(np.linalg.norm(lhs - dense_expm(sbch3(X, Y, h)).entries, 2))
    return np.array(errs)


# ---------------------------------------------------------------------------
# splitting against the exact exponential of the Magnus truncation


def _d_sin(a, x):
    return [np.sin(x), np.cos(x), -np.sin(x), -np.cos(x)][a % 4]


def oracle_problem(n_points: int = 64):
    """``V = sin(x)(1 + t)`` on a periodic grid and a smooth state."""
    grid = Grid(0.0, 2 * np.pi, n_points)
    x = grid.nodes
    pot = PotentialModel(lambda x, t: np.sin(x) * (1 + t),
                         dx=lambda a, x, t: _d_sin(a, x) * (1 + t))
    u = Wavefunction(grid, np.exp(np.sin(x)) * np.exp(1j * np.cos(2 * x))).normalize()
    return grid, pot, u


def _scale_central_term(ex: Exponents, index: int, factor: float) -> Exponents:
    central = list(ex.inner[-1].terms)
    t = central[index]
    central[index] = SymTerm(t.coeff * factor, t.f, t.k)
    return replace(ex, inner=ex.inner[:-1] + [SymOpSum(central)])


def splitting_vs_magnus(scheme: str, hs, eps: float = 0.1, n_points: int = 64, t0: float = 0.3,
                        mutate: tuple[int, float] | None = None) -> np.ndarray:
    """Local distance between the splitting and the exact exponential of its Magnus exponent.

    Both sides are evaluated in double-double arithmetic so the O(h^7)
    defect of the sixth-order scheme is not masked by rounding.  ``mutate``
    scales one term of the central exponent, which must break the order.
    """
    theta = {"mz4": theta2, "mz6": theta4_odd}[scheme]
    grid, pot, u = oracle_problem(n_points)
    errs = []
    for h in hs:
        ctx = StepContext(eps=eps, h=h, scheme=scheme)
        tab = ctx.tables(pot, grid, t0)
        ex = assemble_exponents(tab, ctx)
        if mutate is not None:
            ex = _scale_central_term(ex, *mutate)
        ops = splitting_operators(ex, grid)
        v = u.values
        for S, w in ops[:-1] + [ops[-1]] + ops[:-1][::-1]:
            v = expv_extended(dense_of_symop_extended(S, grid).scaled(w), v)
        ref = expv_extended(dense_of_symop_extended(theta(tab, eps), grid), u.values)
        errs.append(extended_distance(v, ref, grid.dx))
    return np.array(errs)


ORACLE_WINDOWS = {"mz4": (1e-3, 1e-2), "mz6": (2e-3, 2e-2)}


def oracle_slope(scheme: str, n_h: int = 5, mutate=None) -> tuple[float, np.ndarray]:
    hs = np.geomspace(*ORACLE_WINDOWS[scheme], n_h)
    errs = splitting_vs_magnus(scheme, hs, mutate=mutate)
    return slope(hs, errs), errs


# ---------------------------------------------------------------------------
# global convergence

GLOBAL_STEPS = {
    "mz2": (16, 25, 40, 64, 100, 160),
    "mz4": (8, 12, 20, 32, 50, 80),
    "mz6": (4, 6, 10, 16, 25, 40),
}


def global_errors(scheme: str, eps: float = 0.05, n_grid: int = 512, steps=None,
                  ref_factor: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Final-time errors of ``scheme`` on the smooth preset against itself at ``h / ref_factor``."""
    steps = steps or GLOBAL_STEPS[scheme]
    pb = make_problem("smooth", eps, n_grid)
    T = pb.t_final - pb.t0
    ctx = StepContext(eps=eps, h=T / steps[-1], scheme=scheme)
    n_ref = ref_factor * steps[-1]
    ref = evolve(pb.u0, pb.potential, pb.t0, pb.t_final, n_ref, ctx).u
    errs = [l2_error(evolve(pb.u0, pb.potential, pb.t0, pb.t_final, n, ctx).u, ref) for n in steps]
    return T / np.array(steps, dtype=float), np.array(errs)


# ---------------------------------------------------------------------------
# scaling of the time integrals


def _scaling_potential():
    def dx(a, x, t):
        sx = [np.sin(x), np.cos(x), -np.sin(x), -np.cos(x)][a % 4]
        cx = [np.cos(2 * x), -np.sin(2 * x), -np.cos(2 * x), np.sin(2 * x)][a % 4] * 2.0**a
        return sx * np.exp(0.7 * t) + cx * np.sin(1.3 * t + 0.4)
    return PotentialModel(lambda x, t: dx(0, x, t), dx=dx)


# (label, kind, args, expected exponent).  For even j the moment of B_j
# against a linear function also vanishes, so mu_{j,1} is then O(h^(j+3))
# and only odd j probe the j+2 rate.
SCALING_CASES = [
    ("mu_{1,1}", "mu", (1, 1, "none"), 3),
    ("mu_{3,1}", "mu", (3, 1, "none"), 5),
    ("mu^e_{2,1}", "mu", (2, 1, "e"), 5),
    ("mu^e_{4,1}", "mu", (4, 1, "e"), 7),
    ("mu^o_{1,1}", "mu", (1, 1, "o"), 3),
    ("mu^o_{3,1}", "mu", (3, 1, "o"), 5),
    ("Lambda^e[psi]^{1,1}", "lam", (PSI, 1, 1, "e"), 5),
    ("Lambda^o[varphi1+phi1]^{1,2}", "lam", (VARPHI1_PHI1, 1, 2, "o"), 5),
]


def scaling_slopes(hs=None, t0: float = 0.2) -> list[tuple[str, float, int]]:
    """Fitted ``h`` exponents of the line and triangle integrals."""
    hs = np.geomspace(2e-2, 2e-1, 6) if hs is None else np.asarray(hs)
    grid = Grid(0.0, 2 * np.pi, 16)
    pot = _scaling_potential()
    out = []
    for label, kind, args, expected in SCALING_CASES:
        sizes = []
        for h in hs:
            rule = gl_rule(11, h)
            if kind == "mu":
                j, k, parity = args
                val = eval_mu(pot, grid, t0, h, j, k, rule=rule, parity=parity).values
            else:
                kern, a, b, parity = args
                val = eval_lambda(pot, grid, t0, h, kern, a, b, rule=rule, parity=parity).values
            sizes.append(np.max(np.abs(val)))
        out.append((label, slope(hs, sizes), expected))
    return out


def parity_reconstruction_error(h: float = 0.1, t0: float = 0.2) -> float:
    """``max | mu - (mu^e + mu^o) |`` over the supported ``(j, k)``."""
    grid = Grid(0.0, 2 * np.pi, 16)
    pot = _scaling_potential()
    rule = gl_rule(11, h)
    worst = 0.0
    for j in range(5):
        for k in range(3):
            full = eval_mu(pot, grid, t0, h, j, k, rule=rule).values
            parts = sum(eval_mu(pot, grid, t0, h, j, k, rule=rule, parity=p).values for p in "eo")
            worst = max(worst, float(np.max(np.abs(full - parts))))
    return worst


# ---------------------------------------------------------------------------
# unitarity and time reversal


def unitarity_drift(scheme: str, n_steps: int = 1000, eps: float = 1e-2, n_grid: int = 1000) -> float:
    """Largest per-step norm change on the chirped double-well preset."""
    pb = make_problem("double_well_chirp", eps, n_grid)
    ctx = StepContext(eps=eps, h=(pb.t_final - pb.t0) / n_steps, scheme=scheme)
    return evolve(pb.u0, pb.potential, pb.t0, pb.t_final, n_steps, ctx).max_norm_drift


def _term_table(S: SymOpSum) -> dict:
    """``k -> sum of coeff * f`` over the terms of order ``k``."""
    table: dict[int, np.ndarray] = {}
    for t in S.terms:
        table[t.k] = table.get(t.k, 0) + t.coeff * t.f.values
    return table


def time_independent_mismatch(scheme: str, h: float = 0.05, eps: float = 1e-2,
                              n_grid: int = 256) -> float:
    """Largest difference between the assembled exponents and the static-potential forms."""
    pb = make_problem("double_well", eps, n_grid)
    ctx = StepContext(eps=eps, h=h, scheme=scheme)
    tab = ctx.tables(pb.potential, pb.grid, 0.4)
    got = assemble_exponents(tab, ctx)
    static = pb.potential.separable.static
    V = Coefficient.from_derivatives(pb.grid, [static(a, pb.grid.nodes) for a in range(9)], "V_D")
    want = time_independent_exponents(V, h, ctx)
    worst = abs(got.kinetic - want.kinetic) / abs(want.kinetic)
    phase_want = want.phase_scale * want.phase.values
    worst = max(worst, float(np.max(np.abs(got.phase_scale * got.phase.values - phase_want))
                             / np.max(np.abs(phase_want))))
    for S_got, S_want in zip(got.inner, want.inner):
        # relative to the largest term of the exponent, so vanishing
        # time-dependent terms are compared against the operator's size
        a, b = _term_table(S_got), _term_table(S_want)
        scale = max(float(np.max(np.abs(v))) for v in b.values())
        for k in set(a) | set(b):
            diff = np.asarray(a.get(k, 0)) - np.asarray(b.get(k, 0))
            worst = max(worst, float(np.max(np.abs(diff))) / scale)
    if len(got.inner) != len(want.inner):
        return float("inf")
    return float(worst)


def reversibility_defect(scheme: str, h: float = 0.05, eps: float = 1e-2, n_grid: int = 512,
                         t: float = 0.9, adaptive: bool = True) -> float:
    """``|| step(-h) step(h) u - u ||`` for the double well without laser.

    The splitting is exactly reversible; with a fixed number of Lanczos
    iterations the defect is the Krylov error instead, so by default the
    inner exponentials are converged adaptively.
    """
    pb = make_problem("double_well", eps, n_grid)
    fwd = StepContext(eps=eps, h=h, scheme=scheme)
    if adaptive:
        cfg = LanczosConfig(max_iters=40, mode="adaptive", adaptive_tol=1e-15)
        fwd = replace(fwd, lanczos_w2=cfg, lanczos_w3=cfg)
    u1, _ = step(pb.u0, pb.potential, t, fwd)
    u2, _ = step(u1, pb.potential, t + h, replace(fwd, h=-h))
    return float(l2_error(u2, pb.u0) / l2_norm(pb.u0))
