"""Lanczos approximation of ``exp(W) v`` for skew-Hermitian ``W``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Wavefunction


class LanczosBreakdownError(FloatingPointError):
    """The operator produced non-finite values."""


@dataclass(frozen=True)
class LanczosConfig:
    """Iteration settings.

    In ``"fixed"`` mode exactly ``max_iters`` steps are taken (fewer on a
    happy breakdown).  In ``"adaptive"`` mode iteration stops as soon as the
    a-posteriori error estimate drops below ``adaptive_tol``.
    """

    max_iters: int = 5
    breakdown_tol: float = 1e-14
    mode: str = "fixed"
    adaptive_tol: float = 1e-13
    reorthogonalize: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown Lanczos mode {self.mode!r}")
        if self.breakdown_tol <= 0 or self.adaptive_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class LanczosReport:
    iters_used: int
    est_residual: float
    happy_breakdown: bool


def _expi_tridiag(alpha, beta):
    """``exp(i T)`` first column and full matrix for the real symmetric tridiagonal ``T``."""
    m = len(alpha)
    T = np.diag(alpha) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    lam, U = np.linalg.eigh(T)
    return (U * np.exp(1j * lam)) @ U[0].conj()


def lanczos_expv(matvec: Callable[[np.ndarray], np.ndarray], v, cfg: LanczosConfig | None = None):
    """Approximate ``exp(W) v`` with ``W`` skew-Hermitian given ``v -> W v``.

    Hermitian Lanczos runs on ``H = -i W``; the result is
    ``|v| Q_m exp(i T_m) e_1``.

    Returns
    -------
    (result, LanczosReport)
        ``result`` has the same type as ``v`` (array or :class:`Wavefunction`).
    """
    cfg = cfg or LanczosConfig()
    wrap = isinstance(v, Wavefunction)
    vec = np.asarray(v.values if wrap else v, dtype=np.complex128)
    n = vec.shape[0]
    nrm = np.linalg.norm(vec)
    if not np.isfinite(nrm):
        raise LanczosBreakdownError("non-finite starting vector")
    if nrm == 0:
        out = np.zeros_like(vec)
        return (Wavefunction(v.grid, out) if wrap else out), LanczosReport(0, 0.0, True)

    max_m = min(cfg.max_iters, n)
    Q = np.empty((max_m, n), dtype=np.complex128)
    alpha = np.zeros(max_m)
    beta = np.zeros(max_m)
    Q[0] = vec / nrm
    happy = False
    est = 0.0
    m = 0
    coeffs = None
    for j in range(max_m):
        w = -1j * np.asarray(matvec(Q[j]))
        if not np.all(np.isfinite(w)):
            raise LanczosBreakdownError("non-finite value in Lanczos matvec")
        alpha[j] = np.vdot(Q[j], w).real
        w = w - alpha[j] * Q[j]
        if j > 0:
            w = w - beta[j - 1] * Q[j - 1]
        if cfg.reorthogonalize:
            w = w - Q[: j + 1].T @ (Q[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        m = j + 1
        if beta[j] <= cfg.breakdown_tol * max(1.0, abs(alpha[j])):
            happy = True
            coeffs = _expi_tridiag(alpha[:m], beta[:m])
            est = 0.0
            break
        if cfg.mode == "adaptive" or j == max_m - 1:
            coeffs = _expi_tridiag(alpha[:m], beta[:m])
            est = beta[j] * abs(coeffs[-1]) * nrm
            if cfg.mode == "adaptive" and est < cfg.adaptive_tol:
                break
        if j + 1 < max_m:
            Q[j + 1] = w / beta[j]
    out = nrm * (coeffs @ Q[:m])
    report = LanczosReport(m, float(est), happy)
    return (Wavefunction(v.grid, out) if wrap else out), report
