"""Experiment presets: initial states and potentials."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..grid import Grid, Wavefunction
from ..integrals import PotentialModel

log = logging.getLogger(__name__)

# below this many points the O(eps) oscillations of the double-well problem
# at eps = 1e-2 are not resolved on [-5, 5]
MIN_RESOLVED_POINTS = 256


@dataclass(frozen=True)
class Problem:
    """Initial state, potential and time interval of an experiment."""

    name: str
    u0: Wavefunction
    potential: PotentialModel
    t0: float
    t_final: float

    @property
    def grid(self) -> Grid:
        return self.u0.grid


def gaussian_packet(grid: Grid, x0: float, delta: float, p0: float = 0.0, eps: float = 1.0) -> Wavefunction:
    """``(delta pi)^(-1/4) exp(-(x-x0)^2 / (2 delta) + i p0 x / eps)``, renormalised on the grid."""
    x = grid.nodes
    vals = (delta * np.pi) ** -0.25 * np.exp(-((x - x0) ** 2) / (2 * delta) + 1j * p0 * x / eps)
    return Wavefunction(grid, vals).normalize()


def double_well(a: int, x):
    """``a``-th derivative of ``x^4/5 - 2 x^2``."""
    x = np.asarray(x, dtype=float)
    if a == 0:
        return x**4 / 5 - 2 * x**2
    if a == 1:
        return 4 * x**3 / 5 - 4 * x
    if a == 2:
        return 12 * x**2 / 5 - 4
    if a == 3:
        return 24 * x / 5
    if a == 4:
        return np.full_like(x, 24.0 / 5)
    return np.zeros_like(x)


def chirp(t):
    """Laser amplitude ``10 exp(-10 (t-1)^2) sin(500 (t-1)^4 + 10)``."""
    s = np.asarray(t, dtype=float) - 1.0
    return 10.0 * np.exp(-10.0 * s**2) * np.sin(500.0 * s**4 + 10.0)


def no_field(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def check_resolution(eps: float, n_grid: int) -> bool:
    """Warn when ``n_grid`` is too coarse for ``eps`` on the double-well domain."""
    needed = MIN_RESOLVED_POINTS * 1e-2 / eps
    if n_grid < needed:
        log.warning("n_grid=%d is below %d points, too coarse to resolve eps=%g",
                    n_grid, int(np.ceil(needed)), eps)
        return False
    return True


def preset_double_well_chirp(eps: float, n_grid: int, laser: bool = True,
                             t_final: float = 2.5) -> Problem:
    """Wavepacket in the left well of ``x^4/5 - 2x^2`` driven by a chirped pulse.

    The domain is ``[-5, 5]`` and the packet has width ``delta = 1e-2``
    centred at ``x0 = -2.5``.  With ``laser=False`` the potential is the
    bare double well.
    """
    check_resolution(eps, n_grid)
    grid = Grid(-5.0, 5.0, n_grid)
    u0 = gaussian_packet(grid, -2.5, 1e-2)
    field = chirp if laser else no_field
    pot = PotentialModel.from_separable(double_well, field, name="double_well_chirp",
                                        dt_resolution_hint=1e-2)
    return Problem("double_well_chirp" if laser else "double_well", u0, pot, 0.0, t_final)


def _smooth_dx(a: int, x, t):
    c = [np.cos(x), -np.sin(x), -np.cos(x), np.sin(x)][a % 4]
    base = 1.0 if a == 0 else 0.0
    return (1.0 + 0.5 * np.sin(t)) * (base - c)


def preset_smooth(eps: float, n_grid: int, t_final: float = 1.0) -> Problem:
    """Periodic problem with a slowly varying potential ``(1 + sin(t)/2)(1 - cos x)``.

    Used for convergence studies where the solution is smooth in time.
    """
    grid = Grid(-np.pi, np.pi, n_grid)
    u0 = gaussian_packet(grid, 0.5, 0.05)
    pot = PotentialModel(lambda x, t: _smooth_dx(0, x, t), dx=_smooth_dx, name="smooth")
    return Problem("smooth", u0, pot, 0.0, t_final)


def preset_free(eps: float, n_grid: int, t_final: float = 1.0) -> Problem:
    """Free evolution (``V = 0``) of a moving packet on ``[-5, 5]``."""
    grid = Grid(-5.0, 5.0, n_grid)
    u0 = gaussian_packet(grid, 0.0, 0.25, p0=0.5, eps=eps)
    pot = PotentialModel(lambda x, t: 0.0 * x + 0.0 * t,
                         dx=lambda a, x, t: 0.0 * x + 0.0 * t, name="free")
    return Problem("free", u0, pot, 0.0, t_final)


PRESETS: dict[str, Callable[..., Problem]] = {
    "double_well_chirp": preset_double_well_chirp,
    "double_well": lambda eps, n_grid, **kw: preset_double_well_chirp(eps, n_grid, laser=False, **kw),
    "smooth": preset_smooth,
    "free": preset_free,
}


def make_problem(name: str, eps: float, n_grid: int, t_final: float | None = None) -> Problem:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    kw = {} if t_final is None else {"t_final": t_final}
    return factory(eps, n_grid, **kw)


def free_evolution(u0: Wavefunction, eps: float, t: float) -> Wavefunction:
    """Exact solution of ``u_t = i eps u_xx`` on the periodic grid."""
    return Wavefunction(u0.grid, np.fft.ifft(np.exp(1j * eps * t * u0.grid.symbol(2)) * np.fft.fft(u0.values)))
