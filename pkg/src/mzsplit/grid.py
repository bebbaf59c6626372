"""Periodic uniform grids and Fourier spectral operators.

Conventions
-----------
* Frequencies are signed, ``m in {-N/2+1, ..., N/2}``; the symbol of the
  ``k``-th derivative is ``(2j*pi*m/L)**k``.
* The Nyquist entry of every odd-order symbol is zero, so that the
  discretisation of a first-order symmetrised operator is exactly
  skew-Hermitian.  Even orders keep the (real) Nyquist value.
* Forward transforms are unnormalised, the inverse carries ``1/N``
  (numpy's default).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

MAX_DERIV_ORDER = 8


class GridMismatchError(ValueError):
    """Raised when arrays or functions defined on different grids are mixed."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on ``[x_min, x_max)`` with ``n_points`` nodes.

    Grids compare by identity; two grids with the same parameters are still
    distinct objects and functions sampled on one are rejected by the other.
    """

    x_min: float
    x_max: float
    n_points: int
    _symbols: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.n_points < 4 or self.n_points % 2:
            raise ValueError(f"n_points must be even and >= 4, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        nodes = self.x_min + self.dx * np.arange(self.n_points)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def frequencies(self) -> np.ndarray:
        """Signed integer frequencies in FFT order, Nyquist stored as ``+N/2``."""
        m = np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)
        m[self.n_points // 2] = self.n_points // 2
        return m

    def symbol(self, k: int) -> np.ndarray:
        """Fourier symbol ``c_k`` of the ``k``-th derivative (read-only, cached)."""
        if k < 0:
            raise ValueError("derivative order must be non-negative")
        cached = self._symbols.get(k)
        if cached is None:
            c = (2j * np.pi * self.frequencies / self.length) ** k
            if k % 2:
                c[self.n_points // 2] = 0.0
            if k % 2 == 0:
                c = c.real + 0j
            c.setflags(write=False)
            self._symbols[k] = c
            cached = c
        return cached

    def sample(self, fn) -> np.ndarray:
        """Evaluate a vectorised callable on the grid nodes."""
        return np.asarray(fn(self.nodes))

    def check(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.shape != (self.n_points,):
            raise GridMismatchError(
                f"expected shape ({self.n_points},), got {values.shape}"
            )
        return values


@dataclass(eq=False)
class GridFunction:
    """Samples of a function on the nodes of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = self.grid.check(self.values)

    def same_grid(self, other: "GridFunction") -> None:
        if other.grid is not self.grid:
            raise GridMismatchError("functions live on different grids")

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or not np.any(self.values.imag)


@dataclass(eq=False)
class Wavefunction(GridFunction):
    """Complex state vector on a grid."""

    def __post_init__(self):
        self.values = np.asarray(self.grid.check(self.values), dtype=np.complex128)

    def copy(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.values.copy())

    def normalize(self) -> "Wavefunction":
        """Return a copy scaled to unit discrete L2 norm."""
        return Wavefunction(self.grid, self.values / l2_norm(self))


def _values_of(u, grid: Grid | None = None) -> tuple[Grid, np.ndarray]:
    if isinstance(u, GridFunction):
        if grid is not None and u.grid is not grid:
            raise GridMismatchError("functions live on different grids")
        return u.grid, u.values
    if grid is None:
        raise TypeError("raw arrays need an explicit grid")
    return grid, grid.check(u)


def _like(u, grid: Grid, values: np.ndarray):
    if isinstance(u, Wavefunction):
        return Wavefunction(grid, values)
    if isinstance(u, GridFunction):
        return GridFunction(grid, values)
    return values


def spectral_deriv(grid: Grid, values: np.ndarray, k: int) -> np.ndarray:
    """Spectral ``k``-th derivative of raw samples; real input gives real output."""
    if not 0 <= k <= MAX_DERIV_ORDER:
        raise ValueError(f"derivative order {k} outside 0..{MAX_DERIV_ORDER}")
    values = grid.check(values)
    if k == 0:
        return values.copy()
    out = np.fft.ifft(grid.symbol(k) * np.fft.fft(values))
    if not np.iscomplexobj(values):
        return out.real
    return out


def deriv(u, k: int, grid: Grid | None = None):
    """Spectral ``k``-th derivative of a :class:`GridFunction` or raw array."""
    grid, values = _values_of(u, grid)
    return _like(u, grid, spectral_deriv(grid, values, k))


def exp_circulant(a: complex, k: int, u: Wavefunction) -> Wavefunction:
    """Apply ``exp(a * K_k)`` where ``K_k`` is the circulant ``k``-th derivative."""
    if k % 2:
        raise ValueError("exp_circulant is only defined for even orders")
    if a == 0:
        return u.copy()
    c = u.grid.symbol(k)
    return Wavefunction(u.grid, np.fft.ifft(np.exp(a * c) * np.fft.fft(u.values)))


def exp_diag(g, scale: complex, u: Wavefunction) -> Wavefunction:
    """Pointwise ``exp(scale * g) * u`` for a real grid function ``g``."""
    _, gv = _values_of(g, u.grid)
    if np.iscomplexobj(gv) and np.any(gv.imag):
        raise ValueError("exp_diag requires a real-valued g")
    if scale == 0:
        return u.copy()
    return Wavefunction(u.grid, np.exp(scale * np.real(gv)) * u.values)


def l2_norm(u) -> float:
    grid, values = _values_of(u)
    return float(np.sqrt(grid.dx * np.vdot(values, values).real))


def l2_error(u, v) -> float:
    grid, uv = _values_of(u)
    _, vv = _values_of(v, grid)
    return float(np.sqrt(grid.dx * np.sum(np.abs(uv - vv) ** 2)))


def energy(u: Wavefunction, potential, eps: float) -> float:
    """Expectation of ``-eps d^2/dx^2 + V/eps`` with a spectral first derivative."""
    grid, values = _values_of(u)
    _, pv = _values_of(potential, grid)
    du = spectral_deriv(grid, values, 1)
    kinetic = eps * grid.dx * np.sum(np.abs(du) ** 2)
    pot = grid.dx * np.sum(np.real(pv) * np.abs(values) ** 2) / eps
    return float(kinetic + pot)


def total_energy(u: Wavefunction, potential, eps: float) -> float:
    """Expectation of ``-eps^2 d^2/dx^2 + V``, i.e. ``eps * energy(u, V, eps)``.

    This is the normalisation of the total-energy observable reported in
    the benchmark tables.
    """
    return eps * energy(u, potential, eps)


# ---------------------------------------------------------------------------
# binary wavefunction dump

MZWF_MAGIC = b"MZWF"
MZWF_VERSION = 1
_HEADER = struct.Struct("<4sIQdddd")


def write_mzwf(stream: BinaryIO, u: Wavefunction, eps: float, t: float) -> None:
    """Write ``u`` in the MZWF little-endian binary layout."""
    g = u.grid
    stream.write(
        _HEADER.pack(MZWF_MAGIC, MZWF_VERSION, g.n_points, eps, t, g.x_min, g.x_max)
    )
    pairs = np.empty((g.n_points, 2), dtype="<f8")
    pairs[:, 0] = u.values.real
    pairs[:, 1] = u.values.imag
    stream.write(pairs.tobytes())


def read_mzwf(stream: BinaryIO) -> tuple[Wavefunction, float, float]:
    """Read an MZWF record; returns ``(wavefunction, eps, t)`` on a fresh grid."""
    header = stream.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise ValueError("truncated MZWF header")
    magic, version, n, eps, t, x_min, x_max = _HEADER.unpack(header)
    if magic != MZWF_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != MZWF_VERSION:
        raise ValueError(f"unsupported MZWF version {version}")
    raw = stream.read(16 * n)
    if len(raw) != 16 * n:
        raise ValueError("truncated MZWF payload")
    pairs = np.frombuffer(raw, dtype="<f8").reshape(n, 2)
    grid = Grid(x_min, x_max, int(n))
    return Wavefunction(grid, pairs[:, 0] + 1j * pairs[:, 1]), eps, t


def apply_grouped(grid: Grid, diag: np.ndarray | None, groups: dict, v: np.ndarray):
    """Apply ``D_diag + sum_k 1/2 (D_{g_k} K_k + K_k D_{g_k})`` to ``v``.

    ``groups`` maps derivative order ``k >= 1`` to the (complex) combined
    coefficient samples ``g_k``.  All orders share one forward transform of
    ``v``, one batched inverse, one batched forward of ``g_k * v`` and one
    final inverse, independent of how many orders are present.
    """
    from .kernels import symop_accumulate

    v = np.asarray(v, dtype=np.complex128)
    g0 = np.zeros(grid.n_points, complex) if diag is None else np.asarray(diag, complex)
    if not groups:
        return g0 * v
    orders = sorted(groups)
    if orders[0] < 1 or orders[-1] > MAX_DERIV_ORDER:
        raise ValueError(f"unsupported derivative orders {orders}")
    symbols = np.stack([grid.symbol(k) for k in orders])
    g = np.stack([np.asarray(groups[k], dtype=np.complex128) for k in orders])
    v_hat = np.fft.fft(v)
    post = np.fft.ifft(symbols * v_hat[None, :], axis=1)
    pre_hat = np.fft.fft(g * v[None, :], axis=1)
    second = np.fft.ifft(np.sum(symbols * pre_hat, axis=0))
    return symop_accumulate(g0, v, g, post) + 0.5 * second
