"""Dense-matrix reference implementations for small grids.

Everything here is O(N^3) and meant only as ground truth in tests: exact
operator matrices, eigendecomposition-based exponentials, brute-force
commutators and the truncated symmetric BCH formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, Wavefunction
from .symops import SymOpSum, apply_symop

MAX_DENSE_DIM = 256
STRUCTURES = ("hermitian", "skew_hermitian", "general")


class DenseSizeError(ValueError):
    """Dense assembly requested on a grid larger than the cap."""


def _structure_defect(M: np.ndarray, structure: str) -> float:
    scale = max(np.linalg.norm(M), 1.0)
    if structure == "hermitian":
        return np.linalg.norm(M - M.conj().T) / scale
    if structure == "skew_hermitian":
        return np.linalg.norm(M + M.conj().T) / scale
    return 0.0


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Explicit ``n x n`` matrix with a verified structure tag."""

    entries: np.ndarray
    structure: str = "general"

    def __post_init__(self):
        M = np.asarray(self.entries, dtype=np.complex128)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {M.shape}")
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}")
        defect = _structure_defect(M, self.structure)
        if defect > 1e-10:
            raise ValueError(f"matrix is not {self.structure} (defect {defect:.2e})")
        object.__setattr__(self, "entries", M)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            return DenseOperator(self.entries @ other.entries)
        if isinstance(other, Wavefunction):
            return Wavefunction(other.grid, self.entries @ other.values)
        return self.entries @ other

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        tag = self.structure if self.structure == other.structure else "general"
        return DenseOperator(self.entries + other.entries, tag)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        tag = self.structure if self.structure == other.structure else "general"
        return DenseOperator(self.entries - other.entries, tag)

    def scaled(self, c: complex) -> "DenseOperator":
        return DenseOperator(c * self.entries, _scaled_tag(self.structure, c))


def _scaled_tag(structure: str, c: complex) -> str:
    c = complex(c)
    if structure == "general" or c == 0:
        return structure if c != 0 else "hermitian"
    if c.imag == 0:
        return structure
    if c.real == 0:
        return {"hermitian": "skew_hermitian", "skew_hermitian": "hermitian"}[structure]
    return "general"


def _term_structure(coeff: complex, k: int) -> str:
    # <f>_k with real f is Hermitian for even k and skew-Hermitian for odd k
    return _scaled_tag("hermitian" if k % 2 == 0 else "skew_hermitian", coeff)


def _check_size(n: int) -> None:
    if n > MAX_DENSE_DIM:
        raise DenseSizeError(f"dense paths are capped at n={MAX_DENSE_DIM}, got {n}")


def dense_of_symop(S: SymOpSum, grid: Grid) -> DenseOperator:
    """Assemble ``S`` column by column from its action on unit vectors."""
    n = grid.n_points
    _check_size(n)
    M = np.empty((n, n), dtype=np.complex128)
    for j in range(n):
        e = np.zeros(n, dtype=np.complex128)
        e[j] = 1.0
        M[:, j] = apply_symop(S, Wavefunction(grid, e)).values
    tags = {_term_structure(t.coeff, t.k) for t in S.terms if t.coeff != 0}
    tag = tags.pop() if len(tags) == 1 else ("hermitian" if not tags else "general")
    return DenseOperator(M, tag)


def dense_expm(A: DenseOperator) -> DenseOperator:
    """``exp(A)`` through the eigendecomposition of a Hermitian representative."""
    if A.structure == "general":
        raise ValueError("dense_expm accepts only Hermitian or skew-Hermitian input")
    _check_size(A.n)
    if A.structure == "skew_hermitian":
        H = -1j * A.entries
        H = 0.5 * (H + H.conj().T)
        lam, U = np.linalg.eigh(H)
        return DenseOperator((U * np.exp(1j * lam)) @ U.conj().T, "general")
    H = 0.5 * (A.entries + A.entries.conj().T)
    lam, U = np.linalg.eigh(H)
    return DenseOperator((U * np.exp(lam)) @ U.conj().T, "hermitian")


def brute_commutator(A: DenseOperator, B: DenseOperator) -> DenseOperator:
    """``AB - BA``."""
    if A.n != B.n:
        raise ValueError(f"dimension mismatch: {A.n} vs {B.n}")
    C = A.entries @ B.entries - B.entries @ A.entries
    same = A.structure == B.structure and A.structure != "general"
    # the commutator of two (skew-)Hermitian matrices of equal type is skew-Hermitian
    tag = "skew_hermitian" if same else "general"
    if {A.structure, B.structure} == {"hermitian", "skew_hermitian"}:
        tag = "hermitian"
    return DenseOperator(C, tag)


def sbch3(X: DenseOperator, Y: DenseOperator, h: float) -> DenseOperator:
    """Symmetric BCH exponent of ``exp(hX/2) exp(hY) exp(hX/2)`` through ``h**3``."""
    for name, M in (("X", X), ("Y", Y)):
        if M.structure != "skew_hermitian":
            raise ValueError(f"{name} must be skew-Hermitian")
    YX = brute_commutator(Y, X)
    third = brute_commutator(YX, X).entries / 24 + brute_commutator(YX, Y).entries / 12
    return DenseOperator(h * (X.entries + Y.entries) - h**3 * third, "skew_hermitian")


def reference_step(Theta: SymOpSum, u: Wavefunction) -> Wavefunction:
    """``exp(Theta) u`` with ``Theta`` assembled and exponentiated densely."""
    if not Theta.terms:
        return u.copy()
    A = dense_of_symop(Theta, u.grid)
    return dense_expm(A) @ u


# ---------------------------------------------------------------------------
# double-double arithmetic for local errors below double-precision roundoff
#
# A sixth-order local error at h = 2e-3 is around 1e-20, far under the 1e-16
# roundoff of a double-precision product of exponentials.  The helpers below
# apply dense exponentials in double-double (about 32 digits) to a vector;
# the matrices themselves stay in double, so both sides of a comparison see
# the same operators.

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    return _quick_two_sum(s, e + al + bl)


def _dd_rowsum(hi, lo):
    """Row sums of a double-double matrix by pairwise reduction."""
    while hi.shape[1] > 1:
        if hi.shape[1] % 2:
            pad = np.zeros((hi.shape[0], 1))
            hi = np.hstack([hi, pad])
            lo = np.hstack([lo, pad])
        hi, lo = _dd_add(hi[:, 0::2], lo[:, 0::2], hi[:, 1::2], lo[:, 1::2])
    return hi[:, 0], lo[:, 0]


def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    return _quick_two_sum(p, e + ah * bl + al * bh)


def _dd_matvec(Bh, Bl, xh, xl):
    p, e = _two_prod(Bh, xh[None, :])
    return _dd_rowsum(p, e + Bh * xl[None, :] + Bl * xh[None, :])


def _dd_div_int(h, l, k):
    q = h / k
    p, e = _two_prod(q, float(k))
    r = ((h - p) - e + l) / k
    return _quick_two_sum(q, r)


class ExtendedMatrix:
    """Complex matrix stored as double-double real and imaginary parts."""

    def __init__(self, re_hi, re_lo, im_hi, im_lo):
        self.re = (np.asarray(re_hi, float), np.asarray(re_lo, float))
        self.im = (np.asarray(im_hi, float), np.asarray(im_lo, float))

    @classmethod
    def from_complex(cls, M) -> "ExtendedMatrix":
        M = M.entries if isinstance(M, DenseOperator) else np.asarray(M, dtype=np.complex128)
        z = np.zeros(M.shape)
        return cls(M.real, z, M.imag, z.copy())

    @property
    def n(self) -> int:
        return self.re[0].shape[0]

    def __add__(self, other: "ExtendedMatrix") -> "ExtendedMatrix":
        return ExtendedMatrix(*_dd_add(*self.re, *other.re), *_dd_add(*self.im, *other.im))

    def scaled(self, c: complex) -> "ExtendedMatrix":
        """Multiply by a double-precision complex scalar."""
        c = complex(c)
        rr = _dd_mul(*self.re, c.real, 0.0)
        ii = _dd_mul(*self.im, c.imag, 0.0)
        ri = _dd_mul(*self.re, c.imag, 0.0)
        ir = _dd_mul(*self.im, c.real, 0.0)
        re = _dd_add(rr[0], rr[1], -ii[0], -ii[1])
        im = _dd_add(ri[0], ri[1], ir[0], ir[1])
        return ExtendedMatrix(*re, *im)

    def real_block(self):
        (rh, rl), (ih, il) = self.re, self.im
        return np.block([[rh, -ih], [ih, rh]]), np.block([[rl, -il], [il, rl]])

    def to_complex(self) -> np.ndarray:
        return (self.re[0] + self.re[1]) + 1j * (self.im[0] + self.im[1])


def _circulant_extended(grid: Grid, k: int) -> ExtendedMatrix:
    """``K_k`` with entries accurate to about 32 digits (mpmath, cached)."""
    key = ("dd", k)
    hit = grid._symbols.get(key)
    if hit is not None:
        return hit
    import mpmath

    n = grid.n_points
    with mpmath.workdps(40):
        L = mpmath.mpf(grid.x_max) - mpmath.mpf(grid.x_min)
        m = [mpmath.mpf(int(v)) for v in grid.frequencies]
        sym = []
        for mm in m:
            c = (2j * mpmath.pi * mm / L) ** k
            if k % 2 and abs(mm) == n // 2:
                c = mpmath.mpc(0)
            sym.append(c)
        # K_k[i, j] = (1/n) sum_m c_m exp(2 pi i m (i - j) / n)
        col = []
        for d in range(n):
            acc = mpmath.mpc(0)
            for mm, c in zip(m, sym):
                acc += c * mpmath.expjpi(2 * mm * d / n)
            col.append(acc / n)
        parts = np.zeros((4, n))
        for d, v in enumerate(col):
            for row, val in ((0, v.real), (2, v.imag)):
                hi = float(val)
                parts[row, d] = hi
                parts[row + 1, d] = float(val - hi)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    out = ExtendedMatrix(*(p[idx] for p in parts))
    grid._symbols[key] = out
    return out


def dense_of_symop_extended(S: SymOpSum, grid: Grid) -> ExtendedMatrix:
    """Double-double assembly of ``sum c <f>_k`` from the double samples of ``f``.

    Identical terms in two sums yield bit-identical contributions, which is
    what keeps rounding out of splitting-versus-Magnus comparisons.
    """
    n = grid.n_points
    _check_size(n)
    z = np.zeros((n, n))
    total = ExtendedMatrix(z, z, z, z)
    for t in S.terms:
        f = np.asarray(t.f.values, dtype=float)
        if t.k == 0:
            term = ExtendedMatrix(np.diag(f), z, z, z)
        else:
            K = _circulant_extended(grid, t.k)
            parts = []
            for h, l in (K.re, K.im):
                a = _dd_mul(h, l, f[:, None], 0.0)
                b = _dd_mul(h, l, f[None, :], 0.0)
                s_h, s_l = _dd_add(*a, *b)
                parts += [0.5 * s_h, 0.5 * s_l]
            term = ExtendedMatrix(*parts)
        total = total + term.scaled(t.coeff)
    return total


def to_extended(v) -> tuple[np.ndarray, np.ndarray]:
    """Complex vector to the stacked real double-double form ``(hi, lo)``."""
    if isinstance(v, tuple):
        return v
    v = np.asarray(v.values if isinstance(v, Wavefunction) else v, dtype=np.complex128)
    hi = np.concatenate([v.real, v.imag])
    return hi, np.zeros_like(hi)


def expv_extended(A, v, tol: float = 1e-33):
    """``exp(A) v`` in double-double by Taylor series with power-of-two scaling.

    ``A`` is an :class:`ExtendedMatrix`, a :class:`DenseOperator` or a complex
    array (entries taken as exact); ``v`` a complex vector or a pair returned
    by a previous call.
    """
    if not isinstance(A, ExtendedMatrix):
        A = ExtendedMatrix.from_complex(A)
    _check_size(A.n)
    Bh, Bl = A.real_block()
    norm = np.abs(Bh).sum(axis=0).max()
    squarings = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    Bh, Bl = Bh / 2.0**squarings, Bl / 2.0**squarings  # exact
    xh, xl = to_extended(v)
    for _ in range(2**squarings):
        yh, yl = xh.copy(), xl.copy()
        th, tl = xh, xl
        scale = max(np.abs(xh).max(), 1e-300)
        for k in range(1, 80):
            th, tl = _dd_matvec(Bh, Bl, th, tl)
            th, tl = _dd_div_int(th, tl, k)
            yh, yl = _dd_add(yh, yl, th, tl)
            if np.abs(th).max() < tol * scale:
                break
        xh, xl = yh, yl
    return xh, xl


def extended_distance(a, b, dx: float = 1.0) -> float:
    """Discrete L2 distance ``sqrt(dx) |a - b|`` of two double-double vectors."""
    ah, al = to_extended(a)
    bh, bl = to_extended(b)
    dh, dl = _dd_add(ah, al, -bh, -bl)
    return float(np.sqrt(dx) * np.linalg.norm(dh + dl))
