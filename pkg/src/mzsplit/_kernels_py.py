"""Pure-numpy versions of the pointwise kernels.

Signatures mirror ``_kernels.pyx`` exactly; :mod:`mzsplit.kernels` picks one
of the two at import time.
"""

import numpy as np


def node_contract(weights, samples):
    """Return ``sum_i weights[i] * samples[i, :]``."""
    return np.asarray(weights, dtype=np.float64) @ np.asarray(samples, dtype=np.float64)


def parity_split(samples):
    """Split node samples into their even/odd parts about the step midpoint.

    Node ``i`` is paired with node ``n - 1 - i``, which is its mirror image
    for any rule symmetric about ``h/2``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    mirrored = samples[::-1]
    return 0.5 * (samples + mirrored), 0.5 * (samples - mirrored)


def bilinear_contract(coeffs, a, b):
    """Return ``out[x] = sum_ij coeffs[i, j] * a[i, x] * b[j, x]``."""
    return np.einsum("ix,ix->x", a, coeffs @ b)


def symop_accumulate(g0, v, g, t):
    """Return ``g0 * v + 0.5 * sum_k g[k] * t[k]``."""
    out = g0 * v
    if g.shape[0]:
        out = out + 0.5 * np.einsum("kx,kx->x", g, t)
    return out
