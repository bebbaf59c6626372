"""Backend selection for the pointwise kernels.

The compiled extension is used when it was built; otherwise the numpy
versions are used.  Set ``MZSPLIT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("MZSPLIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

node_contract = _impl.node_contract
parity_split = _impl.parity_split
bilinear_contract = _impl.bilinear_contract
symop_accumulate = _impl.symop_accumulate

__all__ = [
    "BACKEND",
    "node_contract",
    "parity_split",
    "bilinear_contract",
    "symop_accumulate",
]
