"""Magnus-Zassenhaus splittings for the semiclassical Schrödinger equation."""

from .grid import (Grid, GridFunction, GridMismatchError, Wavefunction, deriv,
                   energy, exp_circulant, exp_diag, l2_error, l2_norm,
                   read_mzwf, total_energy, write_mzwf)
from .integrals import PotentialModel, build_tables, gl_rule
from .kernels import BACKEND
from .krylov import LanczosConfig, lanczos_expv
from .propagators import StepContext, evolve, step
from .symops import Coefficient, SymOpSum, SymTerm, apply_symop

__all__ = [
    "BACKEND", "Coefficient", "Grid", "GridFunction", "GridMismatchError",
    "LanczosConfig", "PotentialModel", "StepContext", "SymOpSum", "SymTerm",
    "Wavefunction", "apply_symop", "build_tables", "deriv", "energy", "evolve",
    "exp_circulant", "exp_diag", "gl_rule", "l2_error", "l2_norm",
    "lanczos_expv", "read_mzwf", "step", "total_energy", "write_mzwf",
]
