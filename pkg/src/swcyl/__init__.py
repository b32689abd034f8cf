"""Lattice Seiberg-Witten solver on a cylinder over a flat torus.

Modules:
  lattice    torus geometry, U(1) link fields, background flux, gauge fixing
  vortex     r-rescaled vortex equations on the torus (boundary data)
  spectrum   boundary deformation operator, its spectrum and pairing
  harmonic   admissible coordinate function f (weighted Laplace solve)
  cylinder   Seiberg-Witten equations on [-T,T] x torus, least-squares solve
  estimates  a-priori bound checks, decay fits, moduli dimension bookkeeping
  fieldio    field dumps, canonical JSON reports, CSV profiles
  pipeline   end-to-end run and checks report
  cli        command line entry points

Set SWCYL_FORCE_REF=1 to bypass the compiled kernels.
"""

from ._backend import BACKEND
from .cylinder import (BoundaryData, SWCylinderProblem, SWCylinderSolution,
                       boundary_from_vortex, pullback_state, solve_sw_cylinder,
                       sw_residual)
from .estimates import ModuliDimension, moduli_dimension, reference_table
from .harmonic import CylinderGeometry, solve_admissible_function
from .lattice import GaugeField, MatterField, TorusGeometry, build_torus
from .spectrum import spectrum_report
from .vortex import VortexProblem, VortexSolution, solve_vortex

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BoundaryData", "CylinderGeometry", "GaugeField",
    "MatterField", "ModuliDimension", "SWCylinderProblem",
    "SWCylinderSolution", "TorusGeometry", "VortexProblem", "VortexSolution",
    "boundary_from_vortex", "build_torus", "moduli_dimension",
    "pullback_state", "reference_table", "solve_admissible_function",
    "solve_sw_cylinder", "solve_vortex", "spectrum_report", "sw_residual",
    "__version__",
]
