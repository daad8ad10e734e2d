"""Numerical laboratory for energy-critical equivariant wave maps R^{1+2} -> surfaces of revolution.

Modules
-------
fields      grids, field states, targets, energies, norms, degree, Bogomolny split
static      ground-state harmonic maps Q_ell for any target
evolve      leapfrog evolution of the psi equation and of the 4d reduction
linear      free radial waves, the repulsive 2d operator, exterior energy
modulation  scale fits, radiation extraction, bubbling certificates
diagnostics virial balance and backward-cone quantities
scenarios   initial-data recipes and the sweep runner
cli         ``python -m wavemap_lab``
"""

from .evolve import EvolutionTrace, SolverConfig, evolve, evolve_reduced, fit_blowup_time, step
from .fields import (
    EnergyReport,
    FieldState,
    RadialGrid,
    TargetGeometry,
    bogomolny_split,
    classify_degree,
    energy,
    G_accumulate,
    h_norm,
    pointwise_bound,
)
from .linear import LinearState, evolve_free, evolve_repulsive_2d, exterior_energy
from .modulation import ModulationFit, bubbling_extract, fit_scale
from .static import E_Q, HarmonicProfile, ground_state, harmonic_residual

__all__ = [
    "E_Q",
    "EnergyReport",
    "EvolutionTrace",
    "FieldState",
    "G_accumulate",
    "HarmonicProfile",
    "LinearState",
    "ModulationFit",
    "RadialGrid",
    "SolverConfig",
    "TargetGeometry",
    "bogomolny_split",
    "bubbling_extract",
    "classify_degree",
    "energy",
    "evolve",
    "evolve_free",
    "evolve_reduced",
    "evolve_repulsive_2d",
    "exterior_energy",
    "fit_blowup_time",
    "fit_scale",
    "ground_state",
    "h_norm",
    "harmonic_residual",
    "pointwise_bound",
    "step",
]
