"""Two-time response functions of weakly coupled open quantum systems.

The generalized (non-Markovian) regression formula, the standard regression
prediction and an exact system-plus-bath oracle, built on dense numpy
superoperators.
"""
__version__ = "0.1.0"

from .bath import BathSpectrum, CoupledSystem, ExplicitBath, bcf, bcf_exact, gibbs_state
from .generators import GeneratorBundle, coefficient_matrix, cumulant_M2, hermitian_basis, tl_generator
from .operators import DimensionError, InvariantError, SuperOperator, gks_superop
from .oracle import chi_exact_compact, chi_exact_kubo
from .propagation import PropagationConfig, time_ordered_propagate
from .response import ResponseEngine, ResponseRequest, chi_closed, chi_generalized, chi_qrt, sweep
from .scenario import Scenario, ScenarioError, load_fixture, load_scenario

__all__ = [
    "BathSpectrum", "CoupledSystem", "ExplicitBath", "bcf", "bcf_exact", "gibbs_state",
    "GeneratorBundle", "coefficient_matrix", "cumulant_M2", "hermitian_basis", "tl_generator",
    "DimensionError", "InvariantError", "SuperOperator", "gks_superop",
    "chi_exact_compact", "chi_exact_kubo", "PropagationConfig", "time_ordered_propagate",
    "ResponseEngine", "ResponseRequest", "chi_closed", "chi_generalized", "chi_qrt", "sweep",
    "Scenario", "ScenarioError", "load_fixture", "load_scenario",
]
