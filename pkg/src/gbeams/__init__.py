"""Gaussian beam superpositions for the semiclassical Schrödinger and wave equations."""
from .jets import Jet
from .problems import AssumptionError, InitialData, ProblemSpec
from .superposition import BeamLattice, CutoffSpec, WaveField, build_lattice, evaluate_superposition

__all__ = ["AssumptionError", "BeamLattice", "CutoffSpec", "InitialData", "Jet", "ProblemSpec", "WaveField",
           "build_lattice", "evaluate_superposition"]
__version__ = "0.1.0"
