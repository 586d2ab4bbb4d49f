"""Train binary neural networks by compiling the training problem into a QUBO."""

from .bnn import BnnArchitecture, LabeledDataset, WeightSet, enumerate_optimal_weights
from .builder import BuildOptions, build_training_qubo, decode_weights, witness_assignment
from .qubo import Qubo
from .solvers import SaSchedule, solve_exhaustive, solve_sa

__version__ = "0.1.0"

__all__ = [
    "BnnArchitecture",
    "BuildOptions",
    "LabeledDataset",
    "Qubo",
    "SaSchedule",
    "WeightSet",
    "build_training_qubo",
    "decode_weights",
    "enumerate_optimal_weights",
    "solve_exhaustive",
    "solve_sa",
    "witness_assignment",
]
