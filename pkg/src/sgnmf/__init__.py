"""Sparsity-constrained graph-regularized NMF for hyperspectral unmixing."""

from .core import ObservationMatrix, residual_fro, synthesize_lmm, validate_abundances
from .graph import AffinityGraph, build_knn_graph, graph_quadratic
from .initializers import init_fcls, init_random, init_vca, initialize
from .io import SpectralLibrary, load_cube, load_spectral_library
from .library import load_builtin_library
from .metrics import EvaluationReport, aad, match_endmembers, sad, score
from .solver import SolverConfig, UnmixResult, Variant, lambda_schedule, objective, run_unmix
from .synthgen import SceneSpec, SyntheticScene, generate_scene

__version__ = "0.1.0"

__all__ = [
    "AffinityGraph", "EvaluationReport", "ObservationMatrix", "SceneSpec", "SolverConfig",
    "SpectralLibrary", "SyntheticScene", "UnmixResult", "Variant", "aad", "build_knn_graph",
    "generate_scene", "graph_quadratic", "init_fcls", "init_random", "init_vca", "initialize",
    "lambda_schedule", "load_builtin_library", "load_cube", "load_spectral_library",
    "match_endmembers", "objective", "residual_fro", "run_unmix", "sad", "score",
    "synthesize_lmm", "validate_abundances",
]
