"""Hyperspectral unmixing via structured rank-(L, L, 1) block-term decomposition."""

from .datagen import add_noise, generate_synthetic
from .estimator import GradPAPA, max_identifiable_rank
from .exceptions import DegenerateInputError, InvalidDimsError, NumericalError
from .initialization import init_abundances, random_init, spa_endmembers
from .metrics import lr_feasibility, mse_factor, sto_feasibility
from .model import (
    HsiCube,
    ModelDims,
    check_identifiability,
    cube_to_matrix,
    matrix_to_cube,
    objective,
    synthesize,
)
from .projections import (
    ExactRank,
    NuclearBall,
    project_columns_simplex,
    project_feasible_set,
    project_nuclear_ball,
    project_rank,
    project_simplex,
)
from .solver import RunTrace, SolverConfig, run

__version__ = "0.1.0"

__all__ = [
    "GradPAPA",
    "HsiCube",
    "ModelDims",
    "ExactRank",
    "NuclearBall",
    "SolverConfig",
    "RunTrace",
    "run",
    "objective",
    "synthesize",
    "cube_to_matrix",
    "matrix_to_cube",
    "check_identifiability",
    "max_identifiable_rank",
    "project_simplex",
    "project_columns_simplex",
    "project_rank",
    "project_nuclear_ball",
    "project_feasible_set",
    "spa_endmembers",
    "init_abundances",
    "random_init",
    "generate_synthetic",
    "add_noise",
    "mse_factor",
    "sto_feasibility",
    "lr_feasibility",
    "DegenerateInputError",
    "InvalidDimsError",
    "NumericalError",
]
