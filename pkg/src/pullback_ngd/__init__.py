"""Natural gradient descent with metrics pulled back from a reference space."""

from .metric import (
    CgNotConverged,
    CgSolverConfig,
    DimensionError,
    HessianRegularization,
    MetricOperator,
    ReferenceMap,
    ReferenceMetric,
    cg_solve,
    default_ridge,
    estimate_min_eigenvalue,
    euclidean_reference,
    fisher_metric,
    hessian_reference,
    identity_operator,
    pullback_metric,
)
from .optim import (
    LineSearchConfig,
    LineSearchFailed,
    NonFiniteError,
    OptimizerConfig,
    Problem,
    RunTrace,
    StepRecord,
    gradient_descent_direction,
    line_search,
    natural_direction,
    nonlinear_cg_direction,
    optimize,
)
from .mps import MPSLayout, MPSState, TargetData
from .rayleigh import RayleighInstance
from .spin import SpinLattice

__version__ = "0.1.0"
