"""Weighted Sobolev metrics on spaces of immersed closed curves."""

from .ambient import Euclidean, Sphere, ambient_from_dict
from .calculus import Grid, d_theta, integrate, interp_periodic
from .errors import (
    DegenerateImmersionError,
    DomainError,
    FileFormatError,
    FlowBreakdownError,
    InputShapeError,
    LiftBreakdownError,
    ShapeGeoError,
    SolverError,
    SpecError,
    UnsupportedError,
)
from .geodesic import (
    GeodesicPath,
    horizontal_decompose,
    horizontal_lift,
    horizontality_residual,
    match_bvp,
    shoot_momentum,
    shoot_velocity,
)
from .geometry import Immersion, induced_geometry
from .invariants import (
    area_swept,
    conservation_drift,
    conserved_quantities,
    distance_bound_check,
    scale_invariance_check,
    vol_lipschitz_check,
)
from .kernels import BACKEND
from .metric_spec import (
    Conformal,
    Constant,
    CurvatureWeighted,
    Exponential,
    Power,
    ScaleInvariantSobolev,
    WeightedSobolev,
    spec_from_dict,
)
from .metrics import H_gradient, K_gradient, adjoint, eval_metric
from .operators import OperatorHandle, assemble_P, laplacian, laplacian_power

__version__ = "0.1.0"
