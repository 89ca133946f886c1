"""Shrinking-horizon robust nonlinear MPC with set-valued error propagation,
LQR-based constraint tightening, a successive-linearization trajectory
optimizer, and a fallback-guaranteed closed-loop controller."""

from .errors import (
    ConfigError,
    DimensionError,
    InitialTrajectoryError,
    ShrinkMpcError,
    SingularityError,
)
from .ltv import LtvModel, ReferenceTrajectory, linearize_along, lqr_gains, rollout
from .models import (
    DisturbanceSpec,
    FtmsModel,
    FtmsParams,
    LinearPlant,
    ModelSignature,
    OutputMap,
    PlantModel,
    default_disturbance_profile,
    ftms_output_map,
    sample_profile,
)
from .sets import (
    Interval,
    Zonotope,
    cartesian_product,
    contains,
    interval_hull,
    linear_map,
    minkowski_sum,
    pontryagin_diff_interval,
)
from .ranges import (
    ScalarRange,
    range_abs_sup,
    range_add,
    range_mul,
    range_recip,
)
from .tightening import (
    ErrorSets,
    TightenedConstraints,
    lagrange_remainder_bound,
    propagate_error_sets,
    tighten_constraints,
)

__version__ = "0.1.0"
