# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
__version__ = "0.1.0"

from .constants import DeviceType as DeviceType

from .errors import (  # usort: skip
    AllDegenerateError,
    AttestError,
    ConfigError,
    DegenerateObservationsError,
    EmptyIntersectionError,
    IllConditionedError,
    NoConvergenceError,
    NotSkewError,
    NotSPDError,
    SingularMatrixError,
)
from .tolerances import Tolerances, get_tolerances, set_tolerances
from .geometry import (  # usort: skip
    exp_so3,
    hat,
    is_rotation,
    jexp_so3,
    log_so3,
    project,
    qr_special,
    rand_so3,
    spd_sqrt,
    vee,
)
from .determination import (  # usort: skip
    VectorObservations,
    attitude_profile_matrix,
    measurement_jacobians,
    optimality_residual,
    solve_wahba,
    wahba_cost,
)
from .dynamics import (  # usort: skip
    AttitudeState,
    ImplicitSolverParams,
    InertiaParams,
    continuous_dynamics,
    lgvi_integrate,
    lgvi_step,
    linearize_step,
    potential_energy,
    potential_moment,
    solve_implicit_f,
    total_energy,
)
from .ellipsoid import (  # usort: skip
    Ellipsoid,
    IntersectionSearchParams,
    StateEllipsoid,
    contains,
    intersection_shape,
    minimal_intersection,
    minimal_sum,
    principal_axis,
    propagate,
    state_contains,
)
from .estimator import (  # usort: skip
    EstimatorConfig,
    EstimatorEvent,
    EstimatorTrajectory,
    MeasurementFrame,
    filter_update,
    flow_propagate,
    measurement_update,
    run_estimator,
    schedule_frames,
)

from . import sim  # noqa: F401
