# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from .rigid_body import (  # usort: skip
    AttitudeState,
    InertiaParams,
    continuous_dynamics,
    kinetic_energy,
    potential_energy,
    potential_moment,
    total_energy,
)
from .lgvi import (
    ImplicitSolverParams,
    lgvi_integrate,
    lgvi_step,
    linearize_step,
    solve_implicit_f,
)
