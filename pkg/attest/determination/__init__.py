# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from .wahba import (
    VectorObservations,
    attitude_profile_matrix,
    measurement_jacobians,
    optimality_residual,
    solve_wahba,
    wahba_cost,
)
