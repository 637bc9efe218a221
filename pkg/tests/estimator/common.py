# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from typing import Optional

import torch

from attest.constants import DEG
from attest.dynamics import AttitudeState, InertiaParams
from attest.estimator import EstimatorConfig, MeasurementFrame
from attest.geometry import so3
from tests.common import inertia_diag


def make_config(
    h: float = 0.01, direction_bound: float = 7 * DEG, velocity_bound: float = 7 * DEG
) -> EstimatorConfig:
    eye = torch.eye(3, dtype=torch.float64)
    return EstimatorConfig(
        InertiaParams(inertia_diag(1.0, 2.8, 2.0), h),
        references=eye.clone(),
        weights=torch.ones(3, dtype=torch.float64),
        direction_bounds=direction_bound**2 * eye.expand(3, 3, 3).clone(),
        angular_velocity_bound=velocity_bound**2 * eye,
    )


# b~^i = exp(-S(nu^i)) C^T e^i, omega~ = omega - upsilon.
def make_frame(
    truth: AttitudeState,
    cfg: EstimatorConfig,
    nu: Optional[torch.Tensor] = None,
    upsilon: Optional[torch.Tensor] = None,
) -> MeasurementFrame:
    batch_size = truth.batch_size
    m = cfg.num_observations
    if nu is None:
        nu = torch.zeros(batch_size, m, 3, dtype=torch.float64)
    if upsilon is None:
        upsilon = torch.zeros(batch_size, 3, dtype=torch.float64)
    true_directions = truth.rotation.transpose(1, 2) @ cfg.references
    columns = [
        (so3.exp(-nu[:, i]) @ true_directions[:, :, i : i + 1]).squeeze(-1)
        for i in range(m)
    ]
    return MeasurementFrame(
        torch.stack(columns, dim=2), truth.angular_velocity - upsilon
    )
