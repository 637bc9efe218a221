# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from .trajectory import EstimatorEvent, EstimatorTrajectory, TrajectoryEntry
from .estimator import (
    EstimatorConfig,
    MeasurementFrame,
    filter_update,
    flow_propagate,
    measurement_update,
    run_estimator,
    schedule_frames,
)
