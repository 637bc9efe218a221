# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
import time
from typing import Any, Callable

import torch

from attest.constants import DeviceType


# Computes the jacobian of a map between manifold-valued batches by central
# differences in local coordinates.
#   function: the map, taking and returning objects with retract/local
#   point: where the jacobian is computed
#   delta_mag: magnitude of the differences used to compute the jacobian
#
# Returns a batch_size x out_dof x in_dof tensor with column d equal to
#   function(point - delta e_d).local(function(point + delta e_d)) / (2 delta)
def numeric_jacobian(
    function: Callable[[Any], Any],
    point: Any,
    delta_mag: float = 1e-6,
) -> torch.Tensor:
    dof = point.dof()
    columns = []
    for d in range(dof):
        delta = torch.zeros(1, dof, dtype=point.dtype, device=point.device)
        delta[:, d] = delta_mag
        delta = delta.expand(point.batch_size, dof)
        out_plus = function(point.retract(delta))
        out_minus = function(point.retract(-delta))
        columns.append(out_minus.local(out_plus) / (2 * delta_mag))
    return torch.stack(columns, dim=2)


def symmetrize(matrix: torch.Tensor) -> torch.Tensor:
    return 0.5 * (matrix + matrix.transpose(-1, -2))


# A basic timer utility that adapts to the device.
# For CPU it uses time.perf_counter_ns()
# For GPU it uses torch.cuda.Event()
#
# Usage:
#
# from attest.utils import Timer
#
# with Timer("cpu") as timer:
#    run_scenario(cfg)
# print(timer.elapsed_time)
class Timer:
    def __init__(self, device: DeviceType = "cpu") -> None:
        self.device = torch.device(device)
        self.elapsed_time = 0.0

    def __enter__(self) -> "Timer":
        if self.device.type == "cuda":
            self._start_event = torch.cuda.Event(enable_timing=True)
            self._end_event = torch.cuda.Event(enable_timing=True)
            self._start_event.record()
        else:
            self._start_time = time.perf_counter_ns()
        return self

    def __exit__(self, exc_type: Any, exc_value: Any, traceback: Any) -> None:
        if self.device.type == "cuda":
            self._end_event.record()
            torch.cuda.synchronize()
            self.elapsed_time = self._start_event.elapsed_time(self._end_event) / 1e3
        else:
            self.elapsed_time = (time.perf_counter_ns() - self._start_time) / 1e9
