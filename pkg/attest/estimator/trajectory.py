# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Tuple

from attest.ellipsoid import StateEllipsoid


class EstimatorEvent(Enum):
    INITIAL = "initial"
    PREDICTED = "predicted"
    MEASURED = "measured"
    FUSED = "fused"


# Events that carry the estimator's current estimate (MEASURED does not).
_ESTIMATE_EVENTS = (
    EstimatorEvent.INITIAL,
    EstimatorEvent.PREDICTED,
    EstimatorEvent.FUSED,
)


@dataclass
class TrajectoryEntry:
    step: int
    event: EstimatorEvent
    ellipsoid: StateEllipsoid


@dataclass
class EstimatorTrajectory:
    entries: List[TrajectoryEntry] = field(default_factory=list)

    def append(self, step: int, event: EstimatorEvent, ellipsoid: StateEllipsoid):
        self.entries.append(TrajectoryEntry(step, event, ellipsoid))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TrajectoryEntry]:
        return iter(self.entries)

    def events(self, event: EstimatorEvent) -> List[TrajectoryEntry]:
        return [e for e in self.entries if e.event == event]

    # The current estimate at every recorded step: the fused ellipsoid at
    # measurement steps, the predicted (or initial) one elsewhere.
    def estimates(self) -> List[Tuple[int, StateEllipsoid]]:
        by_step = {}
        for entry in self.entries:
            if entry.event in _ESTIMATE_EVENTS:
                by_step[entry.step] = entry.ellipsoid
        return sorted(by_step.items(), key=lambda item: item[0])

    @property
    def final(self) -> StateEllipsoid:
        estimates = self.estimates()
        if not estimates:
            raise ValueError("Trajectory holds no estimates.")
        return estimates[-1][1]
