# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import dataclasses
import threading
from dataclasses import dataclass
from typing import Any


@dataclass(frozen=True)
class Tolerances:
    # so3-core
    rotation: float = 1e-10
    skew: float = 1e-8
    spd_eig: float = 1e-14
    singular_rel: float = 1e-12
    # wahba
    unit_norm: float = 1e-9
    residual_rel: float = 1e-8
    max_condition: float = 1e8
    # ellipsoid
    symmetry_rel: float = 1e-10
    membership: float = 1e-9
    # estimator
    bch_warning: float = 0.5


class _ToleranceContext:
    contexts = threading.local()

    @classmethod
    def get_context(cls) -> Tolerances:
        if not hasattr(cls.contexts, "tolerances"):
            cls.contexts.tolerances = Tolerances()
        return cls.contexts.tolerances

    @classmethod
    def set_context(cls, tolerances: Tolerances):
        cls.contexts.tolerances = tolerances


def get_tolerances() -> Tolerances:
    return _ToleranceContext.get_context()


# Usage:
#
#   with set_tolerances(max_condition=1e10):
#       measurement_jacobians(obs, C_hat)
#
# Overrides are thread-local and restored on exit.
class set_tolerances:
    def __init__(self, **overrides: float) -> None:
        valid = {f.name for f in dataclasses.fields(Tolerances)}
        for name in overrides:
            if name not in valid:
                raise ValueError(f"Invalid tolerance name {name}.")
        self.prev = _ToleranceContext.get_context()
        self.new = dataclasses.replace(self.prev, **overrides)

    def __enter__(self) -> Tolerances:
        _ToleranceContext.set_context(self.new)
        return self.new

    def __exit__(self, exc_type: Any, exc_value: Any, traceback: Any) -> None:
        _ToleranceContext.set_context(self.prev)
