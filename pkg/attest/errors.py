# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from typing import Optional, Sequence


class AttestError(Exception):
    def __init__(
        self,
        message: str,
        batch_indices: Optional[Sequence[int]] = None,
        step: Optional[int] = None,
    ):
        super().__init__(message)
        self.message = message
        self.batch_indices = list(batch_indices) if batch_indices is not None else None
        self.step = step

    def __str__(self) -> str:
        msg = self.message
        if self.batch_indices is not None:
            msg += f" Batch indices: {self.batch_indices}."
        if self.step is not None:
            msg = f"[step {self.step}] " + msg
        return msg


class NotSkewError(AttestError, ValueError):
    pass


class NotSPDError(AttestError, ValueError):
    pass


class SingularMatrixError(AttestError, ValueError):
    pass


class DegenerateObservationsError(AttestError, ValueError):
    pass


class AllDegenerateError(AttestError, ValueError):
    pass


class ConfigError(AttestError, ValueError):
    pass


class IllConditionedError(AttestError, RuntimeError):
    pass


class NoConvergenceError(AttestError, RuntimeError):
    pass


class EmptyIntersectionError(AttestError, RuntimeError):
    pass
