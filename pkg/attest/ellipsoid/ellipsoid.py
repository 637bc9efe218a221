# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from dataclasses import dataclass
from typing import Union

import torch

from attest.dynamics import AttitudeState
from attest.errors import NotSPDError
from attest.tolerances import get_tolerances


def check_shape_matrix(shape: torch.Tensor, dim: int):
    if shape.ndim != 3 or shape.shape[1:] != (dim, dim):
        raise ValueError(
            f"Shape matrices must have shape (B, {dim}, {dim}), "
            f"got {tuple(shape.shape)}."
        )
    tol = get_tolerances().symmetry_rel
    scale = torch.linalg.matrix_norm(shape)
    asym = torch.linalg.matrix_norm(shape - shape.transpose(1, 2))
    if (asym > tol * scale).any():
        raise NotSPDError(
            "Shape matrix is not symmetric.",
            batch_indices=(asym > tol * scale).nonzero().view(-1).tolist(),
        )
    min_eig = torch.linalg.eigvalsh(shape)[:, 0]
    if (min_eig <= 0).any():
        raise NotSPDError(
            "Shape matrix is not positive definite "
            f"(smallest eigenvalue {min_eig.min().item():.3e}).",
            batch_indices=(min_eig <= 0).nonzero().view(-1).tolist(),
        )


# x^T P^{-1} x for a batch of vectors x (B, N) and shapes P (B, N, N).
def quadratic_form(shape: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    return (x * torch.linalg.solve(shape, x.unsqueeze(-1)).squeeze(-1)).sum(dim=-1)


# The set {x : (x - c)^T P^{-1} (x - c) <= 1} in R^N, batched.
@dataclass
class Ellipsoid:
    center: torch.Tensor
    shape: torch.Tensor

    def __post_init__(self):
        if self.center.ndim == 1:
            self.center = self.center.unsqueeze(0)
        if self.shape.ndim == 2:
            self.shape = self.shape.unsqueeze(0)
        dim = self.center.shape[1]
        check_shape_matrix(self.shape, dim)
        if self.shape.shape[0] != self.center.shape[0]:
            if self.shape.shape[0] == 1:
                self.shape = self.shape.expand(self.center.shape[0], dim, dim)
            else:
                raise ValueError("Center and shape batch sizes do not match.")

    @property
    def dim(self) -> int:
        return self.center.shape[1]

    @property
    def batch_size(self) -> int:
        return self.center.shape[0]


# The set {(C_hat exp(S(zeta)), omega_hat + delta_omega) :
#          [zeta; delta_omega]^T P^{-1} [zeta; delta_omega] <= 1}
# on the tangent bundle of SO(3), batched.
@dataclass
class StateEllipsoid:
    rotation: torch.Tensor
    angular_velocity: torch.Tensor
    shape: torch.Tensor

    def __post_init__(self):
        center = AttitudeState(self.rotation, self.angular_velocity)
        self.rotation = center.rotation
        self.angular_velocity = center.angular_velocity
        if self.shape.ndim == 2:
            self.shape = self.shape.unsqueeze(0)
        check_shape_matrix(self.shape, 6)
        if self.shape.shape[0] != center.batch_size:
            if self.shape.shape[0] == 1:
                self.shape = self.shape.expand(center.batch_size, 6, 6)
            else:
                raise ValueError("Center and shape batch sizes do not match.")

    @staticmethod
    def from_center(center: AttitudeState, shape: torch.Tensor) -> "StateEllipsoid":
        return StateEllipsoid(center.rotation, center.angular_velocity, shape)

    @property
    def center(self) -> AttitudeState:
        return AttitudeState(self.rotation, self.angular_velocity)

    @property
    def batch_size(self) -> int:
        return self.rotation.shape[0]

    def trace(self) -> torch.Tensor:
        return torch.diagonal(self.shape, dim1=1, dim2=2).sum(dim=1)

    def copy(self) -> "StateEllipsoid":
        return StateEllipsoid(
            self.rotation.clone(),
            self.angular_velocity.clone(),
            self.shape.clone(),
        )

    def __getitem__(self, idx: Union[int, slice, torch.Tensor]) -> "StateEllipsoid":
        if isinstance(idx, int):
            idx = slice(idx, idx + 1)
        return StateEllipsoid(
            self.rotation[idx], self.angular_velocity[idx], self.shape[idx]
        )


def contains(ellipsoid: Ellipsoid, x: torch.Tensor) -> torch.Tensor:
    if x.ndim == 1:
        x = x.unsqueeze(0)
    value = quadratic_form(ellipsoid.shape, x - ellipsoid.center)
    return value <= 1 + get_tolerances().membership


# Coordinates [zeta; delta_omega] of (rotation, angular_velocity) about the
# center of the ellipsoid.
def state_error(
    ellipsoid: StateEllipsoid, rotation: torch.Tensor, angular_velocity: torch.Tensor
) -> torch.Tensor:
    return ellipsoid.center.local(AttitudeState(rotation, angular_velocity))


def state_contains(
    ellipsoid: StateEllipsoid, rotation: torch.Tensor, angular_velocity: torch.Tensor
) -> torch.Tensor:
    x = state_error(ellipsoid, rotation, angular_velocity)
    value = quadratic_form(ellipsoid.shape, x)
    return value <= 1 + get_tolerances().membership
