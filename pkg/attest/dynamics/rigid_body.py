# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import torch

from attest import constants
from attest.geometry import so3


@dataclass
class InertiaParams:
    inertia: torch.Tensor
    step_size: float
    orbital_rate: float = 1.0

    def __post_init__(self):
        inertia = torch.as_tensor(self.inertia, dtype=constants.DEFAULT_DTYPE)
        if inertia.shape != (3, 3):
            raise ValueError(
                f"Inertia must be a 3x3 matrix, got shape {tuple(inertia.shape)}."
            )
        if not torch.allclose(inertia, inertia.T, rtol=0.0, atol=1e-12):
            raise ValueError("Inertia matrix must be symmetric.")
        moments = torch.linalg.eigvalsh(inertia)
        if (moments <= 0).any():
            raise ValueError("Inertia matrix must be positive definite.")
        total = moments.sum()
        if (moments > total - moments + 1e-12).any():
            raise ValueError(
                "Principal moments of inertia violate the triangle inequality: "
                f"{moments.tolist()}."
            )
        if not self.step_size > 0:
            raise ValueError(f"Step size must be positive, got {self.step_size}.")
        if self.orbital_rate < 0:
            raise ValueError("Orbital rate must be non-negative.")
        self.inertia = inertia
        self._inertia_d = 0.5 * torch.trace(inertia) * torch.eye(3).to(
            inertia
        ) - inertia

    @staticmethod
    def from_principal_moments(
        moments: Sequence[float], step_size: float, orbital_rate: float = 1.0
    ) -> "InertiaParams":
        return InertiaParams(
            torch.diag(torch.tensor(moments, dtype=constants.DEFAULT_DTYPE)),
            step_size,
            orbital_rate=orbital_rate,
        )

    # J_d = tr(J)/2 I - J
    @property
    def inertia_d(self) -> torch.Tensor:
        return self._inertia_d

    def to(self, *args, **kwargs) -> "InertiaParams":
        self.inertia = self.inertia.to(*args, **kwargs)
        self._inertia_d = self._inertia_d.to(*args, **kwargs)
        return self


# A batch of rigid-body states: rotation (B, 3, 3) and body angular velocity
# (B, 3). Perturbation coordinates are x = [zeta; delta_omega] with
# C = C_hat exp(S(zeta)), omega = omega_hat + delta_omega.
@dataclass
class AttitudeState:
    rotation: torch.Tensor
    angular_velocity: torch.Tensor

    def __post_init__(self):
        if self.rotation.ndim == 2:
            self.rotation = self.rotation.unsqueeze(0)
        if self.angular_velocity.ndim == 1:
            self.angular_velocity = self.angular_velocity.unsqueeze(0)
        if self.rotation.shape[1:] != (3, 3):
            raise ValueError("Rotation batch must have shape (B, 3, 3).")
        if self.angular_velocity.shape != (self.rotation.shape[0], 3):
            raise ValueError(
                "Angular velocity batch must have shape (B, 3) matching the "
                "rotation batch."
            )

    @property
    def batch_size(self) -> int:
        return self.rotation.shape[0]

    @property
    def dtype(self) -> torch.dtype:
        return self.rotation.dtype

    @property
    def device(self) -> torch.device:
        return self.rotation.device

    @staticmethod
    def dof() -> int:
        return 6

    def retract(self, delta: torch.Tensor) -> "AttitudeState":
        return AttitudeState(
            self.rotation @ so3.exp(delta[:, :3]),
            self.angular_velocity + delta[:, 3:],
        )

    def local(self, other: "AttitudeState") -> torch.Tensor:
        zeta = so3.log(self.rotation.transpose(1, 2) @ other.rotation)
        return torch.cat([zeta, other.angular_velocity - self.angular_velocity], dim=1)

    def repeat(self, n: int) -> "AttitudeState":
        return AttitudeState(
            self.rotation.repeat(n, 1, 1), self.angular_velocity.repeat(n, 1)
        )

    def __getitem__(self, idx: Union[int, slice, torch.Tensor]) -> "AttitudeState":
        if isinstance(idx, int):
            idx = slice(idx, idx + 1)
        return AttitudeState(self.rotation[idx], self.angular_velocity[idx])

    def copy(self) -> "AttitudeState":
        return AttitudeState(self.rotation.clone(), self.angular_velocity.clone())


# -----------------------------------------------------------------------------
# Gravity-gradient potential on a circular orbit (normalized units)
#
#   U(C) = (3 w_c^2 / 2) r^T J r,   r = C^T e3
#   M    = 3 w_c^2 r x (J r)
#
# M is minus the gradient of U along body-frame perturbations C exp(S(xi)).
# -----------------------------------------------------------------------------
def _radial_direction(rotation: torch.Tensor) -> torch.Tensor:
    return rotation[:, 2, :]


def potential_energy(rotation: torch.Tensor, params: InertiaParams) -> torch.Tensor:
    r = _radial_direction(rotation)
    jr = r @ params.inertia.to(r)
    return 1.5 * params.orbital_rate**2 * (r * jr).sum(dim=1)


def potential_moment(rotation: torch.Tensor, params: InertiaParams) -> torch.Tensor:
    r = _radial_direction(rotation)
    jr = r @ params.inertia.to(r)
    return 3 * params.orbital_rate**2 * torch.linalg.cross(r, jr, dim=1)


def kinetic_energy(
    angular_velocity: torch.Tensor, params: InertiaParams
) -> torch.Tensor:
    jw = angular_velocity @ params.inertia.to(angular_velocity)
    return 0.5 * (angular_velocity * jw).sum(dim=1)


def total_energy(state: AttitudeState, params: InertiaParams) -> torch.Tensor:
    return kinetic_energy(state.angular_velocity, params) + potential_energy(
        state.rotation, params
    )


# J dw/dt + w x J w = M,  dC/dt = C S(w)
def continuous_dynamics(
    state: AttitudeState, params: InertiaParams
) -> Tuple[torch.Tensor, torch.Tensor]:
    inertia = params.inertia.to(state.rotation)
    omega = state.angular_velocity
    jw = omega @ inertia
    moment = potential_moment(state.rotation, params)
    rhs = moment - torch.linalg.cross(omega, jw, dim=1)
    omega_dot = torch.linalg.solve(inertia, rhs.unsqueeze(-1)).squeeze(-1)
    return state.rotation @ so3.hat(omega), omega_dot
