# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from dataclasses import dataclass

import torch

from attest.errors import (
    DegenerateObservationsError,
    IllConditionedError,
    SingularMatrixError,
)
from attest.geometry import so3
from attest.tolerances import get_tolerances


# Weighted direction observations for a batch of B instants.
#   references: (B, 3, m), unit directions e^i in the reference frame
#   directions: (B, 3, m), unit directions b~^i measured in the body frame
#   weights:    (B, m), positive
# references and weights with batch size 1 are broadcast to the batch size of
# directions.
@dataclass
class VectorObservations:
    references: torch.Tensor
    directions: torch.Tensor
    weights: torch.Tensor

    def __post_init__(self):
        if self.directions.ndim == 2:
            self.directions = self.directions.unsqueeze(0)
        if self.references.ndim == 2:
            self.references = self.references.unsqueeze(0)
        if self.weights.ndim == 1:
            self.weights = self.weights.unsqueeze(0)
        if self.directions.ndim != 3 or self.directions.shape[1] != 3:
            raise ValueError("Measured directions must have shape (B, 3, m).")
        batch_size, _, m = self.directions.shape
        if m < 2:
            raise ValueError(f"At least 2 observations are required, got {m}.")
        if self.references.shape[1:] != (3, m):
            raise ValueError(
                f"References must have shape (B, 3, {m}), "
                f"got {tuple(self.references.shape)}."
            )
        if self.weights.shape[1:] != (m,):
            raise ValueError(
                f"Weights must have shape (B, {m}), got {tuple(self.weights.shape)}."
            )
        self.references = self.references.to(self.directions).expand(
            batch_size, 3, m
        )
        self.weights = self.weights.to(self.directions).expand(batch_size, m)

        if (self.weights <= 0).any():
            raise ValueError("All observation weights must be positive.")
        eps = get_tolerances().unit_norm
        for name, cols in [
            ("reference", self.references),
            ("measured", self.directions),
        ]:
            norm_defect = (cols.norm(dim=1) - 1).abs()
            if (norm_defect > eps).any():
                raise ValueError(
                    f"All {name} directions must have unit norm "
                    f"(largest defect {norm_defect.max().item():.3e})."
                )

    @property
    def batch_size(self) -> int:
        return self.directions.shape[0]

    @property
    def num_observations(self) -> int:
        return self.directions.shape[2]


def attitude_profile_matrix(obs: VectorObservations) -> torch.Tensor:
    # L = E W B~^T = sum_i w_i e^i (b~^i)^T
    return (obs.references * obs.weights.unsqueeze(1)) @ obs.directions.transpose(
        1, 2
    )


# Global minimizer of the weighted direction-fit cost over SO(3), computed as
# C = S L with S = Q sqrt((R R^T)^{-1}) Q^T and L = Q R, Q in SO(3).
def solve_wahba(obs: VectorObservations) -> torch.Tensor:
    profile = attitude_profile_matrix(obs)
    try:
        q, r = so3.qr_special(profile)
    except SingularMatrixError as err:
        raise DegenerateObservationsError(
            "Attitude profile matrix is singular; the observed directions do "
            "not determine the attitude.",
            batch_indices=err.batch_indices,
        ) from err

    sqrt_rrt = so3.spd_sqrt(r @ r.transpose(1, 2))
    s = q @ torch.linalg.solve(sqrt_rrt, q.transpose(1, 2))
    attitude = s @ profile

    # S L is the orthogonal polar factor of L and has det = sign(det L). For
    # det L < 0 the minimizer over SO(3) reflects the polar factor along the
    # right singular direction of smallest singular value.
    reflected = torch.linalg.det(profile) < 0
    if reflected.any():
        _, eigvecs = torch.linalg.eigh(profile.transpose(1, 2) @ profile)
        v = eigvecs[:, :, 0:1]
        eye = torch.eye(3, dtype=profile.dtype, device=profile.device)
        householder = eye - 2 * v @ v.transpose(1, 2)
        attitude = torch.where(
            reflected.view(-1, 1, 1), attitude @ householder, attitude
        )
    return attitude


def wahba_cost(obs: VectorObservations, attitude: torch.Tensor) -> torch.Tensor:
    diff = obs.references - attitude @ obs.directions
    return 0.5 * (obs.weights * (diff**2).sum(dim=1)).sum(dim=1)


def optimality_residual(profile: torch.Tensor, attitude: torch.Tensor) -> torch.Tensor:
    lt_c = profile.transpose(1, 2) @ attitude
    return lt_c - lt_c.transpose(1, 2)


# First-order map from direction errors nu^i (b^i = exp(S(nu^i)) b~^i) to the
# attitude error zeta (C = C_hat exp(S(zeta))):
#
#   zeta = sum_i A^i nu^i,
#   A^i  = -G^{-1} w_i {tr(b~^i (e^i)^T C_hat) I - b~^i (e^i)^T C_hat},
#   G    = tr(C_hat^T L~) I - C_hat^T L~.
#
# Returns a (B, m, 3, 3) tensor stacking A^1 ... A^m.
def measurement_jacobians(
    obs: VectorObservations, attitude_hat: torch.Tensor
) -> torch.Tensor:
    profile = attitude_profile_matrix(obs)
    eye = torch.eye(3, dtype=profile.dtype, device=profile.device)
    ct_l = attitude_hat.transpose(1, 2) @ profile
    trace = torch.diagonal(ct_l, dim1=1, dim2=2).sum(dim=1)
    g = trace.view(-1, 1, 1) * eye - ct_l

    cond = torch.linalg.cond(g)
    bad = ~torch.isfinite(cond) | (cond > get_tolerances().max_condition)
    if bad.any():
        raise IllConditionedError(
            "Observation geometry is near-degenerate; attitude error map is "
            f"ill-conditioned (cond = {cond.max().item():.3e}).",
            batch_indices=bad.nonzero().view(-1).tolist(),
        )

    b_tilde = obs.directions.transpose(1, 2)  # (B, m, 3)
    # (e^i)^T C_hat, as rows
    rotated_refs = obs.references.transpose(1, 2) @ attitude_hat  # (B, m, 3)
    outer = b_tilde.unsqueeze(3) * rotated_refs.unsqueeze(2)  # (B, m, 3, 3)
    outer_trace = (b_tilde * rotated_refs).sum(dim=2)
    k = obs.weights.view(*obs.weights.shape, 1, 1) * (
        outer_trace.view(*outer_trace.shape, 1, 1) * eye - outer
    )
    return -torch.linalg.solve(g.unsqueeze(1), k)
