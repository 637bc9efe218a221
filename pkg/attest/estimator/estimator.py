# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import torch

from attest.determination import (
    VectorObservations,
    measurement_jacobians,
    solve_wahba,
)
from attest.dynamics import (
    ImplicitSolverParams,
    InertiaParams,
    lgvi_step,
    linearize_step,
)
from attest.ellipsoid import (
    IntersectionSearchParams,
    StateEllipsoid,
    check_shape_matrix,
    minimal_sum,
    propagate,
)
from attest.ellipsoid.calculus import _minimal_intersection_impl
from attest.errors import AttestError, EmptyIntersectionError
from attest.geometry import so3
from attest.tolerances import get_tolerances

from .trajectory import EstimatorEvent, EstimatorTrajectory

logger = logging.getLogger(__name__)


@dataclass
class EstimatorConfig:
    params: InertiaParams
    references: torch.Tensor  # (3, m)
    weights: torch.Tensor  # (m,)
    direction_bounds: torch.Tensor  # (m, 3, 3), S^i
    angular_velocity_bound: torch.Tensor  # (3, 3), T
    substeps: int = 1
    solver_params: ImplicitSolverParams = field(default_factory=ImplicitSolverParams)
    search_params: IntersectionSearchParams = field(
        default_factory=IntersectionSearchParams
    )
    fallback: bool = True

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError(
                f"Substeps per measurement must be at least 1, got {self.substeps}."
            )
        if self.references.ndim != 2 or self.references.shape[0] != 3:
            raise ValueError("References must have shape (3, m).")
        m = self.references.shape[1]
        if self.weights.shape != (m,):
            raise ValueError(f"Weights must have shape ({m},).")
        if self.direction_bounds.shape != (m, 3, 3):
            raise ValueError(f"Direction bounds must have shape ({m}, 3, 3).")
        check_shape_matrix(self.direction_bounds, 3)
        if self.angular_velocity_bound.shape != (3, 3):
            raise ValueError("Angular velocity bound must have shape (3, 3).")
        check_shape_matrix(self.angular_velocity_bound.unsqueeze(0), 3)

    @property
    def num_observations(self) -> int:
        return self.references.shape[1]


@dataclass
class MeasurementFrame:
    directions: torch.Tensor  # (B, 3, m), b~^i
    angular_velocity: torch.Tensor  # (B, 3), omega~

    def __post_init__(self):
        if self.directions.ndim == 2:
            self.directions = self.directions.unsqueeze(0)
        if self.angular_velocity.ndim == 1:
            self.angular_velocity = self.angular_velocity.unsqueeze(0)
        if self.directions.ndim != 3 or self.directions.shape[1] != 3:
            raise ValueError("Measured directions must have shape (B, 3, m).")
        if self.angular_velocity.shape != (self.directions.shape[0], 3):
            raise ValueError("Measured angular velocity must have shape (B, 3).")
        norm_defect = (self.directions.norm(dim=1) - 1).abs()
        if (norm_defect > get_tolerances().unit_norm).any():
            raise ValueError("Measured directions must have unit norm.")


def _injection(block: torch.Tensor, offset: int) -> torch.Tensor:
    out = block.new_zeros(block.shape[0], 6, 6)
    out[:, offset : offset + 3, offset : offset + 3] = block
    return out


# -----------------------------------------------------------------------------
# Flow propagation
# -----------------------------------------------------------------------------
# Center advanced by the LGVI; P_{k+1} = A_k P_k A_k^T with A_k the one-step
# Jacobian, chained one step at a time.
def flow_propagate(
    ellipsoid: StateEllipsoid, cfg: EstimatorConfig, steps: int
) -> StateEllipsoid:
    if steps < 0:
        raise ValueError(f"Number of steps must be non-negative, got {steps}.")
    center = ellipsoid.center
    shape = ellipsoid.shape
    for _ in range(steps):
        jacobian = linearize_step(center, cfg.params, cfg.solver_params)
        center = lgvi_step(center, cfg.params, cfg.solver_params)
        shape = propagate(shape, jacobian)
    if steps == 0:
        return ellipsoid
    return StateEllipsoid.from_center(center, shape)


# -----------------------------------------------------------------------------
# Measurement update
# -----------------------------------------------------------------------------
# Center from the direction fit and the measured angular velocity. The shape is
# the minimal sum of H1 A^i S^i (A^i)^T H1^T over the sensors and H2 T H2^T.
def measurement_update(frame: MeasurementFrame, cfg: EstimatorConfig) -> StateEllipsoid:
    obs = VectorObservations(
        cfg.references.to(frame.directions),
        frame.directions,
        cfg.weights.to(frame.directions),
    )
    rotation = solve_wahba(obs)
    jacobians = measurement_jacobians(obs, rotation)  # (B, m, 3, 3)
    bounds = cfg.direction_bounds.to(jacobians)

    terms = []
    for i in range(obs.num_observations):
        jac = jacobians[:, i]
        terms.append(_injection(jac @ bounds[i] @ jac.transpose(1, 2), 0))
    velocity_bound = cfg.angular_velocity_bound.to(jacobians).expand(
        obs.batch_size, 3, 3
    )
    terms.append(_injection(velocity_bound, 3))
    return StateEllipsoid(
        rotation, frame.angular_velocity.clone(), minimal_sum(terms)
    )


# -----------------------------------------------------------------------------
# Filtered update
# -----------------------------------------------------------------------------
# Both ellipsoids are expressed about the measurement center, the flow one at
# x_mf = [log((C^m)^T C^f); omega^f - omega^m]. Their intersection is bounded
# and the result mapped back through the measurement center.
#
# With fallback, batch elements whose intersection is empty adopt the
# measurement ellipsoid; otherwise EmptyIntersectionError is raised.
def filter_update(
    flow: StateEllipsoid,
    meas: StateEllipsoid,
    search_params: Optional[IntersectionSearchParams] = None,
    fallback: bool = True,
    step: Optional[int] = None,
) -> StateEllipsoid:
    center_mf = meas.center.local(flow.center)
    zeta_mf = center_mf[:, :3].norm(dim=1)
    threshold = get_tolerances().bch_warning
    if (zeta_mf > threshold).any():
        warnings.warn(
            f"Flow and measurement centers differ by {zeta_mf.max().item():.3f} rad "
            f"(threshold {threshold}); first-order merge may be inaccurate.",
            RuntimeWarning,
        )

    center, shape, feasible = _minimal_intersection_impl(
        meas.shape, center_mf, flow.shape, search_params=search_params
    )
    if not feasible.all():
        bad = (~feasible).nonzero().view(-1).tolist()
        if not fallback:
            raise EmptyIntersectionError(
                "Flow and measurement ellipsoids do not intersect.",
                batch_indices=bad,
                step=step,
            )
        logger.warning(
            f"Step {step}: empty intersection for batch indices {bad}; "
            "adopting the measurement ellipsoid."
        )
        center = torch.where(
            feasible.view(-1, 1), center, torch.zeros_like(center)
        )
        shape = torch.where(feasible.view(-1, 1, 1), shape, meas.shape)

    fused = meas.center.retract(center)
    logger.debug(
        f"Step {step}: fused tr P^f = {flow.trace().max().item():.4e}, "
        f"tr P^m = {meas.trace().max().item():.4e}, "
        f"tr P = {torch.diagonal(shape, dim1=1, dim2=2).sum(dim=1).max().item():.4e}"
    )
    return StateEllipsoid.from_center(fused, shape)


# Assigns step indices l, 2l, ... (offset by start) to frames arriving once
# every cfg.substeps integration steps.
def schedule_frames(
    frames: Sequence[MeasurementFrame], cfg: EstimatorConfig, start: int = 0
) -> List[Tuple[int, MeasurementFrame]]:
    if start < 0:
        raise ValueError(f"Start step must be non-negative, got {start}.")
    return [(start + (k + 1) * cfg.substeps, frame) for k, frame in enumerate(frames)]


# -----------------------------------------------------------------------------
# Full estimator
# -----------------------------------------------------------------------------
# Alternates flow propagation to each measurement step with a measurement and a
# filtered update. Predicted ellipsoids are recorded at measurement steps and
# at final_step, and at every step when emit_predicted is set.
def run_estimator(
    initial: StateEllipsoid,
    frames: Sequence[Tuple[int, MeasurementFrame]],
    cfg: EstimatorConfig,
    final_step: Optional[int] = None,
    emit_predicted: bool = False,
) -> EstimatorTrajectory:
    steps = [s for s, _ in frames]
    if any(s < 0 for s in steps):
        raise ValueError("Measurement step indices must be non-negative.")
    if any(b <= a for a, b in zip(steps[:-1], steps[1:])):
        raise ValueError(
            f"Measurement step indices must be strictly increasing, got {steps}."
        )
    if final_step is not None and steps and final_step < steps[-1]:
        raise ValueError("Final step precedes the last measurement.")

    trajectory = EstimatorTrajectory()
    trajectory.append(0, EstimatorEvent.INITIAL, initial)
    estimate = initial
    current = 0

    def _advance(target: int) -> StateEllipsoid:
        nonlocal current
        ellipsoid = estimate
        if emit_predicted:
            while current < target:
                ellipsoid = flow_propagate(ellipsoid, cfg, 1)
                current += 1
                trajectory.append(current, EstimatorEvent.PREDICTED, ellipsoid)
        else:
            ellipsoid = flow_propagate(ellipsoid, cfg, target - current)
            current = target
            if target > 0:
                trajectory.append(current, EstimatorEvent.PREDICTED, ellipsoid)
        return ellipsoid

    try:
        for step, frame in frames:
            predicted = _advance(step)
            measured = measurement_update(frame, cfg)
            trajectory.append(step, EstimatorEvent.MEASURED, measured)
            estimate = filter_update(
                predicted,
                measured,
                search_params=cfg.search_params,
                fallback=cfg.fallback,
                step=step,
            )
            trajectory.append(step, EstimatorEvent.FUSED, estimate)
        if final_step is not None and final_step > current:
            estimate = _advance(final_step)
    except AttestError as err:
        if err.step is None:
            err.step = current
        raise
    return trajectory
