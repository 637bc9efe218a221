# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import torch

from attest.errors import NoConvergenceError
from attest.geometry import so3
from attest.utils import numeric_jacobian

from .rigid_body import AttitudeState, InertiaParams, potential_moment

logger = logging.getLogger(__name__)


@dataclass
class ImplicitSolverParams:
    abs_err_tolerance: float = 1e-12
    max_iterations: int = 50

    def update(self, params_dict: Dict[str, Any]):
        for param, value in params_dict.items():
            if hasattr(self, param):
                setattr(self, param, value)
            else:
                raise ValueError(f"Invalid implicit solver parameter {param}.")


# Solves h S(p) = F J_d - J_d F^T for F in SO(3), where p = J w_k + h/2 M_k.
#
# F = exp(S(f)) and Newton's method runs on the 3-vector residual
#   g(f) = vee(F J_d - J_d F^T) - h p,
# whose Jacobian is (tr(F J_d) I - F J_d) F J_r(f), J_r the right Jacobian of
# exp. The initial guess f = h J^{-1} p is exact to O(h^2).
def solve_implicit_f(
    momentum: torch.Tensor,
    params: InertiaParams,
    solver_params: Optional[ImplicitSolverParams] = None,
) -> torch.Tensor:
    solver_params = solver_params or ImplicitSolverParams()
    momentum = momentum.view(-1, 3)
    inertia = params.inertia.to(momentum)
    inertia_d = params.inertia_d.to(momentum)
    h = params.step_size
    eye = torch.eye(3, dtype=momentum.dtype, device=momentum.device)

    target = h * momentum
    f = torch.linalg.solve(inertia, target.unsqueeze(-1)).squeeze(-1)
    tol = solver_params.abs_err_tolerance * (1 + torch.linalg.matrix_norm(inertia_d))

    for it_ in range(solver_params.max_iterations + 1):
        jexp: List[torch.Tensor] = []
        rel = so3.exp(f, jacobians=jexp)
        f_jd = rel @ inertia_d
        residual = so3.project(f_jd) - target
        # Frobenius norm of the skew residual matrix
        err = residual.norm(dim=1) * (2**0.5)
        converged = err <= tol
        if converged.all():
            logger.debug(f"Implicit LGVI solve converged in {it_} iterations.")
            return rel
        if it_ == solver_params.max_iterations:
            break
        trace = torch.diagonal(f_jd, dim1=1, dim2=2).sum(dim=1)
        jac = (trace.view(-1, 1, 1) * eye - f_jd) @ rel @ jexp[0]
        delta = torch.linalg.solve(jac, residual.unsqueeze(-1)).squeeze(-1)
        f = f - torch.where(converged.view(-1, 1), torch.zeros_like(delta), delta)

    raise NoConvergenceError(
        f"Implicit LGVI solve did not converge in {solver_params.max_iterations} "
        f"iterations (residual {err.max().item():.3e}, tolerance {tol.item():.3e}).",
        batch_indices=(~converged).nonzero().view(-1).tolist(),
    )


# One step of the Lie group variational integrator:
#   h S(J w_k + h/2 M_k) = F_k J_d - J_d F_k^T
#   C_{k+1}              = C_k F_k
#   J w_{k+1}            = F_k^T J w_k + h/2 F_k^T M_k + h/2 M_{k+1}
def lgvi_step(
    state: AttitudeState,
    params: InertiaParams,
    solver_params: Optional[ImplicitSolverParams] = None,
) -> AttitudeState:
    inertia = params.inertia.to(state.rotation)
    h = params.step_size
    moment = potential_moment(state.rotation, params)
    momentum = state.angular_velocity @ inertia + 0.5 * h * moment
    rel = solve_implicit_f(momentum, params, solver_params=solver_params)

    rotation = state.rotation @ rel
    next_moment = potential_moment(rotation, params)
    next_momentum = (rel.transpose(1, 2) @ momentum.unsqueeze(-1)).squeeze(
        -1
    ) + 0.5 * h * next_moment
    omega = torch.linalg.solve(inertia, next_momentum.unsqueeze(-1)).squeeze(-1)
    return AttitudeState(rotation, omega)


# Returns the states at steps 0, 1, ..., steps.
def lgvi_integrate(
    state: AttitudeState,
    params: InertiaParams,
    steps: int,
    solver_params: Optional[ImplicitSolverParams] = None,
) -> List[AttitudeState]:
    if steps < 0:
        raise ValueError(f"Number of steps must be non-negative, got {steps}.")
    trajectory = [state]
    for _ in range(steps):
        trajectory.append(lgvi_step(trajectory[-1], params, solver_params))
    return trajectory


# Jacobian of the one-step flow in perturbation coordinates (zeta, delta_omega)
# about the center trajectory, by central differences. Returns (B, 6, 6).
def linearize_step(
    center: AttitudeState,
    params: InertiaParams,
    solver_params: Optional[ImplicitSolverParams] = None,
    delta_mag: float = 1e-6,
) -> torch.Tensor:
    return numeric_jacobian(
        lambda state: lgvi_step(state, params, solver_params),
        center,
        delta_mag=delta_mag,
    )
