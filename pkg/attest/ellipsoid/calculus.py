# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import torch
from scipy.optimize import minimize_scalar

from attest.errors import AllDegenerateError, EmptyIntersectionError
from attest.utils import symmetrize


# P -> A P A^T, the image of E(0, P) under x -> A x.
def propagate(shape: torch.Tensor, transform: torch.Tensor) -> torch.Tensor:
    return symmetrize(transform @ shape @ transform.transpose(-1, -2))


# Trace-minimal outer ellipsoid of the vector sum of E(0, P_1), ..., E(0, P_n):
#
#   P = (sum_j sqrt(tr P_j)) (sum_j P_j / sqrt(tr P_j))
#
# Terms may be positive semidefinite. A term with zero trace is the origin and is
# skipped.
def minimal_sum(terms: Sequence[torch.Tensor]) -> torch.Tensor:
    if len(terms) == 0:
        raise ValueError("At least one ellipsoid is required.")
    stacked = torch.stack(torch.broadcast_tensors(*terms), dim=1)  # (B, n, N, N)
    traces = torch.diagonal(stacked, dim1=2, dim2=3).sum(dim=2)
    active = traces > 0
    degenerate = ~active.any(dim=1)
    if degenerate.any():
        raise AllDegenerateError(
            "Every term of the ellipsoidal sum has zero trace.",
            batch_indices=degenerate.nonzero().view(-1).tolist(),
        )
    sqrt_tr = torch.where(active, traces, torch.ones_like(traces)).sqrt()
    weights = torch.where(active, 1.0 / sqrt_tr, torch.zeros_like(sqrt_tr))
    scale = torch.where(active, sqrt_tr, torch.zeros_like(sqrt_tr)).sum(dim=1)
    weighted = (stacked * weights.view(*weights.shape, 1, 1)).sum(dim=1)
    return symmetrize(scale.view(-1, 1, 1) * weighted)


@dataclass
class IntersectionSearchParams:
    # search range in log10(q)
    log_q_min: float = -6.0
    log_q_max: float = 6.0
    grid_points: int = 50
    max_iterations: int = 200
    tolerance: float = 1e-10

    def update(self, params_dict: Dict[str, Any]):
        for param, value in params_dict.items():
            if hasattr(self, param):
                setattr(self, param, value)
            else:
                raise ValueError(f"Invalid intersection search parameter {param}.")


# Outer bound of E(0, Pm) intersected with E(x_mf, Pf) for a fixed q > 0:
#
#   L    = Pm (Pm + Pf / q)^{-1}
#   beta = 1 + q - x_mf^T (Pm + Pf / q)^{-1} x_mf
#   x    = L x_mf
#   P    = beta (I - L) Pm
#
# Returns (x, P, beta). The bound is only meaningful where beta > 0.
def intersection_shape(
    shape_m: torch.Tensor,
    center_f: torch.Tensor,
    shape_f: torch.Tensor,
    q: Union[float, torch.Tensor],
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    q = torch.as_tensor(q, dtype=shape_m.dtype, device=shape_m.device)
    q = q.expand(shape_m.shape[0]).view(-1, 1, 1)
    combined = shape_m + shape_f / q
    # Pm and combined are symmetric, so Pm combined^{-1} = (combined^{-1} Pm)^T
    gain = torch.linalg.solve(combined, shape_m).transpose(1, 2)
    y = torch.linalg.solve(combined, center_f.unsqueeze(-1)).squeeze(-1)
    beta = 1 + q.view(-1) - (center_f * y).sum(dim=1)
    center = (gain @ center_f.unsqueeze(-1)).squeeze(-1)
    shape = beta.view(-1, 1, 1) * symmetrize(shape_m - gain @ shape_m)
    return center, shape, beta


def _trace_objective(
    shape_m: torch.Tensor,
    center_f: torch.Tensor,
    shape_f: torch.Tensor,
    log_q: torch.Tensor,
) -> torch.Tensor:
    _, shape, beta = intersection_shape(shape_m, center_f, shape_f, 10**log_q)
    trace = torch.diagonal(shape, dim1=1, dim2=2).sum(dim=1)
    return torch.where(beta > 0, trace, torch.full_like(trace, math.inf))


def _refine_log_q(
    shape_m: torch.Tensor,
    center_f: torch.Tensor,
    shape_f: torch.Tensor,
    lo: float,
    hi: float,
    search_params: IntersectionSearchParams,
) -> Tuple[float, float]:
    # single batch element, all tensors with a leading dimension of 1
    def objective(log_q: float) -> float:
        log_q_t = torch.tensor([log_q], dtype=shape_m.dtype, device=shape_m.device)
        return _trace_objective(shape_m, center_f, shape_f, log_q_t).item()

    if hi <= lo:
        return lo, objective(lo)
    result = minimize_scalar(
        objective,
        bounds=(lo, hi),
        method="bounded",
        options={
            "xatol": search_params.tolerance,
            "maxiter": search_params.max_iterations,
        },
    )
    return float(result.x), float(result.fun)


# Minimizes tr P(q) over log10(q) in [log_q_min, log_q_max]: a coarse grid
# brackets the minimum, then a bounded scalar search refines it per batch element.
# The limits q -> 0 and q -> inf, which return E(0, Pm) and E(x_mf, Pf) unchanged,
# are kept as candidates, so tr P never exceeds min(tr Pm, tr Pf).
#
# Returns (x, P, feasible). Where no q gives beta > 0, feasible is False and
# x, P are left at the grid minimizer of the unconstrained trace.
def _minimal_intersection_impl(
    shape_m: torch.Tensor,
    center_f: torch.Tensor,
    shape_f: torch.Tensor,
    search_params: Optional[IntersectionSearchParams] = None,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    search_params = search_params or IntersectionSearchParams()
    batch_size = center_f.shape[0]
    num_grid = search_params.grid_points
    grid = torch.linspace(
        search_params.log_q_min,
        search_params.log_q_max,
        num_grid,
        dtype=shape_m.dtype,
        device=shape_m.device,
    )

    def _tile(t: torch.Tensor) -> torch.Tensor:
        return t.repeat_interleave(num_grid, dim=0)

    grid_values = _trace_objective(
        _tile(shape_m), _tile(center_f), _tile(shape_f), grid.repeat(batch_size)
    ).view(batch_size, num_grid)
    feasible = torch.isfinite(grid_values).any(dim=1)
    best_idx = grid_values.argmin(dim=1)
    log_q = grid[best_idx].clone()
    best_value = grid_values.gather(1, best_idx.view(-1, 1)).view(-1).clone()

    lo = grid[(best_idx - 1).clamp(min=0)]
    hi = grid[(best_idx + 1).clamp(max=num_grid - 1)]
    for b in feasible.nonzero().view(-1).tolist():
        refined_log_q, refined_value = _refine_log_q(
            shape_m[b : b + 1],
            center_f[b : b + 1],
            shape_f[b : b + 1],
            lo[b].item(),
            hi[b].item(),
            search_params,
        )
        if refined_value < best_value[b].item():
            log_q[b] = refined_log_q
            best_value[b] = refined_value

    center, shape, _ = intersection_shape(shape_m, center_f, shape_f, 10**log_q)

    trace_m = torch.diagonal(shape_m, dim1=1, dim2=2).sum(dim=1)
    trace_f = torch.diagonal(shape_f, dim1=1, dim2=2).sum(dim=1)
    keep_m = feasible & (trace_m <= trace_f) & (trace_m < best_value)
    keep_f = feasible & ~keep_m & (trace_f < best_value)
    center = torch.where(keep_m.view(-1, 1), torch.zeros_like(center), center)
    center = torch.where(keep_f.view(-1, 1), center_f, center)
    shape = torch.where(keep_m.view(-1, 1, 1), shape_m, shape)
    shape = torch.where(keep_f.view(-1, 1, 1), shape_f, shape)
    return center, shape, feasible


# Trace-minimal outer ellipsoid of the intersection of E(0, Pm) and E(x_mf, Pf).
def minimal_intersection(
    shape_m: torch.Tensor,
    center_f: torch.Tensor,
    shape_f: torch.Tensor,
    search_params: Optional[IntersectionSearchParams] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    if center_f.ndim == 1:
        center_f = center_f.unsqueeze(0)
    center, shape, feasible = _minimal_intersection_impl(
        shape_m, center_f, shape_f, search_params=search_params
    )
    if not feasible.all():
        raise EmptyIntersectionError(
            "No ellipsoid in the search range bounds the intersection "
            "(beta(q) <= 0 for every q); the two ellipsoids are inconsistent.",
            batch_indices=(~feasible).nonzero().view(-1).tolist(),
        )
    return center, shape


# Largest eigenvalue of P and its unit eigenvector, with the sign fixed so that
# the largest-magnitude component is positive.
def principal_axis(shape: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    eigvals, eigvecs = torch.linalg.eigh(symmetrize(shape))
    direction = eigvecs[..., :, -1]
    major = direction.abs().argmax(dim=-1, keepdim=True)
    sign = torch.sign(direction.gather(-1, major))
    sign = torch.where(sign == 0, torch.ones_like(sign), sign)
    return eigvals[..., -1], direction * sign
