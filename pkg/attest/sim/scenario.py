# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import logging
import pathlib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import omegaconf
import torch
import yaml
from omegaconf import OmegaConf

from attest import constants
from attest.dynamics import AttitudeState, InertiaParams, lgvi_integrate
from attest.ellipsoid import (
    StateEllipsoid,
    principal_axis,
    quadratic_form,
    state_contains,
)
from attest.errors import ConfigError
from attest.estimator import (
    EstimatorConfig,
    EstimatorEvent,
    EstimatorTrajectory,
    MeasurementFrame,
    run_estimator,
)
from attest.geometry import so3

logger = logging.getLogger(__name__)


# -----------------------------------------------------------------------------
# Scenario files
# -----------------------------------------------------------------------------
# n nearly evenly spread unit vectors on the golden-angle spiral, as rows.
def sphere_directions(n: int) -> torch.Tensor:
    if n < 1:
        raise ValueError(f"Need at least one direction, got {n}.")
    index = torch.arange(n, dtype=constants.DEFAULT_DTYPE) + 0.5
    z = 1 - 2 * index / n
    radius = (1 - z**2).sqrt()
    azimuth = constants.PI * (3 - 5**0.5) * index
    return torch.stack([radius * azimuth.cos(), radius * azimuth.sin(), z], dim=1)


# Size of the default star field observed at every measurement.
NUM_DEFAULT_DIRECTIONS = 30


# Flat key/value schema for scenario files. The defaults reproduce the
# quarter-orbit spacecraft scenario; a file only needs the keys it changes.
@dataclass
class ScenarioSchema:
    inertia: List[float] = field(default_factory=lambda: [1.0, 2.8, 2.0])
    h: float = (constants.PI / 2) / 200
    t_final: float = constants.PI / 2
    n_measurements: int = 10
    C0: List[float] = field(
        default_factory=lambda: [-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]
    )
    omega0: List[float] = field(default_factory=lambda: [2.3160, 0.4468, -0.5910])
    C0_hat: List[float] = field(
        default_factory=lambda: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
    )
    omega0_hat: List[float] = field(
        default_factory=lambda: [2.1160, 0.5468, -0.8910]
    )
    P0: List[float] = field(
        default_factory=lambda: [2 * constants.PI**2] * 3
        + [2 * (constants.PI / 6) ** 2] * 3
    )
    S_bound_deg: Optional[float] = 7.0
    S_bounds: Optional[List[List[float]]] = None
    T_bound: Optional[float] = 7.0 * constants.DEG
    T_matrix: Optional[List[float]] = None
    E: List[List[float]] = field(
        default_factory=lambda: sphere_directions(NUM_DEFAULT_DIRECTIONS).tolist()
    )
    # unit weights when unset
    weights: Optional[List[float]] = None
    orbital_rate: float = 1.0
    seed: int = 0
    boundary_noise: bool = False


@dataclass
class ScenarioConfig:
    inertia: torch.Tensor  # (3, 3)
    step_size: float
    t_final: float
    n_measurements: int
    rotation0: torch.Tensor  # (3, 3)
    omega0: torch.Tensor  # (3,)
    rotation0_hat: torch.Tensor  # (3, 3)
    omega0_hat: torch.Tensor  # (3,)
    initial_shape: torch.Tensor  # (6, 6)
    references: torch.Tensor  # (3, m)
    weights: torch.Tensor  # (m,)
    direction_bounds: torch.Tensor  # (m, 3, 3)
    angular_velocity_bound: torch.Tensor  # (3, 3)
    orbital_rate: float = 1.0
    seed: int = 0
    boundary_noise: bool = False

    def __post_init__(self):
        if self.step_size <= 0 or self.t_final <= 0:
            raise ConfigError("Step size and final time must be positive.")
        if self.n_measurements < 0:
            raise ConfigError("Number of measurements must be non-negative.")
        if self.n_measurements > self.num_steps:
            raise ConfigError(
                f"Cannot schedule {self.n_measurements} measurements in "
                f"{self.num_steps} steps."
            )
        for name in ["rotation0", "rotation0_hat"]:
            rotation = getattr(self, name)
            if rotation.shape != (3, 3) or not so3.is_rotation(rotation[None]).all():
                raise ConfigError(f"{name} is not a rotation matrix.")
        m = self.references.shape[1]
        if self.weights.shape != (m,) or self.direction_bounds.shape != (m, 3, 3):
            raise ConfigError(
                f"Weights and direction bounds must match the {m} references."
            )
        for name in ["direction_bounds", "angular_velocity_bound"]:
            bound = getattr(self, name)
            if (torch.linalg.eigvalsh(bound) < 0).any():
                raise ConfigError(f"{name} must be positive semidefinite.")

    @property
    def num_steps(self) -> int:
        return int(round(self.t_final / self.step_size))

    # Evenly spaced in (0, t_final].
    @property
    def measurement_steps(self) -> List[int]:
        n, total = self.n_measurements, self.num_steps
        return [int(round(k * total / n)) for k in range(1, n + 1)]

    def inertia_params(self) -> InertiaParams:
        return InertiaParams(self.inertia, self.step_size, self.orbital_rate)

    def estimator_config(self, fallback: bool = True) -> EstimatorConfig:
        substeps = self.num_steps // max(self.n_measurements, 1)
        return EstimatorConfig(
            self.inertia_params(),
            self.references,
            self.weights,
            self.direction_bounds,
            self.angular_velocity_bound,
            substeps=max(substeps, 1),
            fallback=fallback,
        )

    def initial_truth(self) -> AttitudeState:
        return AttitudeState(self.rotation0.clone(), self.omega0.clone())

    def initial_estimate(self) -> StateEllipsoid:
        return StateEllipsoid(
            self.rotation0_hat.clone(), self.omega0_hat.clone(), self.initial_shape
        )


def _tensor(values: Any, size: int, name: str) -> torch.Tensor:
    data = torch.tensor(list(values), dtype=constants.DEFAULT_DTYPE)
    if data.numel() != size:
        raise ConfigError(f"Key {name} expects {size} numbers, got {data.numel()}.")
    return data


def config_from_schema(
    schema: Union[ScenarioSchema, omegaconf.DictConfig]
) -> ScenarioConfig:
    references = torch.stack(
        [_tensor(e, 3, "E") for e in schema.E], dim=1
    )  # columns
    norms = references.norm(dim=0, keepdim=True)
    if (norms == 0).any():
        raise ConfigError("Reference directions must be nonzero.")
    references = references / norms
    m = references.shape[1]

    if schema.S_bounds is not None:
        if len(schema.S_bounds) != m:
            raise ConfigError(f"S_bounds needs one matrix per reference ({m}).")
        direction_bounds = torch.stack(
            [_tensor(s, 9, "S_bounds").view(3, 3) for s in schema.S_bounds]
        )
    elif schema.S_bound_deg is not None:
        radius = schema.S_bound_deg * constants.DEG
        direction_bounds = radius**2 * torch.eye(3, dtype=references.dtype).expand(
            m, 3, 3
        )
    else:
        raise ConfigError("One of S_bound_deg or S_bounds is required.")

    if schema.T_matrix is not None:
        velocity_bound = _tensor(schema.T_matrix, 9, "T_matrix").view(3, 3)
    elif schema.T_bound is not None:
        velocity_bound = schema.T_bound**2 * torch.eye(3, dtype=references.dtype)
    else:
        raise ConfigError("One of T_bound or T_matrix is required.")

    if schema.weights is None:
        weights = torch.ones(m, dtype=references.dtype)
    else:
        weights = _tensor(schema.weights, m, "weights")

    if len(schema.P0) == 6:
        initial_shape = torch.diag(_tensor(schema.P0, 6, "P0"))
    else:
        initial_shape = _tensor(schema.P0, 36, "P0").view(6, 6)

    try:
        inertia = torch.diag(_tensor(schema.inertia, 3, "inertia"))
        return ScenarioConfig(
            inertia=inertia,
            step_size=float(schema.h),
            t_final=float(schema.t_final),
            n_measurements=int(schema.n_measurements),
            rotation0=_tensor(schema.C0, 9, "C0").view(3, 3),
            omega0=_tensor(schema.omega0, 3, "omega0"),
            rotation0_hat=_tensor(schema.C0_hat, 9, "C0_hat").view(3, 3),
            omega0_hat=_tensor(schema.omega0_hat, 3, "omega0_hat"),
            initial_shape=initial_shape,
            references=references,
            weights=weights,
            direction_bounds=direction_bounds.clone(),
            angular_velocity_bound=velocity_bound,
            orbital_rate=float(schema.orbital_rate),
            seed=int(schema.seed),
            boundary_noise=bool(schema.boundary_noise),
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from err


def load_config(path: Union[str, pathlib.Path]) -> ScenarioConfig:
    schema = OmegaConf.structured(ScenarioSchema)
    try:
        file_cfg = OmegaConf.load(str(path))
        merged = OmegaConf.merge(schema, file_cfg)
    except (omegaconf.errors.OmegaConfBaseException, yaml.YAMLError) as err:
        raise ConfigError(f"Invalid scenario file {path}: {err}") from err
    logger.debug(f"Loaded scenario file {path}:\n{OmegaConf.to_yaml(merged)}")
    return config_from_schema(merged)


def section_v_config(seed: int = 0) -> ScenarioConfig:
    schema = ScenarioSchema()
    schema.seed = seed
    return config_from_schema(schema)


# x0^T P0^{-1} x0 for the initial truth about the initial estimate.
def initial_condition_ratio(cfg: ScenarioConfig) -> float:
    estimate = cfg.initial_estimate()
    x0 = estimate.center.local(cfg.initial_truth())
    return quadratic_form(estimate.shape, x0).item()


# Checks everything a run needs beyond what construction checks. Returns
# x0^T P0^{-1} x0.
def validate(cfg: ScenarioConfig) -> float:
    try:
        cfg.inertia_params()
        cfg.estimator_config()
        cfg.initial_estimate()
    except ValueError as err:
        raise ConfigError(str(err)) from err
    ratio = initial_condition_ratio(cfg)
    if ratio > 1:
        raise ConfigError(
            f"Initial truth lies outside the initial ellipsoid "
            f"(x0^T P0^-1 x0 = {ratio:.4f} > 1)."
        )
    return ratio


# -----------------------------------------------------------------------------
# Noise synthesis
# -----------------------------------------------------------------------------
# Uniform over E(0, shape), or on its boundary. shape is (B, 3, 3) or (3, 3);
# shapes with zero trace yield zero.
def sample_in_ellipsoid(
    shape: torch.Tensor,
    generator: Optional[torch.Generator] = None,
    boundary: bool = False,
    batch_size: int = 1,
) -> torch.Tensor:
    if shape.ndim == 2:
        shape = shape.expand(batch_size, *shape.shape)
    batch_size, dim = shape.shape[:2]
    direction = torch.randn(
        batch_size, dim, generator=generator, dtype=shape.dtype, device=shape.device
    )
    direction = direction / direction.norm(dim=1, keepdim=True)
    if boundary:
        radius = torch.ones(batch_size, 1, dtype=shape.dtype, device=shape.device)
    else:
        radius = torch.rand(
            batch_size, 1, generator=generator, dtype=shape.dtype, device=shape.device
        ) ** (1.0 / dim)

    zero = torch.diagonal(shape, dim1=1, dim2=2).sum(dim=1) == 0
    eye = torch.eye(dim, dtype=shape.dtype, device=shape.device)
    sqrt_shape = so3.spd_sqrt(torch.where(zero.view(-1, 1, 1), eye, shape))
    sample = (sqrt_shape @ (radius * direction).unsqueeze(-1)).squeeze(-1)
    return torch.where(zero.view(-1, 1), torch.zeros_like(sample), sample)


# Returns the frame and the noise realization (nu (B, m, 3), upsilon (B, 3)),
# with b~^i = exp(-S(nu^i)) C^T e^i and omega~ = omega - upsilon.
def _synthesize_measurements_impl(
    truth: AttitudeState,
    cfg: ScenarioConfig,
    generator: Optional[torch.Generator] = None,
) -> Tuple[MeasurementFrame, torch.Tensor, torch.Tensor]:
    references = cfg.references.to(truth.rotation)
    true_directions = truth.rotation.transpose(1, 2) @ references  # (B, 3, m)
    nus = []
    columns = []
    for i in range(references.shape[1]):
        nu = sample_in_ellipsoid(
            cfg.direction_bounds[i].to(truth.rotation),
            generator=generator,
            boundary=cfg.boundary_noise,
            batch_size=truth.batch_size,
        )
        column = (so3.exp(-nu) @ true_directions[:, :, i : i + 1]).squeeze(-1)
        columns.append(column / column.norm(dim=1, keepdim=True))
        nus.append(nu)
    upsilon = sample_in_ellipsoid(
        cfg.angular_velocity_bound.to(truth.rotation),
        generator=generator,
        boundary=cfg.boundary_noise,
        batch_size=truth.batch_size,
    )
    frame = MeasurementFrame(
        torch.stack(columns, dim=2), truth.angular_velocity - upsilon
    )
    return frame, torch.stack(nus, dim=1), upsilon


def synthesize_measurements(
    truth: AttitudeState,
    cfg: ScenarioConfig,
    generator: Optional[torch.Generator] = None,
) -> MeasurementFrame:
    frame, _, _ = _synthesize_measurements_impl(truth, cfg, generator)
    return frame


# -----------------------------------------------------------------------------
# Scenario runs
# -----------------------------------------------------------------------------
@dataclass
class MetricsRecord:
    step: int
    time: float
    zeta_norm_deg: float
    domega_norm: float
    trace_P: float
    max_eig_P: float
    max_eig_dir: Tuple[float, float, float]
    contains_truth: bool
    event: str = "predicted"


def metrics_record(
    step: int,
    time: float,
    estimate: StateEllipsoid,
    truth: AttitudeState,
    event: str,
) -> MetricsRecord:
    error = estimate.center.local(truth)
    max_eig, direction = principal_axis(estimate.shape)
    contained = state_contains(estimate, truth.rotation, truth.angular_velocity)
    return MetricsRecord(
        step=step,
        time=time,
        zeta_norm_deg=error[0, :3].norm().item() / constants.DEG,
        domega_norm=error[0, 3:].norm().item(),
        trace_P=estimate.trace()[0].item(),
        max_eig_P=max_eig[0].item(),
        max_eig_dir=tuple(direction[0].tolist()),  # type: ignore
        contains_truth=bool(contained[0].item()),
        event=event,
    )


# Truth is propagated first; measurement noise is then drawn in step order from
# a generator seeded with cfg.seed. Returns one record per step.
def run_scenario(
    cfg: ScenarioConfig, fallback: bool = True
) -> List[MetricsRecord]:
    params = cfg.inertia_params()
    estimator_cfg = cfg.estimator_config(fallback=fallback)
    generator = torch.Generator().manual_seed(cfg.seed)

    truth = lgvi_integrate(
        cfg.initial_truth(), params, cfg.num_steps, estimator_cfg.solver_params
    )
    frames = [
        (step, synthesize_measurements(truth[step], cfg, generator))
        for step in cfg.measurement_steps
    ]
    trajectory = run_estimator(
        cfg.initial_estimate(),
        frames,
        estimator_cfg,
        final_step=cfg.num_steps,
        emit_predicted=True,
    )
    return trajectory_metrics(trajectory, truth, cfg)


def trajectory_metrics(
    trajectory: EstimatorTrajectory, truth: List[AttitudeState], cfg: ScenarioConfig
) -> List[MetricsRecord]:
    events = {
        entry.step: entry.event.value
        for entry in trajectory
        if entry.event != EstimatorEvent.MEASURED
    }
    return [
        metrics_record(step, step * cfg.step_size, estimate, truth[step], events[step])
        for step, estimate in trajectory.estimates()
    ]


# Records at the initial step and the measurement steps.
def measurement_records(records: List[MetricsRecord]) -> List[MetricsRecord]:
    return [r for r in records if r.event in ("initial", "fused")]


@dataclass
class ScenarioSummary:
    seed: int
    terminal_zeta_deg: float
    terminal_domega: float
    terminal_trace_P: float
    containment_ratio: float
    first_measurement_drop: bool

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def summarize(records: List[MetricsRecord], seed: int = 0) -> ScenarioSummary:
    if not records:
        raise ValueError("Cannot summarize an empty run.")
    fused = [i for i, r in enumerate(records) if r.event == "fused"]
    containment = (
        float(np.mean([records[i].contains_truth for i in fused])) if fused else 1.0
    )
    drop = False
    if fused and fused[0] > 0:
        before, after = records[fused[0] - 1], records[fused[0]]
        drop = (
            after.zeta_norm_deg < before.zeta_norm_deg
            and after.trace_P < before.trace_P
        )
    last = records[-1]
    return ScenarioSummary(
        seed=seed,
        terminal_zeta_deg=last.zeta_norm_deg,
        terminal_domega=last.domega_norm,
        terminal_trace_P=last.trace_P,
        containment_ratio=containment,
        first_measurement_drop=drop,
    )
