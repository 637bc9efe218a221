# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import pytest  # noqa: F401
import torch

from attest.dynamics import AttitudeState, lgvi_integrate, lgvi_step
from attest.ellipsoid import (
    StateEllipsoid,
    quadratic_form,
    state_contains,
    state_error,
)
from attest.errors import DegenerateObservationsError, EmptyIntersectionError
from attest.estimator import (
    EstimatorConfig,
    EstimatorEvent,
    MeasurementFrame,
    filter_update,
    flow_propagate,
    measurement_update,
    run_estimator,
    schedule_frames,
)
from attest.geometry import so3
from attest.sim import sample_in_ellipsoid
from tests.common import (
    BATCH_SIZES_TO_TEST,
    interior_samples,
    make_generator,
    random_spd,
)

from .common import make_config, make_frame


def _random_state(batch_size, rng):
    return AttitudeState(
        so3.rand(batch_size, generator=rng),
        torch.randn(batch_size, 3, generator=rng, dtype=torch.float64),
    )


def _trace(shape):
    return torch.diagonal(shape, dim1=-2, dim2=-1).sum(-1)


def test_config_validation():
    cfg = make_config()
    assert cfg.num_observations == 3
    with pytest.raises(ValueError):
        EstimatorConfig(
            cfg.params,
            cfg.references,
            torch.ones(2).double(),
            cfg.direction_bounds,
            cfg.angular_velocity_bound,
        )
    with pytest.raises(ValueError):
        EstimatorConfig(
            cfg.params,
            cfg.references,
            cfg.weights,
            cfg.direction_bounds,
            cfg.angular_velocity_bound,
            substeps=0,
        )
    with pytest.raises(ValueError):
        EstimatorConfig(
            cfg.params,
            cfg.references,
            cfg.weights,
            cfg.direction_bounds,
            torch.zeros(3, 3).double(),
        )


def test_measurement_frame_validation():
    with pytest.raises(ValueError):
        MeasurementFrame(2 * torch.eye(3).double(), torch.zeros(3).double())
    with pytest.raises(ValueError):
        MeasurementFrame(torch.eye(3).double(), torch.zeros(2, 3).double())
    frame = MeasurementFrame(torch.eye(3).double(), torch.zeros(3).double())
    assert frame.directions.shape == (1, 3, 3)


# -----------------------------------------------------------------------------
# Flow propagation
# -----------------------------------------------------------------------------
@pytest.mark.parametrize("batch_size", BATCH_SIZES_TO_TEST)
def test_flow_propagate_center(batch_size):
    rng = make_generator(0)
    cfg = make_config()
    center = _random_state(batch_size, rng)
    ellipsoid = StateEllipsoid.from_center(center, random_spd(batch_size, 6, rng))
    assert flow_propagate(ellipsoid, cfg, 0) is ellipsoid
    with pytest.raises(ValueError):
        flow_propagate(ellipsoid, cfg, -1)

    propagated = flow_propagate(ellipsoid, cfg, 5)
    expected = lgvi_integrate(center, cfg.params, 5)[-1]
    assert torch.equal(propagated.rotation, expected.rotation)
    assert torch.equal(propagated.angular_velocity, expected.angular_velocity)
    assert torch.allclose(propagated.shape, propagated.shape.transpose(1, 2))
    # chaining is associative
    twice = flow_propagate(flow_propagate(ellipsoid, cfg, 2), cfg, 3)
    assert torch.allclose(twice.shape, propagated.shape)


def test_flow_propagate_first_order():
    rng = make_generator(1)
    cfg = make_config(h=0.02)
    eps = 1e-4
    center = _random_state(1, rng)
    ellipsoid = StateEllipsoid.from_center(center, eps**2 * torch.eye(6).double())
    steps = 5
    propagated = flow_propagate(ellipsoid, cfg, steps)

    n = 1000
    direction = torch.randn(n, 6, generator=rng, dtype=torch.float64)
    direction = eps * direction / direction.norm(dim=1, keepdim=True)
    samples = center.repeat(n).retract(direction)
    for _ in range(steps):
        samples = lgvi_step(samples, cfg.params)
    x = propagated.center.repeat(n).local(samples)
    values = quadratic_form(propagated.shape.expand(n, 6, 6), x)
    # boundary maps to boundary under the linearized flow
    assert torch.allclose(values, torch.ones_like(values), atol=1e-2)


# -----------------------------------------------------------------------------
# Measurement update
# -----------------------------------------------------------------------------
@pytest.mark.parametrize("batch_size", BATCH_SIZES_TO_TEST)
def test_measurement_update_noiseless(batch_size):
    rng = make_generator(2)
    cfg = make_config()
    truth = _random_state(batch_size, rng)
    meas = measurement_update(make_frame(truth, cfg), cfg)
    assert torch.allclose(meas.rotation, truth.rotation, atol=1e-10)
    assert torch.equal(meas.angular_velocity, truth.angular_velocity)
    assert torch.allclose(meas.shape, meas.shape.transpose(1, 2))
    assert (torch.linalg.eigvalsh(meas.shape) > 0).all()


def test_measurement_update_small_bounds():
    rng = make_generator(3)
    eps = 1e-5
    cfg = make_config(direction_bound=eps, velocity_bound=eps)
    meas = measurement_update(make_frame(_random_state(2, rng), cfg), cfg)
    assert (_trace(meas.shape) < 100 * eps**2).all()


def test_measurement_update_velocity_block():
    rng = make_generator(4)
    cfg = make_config()
    meas = measurement_update(make_frame(_random_state(1, rng), cfg), cfg)
    # the velocity block is T scaled by the minimal-sum weight (sum sqrt tr) /
    # sqrt(tr T), which is at least 1
    velocity_block = meas.shape[0, 3:, 3:]
    scale = velocity_block[0, 0] / cfg.angular_velocity_bound[0, 0]
    assert scale >= 1
    assert torch.allclose(velocity_block, scale * cfg.angular_velocity_bound)
    assert torch.allclose(meas.shape[0, :3, 3:], torch.zeros(3, 3).double())


def test_measurement_update_containment():
    rng = make_generator(5)
    cfg = make_config()
    n = 400
    truth = _random_state(n, rng)
    nu = torch.stack(
        [
            sample_in_ellipsoid(
                cfg.direction_bounds[i], generator=rng, boundary=True, batch_size=n
            )
            for i in range(3)
        ],
        dim=1,
    )
    upsilon = sample_in_ellipsoid(
        cfg.angular_velocity_bound, generator=rng, boundary=True, batch_size=n
    )
    meas = measurement_update(make_frame(truth, cfg, nu, upsilon), cfg)
    inside = state_contains(meas, truth.rotation, truth.angular_velocity)
    assert inside.double().mean() >= 0.99


def test_measurement_update_degenerate():
    cfg = make_config()
    collinear = torch.tensor([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    frame = MeasurementFrame(collinear.double(), torch.zeros(3).double())
    with pytest.raises(DegenerateObservationsError):
        measurement_update(frame, cfg)


# -----------------------------------------------------------------------------
# Filtered update
# -----------------------------------------------------------------------------
def test_filter_update_coincident():
    rng = make_generator(6)
    ellipsoid = StateEllipsoid.from_center(
        _random_state(2, rng), random_spd(2, 6, rng)
    )
    fused = filter_update(ellipsoid, ellipsoid)
    assert torch.allclose(fused.rotation, ellipsoid.rotation, atol=1e-12)
    assert torch.allclose(fused.angular_velocity, ellipsoid.angular_velocity)
    assert (_trace(fused.shape) <= _trace(ellipsoid.shape) * (1 + 1e-6)).all()


def test_filter_update_tight_measurement():
    rng = make_generator(7)
    center = _random_state(2, rng)
    shape = random_spd(2, 6, rng)
    meas = StateEllipsoid.from_center(center, shape)
    flow = StateEllipsoid.from_center(center, 1e6 * shape)
    fused = filter_update(flow, meas)
    assert torch.allclose(fused.rotation, meas.rotation, atol=1e-9)
    assert torch.allclose(fused.shape, meas.shape, rtol=1e-5, atol=1e-9)


@pytest.mark.parametrize("batch_size", BATCH_SIZES_TO_TEST)
def test_filter_update_containment(batch_size):
    rng = make_generator(8)
    scale = 1e-6
    center = _random_state(batch_size, rng)
    shape_m = scale * random_spd(batch_size, 6, rng)
    shape_f = scale * random_spd(batch_size, 6, rng)
    meas = StateEllipsoid.from_center(center, shape_m)
    offset = 0.5 * interior_samples(shape_m, 1, rng)[:, 0]
    flow = StateEllipsoid.from_center(center.retract(offset), shape_f)
    fused = filter_update(flow, meas)
    assert (_trace(fused.shape) <= _trace(shape_f) * (1 + 1e-5)).all()
    assert so3.is_rotation(fused.rotation).all()

    n = 5000
    samples = interior_samples(shape_m, n, rng)
    for b in range(batch_size):
        states = center[b].repeat(n).retract(samples[b])
        in_flow = state_contains(
            flow[b], states.rotation, states.angular_velocity
        )
        kept = states[in_flow]
        assert kept.batch_size > 0
        x = state_error(fused[b], kept.rotation, kept.angular_velocity)
        values = quadratic_form(fused.shape[b].expand(kept.batch_size, 6, 6), x)
        assert (values <= 1 + 1e-2).all()


def _disjoint_pair():
    center = AttitudeState(torch.eye(3).double(), torch.zeros(3).double())
    shape = 1e-8 * torch.eye(6).double()
    meas = StateEllipsoid.from_center(center, shape)
    far = center.retract(torch.tensor([[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]]).double())
    return StateEllipsoid.from_center(far, shape), meas


def test_filter_update_fallback():
    flow, meas = _disjoint_pair()
    fused = filter_update(flow, meas, fallback=True, step=3)
    assert torch.equal(fused.rotation, meas.rotation)
    assert torch.equal(fused.angular_velocity, meas.angular_velocity)
    assert torch.equal(fused.shape, meas.shape)
    with pytest.raises(EmptyIntersectionError) as err:
        filter_update(flow, meas, fallback=False, step=3)
    assert err.value.step == 3 and err.value.batch_indices == [0]


def test_filter_update_warns_on_large_offset():
    center = AttitudeState(torch.eye(3).double(), torch.zeros(3).double())
    meas = StateEllipsoid.from_center(center, torch.eye(6).double())
    far = center.retract(torch.tensor([[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]]).double())
    flow = StateEllipsoid.from_center(far, torch.eye(6).double())
    with pytest.warns(RuntimeWarning):
        filter_update(flow, meas)


# -----------------------------------------------------------------------------
# Full estimator
# -----------------------------------------------------------------------------
def test_run_estimator_prediction_only():
    rng = make_generator(9)
    cfg = make_config()
    initial = StateEllipsoid.from_center(
        _random_state(1, rng), 1e-4 * torch.eye(6).double()
    )
    trajectory = run_estimator(initial, [], cfg, final_step=10)
    assert [e.event for e in trajectory] == [
        EstimatorEvent.INITIAL,
        EstimatorEvent.PREDICTED,
    ]
    expected = lgvi_integrate(initial.center, cfg.params, 10)
    assert torch.allclose(trajectory.final.rotation, expected[-1].rotation)

    trajectory = run_estimator(initial, [], cfg, final_step=10, emit_predicted=True)
    estimates = trajectory.estimates()
    assert [step for step, _ in estimates] == list(range(11))
    for (_, estimate), state in zip(estimates, expected):
        assert torch.allclose(estimate.rotation, state.rotation)
        assert torch.allclose(estimate.angular_velocity, state.angular_velocity)


def test_run_estimator_perfect_measurements():
    rng = make_generator(10)
    cfg = make_config(direction_bound=1e-6, velocity_bound=1e-6)
    truth0 = _random_state(1, rng)
    truth = lgvi_integrate(truth0, cfg.params, 10)
    initial = StateEllipsoid.from_center(
        truth0.retract(torch.tensor([[0.2, -0.1, 0.1, 0.1, 0.0, -0.1]]).double()),
        0.5 * torch.eye(6).double(),
    )
    frames = [(5, make_frame(truth[5], cfg)), (10, make_frame(truth[10], cfg))]
    trajectory = run_estimator(initial, frames, cfg)
    fused = trajectory.events(EstimatorEvent.FUSED)
    assert [e.step for e in fused] == [5, 10]
    assert len(trajectory.events(EstimatorEvent.MEASURED)) == 2
    for entry in fused:
        error = entry.ellipsoid.center.local(truth[entry.step])
        assert error[0, :3].norm() < 1e-6
        state = truth[entry.step]
        assert state_contains(
            entry.ellipsoid, state.rotation, state.angular_velocity
        ).all()


def test_schedule_frames():
    cfg = make_config()
    cfg.substeps = 20
    frame = MeasurementFrame(torch.eye(3).double(), torch.zeros(3).double())
    scheduled = schedule_frames([frame, frame, frame], cfg, start=5)
    assert [s for s, _ in scheduled] == [25, 45, 65]
    with pytest.raises(ValueError):
        schedule_frames([frame], cfg, start=-1)


def test_run_estimator_step_validation():
    cfg = make_config()
    initial = StateEllipsoid.from_center(
        _random_state(1, make_generator(11)), torch.eye(6).double()
    )
    frame = MeasurementFrame(torch.eye(3).double(), torch.zeros(3).double())
    with pytest.raises(ValueError):
        run_estimator(initial, [(5, frame), (5, frame)], cfg)
    with pytest.raises(ValueError):
        run_estimator(initial, [(5, frame), (3, frame)], cfg)
    with pytest.raises(ValueError):
        run_estimator(initial, [(-1, frame)], cfg)
    with pytest.raises(ValueError):
        run_estimator(initial, [(5, frame)], cfg, final_step=4)


def test_run_estimator_attaches_step():
    cfg = make_config()
    initial = StateEllipsoid.from_center(
        _random_state(1, make_generator(12)), torch.eye(6).double()
    )
    collinear = torch.tensor([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    frame = MeasurementFrame(collinear.double(), torch.zeros(3).double())
    with pytest.raises(DegenerateObservationsError) as err:
        run_estimator(initial, [(4, frame)], cfg)
    assert err.value.step == 4
    assert "[step 4]" in str(err.value)


def test_run_estimator_deterministic():
    rng = make_generator(13)
    cfg = make_config()
    truth0 = _random_state(1, rng)
    truth = lgvi_integrate(truth0, cfg.params, 6)
    nu = 1e-2 * torch.randn(1, 3, 3, generator=rng, dtype=torch.float64)
    frames = [(3, make_frame(truth[3], cfg, nu)), (6, make_frame(truth[6], cfg, nu))]
    initial = StateEllipsoid.from_center(truth0, 0.1 * torch.eye(6).double())
    first = run_estimator(initial, frames, cfg)
    second = run_estimator(initial, frames, cfg)
    assert len(first) == len(second)
    for a, b in zip(first, second):
        assert a.step == b.step and a.event == b.event
        assert torch.equal(a.ellipsoid.rotation, b.ellipsoid.rotation)
        assert torch.equal(a.ellipsoid.shape, b.ellipsoid.shape)


def test_run_estimator_rotations_and_fused_traces():
    rng = make_generator(14)
    cfg = make_config()
    truth0 = _random_state(1, rng)
    truth = lgvi_integrate(truth0, cfg.params, 60)
    frames = []
    for step in range(10, 61, 10):
        nu = torch.stack(
            [sample_in_ellipsoid(cfg.direction_bounds[i], rng) for i in range(3)],
            dim=1,
        )
        upsilon = sample_in_ellipsoid(cfg.angular_velocity_bound, rng)
        frames.append((step, make_frame(truth[step], cfg, nu, upsilon)))
    initial = StateEllipsoid.from_center(
        truth0.retract(torch.tensor([[0.3, -0.2, 0.1, 0.1, 0.0, -0.1]]).double()),
        0.5 * torch.eye(6).double(),
    )
    trajectory = run_estimator(
        initial, frames, cfg, final_step=70, emit_predicted=True
    )
    eye = torch.eye(3, dtype=torch.float64)
    for entry in trajectory:
        rotation = entry.ellipsoid.rotation
        defect = (rotation.transpose(1, 2) @ rotation - eye).norm(dim=(1, 2))
        assert (defect < 1e-10).all()

    predicted = {e.step: e for e in trajectory.events(EstimatorEvent.PREDICTED)}
    fused = trajectory.events(EstimatorEvent.FUSED)
    assert [e.step for e in fused] == list(range(10, 61, 10))
    for entry in fused:
        flow_trace = _trace(predicted[entry.step].ellipsoid.shape)
        assert (_trace(entry.ellipsoid.shape) <= flow_trace + 1e-9).all()
