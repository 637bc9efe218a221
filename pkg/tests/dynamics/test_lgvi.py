# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import math

import numpy as np
import pytest  # noqa: F401
import torch

from attest.dynamics import (
    AttitudeState,
    ImplicitSolverParams,
    InertiaParams,
    lgvi_integrate,
    lgvi_step,
    potential_moment,
    linearize_step,
    solve_implicit_f,
    total_energy,
)
from attest.errors import NoConvergenceError
from attest.geometry import so3
from tests.common import BATCH_SIZES_TO_TEST, inertia_diag, make_generator


def _params(h=0.01, orbital_rate=1.0):
    return InertiaParams(inertia_diag(1.0, 2.8, 2.0), h, orbital_rate=orbital_rate)


def _random_state(batch_size, rng, scale=1.0):
    return AttitudeState(
        so3.rand(batch_size, generator=rng),
        scale * torch.randn(batch_size, 3, generator=rng, dtype=torch.float64),
    )


def test_solve_zero_momentum_is_identity():
    params = _params()
    rel = solve_implicit_f(torch.zeros(2, 3, dtype=torch.float64), params)
    assert torch.allclose(rel, torch.eye(3).double().expand(2, 3, 3))


@pytest.mark.parametrize("batch_size", BATCH_SIZES_TO_TEST)
@pytest.mark.parametrize("h", [1e-3, 1e-2, 5e-2])
def test_solve_residual(batch_size, h):
    rng = make_generator(0)
    params = _params(h)
    momentum = torch.randn(batch_size, 3, generator=rng, dtype=torch.float64)
    rel = solve_implicit_f(momentum, params)
    assert so3.is_rotation(rel).all()
    residual = so3.project(rel @ params.inertia_d) - h * momentum
    bound = 1e-12 * (1 + torch.linalg.matrix_norm(params.inertia_d))
    assert (residual.norm(dim=1) * 2**0.5 <= bound).all()


def test_solve_no_convergence():
    params = _params(orbital_rate=0.0)
    momentum = torch.tensor([[0.0, 0.0, 0.0], [0.4, 1.0, -0.7]]).double()
    with pytest.raises(NoConvergenceError) as err:
        solve_implicit_f(momentum, params, ImplicitSolverParams(max_iterations=0))
    assert err.value.batch_indices == [1]
    # converges with the default budget
    solve_implicit_f(momentum, params)


def test_solver_params_update():
    solver_params = ImplicitSolverParams()
    solver_params.update({"max_iterations": 10})
    assert solver_params.max_iterations == 10
    with pytest.raises(ValueError):
        solver_params.update({"bad_param": 1})


def test_torque_free_principal_spin():
    h, rate, steps = 0.01, 1.3, 50
    params = _params(h, orbital_rate=0.0)
    state = AttitudeState(
        torch.eye(3).double(), torch.tensor([0.0, 0.0, rate]).double()
    )
    trajectory = lgvi_integrate(state, params, steps)
    assert len(trajectory) == steps + 1
    assert trajectory[0] is state
    final = trajectory[-1]
    # each step turns about e3 by asin(h w)
    angle = steps * math.asin(h * rate)
    expected = so3.exp(torch.tensor([[0.0, 0.0, angle]]).double())
    assert torch.allclose(final.rotation, expected, atol=1e-10)
    assert torch.allclose(final.angular_velocity, state.angular_velocity, atol=1e-12)


def test_integrate_rejects_negative_steps():
    with pytest.raises(ValueError):
        lgvi_integrate(_random_state(1, make_generator(1)), _params(), -1)


@pytest.mark.parametrize("batch_size", BATCH_SIZES_TO_TEST)
def test_step_preserves_orthogonality(batch_size):
    rng = make_generator(2)
    trajectory = lgvi_integrate(_random_state(batch_size, rng), _params(0.05), 200)
    eye = torch.eye(3, dtype=torch.float64)
    for state in trajectory[1:]:
        rotation = state.rotation
        orth = torch.linalg.matrix_norm(rotation.transpose(1, 2) @ rotation - eye)
        assert (orth < 1e-12).all()
        assert ((torch.linalg.det(rotation) - 1).abs() < 1e-12).all()


def test_step_batch_consistency():
    rng = make_generator(3)
    state = _random_state(4, rng)
    params = _params()
    batched = lgvi_step(state, params)
    for i in range(4):
        single = lgvi_step(state[i], params)
        assert torch.allclose(single.rotation, batched.rotation[i : i + 1])
        assert torch.allclose(
            single.angular_velocity, batched.angular_velocity[i : i + 1]
        )


def test_second_order_convergence():
    rng = make_generator(4)
    state = _random_state(1, rng, scale=0.5)
    t_final = 0.4

    def _final(h):
        steps = round(t_final / h)
        return lgvi_integrate(state, _params(h), steps)[-1]

    step_sizes = [4e-3, 2e-3, 1e-3]
    reference = _final(step_sizes[-1] / 16)
    errors = [reference.local(_final(h)).norm().item() for h in step_sizes]
    for coarse, fine in zip(errors[:-1], errors[1:]):
        order = math.log2(coarse / fine)
        assert 1.8 <= order <= 2.2


@pytest.mark.slow
def test_energy_stays_in_band():
    state = AttitudeState(
        torch.diag(torch.tensor([-1.0, -1.0, 1.0])).double().unsqueeze(0),
        torch.tensor([[2.3160, 0.4468, -0.5910]]).double(),
    )
    params = _params(1e-3)
    # the solver raises unless |F J_d - J_d F^T - h S(p)| <= 1e-12 at every step
    inertia_d_norm = torch.linalg.matrix_norm(params.inertia_d).item()
    solver_params = ImplicitSolverParams(abs_err_tolerance=1e-12 / (1 + inertia_d_norm))
    steps = 100000
    energy0 = total_energy(state, params).item()
    energies = np.empty(steps + 1)
    energies[0] = energy0
    eye = torch.eye(3, dtype=torch.float64)
    worst_orth = 0.0
    for k in range(steps):
        state = lgvi_step(state, params, solver_params=solver_params)
        energies[k + 1] = total_energy(state, params).item()
        rotation = state.rotation[0]
        orth = torch.linalg.matrix_norm(rotation.T @ rotation - eye).item()
        worst_orth = max(worst_orth, orth)
    deviation = energies - energy0
    assert np.abs(deviation).max() < 1e-4 * abs(energy0)
    slope = np.polyfit(np.arange(steps + 1), deviation, 1)[0]
    assert abs(slope) < 1e-10
    assert worst_orth < 1e-12

    momentum = state.angular_velocity @ params.inertia + 0.5 * params.step_size * (
        potential_moment(state.rotation, params)
    )
    rel = solve_implicit_f(momentum, params, solver_params=solver_params)
    residual = so3.project(rel @ params.inertia_d) - params.step_size * momentum
    assert residual.norm().item() * 2**0.5 < 1e-12


def test_linearize_free_drift():
    h = 0.01
    params = _params(h, orbital_rate=0.0)
    center = AttitudeState(
        so3.rand(2, generator=make_generator(6)), torch.zeros(2, 3).double()
    )
    jac = linearize_step(center, params)
    assert jac.shape == (2, 6, 6)
    eye = torch.eye(3, dtype=torch.float64)
    expected = torch.cat(
        [torch.cat([eye, h * eye], dim=1), torch.cat([0 * eye, eye], dim=1)], dim=0
    )
    assert torch.allclose(jac, expected.expand(2, 6, 6), atol=1e-7)


@pytest.mark.parametrize("batch_size", BATCH_SIZES_TO_TEST)
def test_linearize_matches_perturbation(batch_size):
    rng = make_generator(7)
    params = _params(0.02)
    center = _random_state(batch_size, rng)
    jac = linearize_step(center, params)
    delta = 1e-5 * torch.randn(batch_size, 6, generator=rng, dtype=torch.float64)

    next_center = lgvi_step(center, params)
    next_perturbed = lgvi_step(center.retract(delta), params)
    actual = next_center.local(next_perturbed)
    predicted = (jac @ delta.unsqueeze(-1)).squeeze(-1)
    rel_err = (actual - predicted).norm(dim=1) / actual.norm(dim=1)
    assert (rel_err < 1e-3).all()

    # symplectic one-step map
    det = torch.linalg.det(jac)
    assert torch.allclose(det, torch.ones_like(det), atol=1e-6)
