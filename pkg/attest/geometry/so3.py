# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from typing import List, Optional, Tuple

import torch

from attest import constants
from attest.errors import NotSkewError, NotSPDError, SingularMatrixError
from attest.tolerances import get_tolerances


def _matrix_eps(dtype: torch.dtype) -> float:
    constants._CHECK_DTYPE_SUPPORTED(dtype)
    if dtype is torch.float32:
        return constants._SO3_MATRIX_EPS_F32
    return get_tolerances().rotation


def _hat_eps(dtype: torch.dtype) -> float:
    constants._CHECK_DTYPE_SUPPORTED(dtype)
    if dtype is torch.float32:
        return constants._SO3_HAT_EPS_F32
    return get_tolerances().skew


def check_group_tensor(tensor: torch.Tensor) -> bool:
    with torch.no_grad():
        if tensor.ndim != 3 or tensor.shape[1:] != (3, 3):
            raise ValueError("SO3 data tensors can only be 3x3 matrices.")
        return bool(is_rotation(tensor).all())


def check_tangent_vector(tangent_vector: torch.Tensor) -> bool:
    _check = tangent_vector.ndim == 3 and tangent_vector.shape[1:] == (3, 1)
    _check |= tangent_vector.ndim == 2 and tangent_vector.shape[1] == 3
    return _check


def check_hat_matrix(matrix: torch.Tensor):
    if matrix.ndim != 3 or matrix.shape[1:] != (3, 3):
        raise ValueError("Hat matrices of SO(3) can only be 3x3 matrices")

    defect = torch.linalg.matrix_norm(matrix.transpose(1, 2) + matrix)
    bad = defect > _hat_eps(matrix.dtype)
    if bad.any():
        raise NotSkewError(
            "Hat matrices of SO(3) can only be skew-symmetric. "
            f"Largest defect ||A + A^T||_F = {defect.max().item():.3e}.",
            batch_indices=bad.nonzero().view(-1).tolist(),
        )


def is_rotation(tensor: torch.Tensor) -> torch.Tensor:
    if tensor.ndim != 3 or tensor.shape[1:] != (3, 3):
        raise ValueError("SO3 data tensors can only be 3x3 matrices.")
    eps = _matrix_eps(tensor.dtype)
    eye = torch.eye(3, dtype=tensor.dtype, device=tensor.device)
    orth = torch.linalg.matrix_norm(tensor.transpose(1, 2) @ tensor - eye)
    det = torch.linalg.det(tensor)
    return (orth <= eps) & ((det - 1).abs() <= eps)


# -----------------------------------------------------------------------------
# Rand
# -----------------------------------------------------------------------------
def rand(
    *size: int,
    generator: Optional[torch.Generator] = None,
    dtype: Optional[torch.dtype] = None,
    device: constants.DeviceType = None,
) -> torch.Tensor:
    # Reference:
    # https://web.archive.org/web/20211105205926/http://planning.cs.uiuc.edu/node198.html
    if len(size) != 1:
        raise ValueError("The size should be 1D.")
    dtype = dtype or constants.DEFAULT_DTYPE
    u = torch.rand(3, size[0], generator=generator, dtype=dtype, device=device)
    u1 = u[0]
    u2, u3 = u[1:3] * 2 * constants.PI

    a = torch.sqrt(1.0 - u1)
    b = torch.sqrt(u1)
    w, x, y, z = (
        a * torch.sin(u2),
        a * torch.cos(u2),
        b * torch.sin(u3),
        b * torch.cos(u3),
    )
    # unit quaternion to rotation matrix; quaternions never leave this function
    ret = u.new_zeros(size[0], 3, 3)
    ret[:, 0, 0] = w * w + x * x - y * y - z * z
    ret[:, 0, 1] = 2 * (x * y - w * z)
    ret[:, 0, 2] = 2 * (x * z + w * y)
    ret[:, 1, 0] = 2 * (x * y + w * z)
    ret[:, 1, 1] = w * w - x * x + y * y - z * z
    ret[:, 1, 2] = 2 * (y * z - w * x)
    ret[:, 2, 0] = 2 * (x * z - w * y)
    ret[:, 2, 1] = 2 * (y * z + w * x)
    ret[:, 2, 2] = w * w - x * x - y * y + z * z
    return ret


# -----------------------------------------------------------------------------
# Hat
# -----------------------------------------------------------------------------
def hat(tangent_vector: torch.Tensor) -> torch.Tensor:
    if not check_tangent_vector(tangent_vector):
        raise ValueError("Tangent vectors of SO3 should be 3-D vectors.")
    tangent_vector = tangent_vector.view(-1, 3)
    matrix = tangent_vector.new_zeros(tangent_vector.shape[0], 3, 3)
    matrix[:, 0, 1] = -tangent_vector[:, 2]
    matrix[:, 0, 2] = tangent_vector[:, 1]
    matrix[:, 1, 2] = -tangent_vector[:, 0]
    matrix[:, 1, 0] = tangent_vector[:, 2]
    matrix[:, 2, 0] = -tangent_vector[:, 1]
    matrix[:, 2, 1] = tangent_vector[:, 0]
    return matrix


# -----------------------------------------------------------------------------
# Vee
# -----------------------------------------------------------------------------
def vee(matrix: torch.Tensor) -> torch.Tensor:
    check_hat_matrix(matrix)
    return 0.5 * project(matrix)


# -----------------------------------------------------------------------------
# Project
# -----------------------------------------------------------------------------
# Returns vee(A - A^T) for any square 3x3 A, with no skew check. Residuals of
# implicit equations go through here since they are skew only up to round-off.
def project(matrix: torch.Tensor) -> torch.Tensor:
    if matrix.shape[-2:] != (3, 3):
        raise ValueError("Inconsistent shape for the matrix to project.")

    return torch.stack(
        (
            matrix[..., 2, 1] - matrix[..., 1, 2],
            matrix[..., 0, 2] - matrix[..., 2, 0],
            matrix[..., 1, 0] - matrix[..., 0, 1],
        ),
        dim=-1,
    )


# -----------------------------------------------------------------------------
# Exponential Map
# -----------------------------------------------------------------------------
def _exp_coefficients(
    theta: torch.Tensor, dtype: torch.dtype
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    theta2 = theta**2
    # Compute the approximations when theta ~ 0
    near_zero = theta < constants._SO3_NEAR_ZERO_EPS[dtype]
    non_zero = torch.ones(1, dtype=theta.dtype, device=theta.device)
    theta_nz = torch.where(near_zero, non_zero, theta)
    theta2_nz = torch.where(near_zero, non_zero, theta2)

    cosine = torch.where(near_zero, 1 - 0.5 * theta2, theta.cos())
    sine_by_theta = torch.where(near_zero, 1 - theta2 / 6, theta.sin() / theta_nz)
    one_minus_cosine_by_theta2 = torch.where(
        near_zero, 0.5 - theta2 / 24, (1 - theta.cos()) / theta2_nz
    )
    theta_minus_sine_by_theta3 = torch.where(
        near_zero,
        1.0 / 6 - theta2 / 120,
        (theta - theta.sin()) / (theta_nz * theta2_nz),
    )
    return cosine, sine_by_theta, one_minus_cosine_by_theta2, theta_minus_sine_by_theta3


def _exp_impl(tangent_vector: torch.Tensor) -> torch.Tensor:
    if not check_tangent_vector(tangent_vector):
        raise ValueError("Tangent vectors of SO3 should be 3-D vectors.")
    tangent_vector = tangent_vector.view(-1, 3)
    theta = torch.linalg.norm(tangent_vector, dim=1, keepdim=True).unsqueeze(1)
    cosine, sine_by_theta, one_minus_cosine_by_theta2, _ = _exp_coefficients(
        theta, tangent_vector.dtype
    )

    # Rodrigues: cos I + (1 - cos)/theta^2 v v^T + sin/theta S(v)
    ret = (
        one_minus_cosine_by_theta2
        * tangent_vector.view(-1, 3, 1)
        @ tangent_vector.view(-1, 1, 3)
    )
    ret = ret + cosine * torch.eye(3, dtype=ret.dtype, device=ret.device)
    ret = ret + sine_by_theta * hat(tangent_vector)
    return ret


# Right Jacobian of the exponential: exp(v + d) = exp(v) exp(J_r(v) d) + O(|d|^2)
def _jexp_impl(tangent_vector: torch.Tensor) -> Tuple[List[torch.Tensor], torch.Tensor]:
    if not check_tangent_vector(tangent_vector):
        raise ValueError("Tangent vectors of SO3 should be 3-D vectors.")
    tangent_vector = tangent_vector.view(-1, 3)
    theta = torch.linalg.norm(tangent_vector, dim=1, keepdim=True).unsqueeze(1)
    (
        _,
        sine_by_theta,
        one_minus_cosine_by_theta2,
        theta_minus_sine_by_theta3,
    ) = _exp_coefficients(theta, tangent_vector.dtype)

    jac = (
        theta_minus_sine_by_theta3
        * tangent_vector.view(-1, 3, 1)
        @ tangent_vector.view(-1, 1, 3)
    )
    jac = jac + sine_by_theta * torch.eye(3, dtype=jac.dtype, device=jac.device)
    jac = jac - one_minus_cosine_by_theta2 * hat(tangent_vector)

    return [jac], _exp_impl(tangent_vector)


def exp(
    tangent_vector: torch.Tensor, jacobians: Optional[List[torch.Tensor]] = None
) -> torch.Tensor:
    if jacobians is not None:
        if len(jacobians) != 0:
            raise ValueError("jacobians list to be populated must be empty.")
        jacs, ret = _jexp_impl(tangent_vector)
        jacobians.append(jacs[0])
        return ret
    return _exp_impl(tangent_vector)


def jexp(tangent_vector: torch.Tensor) -> Tuple[List[torch.Tensor], torch.Tensor]:
    return _jexp_impl(tangent_vector)


# -----------------------------------------------------------------------------
# Logarithm Map
# -----------------------------------------------------------------------------
# At a rotation angle of exactly pi the axis sign is a convention: the returned
# axis has a positive component along the coordinate whose diagonal entry of C
# is largest. exp(log(C)) = C holds on both sides of the branch.
def log(group: torch.Tensor) -> torch.Tensor:
    if not check_group_tensor(group):
        raise ValueError("Invalid data tensor for SO3.")

    sine_axis = 0.5 * project(group)
    cosine = 0.5 * (group[:, 0, 0] + group[:, 1, 1] + group[:, 2, 2] - 1)
    cosine = cosine.clamp(-1.0, 1.0)
    sine = sine_axis.norm(dim=1)
    theta = torch.atan2(sine, cosine)

    near_zero = theta < constants._SO3_NEAR_ZERO_EPS[group.dtype]
    near_pi = 1 + cosine <= constants._SO3_NEAR_PI_EPS[group.dtype]
    near_zero_or_near_pi = torch.logical_or(near_zero, near_pi)
    # Compute the approximation of theta / sin(theta) when theta is near to 0
    non_zero = torch.ones(1, dtype=group.dtype, device=group.device)
    sine_nz = torch.where(near_zero_or_near_pi, non_zero, sine)
    scale = torch.where(near_zero_or_near_pi, 1 + sine**2 / 6, theta / sine_nz)
    ret = sine_axis * scale.view(-1, 1)

    # theta ~ pi: (C + C^T)/2 = cos I + (1 - cos) a a^T, so the row with the
    # largest diagonal entry is parallel to the axis
    ddiag = torch.diagonal(group, dim1=1, dim2=2)
    major = ddiag.argmax(dim=1)
    aux = torch.arange(group.shape[0], device=group.device)
    sel_rows = 0.5 * (group[aux, major] + group[aux, :, major])
    sel_rows[aux, major] -= cosine
    axis = sel_rows / torch.where(
        near_pi, sel_rows.norm(dim=1), non_zero.expand(group.shape[0])
    ).view(-1, 1)
    sign_tmp = sine_axis[aux, major].sign()
    sign = torch.where(sign_tmp != 0, sign_tmp, torch.ones_like(sign_tmp))
    return torch.where(near_pi.view(-1, 1), axis * (theta * sign).view(-1, 1), ret)


# -----------------------------------------------------------------------------
# Symmetric positive definite square root
# -----------------------------------------------------------------------------
def spd_sqrt(matrix: torch.Tensor) -> torch.Tensor:
    if matrix.ndim != 3 or matrix.shape[1] != matrix.shape[2]:
        raise ValueError("spd_sqrt expects a batch of square matrices.")
    tol = get_tolerances()
    asym = torch.linalg.matrix_norm(matrix - matrix.transpose(1, 2))
    scale = torch.linalg.matrix_norm(matrix).clamp_min(torch.finfo(matrix.dtype).tiny)
    eigvals, eigvecs = torch.linalg.eigh(0.5 * (matrix + matrix.transpose(1, 2)))
    bad = (asym > tol.symmetry_rel * scale) | (
        eigvals[:, 0] <= tol.spd_eig * eigvals[:, -1].abs()
    )
    bad |= eigvals[:, -1] <= 0
    if bad.any():
        raise NotSPDError(
            "Matrix is not symmetric positive definite. "
            f"Smallest eigenvalue: {eigvals[:, 0].min().item():.3e}.",
            batch_indices=bad.nonzero().view(-1).tolist(),
        )
    ret = eigvecs @ torch.diag_embed(eigvals.sqrt()) @ eigvecs.transpose(1, 2)
    return 0.5 * (ret + ret.transpose(1, 2))


# -----------------------------------------------------------------------------
# QR with a rotation factor
# -----------------------------------------------------------------------------
# A = Q R with Q in SO(3) and R upper triangular. R[2, 2] carries the sign of
# det A.
def qr_special(matrix: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    if matrix.ndim != 3 or matrix.shape[1:] != (3, 3):
        raise ValueError("qr_special expects a batch of 3x3 matrices.")
    tol = get_tolerances()
    det = torch.linalg.det(matrix)
    bound = tol.singular_rel * torch.linalg.matrix_norm(matrix) ** 3
    bad = det.abs() <= bound
    if bad.any():
        raise SingularMatrixError(
            f"Matrix is singular to working precision (|det| = "
            f"{det.abs().min().item():.3e}).",
            batch_indices=bad.nonzero().view(-1).tolist(),
        )

    q, r = torch.linalg.qr(matrix)
    diag_sign = torch.diagonal(r, dim1=1, dim2=2).sign()
    diag_sign = torch.where(diag_sign == 0, torch.ones_like(diag_sign), diag_sign)
    q = q * diag_sign.unsqueeze(1)
    r = r * diag_sign.unsqueeze(2)

    flip = torch.linalg.det(q) < 0
    last = torch.ones_like(diag_sign)
    last[:, 2] = 1.0 - 2.0 * flip.to(last.dtype)
    return q * last.unsqueeze(1), r * last.unsqueeze(2)
