# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import torch

from attest import constants

BATCH_SIZES_TO_TEST = (1, 10)


def make_generator(seed: int = 0) -> torch.Generator:
    rng = torch.Generator()
    rng.manual_seed(seed)
    return rng


def random_unit_vectors(
    *size: int, generator: torch.Generator, dtype: torch.dtype = torch.float64
) -> torch.Tensor:
    v = torch.randn(*size, 3, generator=generator, dtype=dtype)
    return v / v.norm(dim=-1, keepdim=True)


def random_spd(
    batch_size: int,
    dim: int,
    generator: torch.Generator,
    min_eig: float = 0.1,
    dtype: torch.dtype = torch.float64,
) -> torch.Tensor:
    a = torch.randn(batch_size, dim, dim, generator=generator, dtype=dtype)
    return a @ a.transpose(1, 2) + min_eig * torch.eye(dim, dtype=dtype)


def inertia_diag(*moments: float) -> torch.Tensor:
    return torch.diag(torch.tensor(moments, dtype=constants.DEFAULT_DTYPE))


# Samples x with x^T P^{-1} x = 1 (on the boundary) for P (B, N, N), n per batch.
def boundary_samples(
    shape: torch.Tensor, n: int, generator: torch.Generator
) -> torch.Tensor:
    batch_size, dim = shape.shape[:2]
    u = torch.randn(batch_size, n, dim, generator=generator, dtype=shape.dtype)
    u = u / u.norm(dim=2, keepdim=True)
    chol = torch.linalg.cholesky(shape)
    return u @ chol.transpose(1, 2)


# Uniform samples in the interior of E(0, P), n per batch.
def interior_samples(
    shape: torch.Tensor, n: int, generator: torch.Generator
) -> torch.Tensor:
    batch_size, dim = shape.shape[:2]
    radius = torch.rand(batch_size, n, 1, generator=generator, dtype=shape.dtype)
    return boundary_samples(shape, n, generator) * radius ** (1.0 / dim)
