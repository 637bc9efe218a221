# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from .ellipsoid import (
    Ellipsoid,
    StateEllipsoid,
    check_shape_matrix,
    contains,
    quadratic_form,
    state_contains,
    state_error,
)
from .calculus import (
    IntersectionSearchParams,
    intersection_shape,
    minimal_intersection,
    minimal_sum,
    principal_axis,
    propagate,
)
