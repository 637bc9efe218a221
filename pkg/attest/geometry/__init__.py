# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from . import so3
from .so3 import exp as exp_so3
from .so3 import hat, is_rotation
from .so3 import jexp as jexp_so3
from .so3 import log as log_so3
from .so3 import project, qr_special
from .so3 import rand as rand_so3
from .so3 import spd_sqrt, vee
