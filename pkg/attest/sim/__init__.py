# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from .scenario import (
    MetricsRecord,
    ScenarioConfig,
    ScenarioSchema,
    ScenarioSummary,
    config_from_schema,
    initial_condition_ratio,
    load_config,
    measurement_records,
    metrics_record,
    run_scenario,
    sample_in_ellipsoid,
    section_v_config,
    sphere_directions,
    summarize,
    synthesize_measurements,
    trajectory_metrics,
    validate,
)
from .metrics import CSV_COLUMNS, emit_metrics, emit_summary
