# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

import csv
import json
import pathlib
from typing import Any, Dict, List, Sequence, Union

from .scenario import MetricsRecord, ScenarioSummary

CSV_COLUMNS = [
    "step",
    "time",
    "zeta_norm_deg",
    "domega_norm",
    "trace_P",
    "max_eig_P",
    "max_eig_dir_x",
    "max_eig_dir_y",
    "max_eig_dir_z",
    "contains_truth",
]

METRICS_SCHEMA = "attest.metrics/v1"
SUMMARY_SCHEMA = "attest.summary/v1"

_FORMATS = ("csv", "json", "both")


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _row(record: MetricsRecord) -> List[str]:
    return [
        str(record.step),
        _fmt(record.time),
        _fmt(record.zeta_norm_deg),
        _fmt(record.domega_norm),
        _fmt(record.trace_P),
        _fmt(record.max_eig_P),
        *[_fmt(v) for v in record.max_eig_dir],
        str(int(record.contains_truth)),
    ]


def _as_json(record: MetricsRecord) -> Dict[str, Any]:
    return {
        "step": record.step,
        "time": record.time,
        "event": record.event,
        "zeta_norm_deg": record.zeta_norm_deg,
        "domega_norm": record.domega_norm,
        "trace_P": record.trace_P,
        "max_eig_P": record.max_eig_P,
        "max_eig_dir": list(record.max_eig_dir),
        "contains_truth": record.contains_truth,
    }


# Writes <path>.csv and/or <path>.json. Any suffix on path is replaced.
def emit_metrics(
    records: Sequence[MetricsRecord],
    fmt: str,
    path: Union[str, pathlib.Path],
) -> List[pathlib.Path]:
    if not records:
        raise ValueError("No metrics records to write.")
    if fmt not in _FORMATS:
        raise ValueError(f"Unknown metrics format {fmt}; expected one of {_FORMATS}.")
    path = pathlib.Path(path)
    written = []
    try:
        if fmt in ("csv", "both"):
            csv_path = path.with_suffix(".csv")
            with open(csv_path, "w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                writer.writerows(_row(r) for r in records)
            written.append(csv_path)
        if fmt in ("json", "both"):
            json_path = path.with_suffix(".json")
            with open(json_path, "w") as f:
                json.dump(
                    {
                        "schema": METRICS_SCHEMA,
                        "columns": CSV_COLUMNS,
                        "records": [_as_json(r) for r in records],
                    },
                    f,
                    indent=2,
                )
                f.write("\n")
            written.append(json_path)
    except OSError as err:
        raise OSError(err.errno, f"Could not write metrics to {path}: {err}") from err
    return written


def emit_summary(
    summaries: Sequence[ScenarioSummary],
    statistics: Dict[str, float],
    path: Union[str, pathlib.Path],
) -> pathlib.Path:
    path = pathlib.Path(path)
    try:
        with open(path, "w") as f:
            json.dump(
                {
                    "schema": SUMMARY_SCHEMA,
                    "runs": [s.to_dict() for s in summaries],
                    "statistics": statistics,
                },
                f,
                indent=2,
            )
            f.write("\n")
    except OSError as err:
        raise OSError(err.errno, f"Could not write summary to {path}: {err}") from err
    return path
