"""CSV rows and run manifests.

Floats are written with 17 significant digits and a ``.`` separator so that
identical runs produce identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .estimators import EstimatorResult

RESULT_COLUMNS = ("name", "estimate", "stderr", "n_reps", "predicted", "z")
HISTOGRAM_COLUMNS = ("bin_left", "bin_right", "count", "density", "predicted")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def write_rows(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def result_row(r: EstimatorResult) -> tuple:
    return (r.name, r.estimate, r.stderr, r.n_reps, r.predicted, r.z_score)


def results_csv(results: Iterable[EstimatorResult]) -> str:
    return write_rows(RESULT_COLUMNS, (result_row(r) for r in results))


def histogram_csv(rows) -> str:
    return write_rows(HISTOGRAM_COLUMNS,
                      ((r.bin_left, r.bin_right, r.count, r.density, r.predicted) for r in rows))


@dataclass
class RunManifest:
    tool_version: str
    master_seed: int
    config_echo: str
    results: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    wall_time_s: float = 0.0
    error: Optional[str] = None
    passed: Optional[bool] = None

    def add_results(self, results: Iterable[EstimatorResult], **extra) -> None:
        for r in results:
            self.results.append({**r.as_dict(), **extra})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, allow_nan=True) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())
