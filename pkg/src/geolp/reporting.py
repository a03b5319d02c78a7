"""Report rows, CSV/JSON emission and small fitting helpers.

CSV bodies are deterministic: fixed column order, repr-based float
formatting, no timestamps.  Timestamps and environment notes live only in
the JSON run summary.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RATIO_COLUMNS",
    "RatioReport",
    "format_value",
    "rows_to_csv",
    "write_csv",
    "write_json",
    "config_hash",
    "fit_rate",
]

RATIO_COLUMNS = (
    "check_id",
    "sample_id",
    "k",
    "k_prime",
    "k_dprime",
    "lhs",
    "rhs",
    "ratio",
    "fit_exponent",
    "resolution",
    "stable",
)


def format_value(v) -> str:
    if isinstance(v, float):
        if np.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if isinstance(v, bool):
        return "true" if v else "false"
    return "" if v is None else str(v)


def rows_to_csv(rows: list[dict], columns=RATIO_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path: str, rows: list[dict], columns=RATIO_COLUMNS) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, columns))


def write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class RatioReport:
    """Per-inequality record: rows, max ratio, fits and stability."""

    check_id: str
    rows: list[dict] = field(default_factory=list)
    max_ratio: float = 0.0
    fit_exponent: float = float("nan")
    resolutions: list = field(default_factory=list)
    stable: bool | None = None
    extra: dict = field(default_factory=dict)

    def finish(self) -> "RatioReport":
        ratios = [r["ratio"] for r in self.rows if np.isfinite(r.get("ratio", np.nan))]
        self.max_ratio = float(max(ratios)) if ratios else 0.0
        return self


def fit_rate(hs, residuals) -> float:
    """Least-squares convergence rate of residuals ~ h^rate."""
    hs = np.asarray(hs, dtype=float)
    res = np.asarray(residuals, dtype=float)
    keep = res > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[keep]), np.log(res[keep]), 1)[0])
