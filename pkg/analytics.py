"""
Run Analytics Module
Collects per-event error samples during a run and turns them into ECDF tables,
percentile summaries and report files
"""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from mapping import MapMetrics

logger = logging.getLogger(__name__)

DISTANCE_COLUMN = "distance_error_m"
AZIMUTH_COLUMN = "azimuth_error_deg"
SUMMARY_PERCENTILES = (50, 80, 90)


def ecdf_table(samples: pd.DataFrame, value_col: str, group_cols: Sequence[str] = ()) -> pd.DataFrame:
    """Empirical CDF of |value| per group: columns group..., value, probability"""
    group_cols = list(group_cols)
    frames = []
    grouped = samples.groupby(group_cols, sort=True) if group_cols else [((), samples)]
    for key, group in grouped:
        values = np.sort(np.abs(group[value_col].dropna().to_numpy(dtype=float)))
        if len(values) == 0:
            continue
        frame = pd.DataFrame({"value": values, "probability": np.arange(1, len(values) + 1) / len(values)})
        key = key if isinstance(key, tuple) else (key,)
        for col, val in zip(group_cols, key):
            frame.insert(group_cols.index(col), col, val)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=group_cols + ["value", "probability"])
    return pd.concat(frames, ignore_index=True)


def error_summary(samples: pd.DataFrame, value_col: str, group_cols: Sequence[str] = ()) -> pd.DataFrame:
    """count, mean, percentiles and max of |value| per group"""
    group_cols = list(group_cols)
    rows = []
    grouped = samples.groupby(group_cols, sort=True) if group_cols else [((), samples)]
    for key, group in grouped:
        values = np.abs(group[value_col].dropna().to_numpy(dtype=float))
        if len(values) == 0:
            continue
        key = key if isinstance(key, tuple) else (key,)
        row = dict(zip(group_cols, key))
        row.update({"metric": value_col, "count": len(values), "mean": float(values.mean())})
        for q in SUMMARY_PERCENTILES:
            row[f"p{q}"] = float(np.percentile(values, q))
        row["max"] = float(values.max())
        rows.append(row)
    return pd.DataFrame(rows)


@dataclass
class RunReport:
    """Outcome of a run or a capability sweep"""
    name: str
    samples: pd.DataFrame
    group_cols: List[str] = field(default_factory=list)
    map_metrics: Optional[MapMetrics] = None
    counters: Dict[str, int] = field(default_factory=dict)
    duration_s: float = 0.0

    @property
    def distance_errors(self) -> np.ndarray:
        return self.samples[DISTANCE_COLUMN].dropna().to_numpy(dtype=float)

    @property
    def azimuth_errors(self) -> np.ndarray:
        return self.samples[AZIMUTH_COLUMN].dropna().to_numpy(dtype=float)

    def distance_ecdf(self) -> pd.DataFrame:
        return ecdf_table(self.samples, DISTANCE_COLUMN, self.group_cols)

    def azimuth_ecdf(self) -> pd.DataFrame:
        return ecdf_table(self.samples, AZIMUTH_COLUMN, self.group_cols)

    def summary(self) -> pd.DataFrame:
        parts = [error_summary(self.samples, col, self.group_cols) for col in (DISTANCE_COLUMN, AZIMUTH_COLUMN)]
        parts = [p for p in parts if not p.empty]
        return pd.concat(parts, ignore_index=True) if parts else pd.DataFrame()

    def to_dict(self) -> Dict:
        """JSON-friendly view; wall-clock duration is left out so reruns compare equal"""
        data = {
            "name": self.name,
            "samples": int(len(self.samples)),
            "counters": dict(sorted(self.counters.items())),
            "summary": self.summary().to_dict(orient="records"),
        }
        if self.map_metrics is not None:
            data["map_metrics"] = self.map_metrics.as_row()
        return data


class RunAnalytics:
    """Per-run sample log, filled event by event"""

    def __init__(self, name: str, group_cols: Sequence[str] = ()):
        self.name = name
        self.group_cols = list(group_cols)
        self.rows: List[Dict] = []
        self.counters: Counter = Counter()

    def log_sample(self, distance_error_m: Optional[float], azimuth_error_deg: Optional[float], **fields) -> None:
        row = dict(fields)
        row[DISTANCE_COLUMN] = np.nan if distance_error_m is None else float(distance_error_m)
        row[AZIMUTH_COLUMN] = np.nan if azimuth_error_deg is None else float(azimuth_error_deg)
        self.rows.append(row)

    def count(self, key: str, amount: int = 1) -> None:
        self.counters[key] += amount

    def build(self, map_metrics: Optional[MapMetrics] = None, duration_s: float = 0.0) -> RunReport:
        samples = pd.DataFrame(self.rows)
        for col in (DISTANCE_COLUMN, AZIMUTH_COLUMN):
            if col not in samples:
                samples[col] = pd.Series(dtype=float)
        return RunReport(name=self.name, samples=samples, group_cols=self.group_cols,
                         map_metrics=map_metrics, counters=dict(self.counters), duration_s=duration_s)


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(data: Dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return path


def export_report(report: RunReport, out_dir: Union[str, Path], suffix: str = "") -> List[Path]:
    """Write samples, ECDF tables, summary and report.json; returns the written paths"""
    out_dir = Path(out_dir)
    tag = f"_{suffix}" if suffix else ""
    written = []
    samples_path = out_dir / (f"capabilities{tag}.csv" if suffix else "errors.csv")
    report.samples.to_csv(samples_path, index=False)
    written.append(samples_path)
    for label, table in (("distance", report.distance_ecdf()), ("azimuth", report.azimuth_ecdf())):
        path = out_dir / (f"ecdf{tag}_{label}.csv")
        table.to_csv(path, index=False)
        written.append(path)
    summary_path = out_dir / f"summary{tag}.csv"
    report.summary().to_csv(summary_path, index=False)
    written.append(summary_path)
    written.append(write_json(report.to_dict(), out_dir / f"report{tag}.json"))
    logger.info("exported report '%s' (%d samples) to %s", report.name, len(report.samples), out_dir)
    return written


def ecdf_is_valid(table: pd.DataFrame, group_cols: Iterable[str] = ()) -> bool:
    """Non-decreasing probability per group, ending at exactly 1.0"""
    group_cols = list(group_cols)
    grouped = table.groupby(group_cols, sort=True) if group_cols else [((), table)]
    for _, group in grouped:
        probs = group["probability"].to_numpy(dtype=float)
        values = group["value"].to_numpy(dtype=float)
        if len(probs) == 0:
            continue
        if np.any(np.diff(probs) < 0) or np.any(np.diff(values) < 0) or probs[-1] != 1.0:
            return False
    return True
