"""Time-stamped simulation record and its CSV schema."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LOG_SCHEMA_VERSION = 1
SCALAR_COLUMNS = ("V", "b_lse", "b_min", "lambda_V", "lambda_h", "delta")


def log_columns(q_labels, m: int) -> list[str]:
    """Column order of the CSV log (schema version ``LOG_SCHEMA_VERSION``)."""
    return (
        ["t", *q_labels, "tip_x", "tip_y", "tip_z"]
        + [f"u{j + 1}" for j in range(m)]
        + list(SCALAR_COLUMNS)
        + ["active_set"]
    )


@dataclass
class TrajectoryLog:
    q_labels: list
    m: int
    t: list = field(default_factory=list)
    q: list = field(default_factory=list)
    tip: list = field(default_factory=list)
    u: list = field(default_factory=list)
    V: list = field(default_factory=list)
    b_lse: list = field(default_factory=list)
    b_min: list = field(default_factory=list)
    lambda_V: list = field(default_factory=list)
    lambda_h: list = field(default_factory=list)
    delta: list = field(default_factory=list)
    active_set: list = field(default_factory=list)
    # wall-clock seconds of each control computation (not written to the CSV)
    step_seconds: list = field(default_factory=list)
    # wall-clock seconds spent inside the solver proper, when reported
    solve_seconds: list = field(default_factory=list)
    error_estimates: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, t, q, tip, u, V, b_lse=math.nan, b_min=math.nan, lambda_V=math.nan,
               lambda_h=math.nan, delta=math.nan, active_set="", step_seconds=math.nan,
               solve_seconds=math.nan):
        self.t.append(float(t))
        self.q.append(np.array(q, dtype=float))
        self.tip.append(np.array(tip, dtype=float))
        self.u.append(np.array(u, dtype=float))
        self.V.append(float(V))
        self.b_lse.append(float(b_lse))
        self.b_min.append(float(b_min))
        self.lambda_V.append(float(lambda_V))
        self.lambda_h.append(float(lambda_h))
        self.delta.append(float(delta))
        self.active_set.append(active_set)
        self.step_seconds.append(float(step_seconds))
        self.solve_seconds.append(float(solve_seconds))

    def __len__(self) -> int:
        return len(self.t)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    @property
    def columns(self) -> list[str]:
        return log_columns(self.q_labels, self.m)

    def rows(self):
        for k in range(len(self)):
            yield (
                [self.t[k], *self.q[k], *self.tip[k], *self.u[k]]
                + [getattr(self, c)[k] for c in SCALAR_COLUMNS]
                + [self.active_set[k]]
            )

    def summary(self) -> dict:
        b_min = self.array("b_min")
        finite = b_min[np.isfinite(b_min)]
        steps = self.array("step_seconds")
        steps = steps[np.isfinite(steps)]
        solves = self.array("solve_seconds")
        solves = solves[np.isfinite(solves)]
        out = {
            "schema_version": LOG_SCHEMA_VERSION,
            "records": len(self),
            "final_V": self.V[-1] if self.V else math.nan,
            "min_b_min": float(finite.min()) if finite.size else math.nan,
            "mean_step_seconds": float(steps.mean()) if steps.size else math.nan,
            "total_control_seconds": float(steps.sum()) if steps.size else 0.0,
            "total_solve_seconds": float(solves.sum()) if solves.size else 0.0,
        }
        out.update(self.meta)
        return out

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows():
                w.writerow([x if isinstance(x, str) else repr(float(x)) for x in row])
        return path

    def write_summary(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.summary(), indent=2, default=float) + "\n")
        return path


def read_csv(path) -> tuple[list[str], np.ndarray, list[str]]:
    """Header, numeric block and the active-set column of a written log."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data, active = [], []
        for row in r:
            data.append([float(x) for x in row[:-1]])
            active.append(row[-1])
    return header, np.array(data), active
