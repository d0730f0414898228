"""Accuracy matrix bookkeeping with final-average-performance and forgetting reductions."""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import PreconditionError


class PerfMatrix:
    """``m[j, k]``: accuracy on task ``k`` after training through task ``j`` (0-based storage).

    Cells that have not been measured hold NaN. Rows are filled in
    training order; cells above the diagonal are zero-shot measurements.
    """

    def __init__(self, num_tasks):
        self.num_tasks = int(num_tasks)
        self.values = np.full((self.num_tasks, self.num_tasks), np.nan)
        self.rows_completed = 0

    def record(self, after_task, task, accuracy):
        if not 0.0 <= accuracy <= 1.0:
            raise ValueError(f"accuracy {accuracy} outside [0, 1]")
        if after_task > self.rows_completed:
            raise PreconditionError("rows must be filled in training order")
        self.values[after_task, task] = accuracy
        if after_task == self.rows_completed and not np.isnan(self.values[after_task, : after_task + 1]).any():
            self.rows_completed = after_task + 1

    def record_row(self, after_task, accuracies):
        for k, acc in enumerate(accuracies):
            if acc is not None:
                self.record(after_task, k, acc)

    def __eq__(self, other):
        if not isinstance(other, PerfMatrix):
            return NotImplemented
        return self.num_tasks == other.num_tasks and np.array_equal(self.values, other.values, equal_nan=True)

    __hash__ = None

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=np.float64)
        pm = cls(values.shape[0])
        for j in range(pm.num_tasks):
            for k in range(pm.num_tasks):
                if not np.isnan(values[j, k]):
                    pm.record(j, k, float(values[j, k]))
        return pm


def compute_ap(matrix):
    m = matrix.num_tasks
    last = matrix.values[m - 1]
    if m == 0 or np.isnan(last).any():
        raise PreconditionError("final row is incomplete")
    return float(sum(last.tolist()) / m)


def compute_af(matrix):
    m = matrix.num_tasks
    if m < 2:
        raise PreconditionError("forgetting needs at least 2 tasks")
    diag = np.diag(matrix.values)[: m - 1]
    last = matrix.values[m - 1, : m - 1]
    if np.isnan(diag).any() or np.isnan(last).any():
        raise PreconditionError("diagonal or final row is incomplete")
    return float(sum((diag - last).tolist()) / (m - 1))


def summary(matrix):
    return {"AP": compute_ap(matrix), "AF": compute_af(matrix), "M": matrix.num_tasks}


def export_matrix(matrix, path):
    """CSV with header ``after_task,task_1..task_M``; one row per completed step, empty for unmeasured cells."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["after_task"] + [f"task_{k + 1}" for k in range(matrix.num_tasks)])
        for j in range(matrix.rows_completed):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in matrix.values[j]]
            writer.writerow([j + 1] + cells)
    return path


def read_matrix(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    pm = PerfMatrix(len(header) - 1)
    for row in body:
        j = int(row[0]) - 1
        for k, cell in enumerate(row[1:]):
            if cell != "":
                pm.record(j, k, float(cell))
    return pm


def write_summary(matrix, path):
    Path(path).write_text(json.dumps(summary(matrix), indent=2, sort_keys=True) + "\n", encoding="utf-8")
