"""Benchmark metrics, timing harness and report serialisation."""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, ShapeMismatch


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_labels(cls, y, pred):
        y = np.asarray(y).astype(bool).ravel()
        pred = np.asarray(pred).astype(bool).ravel()
        return cls(int(np.sum(y & pred)), int(np.sum(~y & pred)), int(np.sum(y & ~pred)),
                   int(np.sum(~y & ~pred)))

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def _ratio(num, den):
    return (num / den, False) if den else (0.0, True)


def metrics_from_counts(c):
    """Classification metrics from confusion counts.

    ``jsc`` is the sample-matching similarity (fraction of agreements), so
    ``jsc + zero_one == 1``; ``jsc_set`` is the set form TP / (TP + FP + FN).
    Vanishing denominators give 0 and set ``degenerate``.
    """
    n = c.total
    if n < 1:
        raise ValueError("no samples")
    agree = (c.tp + c.tn) / n
    precision, d1 = _ratio(c.tp, c.tp + c.fp)
    recall, d2 = _ratio(c.tp, c.tp + c.fn)
    jsc_set, d3 = _ratio(c.tp, c.tp + c.fp + c.fn)
    den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    mcc = (c.tp * c.tn - c.fp * c.fn) / math.sqrt(den) if den else 0.0
    return {
        "jsc": agree,
        "zero_one": 1.0 - agree,
        "precision": precision,
        "recall": recall,
        "mcc": mcc,
        "jsc_set": jsc_set,
        "degenerate": bool(d1 or d2 or den == 0),
        "tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn,
    }


def classification_metrics(y, scores, threshold=0.5):
    """Threshold ``scores`` (positive where ``score >= threshold``) and score them."""
    y = np.asarray(y, dtype=float).ravel()
    scores = np.asarray(scores, dtype=float).ravel()
    if y.shape != scores.shape:
        raise ShapeMismatch(f"{y.shape} labels vs {scores.shape} scores")
    if y.size < 1:
        raise ValueError("need at least one sample")
    if np.any((y != 0) & (y != 1)):
        raise DomainError("labels must be 0 or 1")
    return metrics_from_counts(ConfusionCounts.from_labels(y == 1, scores >= threshold))


def regression_metrics(y, yhat):
    """MAE, MSE, EVS and R^2, each averaged uniformly over target columns.

    Columns with zero target variance have no defined EVS / R^2; they are
    left out of those two averages and listed in ``zero_variance``.  Spread
    below ``1e-9`` of the column magnitude counts as zero (round-off).
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if yhat.ndim == 1:
        yhat = yhat[:, None]
    if y.shape != yhat.shape:
        raise ShapeMismatch(f"{y.shape} targets vs {yhat.shape} predictions")
    resid = y - yhat
    mae = np.mean(np.abs(resid), axis=0)
    mse = np.mean(resid ** 2, axis=0)
    var_y = np.var(y, axis=0)
    floor = 1e-9 * np.maximum(1.0, np.abs(y).max(axis=0))
    const = ~(np.sqrt(var_y) > floor)
    ok = ~const
    evs = 1.0 - np.var(resid, axis=0)[ok] / var_y[ok]
    ss_tot = np.sum((y - y.mean(axis=0)) ** 2, axis=0)[ok]
    r2 = 1.0 - np.sum(resid ** 2, axis=0)[ok] / ss_tot
    return {
        "mae": float(mae.mean()),
        "mse": float(mse.mean()),
        "evs": float(evs.mean()) if evs.size else float("nan"),
        "r2": float(r2.mean()) if r2.size else float("nan"),
        "zero_variance": [int(i) for i in np.flatnonzero(const)],
    }


def time_method(f, inputs, repetitions=5, batched=True):
    """Median over repetitions of the mean wall time per sample, in seconds.

    ``batched`` calls ``f(inputs)`` once per repetition; otherwise ``f`` is
    called on every row.  One untimed warm-up pass runs first.
    """
    if repetitions < 3:
        raise ValueError("use at least 3 repetitions")
    n = len(inputs)
    if n < 1:
        raise ValueError("no inputs to time")

    def run():
        if batched:
            f(inputs)
        else:
            for x in inputs:
                f(x)

    run()
    per_sample = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        run()
        per_sample.append((time.perf_counter() - t0) / n)
    return statistics.median(per_sample)


CLASSIFICATION_COLUMNS = [("JSC", "jsc"), ("0-1", "zero_one"), ("Prec.", "precision"),
                          ("Rec.", "recall"), ("MCC", "mcc")]
REGRESSION_COLUMNS = [("MAE", "mae"), ("MSE", "mse"), ("EVS", "evs"), ("R2", "r2")]


@dataclass
class BenchReport:
    method: str
    metrics: dict = field(default_factory=dict)
    avg_time: float = float("nan")


def write_reports(path, reports, kind="classification"):
    cols = CLASSIFICATION_COLUMNS if kind == "classification" else REGRESSION_COLUMNS
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Method"] + [c for c, _ in cols] + ["Avg.Time"])
        for r in reports:
            row = [r.method]
            for _, key in cols:
                v = r.metrics.get(key)
                row.append("N/A" if v is None else repr(float(v)))
            row.append(repr(float(r.avg_time)))
            w.writerow(row)


def read_reports(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
