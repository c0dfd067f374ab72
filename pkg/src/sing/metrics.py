"""Aggregation of per-trial edge errors."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

__all__ = ["InsufficientData", "ErrorSeries", "mean_ci", "aggregate_csv", "CI_METHOD"]

CI_METHOD = "student-t"


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class ErrorSeries:
    values: tuple[int, ...]
    n_label: int

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise ValueError("error counts must be non-negative")
        object.__setattr__(self, "values", vals)


def mean_ci(series: ErrorSeries | Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """Mean and half-width of the two-sided Student-t interval."""
    vals = np.asarray(series.values if isinstance(series, ErrorSeries) else series, dtype=float)
    m = len(vals)
    if m < 2:
        raise InsufficientData("a confidence interval needs at least 2 values")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    vals = np.sort(vals)  # order-independent summation
    mean = float(vals.sum() / m)
    sd = float(np.sqrt(np.sum((vals - mean) ** 2) / (m - 1)))
    q = float(stats.t.ppf(0.5 + level / 2, m - 1))
    return mean, q * sd / math.sqrt(m)


def aggregate_csv(rows: Sequence[tuple[int, ErrorSeries, ErrorSeries]], level: float = 0.95) -> str:
    """CSV with columns ``n, mean_type1, ci_type1, mean_type2, ci_type2``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "mean_type1", "ci_type1", "mean_type2", "ci_type2"])
    for n, t1, t2 in rows:
        m1, h1 = mean_ci(t1, level)
        m2, h2 = mean_ci(t2, level)
        w.writerow([n, repr(m1), repr(h1), repr(m2), repr(h2)])
    return buf.getvalue()
