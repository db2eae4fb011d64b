"""
Batch-means confidence intervals, trend tests and replica seeding.
"""

import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy import stats

CONFIDENCE = 0.95


def mean_ci(values: Sequence[float], confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """Sample mean and Student-t half-width; half-width is inf below two values."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.inf
    m = float(arr.mean())
    if arr.size < 2:
        return m, math.inf
    q = stats.t.ppf(0.5 + confidence / 2.0, arr.size - 1)
    return m, float(q * arr.std(ddof=1) / math.sqrt(arr.size))


def mean_diff_ci(a: Sequence[float], b: Sequence[float], confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """Difference of means and its normal-approximation half-width (independent samples)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    var = a.var(ddof=1) / a.size + b.var(ddof=1) / b.size if min(a.size, b.size) > 1 else math.inf
    return float(a.mean() - b.mean()), float(z * math.sqrt(var))


def batch_means(series: Sequence[float], batches: int = 20, confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """
    Mean of a correlated series with a CI from non-overlapping batch means.
    A short tail that does not fill a batch is dropped from the CI only.
    """
    arr = np.asarray(series, dtype=float)
    b = min(batches, arr.size)
    if b < 2:
        return float(arr.mean()) if arr.size else math.nan, math.inf
    usable = arr[: (arr.size // b) * b].reshape(b, -1).mean(axis=1)
    _, hw = mean_ci(usable, confidence)
    return float(arr.mean()), hw


def trend_test(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """Least-squares slope of y on x and its two-sided p-value."""
    if len(x) < 3:
        return 0.0, 1.0
    result = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    pvalue = 1.0 if math.isnan(result.pvalue) else float(result.pvalue)
    return float(result.slope), pvalue


def replica_seeds(seed: int, cell: int, count: int) -> List[np.random.SeedSequence]:
    """Independent streams for the replicas of one cell; adding replicas never changes earlier ones."""
    return np.random.SeedSequence([int(seed), int(cell)]).spawn(count)


def replica_rngs(seed: int, cell: int, count: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in replica_seeds(seed, cell, count)]
