"""Streaming moment accumulators and small regression helpers.

Estimates produced by the simulation engine are reduced through
:class:`BatchAccumulator` so that results are identical no matter how the
path ensemble was chunked across workers: merging is exact field
arithmetic, and the pairwise reduction order is fixed by path index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BatchAccumulator",
    "merge",
    "merge_many",
    "log_slope",
    "geometric_rate",
]

# Reported confidence intervals require at least this many samples.
MIN_CI_SAMPLES = 100

_Z95 = 1.96


@dataclass(frozen=True)
class BatchAccumulator:
    """First two moments plus extrema of a sample batch."""

    n: int
    sum: float
    sum_sq: float
    min: float
    max: float

    @staticmethod
    def empty() -> "BatchAccumulator":
        return BatchAccumulator(0, 0.0, 0.0, math.inf, -math.inf)

    @staticmethod
    def from_samples(x: np.ndarray) -> "BatchAccumulator":
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return BatchAccumulator.empty()
        return BatchAccumulator(
            n=int(x.size),
            sum=float(np.sum(x)),
            sum_sq=float(np.sum(x * x)),
            min=float(np.min(x)),
            max=float(np.max(x)),
        )

    @property
    def mean(self) -> float:
        if self.n == 0:
            raise ValueError("mean of empty accumulator")
        return self.sum / self.n

    @property
    def variance(self) -> float:
        # Unbiased; clipped at zero against cancellation in sum_sq - n*mean^2.
        if self.n < 2:
            raise ValueError("variance needs at least two samples")
        m = self.mean
        return max(0.0, (self.sum_sq - self.n * m * m) / (self.n - 1))

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.n)

    @property
    def ci95(self) -> float:
        """95% CI half-width.  Refuses small samples outright."""
        if self.n < MIN_CI_SAMPLES:
            raise ValueError(
                f"confidence interval requires n >= {MIN_CI_SAMPLES}, got {self.n}"
            )
        return _Z95 * self.stderr


def merge(a: BatchAccumulator, b: BatchAccumulator) -> BatchAccumulator:
    """Combine two accumulators; commutative and associative by construction."""
    return BatchAccumulator(
        n=a.n + b.n,
        sum=a.sum + b.sum,
        sum_sq=a.sum_sq + b.sum_sq,
        min=min(a.min, b.min),
        max=max(a.max, b.max),
    )


def merge_many(parts: list[BatchAccumulator]) -> BatchAccumulator:
    """Pairwise tree reduction.

    The tree shape depends only on len(parts), so a fixed chunking always
    reproduces the same floating-point result.
    """
    if not parts:
        return BatchAccumulator.empty()
    work = list(parts)
    while len(work) > 1:
        nxt = []
        for i in range(0, len(work) - 1, 2):
            nxt.append(merge(work[i], work[i + 1]))
        if len(work) % 2:
            nxt.append(work[-1])
        work = nxt
    return work[0]


def log_slope(values: np.ndarray, band_size: int = 1) -> float:
    """Least-squares slope of log(values) against the index 0..len-1.

    Values must be strictly positive.  For a geometric sequence c*q^k this
    returns log(q) exactly (up to rounding).  With band_size > 1 the values
    are first summed in consecutive groups of that size (a trailing partial
    group is dropped) and the slope is per group.
    """
    y = np.asarray(values, dtype=float)
    if band_size < 1:
        raise ValueError("band_size must be >= 1")
    if band_size > 1:
        m = (y.size // band_size) * band_size
        y = y[:m].reshape(-1, band_size).sum(axis=1)
    if y.size < 2:
        raise ValueError("log_slope needs at least two values")
    if np.any(y <= 0):
        raise ValueError("log_slope requires positive values")
    k = np.arange(y.size, dtype=float)
    ly = np.log(y)
    kc = k - k.mean()
    return float(np.dot(kc, ly - ly.mean()) / np.dot(kc, kc))


def geometric_rate(values: np.ndarray) -> float:
    """Per-index geometric rate of a sequence of the form c * k^p * q^k.

    Fits log(values) with regressors [1, k, log k] and returns the
    coefficient of k, i.e. log(q).  The polynomial factor k^p that block
    counts contribute near a threshold is absorbed by the log-k regressor
    instead of polluting the rate.
    """
    y = np.asarray(values, dtype=float)
    if y.size < 4:
        raise ValueError("geometric_rate needs at least four values")
    if np.any(y <= 0):
        raise ValueError("geometric_rate requires positive values")
    k = np.arange(1, y.size + 1, dtype=float)
    design = np.column_stack([np.ones_like(k), k, np.log(k)])
    coef, *_ = np.linalg.lstsq(design, np.log(y), rcond=None)
    return float(coef[1])
