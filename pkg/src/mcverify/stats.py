"""Goodness-of-fit tests with asymptotic p-values.

These are the building blocks the exactness tests feed: two-sample and
one-sample Kolmogorov-Smirnov for continuous values, Pearson chi-square for
rank uniformity, a two-sample chi-square homogeneity test for discrete
values, and the Bonferroni aggregate used by the sequential wrapper.

Every p-value is clamped to [1e-300, 1] so downstream log/compare logic never
sees an exact zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

__all__ = [
    "TestOutcome",
    "bonferroni_min",
    "chi2_two_sample_discrete",
    "chi2_uniformity",
    "kolmogorov_sf",
    "ks_one_sample_uniform01",
    "ks_two_sample",
]

_P_FLOOR = 1e-300


@dataclass(frozen=True)
class TestOutcome:
    """Result of one goodness-of-fit test."""

    statistic: float
    p_value: float
    n_effective: int


def _clamp_p(p: float) -> float:
    if p != p:  # NaN guard; upstream validation should make this unreachable
        raise ValueError("p-value computation produced NaN")
    return min(1.0, max(_P_FLOOR, p))


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution.

    Alternating series 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lam^2), at least
    100 terms, truncated once terms fall below 1e-12.  Below lam = 0.005 the
    result is 1.0 to double precision, which also sidesteps the slow
    convergence of the series there.
    """
    if lam < 0.005:
        return 1.0
    a = 2.0 * lam * lam
    total = 0.0
    sign = 1.0
    for j in range(1, 1001):
        term = math.exp(-a * j * j)
        total += sign * term
        sign = -sign
        if j >= 100 and term < 1e-12:
            break
    return min(1.0, max(0.0, 2.0 * total))


def _as_sample(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must be a nonempty sample")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def ks_two_sample(x, y) -> TestOutcome:
    """Two-sample KS test; asymptotic p-value.

    The statistic is the sup-distance between the two empirical CDFs,
    evaluated at every pooled observation (right limits), which handles ties
    exactly.  The asymptotic argument is sqrt(n m / (n + m)) * D with no
    small-sample continuity correction.
    """
    xs = np.sort(_as_sample(x, "x"))
    ys = np.sort(_as_sample(y, "y"))
    n = xs.size
    m = ys.size
    pooled = np.concatenate([xs, ys])
    cdf_x = np.searchsorted(xs, pooled, side="right") / n
    cdf_y = np.searchsorted(ys, pooled, side="right") / m
    stat = float(np.max(np.abs(cdf_x - cdf_y)))
    lam = math.sqrt(n * m / (n + m)) * stat
    return TestOutcome(stat, _clamp_p(kolmogorov_sf(lam)), n + m)


def ks_one_sample_uniform01(x) -> TestOutcome:
    """One-sample KS test against U(0, 1)."""
    xs = np.sort(_as_sample(x, "x"))
    if xs[0] < 0.0 or xs[-1] > 1.0:
        raise ValueError("sample values must lie in [0, 1]")
    n = xs.size
    i = np.arange(1, n + 1)
    d_plus = float(np.max(i / n - xs))
    d_minus = float(np.max(xs - (i - 1) / n))
    stat = max(d_plus, d_minus, 0.0)
    lam = math.sqrt(n) * stat
    return TestOutcome(stat, _clamp_p(kolmogorov_sf(lam)), n)


def _as_counts(c, name: str) -> np.ndarray:
    arr = np.asarray(c)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"{name} must be a 1-d count vector with >= 2 cells")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.all(arr == rounded):
            raise ValueError(f"{name} must contain integers")
        arr = rounded.astype(np.int64)
    else:
        arr = arr.astype(np.int64)
    if (arr < 0).any():
        raise ValueError(f"{name} must be nonnegative")
    return arr


def chi2_uniformity(counts) -> TestOutcome:
    """Pearson chi-square test of uniformity over L cells.

    Requires at least 2 cells and a total count of at least the cell count
    (below that the asymptotic reference is meaningless).  L - 1 degrees of
    freedom.
    """
    c = _as_counts(counts, "counts")
    total = int(c.sum())
    n_cells = c.size
    if total < n_cells:
        raise ValueError(
            f"total count {total} is below the cell count {n_cells}"
        )
    expected = total / n_cells
    stat = float(((c - expected) ** 2 / expected).sum())
    p = float(gammaincc((n_cells - 1) / 2.0, stat / 2.0))
    return TestOutcome(stat, _clamp_p(p), total)


def chi2_two_sample_discrete(counts_a, counts_b) -> TestOutcome:
    """Chi-square homogeneity test for two discretely-valued samples.

    Input vectors index the same categories.  Pooled-empty categories are
    dropped; then tail categories are merged inward (leftmost first, then
    rightmost) while the smaller sample's expected count in an edge bin is
    below 5 and more than two bins remain.  K - 1 degrees of freedom on the
    K merged bins.
    """
    a = _as_counts(counts_a, "counts_a")
    b = _as_counts(counts_b, "counts_b")
    if a.size != b.size:
        raise ValueError("count vectors must index the same categories")
    n_a = int(a.sum())
    n_b = int(b.sum())
    if n_a == 0 or n_b == 0:
        raise ValueError("both samples must be nonempty")
    total = n_a + n_b

    pooled = a + b
    keep = pooled > 0
    a = a[keep]
    b = b[keep]
    pooled = pooled[keep]
    if pooled.size < 2:
        raise ValueError("fewer than 2 populated categories")

    # min expected over the two rows is pooled_j * min(n_a, n_b) / total
    floor_w = min(n_a, n_b) / total
    a = list(a)
    b = list(b)
    pooled = list(pooled)
    while len(pooled) > 2:
        if pooled[0] * floor_w < 5.0:
            for row in (a, b, pooled):
                head = row.pop(0)
                row[0] += head
        elif pooled[-1] * floor_w < 5.0:
            for row in (a, b, pooled):
                tail = row.pop()
                row[-1] += tail
        else:
            break

    stat = 0.0
    for j in range(len(pooled)):
        e_a = pooled[j] * n_a / total
        e_b = pooled[j] * n_b / total
        stat += (a[j] - e_a) ** 2 / e_a + (b[j] - e_b) ** 2 / e_b
    df = len(pooled) - 1
    p = float(gammaincc(df / 2.0, stat / 2.0))
    return TestOutcome(float(stat), _clamp_p(p), total)


def bonferroni_min(p_values) -> float:
    """Bonferroni-corrected minimum: min(1, d * min(p)) over d p-values."""
    p = list(p_values)
    if not p:
        raise ValueError("need at least one p-value")
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"p-values must lie in [0, 1], got {v}")
    return min(1.0, len(p) * min(p))
