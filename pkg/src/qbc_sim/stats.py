"""Statistics helpers: binomial intervals and the two-sample hiding test."""

import logging
from collections.abc import Sequence

import numpy as np
from scipy import stats

from .models import HidingTestResult

log = logging.getLogger(__name__)


def wilson_interval(
    successes: int, trials: int, confidence: float = 0.95
) -> tuple[float, float] | None:
    """Wilson score interval for a binomial proportion, or None if no trials."""
    if trials <= 0:
        return None
    ci = stats.binomtest(successes, trials).proportion_ci(
        confidence_level=confidence, method="wilson"
    )
    return max(0.0, float(ci.low)), min(1.0, float(ci.high))


def ratio(numerator: int, denominator: int) -> float | None:
    return numerator / denominator if denominator else None


def _quantile_edges(pooled: np.ndarray, n_bins: int) -> np.ndarray:
    edges = np.quantile(pooled, np.linspace(0.0, 1.0, n_bins + 1))
    return np.unique(edges)


def two_sample_chi_square(
    sample0: Sequence[int], sample1: Sequence[int], max_bins: int = 10
) -> HidingTestResult:
    """Chi-square homogeneity test of two count samples.

    Bins are pooled quantiles (about ten observations per bin); when ties
    collapse them, equal-width bins over the pooled range are used instead.
    """
    a = np.asarray(sample0, dtype=float)
    b = np.asarray(sample1, dtype=float)
    pooled = np.concatenate([a, b])
    n_bins = max(2, min(max_bins, pooled.size // 10))
    note = None

    edges = _quantile_edges(pooled, n_bins)
    if edges.size < 3:
        edges = np.histogram_bin_edges(pooled, bins=n_bins)
        edges = np.unique(edges)
        note = "quantile bins collapsed; widened to equal-width bins"

    counts0, _ = np.histogram(a, bins=edges)
    counts1, _ = np.histogram(b, bins=edges)
    table = np.vstack([counts0, counts1])
    table = table[:, table.sum(axis=0) > 0]

    if table.shape[1] < 2:
        log.warning("Hiding test degenerate: all announced counts share one bin")
        return HidingTestResult(
            statistic=0.0,
            p_value=1.0,
            n_bins=int(table.shape[1]),
            dof=0,
            counts_bit0=[int(c) for c in table[0]],
            counts_bit1=[int(c) for c in table[1]],
            note="degenerate: all announced counts fall into one bin",
        )

    result = stats.chi2_contingency(table, correction=False)
    return HidingTestResult(
        statistic=float(result[0]),
        p_value=float(result[1]),
        n_bins=int(table.shape[1]),
        dof=int(result[2]),
        counts_bit0=[int(c) for c in table[0]],
        counts_bit1=[int(c) for c in table[1]],
        note=note,
    )
