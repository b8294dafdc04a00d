"""Two-sample and goodness-of-fit tests used by the path-law comparisons."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

MIN_EXPECTED = 5.0


@dataclass(frozen=True)
class StatResult:
    feature: str
    statistic: float
    p_value: float
    level: float
    n_a: int
    n_b: int

    @property
    def passed(self) -> bool:
        return self.p_value >= self.level


def _merge_sparse_columns(table: np.ndarray, min_expected: float = MIN_EXPECTED) -> np.ndarray:
    """Pool categories whose expected counts are small into one column."""
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] <= 1:
        return table
    col = table.sum(axis=0)
    expected_min = np.outer(table.sum(axis=1), col).min(axis=0) / table.sum()
    small = expected_min < min_expected
    if small.sum() >= 1:
        pooled = table[:, small].sum(axis=1, keepdims=True)
        table = np.hstack([table[:, ~small], pooled])
        table = table[:, table.sum(axis=0) > 0]
    return table


def chi2_two_sample(a, b, feature: str, level: float) -> StatResult:
    """Chi-squared homogeneity test of two samples of categorical labels."""
    a = np.asarray(a)
    b = np.asarray(b)
    cats, inv = np.unique(np.concatenate([a, b]), return_inverse=True)
    counts = np.vstack([np.bincount(inv[: a.size], minlength=cats.size),
                        np.bincount(inv[a.size:], minlength=cats.size)]).astype(float)
    counts = _merge_sparse_columns(counts)
    if counts.shape[1] <= 1:
        return StatResult(feature, 0.0, 1.0, level, a.size, b.size)
    stat, p, _, _ = sps.chi2_contingency(counts, correction=False)
    return StatResult(feature, float(stat), float(p), level, a.size, b.size)


def ks_two_sample(a, b, feature: str, level: float) -> StatResult:
    res = sps.ks_2samp(np.asarray(a, float), np.asarray(b, float))
    return StatResult(feature, float(res.statistic), float(res.pvalue), level, len(a), len(b))


def chi2_goodness_of_fit(counts, probs, feature: str, level: float) -> StatResult:
    """Observed category counts against exact probabilities (sparse cells pooled)."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = counts.sum()
    expected = probs / probs.sum() * n
    if np.any((expected == 0) & (counts > 0)):
        return StatResult(feature, float("inf"), 0.0, level, int(n), 0)
    small = expected < MIN_EXPECTED
    obs = np.append(counts[~small], counts[small].sum())
    exp = np.append(expected[~small], expected[small].sum())
    keep = exp > 0
    obs, exp = obs[keep], exp[keep]
    if obs.size <= 1:
        return StatResult(feature, 0.0, 1.0, level, int(n), 0)
    stat, p = sps.chisquare(obs, exp)
    return StatResult(feature, float(stat), float(p), level, int(n), 0)


def bonferroni(level: float, n_tests: int) -> float:
    return level / max(1, n_tests)
