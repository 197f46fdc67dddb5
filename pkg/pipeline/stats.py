"""Nonparametric test kernels: KS normality, Wilcoxon signed-rank and rank-sum, star levels.

Exact branches enumerate the permutation distribution over doubled midranks,
which are integers, so tail counts compare without rounding.
"""
import itertools
import logging
from typing import Sequence

import numpy as np
from scipy import stats as sps

from models import TestResult, EXACT, APPROXIMATE
from shared import InvalidArgumentError, NotComputableError
from shared.constants import (KS_MIN_N,
                              NO_STARS,
                              RANK_SUM_EXACT_MAX_N,
                              SIGNED_RANK_EXACT_MAX_N,
                              STAR_LEVELS)

logger = logging.getLogger(__name__)


def _clamp(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


def _as_sample(values: Sequence[float], name: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64).ravel()
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return array


def _tie_term(values: np.ndarray) -> float:
    """Sum of t^3 - t over tie groups."""
    _, counts = np.unique(values, return_counts=True)
    counts = counts.astype(np.float64)
    return float(np.sum(counts ** 3 - counts))


def ks_normality(sample: Sequence[float]) -> TestResult:
    """KS distance to a normal with moments estimated from the sample (no Lilliefors correction)."""
    x = np.sort(_as_sample(sample, 'sample'))
    n = x.size
    if n < KS_MIN_N:
        raise NotComputableError(f"KS normality needs at least {KS_MIN_N} values, got {n}")
    sigma = float(np.std(x, ddof=1))
    if sigma == 0.0:
        raise NotComputableError("KS normality is undefined for a zero-variance sample")
    cdf = sps.norm.cdf((x - x.mean()) / sigma)
    positions = np.arange(1, n + 1) / n
    d_plus = np.max(positions - cdf)
    d_minus = np.max(cdf - (positions - 1.0 / n))
    d = float(max(d_plus, d_minus))
    p = _clamp(sps.kstwobign.sf(np.sqrt(n) * d))
    return TestResult(d, p, APPROXIMATE, n, test='ks_normality')


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Two-sided paired signed-rank test on the nonzero differences x - y.

    Statistic W = min(W+, W-). Exact enumeration of all 2^n sign patterns
    for n <= 12, otherwise the normal approximation with tie and continuity
    corrections.
    """
    x, y = _as_sample(x, 'x'), _as_sample(y, 'y')
    if x.size != y.size:
        raise InvalidArgumentError(f"paired samples differ in length: {x.size} vs {y.size}")
    diffs = x - y
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        raise NotComputableError("all paired differences are zero")
    if n < 5:
        raise NotComputableError(f"signed-rank test needs at least 5 nonzero differences, got {n}")
    ranks = sps.rankdata(np.abs(diffs))
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    w_plus2 = int(doubled[diffs > 0].sum())
    total2 = int(doubled.sum())
    w2 = min(w_plus2, total2 - w_plus2)

    if n <= SIGNED_RANK_EXACT_MAX_N:
        patterns = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
        sums2 = patterns @ doubled
        extreme = np.minimum(sums2, total2 - sums2) <= w2
        p = int(np.count_nonzero(extreme)) / 2 ** n
        return TestResult(w2 / 2.0, _clamp(p), EXACT, n, test='wilcoxon_signed_rank')

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(np.abs(diffs)) / 48.0
    w = w2 / 2.0
    if var <= 0.0:
        return TestResult(w, 1.0, APPROXIMATE, n, test='wilcoxon_signed_rank')
    z = (abs(w - mean) - 0.5) / np.sqrt(var)
    p = 2.0 * sps.norm.sf(max(z, 0.0))
    return TestResult(w, _clamp(p), APPROXIMATE, n, test='wilcoxon_signed_rank')


def wilcoxon_rank_sum(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Two-sided rank-sum test; statistic U = min(U1, U2) from joint midranks.

    Exact enumeration of all C(n1 + n2, n1) assignments when n1 + n2 <= 16,
    otherwise the normal approximation with continuity and tie corrections.
    """
    x, y = _as_sample(x, 'x'), _as_sample(y, 'y')
    n1, n2 = x.size, y.size
    if n1 == 0 or n2 == 0:
        raise InvalidArgumentError("rank-sum test needs two non-empty samples")
    if n1 < 3 or n2 < 3:
        raise InvalidArgumentError(f"rank-sum test needs at least 3 values per sample, got {n1} and {n2}")
    joint = np.concatenate([x, y])
    total = n1 + n2
    ranks = sps.rankdata(joint)
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    r1_2 = int(doubled[:n1].sum())
    u1 = r1_2 / 2.0 - n1 * (n1 + 1) / 2.0
    u = min(u1, n1 * n2 - u1)

    if total <= RANK_SUM_EXACT_MAX_N:
        expected2 = n1 * (total + 1)
        observed = abs(r1_2 - expected2)
        subsets = np.array(list(itertools.combinations(range(total), n1)), dtype=np.int64)
        sums2 = doubled[subsets].sum(axis=1)
        extreme = np.abs(sums2 - expected2) >= observed
        p = int(np.count_nonzero(extreme)) / len(subsets)
        return TestResult(u, _clamp(p), EXACT, n1, n2, test='wilcoxon_rank_sum')

    mean = n1 * n2 / 2.0
    var = n1 * n2 / 12.0 * ((total + 1) - _tie_term(joint) / (total * (total - 1)))
    if var <= 0.0:
        return TestResult(u, 1.0, APPROXIMATE, n1, n2, test='wilcoxon_rank_sum')
    z = (abs(u1 - mean) - 0.5) / np.sqrt(var)
    p = 2.0 * sps.norm.sf(max(z, 0.0))
    return TestResult(u, _clamp(p), APPROXIMATE, n1, n2, test='wilcoxon_rank_sum')


def significance_stars(p: float) -> str:
    """'***' p < 0.001, '**' p < 0.01, '*' p < 0.05, '-' otherwise."""
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"p-value must lie in [0, 1], got {p}")
    for threshold, stars in STAR_LEVELS:
        if p < threshold:
            return stars
    return NO_STARS
