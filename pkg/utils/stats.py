"""
Summary statistics and the Wilcoxon signed-rank test.

The exact null distribution of W+ is counted over all 2^n sign
assignments by the generating-function recursion: each rank r multiplies
the polynomial by (1 + x^r). Ranks are doubled so that tied (half-integer)
average ranks stay integral.
"""

import logging
import math
from typing import Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata

from utils.errors import DomainError


logger = logging.getLogger(__name__)

EXACT_MAX_N = 20
MIN_PAIRS = 5


def summarize(values: Sequence[float]) -> Tuple[float, float]:
    """
    Mean and sample standard deviation (n - 1 denominator, 0 for one value).

    Raises:
        DomainError: If values is empty.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise DomainError("cannot summarize an empty sample")
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return mean, std


def signed_rank_counts(doubled_ranks: Sequence[int]) -> np.ndarray:
    """
    Number of sign assignments giving each doubled W+ value.

    Returns:
        counts[k] = number of subsets of ranks whose doubled sum is k.
    """
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts


def _exact_p(doubled: np.ndarray, w2: int) -> float:
    counts = signed_rank_counts(doubled)
    tail = int(counts[: w2 + 1].sum())
    return min(1.0, 2.0 * tail / float(2 ** len(doubled)))


def _approx_p(ranks: np.ndarray, w: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_sizes = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48.0
    if var <= 0:
        return 1.0
    z = max(0.0, abs(w - mean) - 0.5) / math.sqrt(var)
    return min(1.0, 2.0 * float(norm.sf(z)))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], method: str = "auto") -> float:
    """
    Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped and ties get average ranks. With at most
    20 non-zero differences the p-value is exact, otherwise the normal
    approximation with tie and continuity corrections is used.

    Args:
        a: First sample.
        b: Second sample, paired with a.
        method: "auto", "exact" or "approx".

    Returns:
        The p-value, 1.0 when every difference is zero.

    Raises:
        DomainError: On mismatched or too small samples, or an unknown method.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError(f"paired samples differ in size: {x.shape} vs {y.shape}")
    if x.size < MIN_PAIRS:
        raise DomainError(f"at least {MIN_PAIRS} pairs are required, got {x.size}")
    if method not in ("auto", "exact", "approx"):
        raise DomainError(f"unknown method {method!r}")

    d = x - y
    d = d[d != 0]
    n = d.size
    if n == 0:
        return 1.0

    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    use_exact = method == "exact" or (method == "auto" and n <= EXACT_MAX_N)
    if use_exact:
        doubled = np.rint(2 * ranks).astype(np.int64)
        return _exact_p(doubled, int(round(2 * w)))
    return _approx_p(ranks, w)
