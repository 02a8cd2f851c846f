"""Nonparametric and correlation statistics for the evaluation pipeline.

Mann-Whitney U uses midranks for ties. The two-sided p-value is exact
(permutation enumeration) when the smaller sample has <= 8 observations and
the enumeration is tractable; otherwise it falls back to the normal
approximation with tie correction and a continuity correction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateInput, InsufficientData

# C(n+m, min(n, m)) above this falls back to the normal approximation even
# when min(n, m) <= 8 (e.g. 8 vs 800 is not enumerable).
EXACT_ENUMERATION_CAP = 5_000_000


def rankdata_midrank(values) -> np.ndarray:
    """Ranks starting at 1; ties share the mean of their ranks."""
    a = np.asarray(values, dtype=float)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(len(a), dtype=float)
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and a[order[j + 1]] == a[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_value: float
    method: str  # "exact" | "normal"


def _u_statistic(ranks_x: np.ndarray, n: int, m: int) -> float:
    return float(ranks_x.sum() - n * (n + 1) / 2.0)


def _exact_two_sided_p(ranks: np.ndarray, n: int, u_obs: float) -> float:
    """Enumerate all assignments of n of the pooled midranks to x."""
    m = len(ranks) - n
    mid = n * m / 2.0
    dev = abs(u_obs - mid) - 1e-9
    count = 0
    total = 0
    for combo in itertools.combinations(range(len(ranks)), n):
        u = ranks[list(combo)].sum() - n * (n + 1) / 2.0
        total += 1
        if abs(u - mid) >= dev:
            count += 1
    return count / total


def _normal_two_sided_p(ranks: np.ndarray, n: int, u_obs: float) -> float:
    m = len(ranks) - n
    N = n + m
    mean = n * m / 2.0
    # tie correction from pooled value multiplicities
    _, counts = np.unique(ranks, return_counts=True)
    # midranks collapse ties; recover multiplicities from repeated midranks
    tie_sum = float(((counts ** 3 - counts)).sum())
    var = n * m / 12.0 * ((N + 1) - tie_sum / (N * (N - 1)))
    if var <= 0:
        return 1.0
    dev = abs(u_obs - mean)
    z = max(dev - 0.5, 0.0) / math.sqrt(var)  # continuity correction
    return math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(x, y) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test; U is reported for the first sample."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise InsufficientData("both samples must be non-empty")
    ranks = rankdata_midrank(np.concatenate([x, y]))
    u = _u_statistic(ranks[:n], n, m)
    if min(n, m) <= 8 and math.comb(n + m, min(n, m)) <= EXACT_ENUMERATION_CAP:
        # enumerate over the smaller side for speed; U_x + U_y = n*m keeps
        # the two-sided deviation identical either way
        if n <= m:
            p = _exact_two_sided_p(ranks, n, u)
        else:
            p = _exact_two_sided_p(ranks, m, n * m - u)
        return MannWhitneyResult(u=u, p_value=min(1.0, p), method="exact")
    p = _normal_two_sided_p(ranks, n, u)
    return MannWhitneyResult(u=u, p_value=min(1.0, p), method="normal")


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float


def _t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided p from a t statistic via the regularized incomplete beta."""
    if df <= 0:
        return float("nan")
    x = df / (df + t * t)
    return float(special.betainc(df / 2.0, 0.5, x))


def pearson_r(x, y) -> CorrelationResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 3 or len(y) != n:
        raise InsufficientData("need >= 3 paired observations")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = math.sqrt(float(xd @ xd))
    sy = math.sqrt(float(yd @ yd))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInput("zero variance input")
    r = float(xd @ yd) / (sx * sy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return CorrelationResult(r=r, p_value=0.0)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return CorrelationResult(r=r, p_value=_t_sf_two_sided(t, n - 2))


def spearman_rho(x, y) -> CorrelationResult:
    """Spearman = Pearson on midranks; p via the t approximation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3 or len(y) != len(x):
        raise InsufficientData("need >= 3 paired observations")
    return pearson_r(rankdata_midrank(x), rankdata_midrank(y))


@dataclass(frozen=True)
class OutlierFlag:
    index: int
    z_score: float


def zscore_outliers(errors, threshold: float = 3.0, ids=None) -> list:
    """Flag values whose |z| (population stdev) exceeds the threshold.

    Returns (id, z) pairs; ids default to indices. Zero stdev flags nothing.
    """
    e = np.asarray(errors, dtype=float)
    if len(e) < 3:
        raise InsufficientData("need >= 3 values")
    mean = e.mean()
    std = e.std()  # population (divides by n)
    if std == 0.0:
        return []
    z = (e - mean) / std
    keys = list(ids) if ids is not None else list(range(len(e)))
    return [(keys[i], float(z[i])) for i in np.nonzero(np.abs(z) > threshold)[0]]
