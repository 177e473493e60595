"""Easy/hard client splitting and the baseline selection rules.

Clients are ordered by the magnitude of their final-layer update, their
dataset sizes are accumulated into running sums, and the split index is the
position inside the quartile window that minimizes the size-weighted
within-cluster variance of the magnitudes.
"""
import logging
import math
from typing import List, Sequence, Tuple

import numpy as np

from src.config import QuartileRange
from src.constants import Q1_FRACTION, Q3_FRACTION
from src.types import ClientSummary, SplitDecision

logger = logging.getLogger("selection")

# Relative to max((u - mean)^2); splits whose variance is this close to the minimum count as ties.
TIE_TOLERANCE = 1e-12


class SelectionError(Exception):
    """Base exception for client selection errors"""
    pass


class EmptyInputError(SelectionError, ValueError):
    pass


class InvalidRangeError(SelectionError, ValueError):
    pass


class TooFewClientsError(SelectionError, ValueError):
    pass


class InvalidSelectionError(SelectionError, ValueError):
    """Raised for impossible k / d / m / epsilon requests"""
    pass


def sort_by_magnitude(summaries: Sequence[ClientSummary]) -> List[ClientSummary]:
    return sorted(summaries, key=lambda s: (s.magnitude, s.client_id))


def running_sums(sorted_summaries: Sequence[ClientSummary]) -> List[int]:
    sums = []
    total = 0
    for s in sorted_summaries:
        total += int(s.size)
        sums.append(total)
    return sums


def _first_reaching(sums: Sequence[int], fraction: Tuple[int, int]) -> int:
    num, den = fraction
    target = num * sums[-1]
    for k, s in enumerate(sums, start=1):
        if den * s >= target:
            return k
    return len(sums)


def iqr_indices(sums: Sequence[int]) -> Tuple[int, int]:
    """1-based smallest k with S_k >= 0.25*S_K and S_k >= 0.75*S_K, in exact integers"""
    if not sums:
        raise EmptyInputError("running sums are empty")
    return _first_reaching(sums, Q1_FRACTION), _first_reaching(sums, Q3_FRACTION)


def _validate_weighted(values: Sequence[float], sizes: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    if len(values) == 0:
        raise EmptyInputError("weighted statistics need at least one value")
    if len(values) != len(sizes):
        raise ValueError(f"{len(values)} values but {len(sizes)} sizes")
    u = np.asarray(values, dtype=np.float64)
    w = np.asarray(sizes, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("sizes must be positive")
    return u, w


def weighted_mean(values: Sequence[float], sizes: Sequence[int]) -> float:
    u, w = _validate_weighted(values, sizes)
    return float(np.dot(w, u) / w.sum())


def weighted_variance(values: Sequence[float], sizes: Sequence[int]) -> float:
    u, w = _validate_weighted(values, sizes)
    mean = np.dot(w, u) / w.sum()
    return float(np.dot(w, (u - mean) ** 2) / w.sum())


def _cluster_weights(sizes: Sequence[int], tau: int, count_weighted: bool) -> Tuple[float, float]:
    n = len(sizes)
    if count_weighted:
        return tau / n, (n - tau) / n
    total = float(sum(sizes))
    return sum(sizes[:tau]) / total, sum(sizes[tau:]) / total


def intra_split_variance(
    values: Sequence[float],
    sizes: Sequence[int],
    tau: int,
    count_weighted: bool = False,
) -> float:
    """
    w1*Var(U1) + w2*Var(U2) for U1 = values[:tau], U2 = values[tau:].

    Cluster weights are size fractions S_Uj/S_N, or count fractions |Uj|/N
    when count_weighted is set.
    """
    n = len(values)
    if not 1 <= tau < n:
        raise InvalidRangeError(f"tau={tau} outside [1, {n})")
    w1, w2 = _cluster_weights(sizes, tau, count_weighted)
    return (w1 * weighted_variance(values[:tau], sizes[:tau])
            + w2 * weighted_variance(values[tau:], sizes[tau:]))


def _prefix_sums(values: Sequence[float], sizes: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    u, w = _validate_weighted(values, sizes)
    centered = u - np.dot(w, u) / w.sum()
    zero = np.zeros(1)
    return (
        np.concatenate([zero, np.cumsum(w)]),
        np.concatenate([zero, np.cumsum(w * centered)]),
        np.concatenate([zero, np.cumsum(w * centered * centered)]),
    )


def _cluster_sse(w: np.ndarray, a: np.ndarray, b: np.ndarray, start: int, stop: int) -> float:
    """Size-weighted sum of squared deviations of elements [start, stop)"""
    weight = w[stop] - w[start]
    first = a[stop] - a[start]
    return max(0.0, (b[stop] - b[start]) - first * first / weight)


def optimal_split_index(
    values: Sequence[float],
    sizes: Sequence[int],
    lo: int,
    hi: int,
    count_weighted: bool = False,
) -> int:
    """
    argmin over tau in [lo, hi) of the intra-split variance, smallest tau on ties.

    lo == hi searches the single index lo. Prefix sums of size*u and size*u^2
    (on mean-centred values) give each candidate in O(1).
    """
    n = len(values)
    if lo < 1 or hi > n or lo > hi:
        raise InvalidRangeError(f"search range [{lo}, {hi}) invalid for {n} clients")
    if lo == hi:
        if lo >= n:
            raise InvalidRangeError(f"degenerate range at {lo} leaves no hard cluster")
        return lo

    w, a, b = _prefix_sums(values, sizes)
    total = w[n]
    # Squared centred spread; a constant shift of every value leaves it unchanged
    scale = float(np.max(np.diff(b) / np.diff(w)))
    tolerance = TIE_TOLERANCE * scale

    best_tau = lo
    best = math.inf
    for tau in range(lo, hi):
        left = _cluster_sse(w, a, b, 0, tau)
        right = _cluster_sse(w, a, b, tau, n)
        if count_weighted:
            value = (tau / n) * left / w[tau] + ((n - tau) / n) * right / (total - w[tau])
        else:
            value = (left + right) / total
        if value < best - tolerance:
            best = value
            best_tau = tau
    return best_tau


def _search_bounds(k_q1: int, k_q3: int, n: int, quartile_range: QuartileRange) -> Tuple[int, int]:
    if quartile_range == QuartileRange.FULL:
        return 1, n
    if quartile_range == QuartileRange.ZERO_Q3:
        return 1, k_q3
    if quartile_range == QuartileRange.Q1_END:
        return k_q1, n
    return k_q1, k_q3


def split_clients(
    summaries: Sequence[ClientSummary],
    quartile_range: QuartileRange = QuartileRange.Q1_Q3,
    count_weighted: bool = False,
) -> SplitDecision:
    """
    Sort by magnitude, bound the search by the quartile window and split into easy/hard.

    A degenerate window whose only index would empty the hard cluster makes the
    split terminal: every client is easy.

    Raises:
        TooFewClientsError: fewer than two clients
    """
    if len(summaries) < 2:
        raise TooFewClientsError(f"splitting needs at least 2 clients, got {len(summaries)}")

    ordered = sort_by_magnitude(summaries)
    ids = [s.client_id for s in ordered]
    values = [float(s.magnitude) for s in ordered]
    sizes = [int(s.size) for s in ordered]
    sums = running_sums(ordered)
    k_q1, k_q3 = iqr_indices(sums)
    n = len(ordered)
    lo, hi = _search_bounds(k_q1, k_q3, n, quartile_range)

    var_total = weighted_variance(values, sizes)
    if lo >= n:
        logger.debug(f"Terminal split: window [{lo}, {hi}) leaves no hard cluster")
        return SplitDecision(
            sorted_ids=ids, magnitudes=values, sizes=sizes, running_sums=sums,
            k_q1=k_q1, k_q3=k_q3, tau_split=n, easy_ids=ids, hard_ids=[],
            var_intra=var_total, var_inter=0.0, var_total=var_total, terminal=True,
        )

    tau = optimal_split_index(values, sizes, lo, hi, count_weighted)
    var_intra = intra_split_variance(values, sizes, tau, count_weighted)
    w1, w2 = _cluster_weights(sizes, tau, count_weighted)
    m1, m2 = weighted_mean(values[:tau], sizes[:tau]), weighted_mean(values[tau:], sizes[tau:])
    mean = w1 * m1 + w2 * m2
    var_inter = w1 * (m1 - mean) ** 2 + w2 * (m2 - mean) ** 2
    if count_weighted:
        # Variance of the mixture with clusters reweighted by count
        var_total = var_intra + var_inter
    return SplitDecision(
        sorted_ids=ids, magnitudes=values, sizes=sizes, running_sums=sums,
        k_q1=k_q1, k_q3=k_q3, tau_split=tau, easy_ids=ids[:tau], hard_ids=ids[tau:],
        var_intra=var_intra, var_inter=float(var_inter), var_total=var_total,
    )


def random_select(pool: Sequence[int], k: int, seed: int) -> List[int]:
    """Uniform sample of k ids without replacement, returned in ascending order"""
    if k < 0 or k > len(pool):
        raise InvalidSelectionError(f"cannot select {k} clients from a pool of {len(pool)}")
    rng = np.random.default_rng(seed)
    picked = rng.choice(np.asarray(sorted(pool), dtype=np.int64), size=k, replace=False)
    return sorted(int(c) for c in picked)


def poc_select(summaries: Sequence[ClientSummary], d: int, m: int, seed: int) -> List[int]:
    """Sample d candidates, keep the m with the highest loss (ties by lower id)"""
    if not 0 <= m <= d <= len(summaries):
        raise InvalidSelectionError(f"need 0 <= m ({m}) <= d ({d}) <= {len(summaries)}")
    by_id = {s.client_id: s for s in summaries}
    candidates = random_select(list(by_id), d, seed)
    ranked = sorted(candidates, key=lambda c: (-by_id[c].loss, c))
    return ranked[:m]


def oort_select(summaries: Sequence[ClientSummary], k: int, epsilon: float, seed: int) -> List[int]:
    """
    Exploit the highest size*loss utilities, explore floor(epsilon*k) uniformly from the rest.
    """
    if not 0 <= epsilon < 1:
        raise InvalidSelectionError(f"epsilon must lie in [0, 1), got {epsilon}")
    if k < 0 or k > len(summaries):
        raise InvalidSelectionError(f"cannot select {k} clients from {len(summaries)}")
    n_explore = math.floor(epsilon * k)
    n_exploit = k - n_explore
    ranked = sorted(summaries, key=lambda s: (-(s.size * s.loss), s.client_id))
    exploit = [s.client_id for s in ranked[:n_exploit]]
    rest = [s.client_id for s in ranked[n_exploit:]]
    explore = random_select(rest, n_explore, seed) if n_explore else []
    return exploit + explore
