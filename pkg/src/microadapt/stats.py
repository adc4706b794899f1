"""Two-sample cohort comparison: Mann-Whitney U with a rank-biserial effect size.

The p-value is exact for small groups (every split of the pooled sample is
enumerated, so ties are handled by construction) and switches to the
tie-corrected normal approximation with continuity correction above
``EXACT_LIMIT`` per group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Sequence

EXACT_LIMIT = 8


class StatsError(Exception):
    pass


@dataclass(frozen=True)
class CohortComparison:
    mean_diff: float  # mean(b) - mean(a)
    effect_size: float  # rank-biserial, in [-1, 1]; positive when b tends higher
    p_value: float  # two-sided
    u_statistic: float  # U for group b
    method: str  # "exact" or "normal_approximation"


def _midranks(values: Sequence[Fraction]) -> list[Fraction]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks: list[Fraction] = [Fraction(0)] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # ranks i+1 .. j+1 share the midrank
        mid = Fraction(i + 1 + j + 1, 2)
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _u_for_b(ranks: Sequence[Fraction], b_positions: Sequence[int], n_b: int) -> Fraction:
    rank_sum = sum((ranks[i] for i in b_positions), start=Fraction(0))
    return rank_sum - Fraction(n_b * (n_b + 1), 2)


def _exact_two_sided_p(pooled: list[Fraction], n_a: int, n_b: int) -> tuple[Fraction, Fraction]:
    """(U_b, p) by enumerating every split of the pooled sample."""
    ranks = _midranks(pooled)
    total = len(pooled)
    observed_b = list(range(n_a, total))
    u_observed = _u_for_b(ranks, observed_b, n_b)
    center = Fraction(n_a * n_b, 2)
    observed_dev = abs(u_observed - center)
    extreme = 0
    count = 0
    for split in combinations(range(total), n_b):
        count += 1
        u = _u_for_b(ranks, split, n_b)
        if abs(u - center) >= observed_dev:
            extreme += 1
    return u_observed, Fraction(extreme, count)


def _normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _approx_two_sided_p(pooled: list[Fraction], n_a: int, n_b: int) -> tuple[Fraction, float]:
    ranks = _midranks(pooled)
    total = len(pooled)
    u_b = _u_for_b(ranks, list(range(n_a, total)), n_b)
    mean_u = n_a * n_b / 2.0
    # tie correction over the pooled sample
    tie_term = 0
    seen: dict[Fraction, int] = {}
    for value in pooled:
        seen[value] = seen.get(value, 0) + 1
    for count in seen.values():
        tie_term += count**3 - count
    variance = (
        n_a * n_b / 12.0 * ((total + 1) - tie_term / (total * (total - 1)))
    )
    if variance <= 0:
        return u_b, 1.0
    deviation = abs(float(u_b) - mean_u)
    z = max(deviation - 0.5, 0.0) / math.sqrt(variance)  # continuity correction
    return u_b, min(1.0, 2.0 * _normal_sf(z))


def cohort_compare(
    scores_a: Sequence, scores_b: Sequence
) -> CohortComparison:
    """Compare two cohorts of scores; b is the "after" group.

    Exact enumeration when both groups have at most EXACT_LIMIT members,
    normal approximation otherwise.
    """
    if not scores_a or not scores_b:
        raise StatsError("cohort_compare requires two nonempty score lists")
    a = [_as_fraction(v) for v in scores_a]
    b = [_as_fraction(v) for v in scores_b]
    n_a, n_b = len(a), len(b)
    pooled = a + b
    mean_diff = sum(b, start=Fraction(0)) / n_b - sum(a, start=Fraction(0)) / n_a
    if n_a <= EXACT_LIMIT and n_b <= EXACT_LIMIT:
        u_b, p = _exact_two_sided_p(pooled, n_a, n_b)
        method = "exact"
        p_value = float(p)
    else:
        u_b, p_value = _approx_two_sided_p(pooled, n_a, n_b)
        method = "normal_approximation"
    effect = 2 * Fraction(u_b) / (n_a * n_b) - 1
    return CohortComparison(
        mean_diff=float(mean_diff),
        effect_size=float(effect),
        p_value=p_value,
        u_statistic=float(u_b),
        method=method,
    )


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise StatsError(f"not a score: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise StatsError(f"cannot interpret {value!r} as a score")
