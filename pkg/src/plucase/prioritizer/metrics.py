"""Effectiveness of a test ranking against known failures."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from ..errors import NoFailures


def coverage_curve(order: Sequence[str], failing: Iterable[str]) -> list[float]:
    """Percentage of failing tests covered after executing the first x tests, x = 0..N."""
    failing = set(failing)
    k = len(failing)
    if k == 0:
        raise NoFailures("the ranked suite has no failing test")
    curve = [0.0]
    hit = 0
    for t in order:
        hit += t in failing
        curve.append(100.0 * hit / k)
    return curve


def area_under(curve: Sequence[float]) -> float:
    return sum((a + b) / 2.0 for a, b in zip(curve, curve[1:]))


@dataclass(frozen=True)
class RankingMetrics:
    auc: float
    ideal_auc: float
    auc_ratio: float
    pct_to_cover_all_failing: float
    pct_to_cover_80pct_failing: float
    pct_failing_in_first_half: float
    n_tests: int
    n_failing: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_ranking(order: Sequence[str], failing: Iterable[str]) -> RankingMetrics:
    order = list(order)
    failing = set(failing) & set(order)
    n, k = len(order), len(failing)
    curve = coverage_curve(order, failing)
    ideal = coverage_curve(sorted(order, key=lambda t: t not in failing), failing)
    auc, best = area_under(curve), area_under(ideal)
    counts = [round(c * k / 100.0) for c in curve]
    m_all = next(m for m, c in enumerate(counts) if c >= k)
    m_80 = next(m for m, c in enumerate(counts) if c >= 0.8 * k)
    half = math.ceil(n / 2)
    return RankingMetrics(auc, best, auc / best, 100.0 * m_all / n, 100.0 * m_80 / n,
                          100.0 * counts[half] / k, n, k)
