"""Ordering of a product's test suite by predicted failure probability."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping

from .logistic import LogisticIRLS
from .training import FACTORS, TrainingRow, design_matrix


@dataclass(frozen=True)
class RankedTest:
    rank: int
    test_id: str
    probability: float | None
    is_new_scenario: bool
    scenario: str = ""


def rank_test_cases(rows: Iterable[TrainingRow], model: LogisticIRLS | None = None, factors=FACTORS,
                    new_scenario_tests: Mapping[str, str] | None = None) -> list[RankedTest]:
    """Tests covering new scenarios first (by scenario id), then descending
    probability; ties by descending FV, retestable first, then test id.

    Without a model (constant outcome in the history) the order is
    retestable first, then descending V, descending S, test id.
    """
    rows = list(rows)
    new = dict(new_scenario_tests or {})
    probs: dict[str, float | None] = {r.test_id: None for r in rows}
    if model is not None and rows:
        p = model.predict_proba(design_matrix(rows, factors))[:, 1]
        probs = {r.test_id: float(v) for r, v in zip(rows, p)}

    def key(r: TrainingRow):
        if model is None:
            return (-r.retestable, -r.variability, -r.size, r.test_id)
        return (-probs[r.test_id], -r.fv, -r.retestable, r.test_id)

    head = sorted((r for r in rows if r.test_id in new), key=lambda r: (new[r.test_id], r.test_id))
    tail = sorted((r for r in rows if r.test_id not in new), key=key)
    return [RankedTest(i, r.test_id, probs[r.test_id], r.test_id in new, new.get(r.test_id, ""))
            for i, r in enumerate(head + tail, start=1)]


def write_ranking(ranking: Iterable[RankedTest], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "test_id", "probability", "is_new_scenario"])
        for r in ranking:
            w.writerow([r.rank, r.test_id, "" if r.probability is None else f"{r.probability:.10f}",
                        int(r.is_new_scenario)])


def load_ranking(path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = sorted(csv.DictReader(fh), key=lambda r: int(r["rank"]))
    return [r["test_id"] for r in rows]
