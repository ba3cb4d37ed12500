"""Execution history, per-product test features, and the regression training set.

``history.csv``: ``product_id,version_id,test_id,verdict`` (verdict is pass
or fail), optionally ``timestamp`` (ISO 8601). Rows must be in chronological
order: each product, and each version within a product, forms one
contiguous block.

``features.csv``: ``product_id,test_id,retestable,size,variability``,
optionally ``new_scenario`` (empty/0 = no, otherwise a scenario id or 1)
and ``obsolete`` (0/1). Obsolete rows never enter the training set.
"""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass
from datetime import datetime
from typing import Iterable, Mapping

import numpy as np

from ..errors import HistorySchemaError, UnknownTest

FACTORS = ("V", "S", "FP", "FV", "R")
_FALSE = {"", "0", "no", "false"}


@dataclass(frozen=True)
class ExecutionRecord:
    product_id: str
    version_id: str
    test_id: str
    fails: bool


@dataclass(frozen=True)
class TestFeatures:
    product_id: str
    test_id: str
    retestable: int
    size: int
    variability: int
    new_scenario: str = ""
    obsolete: bool = False


@dataclass(frozen=True)
class TrainingRow:
    product_id: str
    version_id: str
    test_id: str
    fails: int | None
    retestable: int
    size: int
    variability: int
    fp: int
    fv: int

    def factor(self, name: str) -> int:
        return {"V": self.variability, "S": self.size, "FP": self.fp, "FV": self.fv, "R": self.retestable}[name]

    def as_tuple(self) -> tuple:
        return astuple(self)


def _check_blocks(records: list[ExecutionRecord]) -> None:
    done_products: set[str] = set()
    done_versions: set[tuple[str, str]] = set()
    seen: set[tuple[str, str, str]] = set()
    prev = None
    for r in records:
        if prev is not None and r.product_id != prev.product_id:
            done_products.add(prev.product_id)
            if r.product_id in done_products:
                raise HistorySchemaError(f"product {r.product_id} reappears after another product; "
                                         "history must be in chronological order")
        if prev is not None and (r.product_id, r.version_id) != (prev.product_id, prev.version_id):
            done_versions.add((prev.product_id, prev.version_id))
            if (r.product_id, r.version_id) in done_versions:
                raise HistorySchemaError(f"version {r.product_id}/{r.version_id} is not contiguous")
        key = (r.product_id, r.version_id, r.test_id)
        if key in seen:
            raise HistorySchemaError(f"duplicate execution record {key}")
        seen.add(key)
        prev = r


def parse_history(rows: Iterable[Mapping[str, str]], where: str = "history") -> list[ExecutionRecord]:
    records = []
    last_ts = None
    for i, row in enumerate(rows, start=2):
        try:
            product, version, test = row["product_id"].strip(), row["version_id"].strip(), row["test_id"].strip()
            verdict = row["verdict"].strip().lower()
        except (KeyError, AttributeError):
            raise HistorySchemaError(f"{where}:{i}: missing field") from None
        if verdict not in ("pass", "fail"):
            raise HistorySchemaError(f"{where}:{i}: verdict must be pass or fail, got {verdict!r}")
        if not (product and version and test):
            raise HistorySchemaError(f"{where}:{i}: empty identifier")
        ts = (row.get("timestamp") or "").strip()
        if ts:
            try:
                stamp = datetime.fromisoformat(ts)
            except ValueError:
                raise HistorySchemaError(f"{where}:{i}: bad timestamp {ts!r}") from None
            if last_ts is not None and stamp < last_ts:
                raise HistorySchemaError(f"{where}:{i}: timestamps out of order")
            last_ts = stamp
        records.append(ExecutionRecord(product, version, test, verdict == "fail"))
    _check_blocks(records)
    return records


def load_history(path) -> list[ExecutionRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"product_id", "version_id", "test_id", "verdict"} - set(reader.fieldnames or ())
        if missing:
            raise HistorySchemaError(f"{path}: missing columns {sorted(missing)}")
        return parse_history(reader, str(path))


def _int(row, key, where) -> int:
    try:
        return int((row.get(key) or "0").strip())
    except ValueError:
        raise HistorySchemaError(f"{where}: {key} must be an integer") from None


def load_features(path) -> dict[tuple[str, str], TestFeatures]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"product_id", "test_id", "retestable", "size", "variability"} - set(reader.fieldnames or ())
        if missing:
            raise HistorySchemaError(f"{path}: missing columns {sorted(missing)}")
        for i, row in enumerate(reader, start=2):
            where = f"{path}:{i}"
            new = (row.get("new_scenario") or "").strip()
            f = TestFeatures(row["product_id"].strip(), row["test_id"].strip(), _int(row, "retestable", where),
                             _int(row, "size", where), _int(row, "variability", where),
                             "" if new.lower() in _FALSE else new,
                             (row.get("obsolete") or "").strip().lower() not in _FALSE)
            out[(f.product_id, f.test_id)] = f
    return out


def dump_features(features: Iterable[TestFeatures], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product_id", "test_id", "retestable", "size", "variability", "new_scenario", "obsolete"])
        for f in features:
            w.writerow([f.product_id, f.test_id, f.retestable, f.size, f.variability, f.new_scenario,
                        int(f.obsolete)])


def dump_history(records: Iterable[ExecutionRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product_id", "version_id", "test_id", "verdict"])
        for r in records:
            w.writerow([r.product_id, r.version_id, r.test_id, "fail" if r.fails else "pass"])


class _Lineage:
    """Running failure counts per test across the whole product line."""

    def __init__(self):
        self.fv: dict[str, int] = {}
        self.products: dict[str, set[str]] = {}

    def counts(self, test: str, product: str) -> tuple[int, int]:
        return len(self.products.get(test, set()) - {product}), self.fv.get(test, 0)

    def record(self, r: ExecutionRecord) -> None:
        if r.fails:
            self.fv[r.test_id] = self.fv.get(r.test_id, 0) + 1
            self.products.setdefault(r.test_id, set()).add(r.product_id)


def build_training_set(history: Iterable[ExecutionRecord],
                       features: Mapping[tuple[str, str], TestFeatures]) -> list[TrainingRow]:
    """One row per execution; FV and FP count strictly earlier failures of the same test."""
    lineage = _Lineage()
    rows = []
    for r in history:
        f = features.get((r.product_id, r.test_id))
        if f is None:
            raise UnknownTest(f"no features for test {r.test_id} in product {r.product_id}")
        fp, fv = lineage.counts(r.test_id, r.product_id)
        if not f.obsolete:
            rows.append(TrainingRow(r.product_id, r.version_id, r.test_id, int(r.fails),
                                    f.retestable, f.size, f.variability, fp, fv))
        lineage.record(r)
    return rows


def ranking_rows(history: Iterable[ExecutionRecord], features: Mapping[tuple[str, str], TestFeatures],
                 product_id: str) -> list[TrainingRow]:
    """Feature rows for the suite of ``product_id``, with FV/FP taken from the
    history of every other product (all of which precede it)."""
    lineage = _Lineage()
    for r in history:
        if r.product_id != product_id:
            lineage.record(r)
    out = []
    for (p, t), f in sorted(features.items()):
        if p != product_id or f.obsolete:
            continue
        fp, fv = lineage.counts(t, product_id)
        out.append(TrainingRow(p, "", t, None, f.retestable, f.size, f.variability, fp, fv))
    return out


def design_matrix(rows: Iterable[TrainingRow], factors=FACTORS) -> np.ndarray:
    rows = list(rows)
    return np.array([[r.factor(k) for k in factors] for r in rows], dtype=float).reshape(len(rows), len(factors))


def outcomes(rows: Iterable[TrainingRow]) -> np.ndarray:
    return np.array([r.fails for r in rows], dtype=float)


def failing_tests(history: Iterable[ExecutionRecord], product_id: str) -> set[str]:
    """Tests of ``product_id`` failing in at least one of its versions."""
    return {r.test_id for r in history if r.product_id == product_id and r.fails}
