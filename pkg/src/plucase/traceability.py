"""Test cases, their links to use case flows, and test retrieval for scenarios.

A test matches a scenario ``s`` of root use case ``u`` when, restricted to
the use cases that ``s`` visits, its links

* mention ``u``,
* name exactly the alternative flows that ``s`` covers,
* name only basic flows that ``s`` covers,
* respect ``order`` (relative order of alternative-flow entries) and
  ``to_step`` (entry step) whenever those columns are filled.

Among the matching scenarios of different use cases only those whose
relevant link set is maximal are kept, so a test linked to the basic flows
of ``A`` and of its included use case ``B`` is retrieved for ``A`` only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import AmbiguousTrace, SchemaError, UnknownReference
from .rucm import UseCaseDocument
from .scenarios import Scenario

TRACE_COLUMNS = ("test_id", "use_case", "flow_id", "order", "to_step")


@dataclass(frozen=True)
class TraceLink:
    test_id: str
    use_case: str
    flow_id: str
    order: int | None = None
    to_step: str | None = None


@dataclass(frozen=True)
class TestCaseRecord:
    id: str
    product_id: str = ""
    title: str = ""
    links: tuple[TraceLink, ...] = ()

    def use_cases(self) -> set[str]:
        return {lk.use_case for lk in self.links}


@dataclass
class TestSuite:
    product_id: str
    tests: dict[str, TestCaseRecord] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.tests.values())

    def __len__(self) -> int:
        return len(self.tests)

    def ids(self) -> list[str]:
        return list(self.tests)


def suite_from_links(product_id: str, links: Iterable[TraceLink], titles: Mapping[str, str] | None = None
                     ) -> TestSuite:
    grouped: dict[str, list[TraceLink]] = {}
    for lk in links:
        grouped.setdefault(lk.test_id, []).append(lk)
    titles = titles or {}
    return TestSuite(product_id, {t: TestCaseRecord(t, product_id, titles.get(t, ""), tuple(ls))
                                  for t, ls in grouped.items()})


def _opt_int(value: str, where: str) -> int | None:
    value = (value or "").strip()
    if not value:
        return None
    try:
        return int(value)
    except ValueError:
        raise SchemaError(f"{where}: order must be an integer, got {value!r}") from None


def load_traces(path, product_id: str = "") -> TestSuite:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"test_id", "use_case", "flow_id"} - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"{path}: missing columns {sorted(missing)}")
        links = []
        for i, row in enumerate(reader, start=2):
            where = f"{path}:{i}"
            tid = (row.get("test_id") or "").strip()
            if not tid:
                raise SchemaError(f"{where}: empty test_id")
            links.append(TraceLink(tid, row["use_case"].strip(), row["flow_id"].strip(),
                                   _opt_int(row.get("order", ""), where),
                                   (row.get("to_step") or "").strip() or None))
    return suite_from_links(product_id, links)


def dump_traces(suite: TestSuite, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for t in suite:
            for lk in t.links:
                w.writerow([lk.test_id, lk.use_case, lk.flow_id,
                            "" if lk.order is None else lk.order, lk.to_step or ""])


def load_overrides(path) -> dict[str, str]:
    """``overrides.csv``: columns test_id, scenario_id."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"test_id", "scenario_id"} <= set(reader.fieldnames or ()):
            raise SchemaError(f"{path}: expected columns test_id,scenario_id")
        return {row["test_id"].strip(): row["scenario_id"].strip() for row in reader}


def validate_traces(suite: TestSuite, doc: UseCaseDocument) -> None:
    for t in suite:
        for lk in t.links:
            uc = doc.use_case(lk.use_case)
            if uc is None or uc.flow(lk.flow_id) is None:
                raise UnknownReference(f"test {t.id}: no flow {lk.flow_id!r} in use case {lk.use_case!r}")


def _relevant(test: TestCaseRecord, s: Scenario) -> tuple[TraceLink, ...]:
    ucs = {c.use_case for c in s.covered_flows}
    return tuple(lk for lk in test.links if lk.use_case in ucs)


def _matches(test: TestCaseRecord, s: Scenario, basic_ids: Mapping[str, str]) -> bool:
    links = _relevant(test, s)
    if not any(lk.use_case == s.use_case for lk in links):
        return False
    alt = [lk for lk in links if basic_ids.get(lk.use_case) != lk.flow_id]
    basic = {(lk.use_case, lk.flow_id) for lk in links if basic_ids.get(lk.use_case) == lk.flow_id}
    if {(lk.use_case, lk.flow_id) for lk in alt} != s.alt_flows() or not basic <= s.basic_flows():
        return False
    entries = [c for c in s.covered_flows if not c.basic]
    for lk in alt:
        if lk.to_step is not None and not any(c.use_case == lk.use_case and c.flow == lk.flow_id
                                              and c.entry == lk.to_step for c in entries):
            return False
    ordered = sorted((lk for lk in alt if lk.order is not None), key=lambda lk: lk.order)
    if len(ordered) > 1:
        pos = {}
        for i, c in enumerate(entries):
            pos.setdefault((c.use_case, c.flow), i)
        seq = [pos[(lk.use_case, lk.flow_id)] for lk in ordered]
        if seq != sorted(seq):
            return False
    return True


def assign_tests(scenarios: Mapping[str, list[Scenario]], suite: TestSuite, doc: UseCaseDocument,
                 overrides: Mapping[str, str] | None = None) -> dict[str, list[str]]:
    """Map scenario id -> ids of the tests exercising it.

    Raises AmbiguousTrace when a test matches several scenarios of one use
    case and ``overrides`` does not settle it.
    """
    overrides = overrides or {}
    basic_ids = {uc.name: uc.basic_flow.id for uc in doc.use_cases}
    by_id = {s.id: s for ss in scenarios.values() for s in ss}
    out: dict[str, list[str]] = {}
    for test in suite:
        chosen: list[Scenario] = []
        for uc, ss in scenarios.items():
            cands = [s for s in ss if _matches(test, s, basic_ids)]
            if len(cands) > 1:
                pick = overrides.get(test.id)
                if pick is None or pick not in {s.id for s in cands}:
                    if pick is not None and pick in by_id and by_id[pick].use_case != uc:
                        continue
                    raise AmbiguousTrace(test.id, [s.id for s in cands])
                cands = [by_id[pick]]
            chosen.extend(cands)
        rel = {s.id: {(lk.use_case, lk.flow_id) for lk in _relevant(test, s)} for s in chosen}
        for s in chosen:
            if any(rel[s.id] < rel[o.id] for o in chosen):
                continue
            out.setdefault(s.id, []).append(test.id)
    return out


def retrieve_test_cases(s: Scenario, suite: TestSuite, scenarios: Mapping[str, list[Scenario]],
                        doc: UseCaseDocument, overrides: Mapping[str, str] | None = None
                        ) -> list[TestCaseRecord]:
    ids = assign_tests(scenarios, suite, doc, overrides).get(s.id, [])
    return [suite.tests[t] for t in ids]


def identify_tested_scenarios(scenarios: Mapping[str, list[Scenario]], suite: TestSuite,
                              doc: UseCaseDocument, overrides: Mapping[str, str] | None = None
                              ) -> list[tuple[Scenario, list[str]]]:
    assigned = assign_tests(scenarios, suite, doc, overrides)
    return [(s, assigned[s.id]) for ss in scenarios.values() for s in ss if s.id in assigned]
