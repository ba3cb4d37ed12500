"""Seeded synthetic product lines for end-to-end experiments.

``generate_line`` builds a PL use case model (optional steps and flows,
variant-order groups, variation points with variant use cases, includes),
a chain of products whose decisions drift a little from one product to the
next, a traced test suite per product and an execution history whose
failures follow a logistic model with a persistent per-test propensity.
"""

from __future__ import annotations

import datetime as dt
import math
import os
import random
from dataclasses import dataclass, field

from .classifier import ClassificationResult, classify_test_cases
from .configurator import generate_ps_specification
from .decisions import DecisionModel, DiagramDecision, SpecDecision, diff_decisions, dump_decisions
from .diagram import PLDiagram, VariabilityRelation, VariationPoint, Include, dump_diagram
from .prioritizer.training import ExecutionRecord, TestFeatures, dump_features, dump_history
from .report import scenario_digest
from .rucm import UseCaseDocument, parse_specification
from .scenarios import Scenario, build_graphs, enumerate_document
from .traceability import TestSuite, TraceLink, dump_traces, suite_from_links

_STATE = ["buffer", "timer", "sensor", "battery", "memory", "channel", "relay", "counter", "clock", "lamp"]
_OUT = ["status", "summary", "alarm", "log", "report", "reading"]


@dataclass
class FailureModel:
    intercept: float = -2.6
    retestable: float = 1.0
    size: float = 0.05
    variability: float = 0.12
    new_scenario: float = 1.5
    propensity_sd: float = 1.8
    version_decay: float = 0.35


@dataclass
class SyntheticLine:
    seed: int
    pl_text: str
    pl_doc: UseCaseDocument
    diagram: PLDiagram
    products: list[str]
    decisions: dict[str, DecisionModel]
    ps: dict[str, UseCaseDocument] = field(default_factory=dict)
    scenarios: dict[str, dict[str, list[Scenario]]] = field(default_factory=dict)
    suites: dict[str, TestSuite] = field(default_factory=dict)
    test_scenario: dict[str, dict[str, Scenario]] = field(default_factory=dict)
    classifications: dict[str, ClassificationResult] = field(default_factory=dict)
    history: list[ExecutionRecord] = field(default_factory=list)
    features: dict[tuple[str, str], TestFeatures] = field(default_factory=dict)

    @property
    def dates(self) -> dict[str, dt.date]:
        return {p: m.created_on for p, m in self.decisions.items()}

    def write(self, directory) -> dict[str, str]:
        """Write every input file of the line; returns name -> path."""
        os.makedirs(directory, exist_ok=True)
        paths = {"pl_spec": os.path.join(directory, "pl.rucm"),
                 "pl_diagram": os.path.join(directory, "diagram.json"),
                 "history": os.path.join(directory, "history.csv"),
                 "features": os.path.join(directory, "features.csv")}
        with open(paths["pl_spec"], "w", encoding="utf-8") as fh:
            fh.write(self.pl_text)
        with open(paths["pl_diagram"], "w", encoding="utf-8") as fh:
            fh.write(dump_diagram(self.diagram))
        for p in self.products:
            paths[f"decisions.{p}"] = os.path.join(directory, f"decisions.{p}.json")
            with open(paths[f"decisions.{p}"], "w", encoding="utf-8") as fh:
                fh.write(dump_decisions(self.decisions[p]))
            paths[f"traces.{p}"] = os.path.join(directory, f"traces.{p}.csv")
            dump_traces(self.suites[p], paths[f"traces.{p}"])
        dump_history(self.history, paths["history"])
        dump_features([self.features[k] for k in sorted(self.features)], paths["features"])
        return paths


class _Writer:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.lines: list[str] = []
        self.use_cases: list[tuple[str, bool]] = []
        self.vps: list[VariationPoint] = []
        self.includes: list[Include] = []

    def _step_text(self, kind: str, i: int, j: int) -> str:
        sv = f"{_STATE[j % len(_STATE)]} {i} {j}"
        if kind == "internal":
            return f"The system updates the {sv} value."
        if kind == "state-cond":
            return f"The system VALIDATES THAT the {sv} is ready."
        if kind == "input-cond":
            return f"The system VALIDATES THAT the command {i} data is complete."
        if kind == "output":
            return f"The system SENDS the {_OUT[j % len(_OUT)]} {i} {j} TO the operator."
        raise ValueError(kind)

    def essential(self, i: int, n: int) -> None:
        rng = self.rng
        name = f"Process Request {i:02d}"
        self.use_cases.append((name, False))
        lines = [f"USE CASE {name}", "1.1 Basic Flow (BF)",
                 f"1. The operator SENDS the command {i} data TO the system."]
        steps: list[tuple[str, str, bool]] = []  # (number, kind, optional)
        kinds = ["internal", "state-cond", "state-cond", "output", "input-cond", "internal"]
        include_done = False
        for j in range(2, 2 + rng.randint(3, 5)):
            if not include_done and i + 1 < n and rng.random() < 0.2:
                target = f"Process Request {rng.randint(i + 1, n - 1):02d}"
                lines.append(f"{j}. INCLUDE USE CASE {target}.")
                self.includes.append(Include(name, target, False))
                include_done = True
                steps.append((str(j), "include", False))
                continue
            kind = rng.choice(kinds)
            opt = rng.random() < 0.25
            lines.append(f"{j}. {'<OPTIONAL> ' if opt else ''}{self._step_text(kind, i, j)}")
            steps.append((str(j), kind, opt))
        j = len(steps) + 2
        if rng.random() < 0.3:
            vp = f"Mode of Request {i:02d}"
            lines.append(f"{j}. INCLUDE <VARIATION POINT: {vp}>.")
            self.includes.append(Include(name, vp, True))
            self._variants(i, vp)
            j += 1
        if rng.random() < 0.35:
            for v in range(1, rng.randint(2, 3) + 1):
                opt = rng.random() < 0.5
                lines.append(f"V{v}. {'<OPTIONAL> ' if opt else ''}"
                             f"The system SENDS the {_OUT[(v + 2) % len(_OUT)]} {i} part {v} TO the operator.")
        lines.append(f"{j}. The system SENDS the result {i} TO the operator.")

        saf = 0
        conds = [(num, kind, opt) for num, kind, opt in steps if kind.endswith("cond")]
        for num, _kind, _opt in conds:
            if rng.random() < 0.6:
                saf += 1
                opt = rng.random() < 0.4
                lines.append(f"1.{saf + 1} {'<OPTIONAL> ' if opt else ''}Specific Alternative Flow (SAF{saf})")
                lines.append(f"RFS {num}")
                if rng.random() < 0.5:
                    lines.append(f"1. The system SENDS the error {i} {num} TO the operator.")
                    lines.append("2. ABORT.")
                else:
                    lines.append(f"1. The system updates the retry {i} {num} value.")
        if rng.random() < 0.35 and len(steps) >= 2:
            a = rng.randint(2, len(steps))
            b = rng.randint(a, len(steps) + 1)
            lines.append(f"1.{saf + 2} <OPTIONAL> Bounded Alternative Flow (BAF1)")
            lines.append(f"RFS {a}-{b}" if b > a else f"RFS {a}")
            lines.append(f"1. IF the power {i} supply drops THEN")
            lines.append(f"2. The system SENDS the power {i} warning TO the operator.")
            lines.append("3. ABORT.")
            lines.append("4. ENDIF")
        self.lines.extend(lines + [""])

    def _variants(self, i: int, vp: str) -> None:
        rng = self.rng
        names = []
        for v in range(1, rng.randint(2, 3) + 1):
            name = f"Process Request {i:02d} via Mode {v}"
            names.append(name)
            self.use_cases.append((name, True))
            body = [f"<VARIANT> USE CASE {name}", f"PRECONDITION The operator selected mode {v} for request {i}.",
                    "1.1 Basic Flow (BF)"]
            for k in range(1, rng.randint(1, 3) + 1):
                opt = k > 1 and rng.random() < 0.4
                body.append(f"{k}. {'<OPTIONAL> ' if opt else ''}"
                            f"The system SENDS the mode {v} {_OUT[k % len(_OUT)]} {i} TO the operator.")
            self.lines.extend(body + [""])
        self.vps.append(VariationPoint(vp, True, (VariabilityRelation(tuple(names), 1, len(names)),)))


def _initial_decisions(rng: random.Random, doc: UseCaseDocument, diagram: PLDiagram, pid: str,
                       created: dt.date) -> DecisionModel:
    dd = []
    for vp in diagram.variation_points:
        for inc in diagram.includers_of(vp.name):
            variants = list(vp.variants)
            k = rng.randint(1, len(variants))
            sel = sorted(rng.sample(variants, k), key=variants.index)
            dd.append(DiagramDecision(vp.name, inc, tuple(sel), tuple(v for v in variants if v not in sel)))
    sd = []
    for uc in doc.use_cases:
        for f in uc.flows:
            if f.optional:
                sd.append(SpecDecision(uc.name, f.id, "optional-flow", rng.random() < 0.5))
            vsteps = [s for s in f.steps if s.is_variant_order]
            orders = list(range(1, len(vsteps) + 1))
            rng.shuffle(orders)
            for s, o in zip(vsteps, orders):
                on = not s.optional or rng.random() < 0.7
                sd.append(SpecDecision(uc.name, f.id, "variant-order", on, s.number, o if on else None))
            for s in f.steps:
                if s.optional and not s.is_variant_order:
                    sd.append(SpecDecision(uc.name, f.id, "optional-step", rng.random() < 0.6, s.number))
    return DecisionModel(pid, created, tuple(dd), tuple(sd), pl_model="synthetic")


def _mutate(rng: random.Random, m: DecisionModel, pid: str, created: dt.date, n_changes: int) -> DecisionModel:
    dd = list(m.diagram_decisions)
    sd = list(m.spec_decisions)
    for _ in range(n_changes):
        if dd and rng.random() < 0.25:
            i = rng.randrange(len(dd))
            d = dd[i]
            variants = list(d.selected) + list(d.unselected)
            variants.sort(key=lambda v: v)
            k = rng.randint(1, len(variants))
            sel = sorted(rng.sample(variants, k))
            dd[i] = DiagramDecision(d.variation_point, d.including_use_case, tuple(sel),
                                    tuple(v for v in variants if v not in sel))
            continue
        if not sd:
            continue
        i = rng.randrange(len(sd))
        d = sd[i]
        if d.element == "variant-order":
            group = [j for j, e in enumerate(sd) if e.element == "variant-order"
                     and (e.use_case, e.flow) == (d.use_case, d.flow)]
            orders = list(range(1, len(group) + 1))
            rng.shuffle(orders)
            for j, o in zip(group, orders):
                e = sd[j]
                sd[j] = SpecDecision(e.use_case, e.flow, e.element, e.selected, e.step,
                                     o if e.selected else None)
        else:
            sd[i] = SpecDecision(d.use_case, d.flow, d.element, not d.selected, d.step)
    return DecisionModel(pid, created, tuple(dd), tuple(sd), pl_model=m.pl_model)


def _signature(s: Scenario) -> tuple:
    return tuple(sorted((c.use_case, c.flow, c.entry) for c in s.covered_flows)) + \
        tuple((c.use_case, c.flow) for c in s.covered_flows if not c.basic)


def _suite_for(rng: random.Random, pid: str, scenarios: dict[str, list[Scenario]], limit: int,
               coverage: float) -> tuple[TestSuite, dict[str, Scenario]]:
    pool = []
    for uc, ss in scenarios.items():
        sigs: dict[tuple, int] = {}
        for s in ss:
            sigs[_signature(s)] = sigs.get(_signature(s), 0) + 1
        pool.extend(s for s in ss if sigs[_signature(s)] == 1)
    keep = min(limit, int(round(coverage * len(pool))))
    if len(pool) > keep:
        pool = rng.sample(pool, keep)
    links, mapping = [], {}
    for s in pool:
        tid = "TC-" + scenario_digest(s.keys)[:8]
        if tid in mapping:
            continue
        mapping[tid] = s
        alt = 0
        for c in s.covered_flows:
            if c.basic:
                links.append(TraceLink(tid, c.use_case, c.flow))
            else:
                alt += 1
                links.append(TraceLink(tid, c.use_case, c.flow, alt, c.entry))
    return suite_from_links(pid, links), mapping


def generate_line(seed: int = 0, n_products: int = 5, n_use_cases: int = 24, tests_per_product: int = 100,
                  coverage: float = 0.9,
                  versions: int = 3, changes_per_product: tuple[int, int] = (3, 7),
                  failure_model: FailureModel | None = None) -> SyntheticLine:
    rng = random.Random(seed)
    w = _Writer(rng)
    for i in range(n_use_cases):
        w.essential(i, n_use_cases)
    text = "\n".join(w.lines)
    doc = parse_specification(text, "pl.rucm")
    names = [n for n, _ in w.use_cases]
    ordered = [n for n in names if not dict(w.use_cases)[n]] + [n for n in names if dict(w.use_cases)[n]]
    diagram = PLDiagram(tuple((n, dict(w.use_cases)[n]) for n in ordered), tuple(w.vps), tuple(w.includes), ())

    products = [f"P{k}" for k in range(1, n_products + 1)]
    start = dt.date(2015, 1, 1)
    decisions: dict[str, DecisionModel] = {}
    for k, p in enumerate(products):
        created = start + dt.timedelta(days=150 * k)
        if k == 0:
            decisions[p] = _initial_decisions(rng, doc, diagram, p, created)
        else:
            decisions[p] = _mutate(rng, decisions[products[k - 1]], p, created, rng.randint(*changes_per_product))

    line = SyntheticLine(seed, text, doc, diagram, products, decisions)
    for p in products:
        ps = generate_ps_specification(doc, decisions[p], diagram)
        line.ps[p] = ps
        line.scenarios[p] = enumerate_document(ps, build_graphs(ps))
        line.suites[p], line.test_scenario[p] = _suite_for(rng, p, line.scenarios[p], tests_per_product, coverage)
    for prev, new in zip(products, products[1:]):
        line.classifications[new] = classify_test_cases(
            line.ps[prev], line.ps[new], diff_decisions(decisions[prev], decisions[new]), line.suites[prev],
            previous_product=prev, new_product=new)
    _simulate_history(line, rng, versions, failure_model or FailureModel())
    return line


def _simulate_history(line: SyntheticLine, rng: random.Random, versions: int, fm: FailureModel) -> None:
    propensity: dict[str, float] = {}
    seen: set[str] = set()
    for k, p in enumerate(line.products):
        cls = line.classifications.get(p)
        retest = cls.retestable if cls else set()
        for tid in sorted(line.suites[p].tests):
            s = line.test_scenario[p][tid]
            new = k > 0 and tid not in seen
            line.features[(p, tid)] = TestFeatures(p, tid, int(tid in retest), s.size_S, s.variability_V,
                                                   s.id if new else "")
            propensity.setdefault(tid, rng.gauss(0.0, fm.propensity_sd))
        for v in range(versions):
            for tid in sorted(line.suites[p].tests):
                f = line.features[(p, tid)]
                eta = (fm.intercept + fm.retestable * f.retestable + fm.size * f.size
                       + fm.variability * f.variability + fm.new_scenario * bool(f.new_scenario)
                       + propensity[tid] - fm.version_decay * v)
                fails = rng.random() < 1.0 / (1.0 + math.exp(-eta))
                line.history.append(ExecutionRecord(p, f"V{v + 1}", tid, fails))
        seen.update(line.suites[p].tests)
