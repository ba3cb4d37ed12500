"""Classification of previous-product test cases and detection of new scenarios.

A tested scenario ``s_old`` of the previous product is impacted when a
changed decision stamps an element on its path, or an element attached to
one of its flows, or when one of its flows disappeared. Impacted scenarios
are replayed on the new product's graphs (``counterpart``): at every
condition the walk enters the next alternative flow that ``s_old`` entered,
if that flow still exists, and otherwise stays on the non-entering branch.
Comparing ``s_old`` with its counterpart yields added, removed and
reordered steps, which are mapped to rules R1..R9:

====  ============================================  ==========
R1    internal step added or removed                Retestable
R2    internal step reordered                       Retestable
R3    condition on state variables added/removed    Retestable
R4    condition on an input entity added/removed    Obsolete
R5    condition step reordered                      Obsolete
R6    input or output step added or removed         Obsolete
R7    input or output step reordered                Obsolete
R8    alternative flow (or use case) removed        Obsolete
R9    several changes: Obsolete dominates
====  ============================================  ==========

Include, start, exit and abort nodes are neutral.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .decisions import ChangeSet
from .rucm import StepKind, UseCaseDocument, normalize_phrase
from .scenarios import (NodeKind, Scenario, ScenarioGraph, Visit, _walk, build_graphs,
                        enumerate_document, make_scenario)
from .traceability import TestSuite, assign_tests


class TestClass(str, enum.Enum):
    OBSOLETE = "Obsolete"
    RETESTABLE = "Retestable"
    REUSABLE = "Reusable"

    @property
    def severity(self) -> int:
        return {"Reusable": 0, "Retestable": 1, "Obsolete": 2}[self.value]


RULES: dict[str, tuple[str, TestClass]] = {
    "R1": ("add or remove an internal step", TestClass.RETESTABLE),
    "R2": ("update the order of an internal step", TestClass.RETESTABLE),
    "R3": ("add or remove a condition on state variables", TestClass.RETESTABLE),
    "R4": ("add or remove a condition referring to an input entity", TestClass.OBSOLETE),
    "R5": ("update the order of a condition step", TestClass.OBSOLETE),
    "R6": ("add or remove an input or output step", TestClass.OBSOLETE),
    "R7": ("update the order of an input or output step", TestClass.OBSOLETE),
    "R8": ("remove an alternative flow", TestClass.OBSOLETE),
    "R9": ("multiple changes in the scenario", TestClass.REUSABLE),
}


def class_of_rules(rules: Iterable[str]) -> TestClass:
    worst = TestClass.REUSABLE
    for r in rules:
        c = RULES[r][1]
        if c.severity > worst.severity:
            worst = c
    return worst


def condition_refers_to_input_entity(condition: str, input_entities: Iterable[str]) -> bool:
    """True iff some contiguous word sequence of ``condition`` equals an input entity."""
    tokens = normalize_phrase(condition).split()
    if not tokens:
        return False
    wanted = {normalize_phrase(e) for e in input_entities} - {""}
    for i in range(len(tokens)):
        for j in range(i + 1, len(tokens) + 1):
            if " ".join(tokens[i:j]) in wanted:
                return True
    return False


# ---------------------------------------------------------------- diffs

@dataclass(frozen=True)
class SequenceDiff:
    added: tuple[Visit, ...] = ()
    removed: tuple[Visit, ...] = ()
    reordered: tuple[Visit, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.added or self.removed or self.reordered)


_ORDERED = frozenset({NodeKind.INTERACTION, NodeKind.INTERNAL, NodeKind.CONDITION})


def diff_sequences(old: Iterable[Visit], new: Iterable[Visit]) -> SequenceDiff:
    """Set-wise additions/removals plus steps taking part in an order inversion.

    Only interaction, internal and condition steps take part in inversions;
    start, include, exit and abort nodes never make a step count as moved.
    """
    old, new = list(old), list(new)
    old_first: dict[tuple, int] = {}
    new_first: dict[tuple, int] = {}
    for i, v in enumerate(old):
        old_first.setdefault(v.key, i)
    for i, v in enumerate(new):
        new_first.setdefault(v.key, i)
    removed = tuple(old[i] for k, i in old_first.items() if k not in new_first)
    added = tuple(new[i] for k, i in new_first.items() if k not in old_first)
    common = sorted((k for k in old_first if k in new_first and old[old_first[k]].node.kind in _ORDERED),
                    key=old_first.get)
    moved = set()
    for a in range(len(common)):
        for b in range(a + 1, len(common)):
            if new_first[common[a]] > new_first[common[b]]:
                moved.add(common[a])
                moved.add(common[b])
    reordered = tuple(old[old_first[k]] for k in common if k in moved)
    return SequenceDiff(added, removed, reordered)


_ADD_REMOVE = {StepKind.INTERNAL: "R1", StepKind.INPUT: "R6", StepKind.OUTPUT: "R6"}
_REORDER = {StepKind.INTERNAL: "R2", StepKind.CONDITION: "R5", StepKind.INPUT: "R7", StepKind.OUTPUT: "R7"}


@dataclass(frozen=True)
class RuleHit:
    rule: str
    element: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.element}"


def apply_rules(d: SequenceDiff, input_entities: Iterable[str], removed_flows: Iterable[tuple] = ()
                ) -> list[RuleHit]:
    """Table-driven mapping of a sequence diff to rule hits (R9 appended when several)."""
    inputs = set(input_entities)
    hits: list[RuleHit] = []
    for v in d.added + d.removed:
        n = v.node
        if n.kind is NodeKind.CONDITION:
            rule = "R4" if condition_refers_to_input_entity(n.condition or n.text, inputs) else "R3"
        else:
            rule = _ADD_REMOVE.get(n.step_kind) if n.kind in (NodeKind.INTERACTION, NodeKind.INTERNAL) else None
        if rule:
            hits.append(RuleHit(rule, n.text))
    for v in d.reordered:
        rule = _REORDER.get(v.node.step_kind)
        if rule and v.node.kind is not NodeKind.INCLUDE:
            hits.append(RuleHit(rule, v.node.text))
    for uc, flow in removed_flows:
        hits.append(RuleHit("R8", f"{uc}/{flow}" if flow else uc))
    if len(hits) > 1:
        hits.append(RuleHit("R9", f"{len(hits)} changes"))
    return hits


# ---------------------------------------------------------------- replay

def _leads(g: ScenarioGraph, target: str, enters: str | None) -> set[str]:
    if enters is not None:
        return {enters}
    t = g.nodes[target]
    if t.kind is NodeKind.CONDITION and t.guard:
        return _leads(g, t.true, t.true_enters) | _leads(g, t.false, t.false_enters)
    return set()


def _default_first(node):
    """Non-entering branch first: true for VALIDATES steps, false for guards."""
    a, b = (node.true, node.true_enters), (node.false, node.false_enters)
    return [b, a] if node.guard else [a, b]


def counterpart(s_old: Scenario, graphs: Mapping[str, ScenarioGraph]) -> tuple[list[Visit], list[tuple]] | None:
    """Replay ``s_old`` on another product's graphs; None if its use case is gone."""
    if s_old.use_case not in graphs:
        return None
    wanted = [(fr, uc, fl) for fr, uc, fl, _ in s_old.entries
              if uc in graphs and any(n.flow == fl for n in graphs[uc].nodes.values())]

    def choose(node, frame, entered, visits, entries):
        g = graphs[node.use_case]
        opts = _default_first(node)
        if len(entries) < len(wanted):
            fr, uc, fl = wanted[len(entries)]
            if fr == frame and uc == node.use_case:
                hit = [o for o in opts if fl in _leads(g, o[0], o[1])]
                if hit:
                    return hit + [o for o in opts if o not in hit]
        return opts

    for visits, entries in _walk(s_old.use_case, graphs, choose, single=True):
        return visits, entries
    return None


def removed_flows(s_old: Scenario, doc: UseCaseDocument) -> list[tuple[str, str]]:
    out = []
    for c in s_old.covered_flows:
        uc = doc.use_case(c.use_case)
        if uc is None:
            if c.basic:
                out.append((c.use_case, ""))
        elif not c.basic and uc.flow(c.flow) is None:
            out.append((c.use_case, c.flow))
    return sorted(set(out))


@dataclass(frozen=True)
class ScenarioAnalysis:
    scenario: str
    test_class: TestClass
    hits: tuple[RuleHit, ...]
    diff: SequenceDiff

    @property
    def rules(self) -> list[str]:
        return sorted({h.rule for h in self.hits}, key=lambda r: int(r[1:]))


def analyze_changes_on_scenario(s_old: Scenario, new_graphs: Mapping[str, ScenarioGraph],
                                new_doc: UseCaseDocument) -> ScenarioAnalysis:
    gone = removed_flows(s_old, new_doc)
    replay = counterpart(s_old, new_graphs)
    new_visits = replay[0] if replay else []
    d = diff_sequences(s_old.visits, new_visits)
    inputs = s_old.input_entities() | {v.node.entity for v in new_visits
                                       if v.node.step_kind is StepKind.INPUT and v.node.entity}
    hits = apply_rules(d, inputs, gone)
    return ScenarioAnalysis(s_old.id, class_of_rules(h.rule for h in hits), tuple(hits), d)


# ---------------------------------------------------------------- impact

def _stamped(doc: UseCaseDocument, keys: set) -> set[tuple[str, str]]:
    """Flows holding (or anchoring) an element stamped with one of ``keys``."""
    out = set()
    for uc in doc.use_cases:
        for f in uc.flows:
            hit = bool(set(f.provenance) & keys) or any(set(s.provenance) & keys for s in f.steps)
            if hit:
                out.add((uc.name, f.id))
                if f.ref_flow and f is not uc.basic_flow:
                    out.add((uc.name, f.ref_flow))
    return out


def is_impacted(s_old: Scenario, keys: set, old_doc: UseCaseDocument, new_doc: UseCaseDocument,
                _cache: dict | None = None) -> bool:
    if removed_flows(s_old, new_doc):
        return True
    if not keys:
        return False
    if any(set(v.node.provenance) & keys for v in s_old.visits):
        return True
    if _cache is None:
        _cache = {}
    if "attached" not in _cache:
        _cache["attached"] = _stamped(old_doc, keys) | _stamped(new_doc, keys)
    return bool(s_old.flow_set() & _cache["attached"])


# ---------------------------------------------------------------- new scenarios

@dataclass(frozen=True)
class Edit:
    op: str  # add | remove | reorder
    text: str
    position: int
    key: tuple = ()
    source: int | None = None

    def to_dict(self) -> dict:
        d = {"op": self.op, "text": self.text, "position": self.position}
        if self.source is not None:
            d["from"] = self.source
        return d


def _lcs_pairs(a: list, b: list) -> list[tuple[int, int]]:
    n, m = len(a), len(b)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            dp[i][j] = dp[i + 1][j + 1] + 1 if a[i] == b[j] else max(dp[i + 1][j], dp[i][j + 1])
    pairs, i, j = [], 0, 0
    while i < n and j < m:
        if a[i] == b[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif dp[i + 1][j] >= dp[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def compute_guidance(old: list[Visit], new: list[Visit]) -> list[Edit]:
    """Edits turning ``old`` into ``new``: LCS on step identity, leftovers present
    on both sides become reorders."""
    ok, nk = [v.key for v in old], [v.key for v in new]
    pairs = _lcs_pairs(ok, nk)
    kept_old = {i for i, _ in pairs}
    kept_new = {j for _, j in pairs}
    left_old = [i for i in range(len(ok)) if i not in kept_old]
    left_new = [j for j in range(len(nk)) if j not in kept_new]
    edits: list[Edit] = []
    pool: dict[tuple, list[int]] = {}
    for i in left_old:
        pool.setdefault(ok[i], []).append(i)
    moved_from: dict[int, int] = {}
    for j in left_new:
        if pool.get(nk[j]):
            moved_from[j] = pool[nk[j]].pop(0)
    used = set(moved_from.values())
    for i in left_old:
        if i not in used:
            edits.append(Edit("remove", old[i].node.text, i, ok[i]))
    for j in left_new:
        if j in moved_from:
            edits.append(Edit("reorder", new[j].node.text, j, nk[j], moved_from[j]))
        else:
            edits.append(Edit("add", new[j].node.text, j, nk[j]))
    return edits


def apply_guidance(old_keys: list, edits: Iterable[Edit]) -> list:
    edits = list(edits)
    gone = {e.position for e in edits if e.op == "remove"} | {e.source for e in edits if e.op == "reorder"}
    seq = [k for i, k in enumerate(old_keys) if i not in gone]
    for e in sorted((e for e in edits if e.op != "remove"), key=lambda e: e.position):
        seq.insert(e.position, old_keys[e.source] if e.op == "reorder" else e.key)
    return seq


@dataclass
class GuidanceSource:
    scenario: str
    edits: list[Edit]
    product_id: str = ""

    @property
    def removals(self) -> int:
        return sum(1 for e in self.edits if e.op == "remove")

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "product_id": self.product_id,
                "edits": [e.to_dict() for e in self.edits]}


@dataclass
class NewScenarioFinding:
    s_new: Scenario
    sources: list[GuidanceSource] = field(default_factory=list)

    @property
    def s_old(self) -> list[str]:
        return [s.scenario for s in self.sources]

    @property
    def key(self) -> tuple:
        return self.s_new.keys

    def to_dict(self) -> dict:
        return {"scenario": self.s_new.to_dict(), "sources": [s.to_dict() for s in self.sources]}


def identify_new_scenarios(sm: Mapping[str, ScenarioGraph], s_old: Scenario) -> list[tuple[list[Visit], list]]:
    """Walk the new graphs following ``s_old`` where conditions are shared and
    exploring every untaken branch at conditions it never met."""
    if s_old.use_case not in sm:
        return []
    positions: dict[tuple, list[int]] = {}
    for i, v in enumerate(s_old.visits):
        positions.setdefault(v.key, []).append(i)

    def choose(node, frame, entered, visits, entries):
        both = [(node.true, node.true_enters), (node.false, node.false_enters)]
        key = (frame, node.identity)
        k = sum(1 for v in visits if v.key == key) - 1
        seen = positions.get(key, [])
        if k < len(seen) and seen[k] + 1 < len(s_old.visits):
            nxt = s_old.visits[seen[k] + 1].node
            g = sm[node.use_case]
            by_id = [b for b in both if g.nodes[b[0]].identity == nxt.identity]
            if len(by_id) == 1:
                return by_id
            by_flow = [b for b in both if g.nodes[b[0]].flow == nxt.flow]
            if len(by_flow) == 1:
                return by_flow
        return both

    return list(_walk(s_old.use_case, sm, choose))


def filter_new_scenarios(findings: Iterable[NewScenarioFinding]) -> list[NewScenarioFinding]:
    """Merge duplicates and keep the guidance sources needing the fewest edits,
    then the most removals; remaining ties keep every source."""
    merged: dict[tuple, NewScenarioFinding] = {}
    for f in findings:
        if f.key in merged:
            have = merged[f.key].sources
            for s in f.sources:
                if not any(h.scenario == s.scenario and h.product_id == s.product_id for h in have):
                    have.append(s)
        else:
            merged[f.key] = NewScenarioFinding(f.s_new, list(f.sources))
    out = []
    for f in merged.values():
        best = min((len(s.edits) for s in f.sources), default=0)
        srcs = [s for s in f.sources if len(s.edits) == best]
        most = max((s.removals for s in srcs), default=0)
        f.sources = [s for s in srcs if s.removals == most]
        out.append(f)
    return out


# ---------------------------------------------------------------- driver

@dataclass(frozen=True)
class Verdict:
    test_id: str
    test_class: TestClass
    triggering_rules: tuple[str, ...] = ()
    affected_scenarios: tuple[str, ...] = ()
    hits: tuple[str, ...] = ()

    @property
    def affected_scenario(self) -> str:
        return self.affected_scenarios[0] if self.affected_scenarios else ""

    def to_dict(self) -> dict:
        return {"test_id": self.test_id, "class": self.test_class.value,
                "rules": list(self.triggering_rules), "scenarios": list(self.affected_scenarios),
                "changes": list(self.hits)}


@dataclass
class ClassificationResult:
    previous_product: str
    new_product: str
    verdicts: dict[str, Verdict]
    new_scenarios: list[NewScenarioFinding]
    old_scenarios: dict[str, Scenario] = field(default_factory=dict)
    unmatched: list[str] = field(default_factory=list)

    def ids(self, cls: TestClass) -> set[str]:
        return {t for t, v in self.verdicts.items() if v.test_class is cls}

    @property
    def obsolete(self) -> set[str]:
        return self.ids(TestClass.OBSOLETE)

    @property
    def retestable(self) -> set[str]:
        return self.ids(TestClass.RETESTABLE)

    @property
    def reusable(self) -> set[str]:
        return self.ids(TestClass.REUSABLE)

    def quadruple(self):
        return self.obsolete, self.reusable, self.retestable, self.new_scenarios

    def counts(self) -> dict[str, int]:
        return {"obsolete": len(self.obsolete), "retestable": len(self.retestable),
                "reusable": len(self.reusable), "new": len(self.new_scenarios)}


def _scenario_key_class(s_old: Scenario, s_new_visits, new_doc) -> TestClass:
    d = diff_sequences(s_old.visits, s_new_visits)
    inputs = s_old.input_entities() | {v.node.entity for v in s_new_visits
                                       if v.node.step_kind is StepKind.INPUT and v.node.entity}
    return class_of_rules(h.rule for h in apply_rules(d, inputs, removed_flows(s_old, new_doc)))


def classify_test_cases(old_doc: UseCaseDocument, new_doc: UseCaseDocument, changes: ChangeSet,
                        suite: TestSuite, overrides: Mapping[str, str] | None = None,
                        previous_product: str = "", new_product: str = "") -> ClassificationResult:
    """Classify ``suite`` (written for ``old_doc``) against ``new_doc``."""
    old_graphs = build_graphs(old_doc)
    new_graphs = build_graphs(new_doc)
    old_scen = enumerate_document(old_doc, old_graphs)
    new_scen = enumerate_document(new_doc, new_graphs)
    assigned = assign_tests(old_scen, suite, old_doc, overrides)
    by_id = {s.id: s for ss in old_scen.values() for s in ss}
    tested = [by_id[sid] for sid in assigned]
    keys = set(changes.keys())
    cache: dict = {}

    per_test: dict[str, list[tuple[str, ScenarioAnalysis | None]]] = {}
    raw: list[NewScenarioFinding] = []
    for s in tested:
        analysis = None
        if is_impacted(s, keys, old_doc, new_doc, cache):
            analysis = analyze_changes_on_scenario(s, new_graphs, new_doc)
            for visits, entries in identify_new_scenarios(new_graphs, s):
                cand = make_scenario("", s.use_case, visits, entries, new_graphs)
                raw.append(NewScenarioFinding(cand, [GuidanceSource(s.id, compute_guidance(list(s.visits), visits),
                                                                    previous_product)]))
        for t in assigned[s.id]:
            per_test.setdefault(t, []).append((s.id, analysis))

    verdicts = {}
    for t, items in per_test.items():
        cls, rules, hits = TestClass.REUSABLE, set(), []
        for _sid, a in items:
            if a is None:
                continue
            if a.test_class.severity > cls.severity:
                cls = a.test_class
            rules.update(a.rules)
            hits.extend(str(h) for h in a.hits)
        verdicts[t] = Verdict(t, cls, tuple(sorted(rules, key=lambda r: int(r[1:]))),
                              tuple(sid for sid, _ in items), tuple(hits))

    ids_new = {s.keys: s.id for ss in new_scen.values() for s in ss}
    flows_of_tested: dict[frozenset, list[Scenario]] = {}
    for s in tested:
        flows_of_tested.setdefault(s.flow_set(), []).append(s)
    kept = []
    for f in filter_new_scenarios(raw):
        twins = flows_of_tested.get(f.s_new.flow_set(), [])
        if any(_scenario_key_class(o, list(f.s_new.visits), new_doc) is not TestClass.OBSOLETE for o in twins):
            continue
        sid = ids_new.get(f.s_new.keys, f"{f.s_new.use_case}#new")
        f.s_new = Scenario(sid, f.s_new.use_case, f.s_new.visits, f.s_new.covered_flows, f.s_new.entries)
        kept.append(f)
    kept.sort(key=lambda f: f.s_new.id)

    unmatched = sorted(t for t in suite.ids() if t not in per_test)
    return ClassificationResult(previous_product, new_product, verdicts, kept,
                                {s.id: s for s in tested}, unmatched)
