"""Use case scenario graphs and scenario enumeration.

Every step of a PS use case becomes a node. Condition nodes have a true
and a false successor; every other non-terminal node has a single
``next``. Extra nodes:

* ``UseCaseStart`` per use case, and a terminal ``Exit`` closing the basic flow;
* one guard ``Condition`` per bounded/global flow, placed in front of its
  first reference step (true enters the flow, false continues);
* an ``Exit`` closing every alternative flow that returns, whose ``next``
  points back at the reference step (or at ``RESUME STEP n``);
* an ``implicit`` Abort on the false branch of a VALIDATES step without a
  specific alternative flow. Enumeration never takes that branch.

Nodes carry an ``identity`` that is stable across products:
(use case, flow, step kind, normalized text, occurrence).
"""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .errors import DanglingReference, IncludeCycle, MalformedFlow
from .rucm import FlowKind, StepKind, UseCase, UseCaseDocument, normalize_phrase


class NodeKind(str, enum.Enum):
    START = "UseCaseStart"
    INTERACTION = "Interaction"
    INTERNAL = "Internal"
    INCLUDE = "Include"
    CONDITION = "Condition"
    EXIT = "Exit"
    ABORT = "Abort"


_NODE_KIND = {
    StepKind.INPUT: NodeKind.INTERACTION,
    StepKind.OUTPUT: NodeKind.INTERACTION,
    StepKind.INTERNAL: NodeKind.INTERNAL,
    StepKind.CONDITION: NodeKind.CONDITION,
    StepKind.INCLUDE_USE_CASE: NodeKind.INCLUDE,
    StepKind.ABORT: NodeKind.ABORT,
    StepKind.EXIT: NodeKind.EXIT,
}

STEP_NODE_KINDS = frozenset({NodeKind.INTERACTION, NodeKind.INTERNAL, NodeKind.CONDITION, NodeKind.INCLUDE})


@dataclass
class Node:
    id: str
    kind: NodeKind
    use_case: str
    flow: str
    step: str
    text: str
    identity: tuple
    step_kind: StepKind | None = None
    entity: str = ""
    condition: str = ""
    target: str = ""
    provenance: tuple = ()
    implicit: bool = False
    guard: bool = False
    anchor: str = ""
    next: str | None = None
    true: str | None = None
    false: str | None = None
    true_enters: str | None = None
    false_enters: str | None = None

    @property
    def terminal(self) -> bool:
        return self.kind is NodeKind.ABORT or (self.kind is NodeKind.EXIT and self.next is None)

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind.value, "flow": self.flow, "step": self.step, "text": self.text}
        for name in ("next", "true", "false"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        if self.implicit:
            d["implicit"] = True
        if self.provenance:
            d["provenance"] = [str(k) for k in self.provenance]
        return d


@dataclass
class ScenarioGraph:
    use_case: str
    precondition: str
    basic_flow: str
    nodes: dict[str, Node] = field(default_factory=dict)
    start: str = ""

    def node(self, node_id: str) -> Node:
        return self.nodes[node_id]

    def successors(self, node_id: str) -> list[str]:
        n = self.nodes[node_id]
        if n.kind is NodeKind.CONDITION:
            return [n.true, n.false]
        return [n.next] if n.next is not None else []

    def count(self, kind: NodeKind, include_implicit: bool = False) -> int:
        return sum(1 for n in self.nodes.values() if n.kind is kind and (include_implicit or not n.implicit))

    def identities(self) -> set[tuple]:
        return {n.identity for n in self.nodes.values()}

    def to_dict(self) -> dict:
        return {"use_case": self.use_case, "start": self.start,
                "nodes": [n.to_dict() for n in self.nodes.values()]}


def _node_id(uc: str, flow: str, step: str) -> str:
    return f"{uc}|{flow}|{step}"


def generate_use_case_model(uc: UseCase) -> ScenarioGraph:
    """Control-flow graph of one PS use case."""
    g = ScenarioGraph(uc.name, uc.precondition, uc.basic_flow.id)
    name = uc.name
    first: dict[str, str] = {}

    for f in uc.flows:
        occ: Counter = Counter()
        for i, s in enumerate(f.steps):
            if s.kind is StepKind.INCLUDE_VARIATION_POINT:
                raise MalformedFlow(f"{name}/{f.id}: variation point include in a PS use case")
            if s.kind in (StepKind.ABORT, StepKind.EXIT) and i != len(f.steps) - 1:
                raise MalformedFlow(f"{name}/{f.id}: step {s.number} must end its flow")
            if s.kind is StepKind.EXIT and f.kind is FlowKind.BASIC:
                raise MalformedFlow(f"{name}/{f.id}: RESUME STEP in a basic flow")
            if s.kind is StepKind.EXIT:
                ident = (name, f.id, "exit")
            else:
                norm = normalize_phrase(s.text)
                ident = (name, f.id, s.kind.value, norm, occ[(s.kind, norm)])
                occ[(s.kind, norm)] += 1
            nid = _node_id(name, f.id, s.number)
            g.nodes[nid] = Node(nid, _NODE_KIND[s.kind], name, f.id, s.number, s.text, ident, s.kind,
                                entity=s.entity, condition=s.condition, target=s.target,
                                provenance=tuple(s.provenance) or tuple(f.provenance))
            if i == 0:
                first[f.id] = nid

    entry: dict[tuple[str, str], str] = {}

    def entry_of(flow_id: str, step: str) -> str:
        return entry.get((flow_id, step), _node_id(name, flow_id, step))

    # Guards for bounded/global flows, and for guarded specific flows whose
    # anchor is not a condition. Built in reverse so the first flow's guard
    # is evaluated first.
    guarded = []
    for f in uc.alternative_flows:
        ref = uc.flow(f.ref_flow)
        if ref is None:
            raise DanglingReference(f"{name}/{f.id}: unknown reference flow {f.ref_flow!r}")
        if f.kind is FlowKind.SPECIFIC:
            anchor = ref.step(f.rfs[0])
            if anchor is None:
                raise DanglingReference(f"{name}/{f.id}: RFS {f.rfs[0]} not in {f.ref_flow}")
            if anchor.kind is StepKind.CONDITION:
                continue
            if not f.guard:
                raise MalformedFlow(f"{name}/{f.id}: RFS step {f.rfs[0]} is not a condition")
            guarded.append((f, anchor.number))
        elif f.kind is FlowKind.BOUNDED:
            guarded.append((f, f.rfs[0]))
        elif f.kind is FlowKind.GLOBAL:
            if not ref.steps:
                raise MalformedFlow(f"{name}/{f.id}: reference flow {ref.id} has no steps")
            guarded.append((f, ref.steps[0].number))
    for f, anchor in reversed(guarded):
        if _node_id(name, f.ref_flow, anchor) not in g.nodes:
            raise DanglingReference(f"{name}/{f.id}: RFS {anchor} not in {f.ref_flow}")
        gid = _node_id(name, f.id, "guard")
        text = f.guard or f"alternative flow {f.id} applies"
        g.nodes[gid] = Node(gid, NodeKind.CONDITION, name, f.id, "", f"IF {text} THEN",
                            (name, f.id, "guard", normalize_phrase(text)), StepKind.CONDITION,
                            condition=text, provenance=tuple(f.provenance), guard=True, anchor=anchor,
                            true=first[f.id], false=entry_of(f.ref_flow, anchor))
        entry[(f.ref_flow, anchor)] = gid

    saf_by_anchor: dict[tuple[str, str], list] = {}
    for f in uc.alternative_flows:
        if f.kind is FlowKind.SPECIFIC and not any(f is gf for gf, _ in guarded):
            saf_by_anchor.setdefault((f.ref_flow, f.rfs[0]), []).append(f)

    for f in uc.flows:
        if f.kind is FlowKind.BASIC:
            end = _node_id(name, f.id, "exit")
            g.nodes[end] = Node(end, NodeKind.EXIT, name, f.id, "", "EXIT", (name, f.id, "exit"))
        elif not f.steps or f.steps[-1].kind not in (StepKind.ABORT, StepKind.EXIT):
            end = _node_id(name, f.id, "exit")
            back = f.rfs[0] if f.rfs else uc.flow(f.ref_flow).steps[0].number
            g.nodes[end] = Node(end, NodeKind.EXIT, name, f.id, "", "EXIT", (name, f.id, "exit"),
                                next=entry_of(f.ref_flow, back))
        else:
            end = None
        for i, s in enumerate(f.steps):
            node = g.nodes[_node_id(name, f.id, s.number)]
            after = entry_of(f.id, f.steps[i + 1].number) if i + 1 < len(f.steps) else end
            if s.kind is StepKind.ABORT:
                continue
            if s.kind is StepKind.EXIT:
                if f.ref_flow and uc.flow(f.ref_flow).step(s.target) is None:
                    raise DanglingReference(f"{name}/{f.id}: RESUME STEP {s.target} not in {f.ref_flow}")
                node.next = entry_of(f.ref_flow, s.target)
                continue
            if s.kind is StepKind.CONDITION:
                node.true = after
                node.false = _false_branch(g, name, f.id, s, saf_by_anchor.get((f.id, s.number), []), first)
                continue
            node.next = after

    g.start = _node_id(name, "start", "")
    bf = uc.basic_flow
    g.nodes[g.start] = Node(g.start, NodeKind.START, name, bf.id, "", "START", (name, "start"),
                            next=entry_of(bf.id, bf.steps[0].number) if bf.steps else _node_id(name, bf.id, "exit"))

    first_nodes = set(first.values())
    for n in g.nodes.values():
        if n.kind is NodeKind.CONDITION:
            n.true_enters = _enters(g, n.true, first_nodes)
            n.false_enters = _enters(g, n.false, first_nodes)
    return g


def _enters(g: ScenarioGraph, target: str, first_nodes: set[str]) -> str | None:
    t = g.nodes[target]
    if t.id in first_nodes and t.flow != g.basic_flow:
        return t.flow
    return None


def _false_branch(g, name, flow_id, step, safs, first) -> str:
    if not safs:
        aid = _node_id(name, flow_id, step.number) + "|abort"
        g.nodes[aid] = Node(aid, NodeKind.ABORT, name, flow_id, step.number, "ABORT",
                            (name, flow_id, "implicit-abort", normalize_phrase(step.text)), implicit=True)
        return aid
    target = first[safs[-1].id]
    for s in reversed(safs[:-1]):
        gid = _node_id(name, s.id, "guard")
        text = s.guard or f"alternative flow {s.id} applies"
        g.nodes[gid] = Node(gid, NodeKind.CONDITION, name, s.id, "", f"IF {text} THEN",
                            (name, s.id, "guard", normalize_phrase(text)), StepKind.CONDITION,
                            condition=text, provenance=tuple(s.provenance), guard=True, anchor=step.number,
                            true=first[s.id], false=target)
        target = gid
    return target


def build_graphs(doc: UseCaseDocument) -> dict[str, ScenarioGraph]:
    check_include_cycles(doc)
    return {uc.name: generate_use_case_model(uc) for uc in doc.use_cases}


def check_include_cycles(doc: UseCaseDocument) -> None:
    edges = {uc.name: {s.target for f in uc.flows for s in f.steps if s.kind is StepKind.INCLUDE_USE_CASE}
             for uc in doc.use_cases}
    state: dict[str, int] = {}

    def visit(u: str, trail: list[str]) -> None:
        state[u] = 1
        for v in sorted(edges.get(u, ())):
            if state.get(v) == 1:
                raise IncludeCycle(" -> ".join(trail + [u, v]))
            if v in edges and state.get(v) is None:
                visit(v, trail + [u])
        state[u] = 2

    for u in edges:
        if state.get(u) is None:
            visit(u, [])


@dataclass(frozen=True)
class Visit:
    node: Node
    frame: tuple = ()

    @property
    def key(self) -> tuple:
        return (self.frame, self.node.identity)


@dataclass(frozen=True)
class CoveredFlow:
    use_case: str
    flow: str
    entry: str = ""
    basic: bool = False


@dataclass(frozen=True)
class Scenario:
    id: str
    use_case: str
    visits: tuple[Visit, ...]
    covered_flows: tuple[CoveredFlow, ...]
    entries: tuple[tuple, ...] = ()

    @property
    def node_sequence(self) -> tuple[str, ...]:
        return tuple(v.node.id for v in self.visits)

    @property
    def keys(self) -> tuple[tuple, ...]:
        return tuple(v.key for v in self.visits)

    @property
    def size_S(self) -> int:
        return sum(1 for v in self.visits if v.node.kind in STEP_NODE_KINDS)

    @property
    def variability_V(self) -> int:
        return len({k for v in self.visits for k in v.node.provenance})

    @property
    def terminated_by(self) -> NodeKind:
        return self.visits[-1].node.kind

    def flow_set(self) -> frozenset:
        return frozenset((c.use_case, c.flow) for c in self.covered_flows)

    def alt_flows(self) -> frozenset:
        return frozenset((c.use_case, c.flow) for c in self.covered_flows if not c.basic)

    def basic_flows(self) -> frozenset:
        return frozenset((c.use_case, c.flow) for c in self.covered_flows if c.basic)

    def input_entities(self) -> set[str]:
        return {v.node.entity for v in self.visits if v.node.step_kind is StepKind.INPUT and v.node.entity}

    def steps_text(self) -> list[str]:
        return [v.node.text for v in self.visits]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "use_case": self.use_case,
            "nodes": [v.node.id for v in self.visits],
            "frames": [list(v.frame) for v in self.visits],
            "steps": self.steps_text(),
            "covered_flows": [[c.use_case, c.flow, c.entry] for c in self.covered_flows],
            "size_S": self.size_S,
            "variability_V": self.variability_V,
        }


def make_scenario(sid: str, root: str, visits, entries, graphs: Mapping[str, ScenarioGraph]) -> Scenario:
    """Assemble a Scenario from a visit list and its ordered alternative-flow entries."""
    covered: list[CoveredFlow] = []
    seen = set()
    for v in visits:
        n = v.node
        if n.kind is NodeKind.START:
            c = CoveredFlow(n.use_case, graphs[n.use_case].basic_flow, "", True)
            if (c.use_case, c.flow, c.entry) not in seen:
                seen.add((c.use_case, c.flow, c.entry))
                covered.append(c)
    for _frame, uc, flow, anchor in entries:
        c = CoveredFlow(uc, flow, anchor, False)
        if (uc, flow, anchor) not in seen:
            seen.add((uc, flow, anchor))
            covered.append(c)
    return Scenario(sid, root, tuple(visits), tuple(covered), tuple(entries))


def _walk(root: str, graphs: Mapping[str, ScenarioGraph], chooser, single: bool = False
          ) -> Iterator[tuple[list, list]]:
    """Depth-first walk over the inlined graph of ``root``.

    ``chooser(node, frame, entered)`` returns the branches to explore at a
    condition, as ``(successor_id, enters_flow_or_None)`` pairs. The walk
    enforces the loop-once rule: an alternative flow is entered at most
    once per (include frame, use case).
    """
    if root not in graphs:
        raise DanglingReference(f"no scenario graph for use case {root!r}")
    g0 = graphs[root]
    # stack entries: (uc, node_id, call_stack, visits, entries, entered)
    todo = [(root, g0.start, (), (), (), frozenset())]
    while todo:
        uc, nid, calls, visits, entries, entered = todo.pop()
        while True:
            g = graphs[uc]
            node = g.nodes[nid]
            frame = tuple(graphs[c_uc].nodes[c_id].identity for c_uc, c_id in calls)
            visits = visits + (Visit(node, frame),)
            if node.kind is NodeKind.ABORT:
                yield list(visits), list(entries)
                break
            if node.kind is NodeKind.EXIT and node.next is None:
                if not calls:
                    yield list(visits), list(entries)
                    break
                uc, inc_id = calls[-1]
                calls = calls[:-1]
                nid = graphs[uc].nodes[inc_id].next
                continue
            if node.kind is NodeKind.INCLUDE:
                target = node.target
                if target not in graphs:
                    raise DanglingReference(f"{uc}: included use case {target!r} has no graph")
                if target == uc or any(c_uc == target for c_uc, _ in calls):
                    raise IncludeCycle(f"{uc} includes {target} recursively")
                calls = calls + ((uc, nid),)
                uc = target
                nid = graphs[target].start
                continue
            if node.kind is NodeKind.CONDITION:
                options = []
                for succ, enters in chooser(node, frame, entered, visits, entries):
                    if graphs[uc].nodes[succ].implicit:
                        continue
                    if enters is not None and (frame, uc, enters) in entered:
                        continue
                    options.append((succ, enters))
                if not options:
                    break
                if single:
                    options = options[:1]
                for succ, enters in reversed(options[1:]):
                    ent, ents = entered, entries
                    if enters is not None:
                        ent = entered | {(frame, uc, enters)}
                        ents = entries + ((frame, uc, enters, node.anchor or node.step),)
                    todo.append((uc, succ, calls, visits, ents, ent))
                succ, enters = options[0]
                if enters is not None:
                    entered = entered | {(frame, uc, enters)}
                    entries = entries + ((frame, uc, enters, node.anchor or node.step),)
                nid = succ
                continue
            nid = node.next


def _both(node, frame, entered, visits, entries):
    return [(node.true, node.true_enters), (node.false, node.false_enters)]


def enumerate_scenarios(root: str, graphs: Mapping[str, ScenarioGraph]) -> list[Scenario]:
    """All start-to-termination paths of ``root`` with each alternative flow
    entered at most once per include frame; true branches are explored first."""
    out = []
    for i, (visits, entries) in enumerate(_walk(root, graphs, _both), start=1):
        out.append(make_scenario(f"{root}#{i}", root, visits, entries, graphs))
    return out


def enumerate_document(doc: UseCaseDocument, graphs: Mapping[str, ScenarioGraph] | None = None
                       ) -> dict[str, list[Scenario]]:
    graphs = graphs if graphs is not None else build_graphs(doc)
    return {uc.name: enumerate_scenarios(uc.name, graphs) for uc in doc.use_cases}


def dump_scenarios(scenarios: Mapping[str, list[Scenario]]) -> str:
    return json.dumps({uc: [s.to_dict() for s in ss] for uc, ss in scenarios.items()}, indent=2) + "\n"


def dump_graphs(graphs: Mapping[str, ScenarioGraph]) -> str:
    return json.dumps({uc: g.to_dict() for uc, g in graphs.items()}, indent=2) + "\n"
