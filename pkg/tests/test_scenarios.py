import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import brute_force_paths, random_ps_case
from plucase.errors import DanglingReference, IncludeCycle, MalformedFlow
from plucase.rucm import parse_specification
from plucase.scenarios import (NodeKind, build_graphs, dump_graphs, dump_scenarios, enumerate_document,
                               enumerate_scenarios, generate_use_case_model)


@pytest.mark.parametrize("ps, conditions, aborts", [("ps1", 2, 2), ("ps2", 3, 3)])
def test_recognize_gesture_graph(sto, ps, conditions, aborts):
    g = generate_use_case_model(sto[ps].use_case("Recognize Gesture"))
    assert g.count(NodeKind.CONDITION) == conditions
    assert g.count(NodeKind.ABORT) == aborts
    assert g.count(NodeKind.EXIT) == 1
    assert g.count(NodeKind.ABORT, include_implicit=True) == aborts
    assert g.nodes[g.start].kind is NodeKind.START


def test_unhandled_conditions_get_implicit_aborts(sto):
    g = generate_use_case_model(sto["ps1"].use_case("Identify System Operating Status"))
    assert g.count(NodeKind.CONDITION) == 4
    assert g.count(NodeKind.ABORT) == 1
    assert g.count(NodeKind.ABORT, include_implicit=True) == 4


def test_bounded_guard_precedes_first_reference_step(sto):
    g = generate_use_case_model(sto["ps2"].use_case("Recognize Gesture"))
    guard = g.nodes["Recognize Gesture|BAF1|guard"]
    assert guard.guard and guard.text == "IF voltage fluctuation is detected THEN"
    assert g.nodes[g.start].next == guard.id
    assert guard.false == "Recognize Gesture|BF|1" and guard.true_enters == "BAF1"


def test_sto_scenarios(sto):
    scen = enumerate_scenarios("Recognize Gesture", build_graphs(sto["ps1"]))
    assert [s.id for s in scen] == [f"Recognize Gesture#{i}" for i in range(1, 5)]
    first = scen[0]
    assert first.steps_text()[:4] == ["START", "The system REQUESTS the move capacitance FROM the sensors.",
                                      "INCLUDE USE CASE Identify System Operating Status.", "START"]
    assert first.terminated_by is NodeKind.EXIT and not first.alt_flows()
    assert first.size_S == 9
    assert first.flow_set() == {("Recognize Gesture", "BF"), ("Identify System Operating Status", "BF")}
    assert scen[1].alt_flows() == {("Recognize Gesture", "SAF2")}
    assert scen[1].terminated_by is NodeKind.ABORT
    assert first.input_entities() == {"move capacitance"}


def test_variability_degree(sto):
    scen = enumerate_scenarios("Provide System User Data", build_graphs(sto["ps2"]))
    first = scen[0]
    # the VP include and the three ordered variant steps
    assert first.variability_V == 4
    assert first.size_S == 6
    assert len(scen) == 3


def test_include_frames(sto):
    scen = enumerate_scenarios("Recognize Gesture", build_graphs(sto["ps1"]))
    inner = [v for v in scen[0].visits if v.node.use_case == "Identify System Operating Status"]
    assert inner and all(v.frame == (("Recognize Gesture", "BF", "IncludeUseCase",
                                      "include use case identify system operating status", 0),) for v in inner)


def test_include_cycle():
    doc = parse_specification("USE CASE A\n1.1 Basic Flow (BF)\n1. INCLUDE USE CASE B.\n\n"
                              "USE CASE B\n1.1 Basic Flow (BF)\n1. INCLUDE USE CASE A.\n")
    with pytest.raises(IncludeCycle):
        build_graphs(doc)


def test_missing_graph_for_included_use_case():
    doc = parse_specification("USE CASE A\n1.1 Basic Flow (BF)\n1. INCLUDE USE CASE B.\n", resolve=False)
    graphs = {"A": generate_use_case_model(doc.use_cases[0])}
    with pytest.raises(DanglingReference):
        enumerate_scenarios("A", graphs)
    with pytest.raises(DanglingReference):
        enumerate_scenarios("Z", graphs)


@pytest.mark.parametrize("text", [
    "USE CASE U\n1.1 Basic Flow (BF)\n1. The system does x.\n1.2 Specific Alternative Flow (SAF1)\nRFS 1\n"
    "1. ABORT.\n",
    "USE CASE U\n1.1 Basic Flow (BF)\n1. ABORT.\n2. The system does x.\n",
    "USE CASE U\n1.1 Basic Flow (BF)\n1. The system does x.\n2. RESUME STEP 1.\n",
    "USE CASE U\n1.1 Basic Flow (BF)\n1. INCLUDE <VARIATION POINT: P>.\n",
])
def test_malformed_flows(text):
    with pytest.raises(MalformedFlow):
        generate_use_case_model(parse_specification(text, resolve=False).use_cases[0])


def test_guarded_saf_on_internal_step():
    doc = parse_specification("USE CASE U\n1.1 Basic Flow (BF)\n1. The system does x.\n"
                              "1.2 Specific Alternative Flow (SAF1)\nRFS 1\n1. IF power is low THEN\n2. ABORT.\n"
                              "3. ENDIF\n")
    scen = enumerate_scenarios("U", build_graphs(doc))
    assert [s.steps_text() for s in scen] == [["START", "IF power is low THEN", "ABORT."],
                                             ["START", "IF power is low THEN", "The system does x.", "EXIT"]]


def test_loop_once_on_returning_flow():
    doc = parse_specification("USE CASE U\n1.1 Basic Flow (BF)\n1. The system VALIDATES THAT x is valid.\n"
                              "1.2 Specific Alternative Flow (SAF1)\nRFS 1\n1. The system resets x.\n")
    scen = enumerate_scenarios("U", build_graphs(doc))
    assert len(scen) == 2
    looped = scen[1]
    assert [v.node.id for v in looped.visits] == ["U|start|", "U|BF|1", "U|SAF1|1", "U|SAF1|exit", "U|BF|1",
                                                  "U|BF|exit"]
    assert looped.size_S == 3


def test_dumps_are_json(sto):
    graphs = build_graphs(sto["ps2"])
    scen = enumerate_document(sto["ps2"], graphs)
    data = json.loads(dump_scenarios(scen))
    assert set(data) == set(sto["ps2"].names())
    assert json.loads(dump_graphs(graphs))["Recognize Gesture"]["start"] == "Recognize Gesture|start|"
    assert dump_scenarios(scen) == dump_scenarios(enumerate_document(sto["ps2"]))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_enumeration_properties(seed):
    doc, graphs = random_ps_case(random.Random(seed))
    uc = doc.use_cases[0]
    scen = enumerate_scenarios(uc.name, graphs)
    assert sorted(s.node_sequence for s in scen) == sorted(tuple(p) for p, _ in
                                                           brute_force_paths(uc, graphs[uc.name]))
    assert len({s.node_sequence for s in scen}) == len(scen)
    for s in scen:
        assert s.terminated_by in (NodeKind.EXIT, NodeKind.ABORT)
        flows = [e[2] for e in s.entries]
        assert len(flows) == len(set(flows))
        assert not any(v.node.implicit for v in s.visits)
