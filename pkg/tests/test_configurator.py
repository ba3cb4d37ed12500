import json
import warnings
from dataclasses import replace

import pytest

from plucase.configurator import generate_ps_diagram, generate_ps_specification, included_use_cases
from plucase.decisions import decisions_from_dict, flow_key, step_key, vp_key
from plucase.diagram import diagram_from_dict
from plucase.errors import InvalidDecisions, MissingPrecondition
from plucase.rucm import StepKind, load_specification, parse_specification, serialize_specification


def test_p1_matches_golden(sto, sto_dir):
    golden = load_specification(sto_dir / "ps_P1.rucm")
    assert sto["ps1"] == golden
    assert serialize_specification(sto["ps1"]) == serialize_specification(golden)


def test_p2_validation_chain_and_order(sto):
    psud = sto["ps2"].use_case("Provide System User Data")
    steps = [s.text for s in psud.basic_flow.steps]
    assert steps[1] == "The system VALIDATES THAT 'Precondition of Provide System User Data via Standard Mode'."
    assert steps[2] == "INCLUDE USE CASE Provide System User Data via Standard Mode."
    saf1, saf2 = psud.flow("SAF1"), psud.flow("SAF2")
    assert saf1.rfs == ("2",) and [s.kind for s in saf1.steps] == [
        StepKind.CONDITION, StepKind.INCLUDE_USE_CASE, StepKind.ABORT]
    assert (saf2.ref_flow, saf2.rfs) == ("SAF1", ("1",))
    assert saf2.steps[0].text == "INCLUDE USE CASE Provide System User Data via Diagnostic Mode."
    std = sto["ps2"].use_case("Provide System User Data via Standard Mode")
    assert [s.text for s in std.basic_flow.steps] == [
        "The system SENDS the error trace data TO the tester.",
        "The system SENDS the error data TO the tester.",
        "The system SENDS the calibration data TO the tester.",
    ]
    assert [s.number for s in std.basic_flow.steps] == ["1", "2", "3"]


def test_optional_flow_selected_in_p2_only(sto):
    assert sto["ps1"].use_case("Recognize Gesture").flow("BAF1") is None
    baf = sto["ps2"].use_case("Recognize Gesture").flow("BAF1")
    assert baf is not None and not baf.optional
    assert baf.provenance == (flow_key("Recognize Gesture", "BAF1"),)


def test_provenance_stamps(sto):
    std = sto["ps2"].use_case("Provide System User Data via Standard Mode")
    assert std.basic_flow.steps[0].provenance == (step_key("Provide System User Data via Standard Mode", "BF",
                                                           "V5"),)
    psud = sto["ps2"].use_case("Provide System User Data")
    key = vp_key("Method of Providing Data", "Provide System User Data")
    assert all(key in s.provenance for s in psud.basic_flow.steps[1:])
    assert psud.basic_flow.steps[0].provenance == ()


def test_ps_is_product_specific(sto):
    for ps in (sto["ps1"], sto["ps2"]):
        assert not ps.is_product_line
        assert parse_specification(serialize_specification(ps)) == ps


def test_ps_diagram(sto):
    d = generate_ps_diagram(sto["diagram"], sto["m1"])
    names = [n for n, _ in d.use_cases]
    assert "Provide System User Data via Diagnostic Mode" not in names
    assert "Store Error Status" in names and not d.variation_points
    assert all(not v for _, v in d.use_cases)
    targets = {(i.source, i.target) for i in d.includes}
    assert ("Provide System User Data", "Provide System User Data via IEE QC Mode") in targets
    assert ("Identify System Operating Status", "Store Error Status") in targets
    assert names == included_use_cases(sto["diagram"], sto["m1"])


def test_single_variant_include_is_inlined(sto):
    isos = sto["ps1"].use_case("Identify System Operating Status")
    assert isos.flow("SAF4").steps[0].text == "INCLUDE USE CASE Store Error Status."


def test_invalid_decisions_rejected(sto, sto_dir):
    data = json.loads((sto_dir / "decisions.P1.json").read_text())
    data["diagram_decisions"][0]["selected"] = ["Provide System User Data via Standard Mode"]
    data["diagram_decisions"][0]["unselected"] = ["Provide System User Data via IEE QC Mode",
                                                  "Provide System User Data via Diagnostic Mode"]
    with pytest.raises(InvalidDecisions) as exc:
        generate_ps_specification(sto["doc"], decisions_from_dict(data), sto["diagram"])
    assert exc.value.violations
    with pytest.raises(InvalidDecisions):
        generate_ps_diagram(sto["diagram"], decisions_from_dict(data))


def test_missing_precondition_warns(sto):
    uc = sto["doc"].use_case("Provide System User Data via Standard Mode")
    doc = replace(sto["doc"], use_cases=tuple(replace(u, precondition="") if u is uc else u
                                              for u in sto["doc"].use_cases))
    with pytest.warns(MissingPrecondition):
        ps = generate_ps_specification(doc, sto["m1"], sto["diagram"])
    assert "Precondition of Provide System User Data via Standard Mode" in \
        ps.use_case("Provide System User Data").basic_flow.steps[1].text


def test_no_warning_when_preconditions_present(sto):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        generate_ps_specification(sto["doc"], sto["m2"], sto["diagram"])


PL = """USE CASE Operate
1.1 Basic Flow (BF)
1. The system VALIDATES THAT the door is closed.
2. <OPTIONAL> The system VALIDATES THAT the lock is engaged.
3. The system SENDS the status TO the operator.
1.2 Specific Alternative Flow (SAF1)
RFS 1
1. The system SENDS the door warning TO the operator.
2. RESUME STEP 2.
1.3 Specific Alternative Flow (SAF2)
RFS 2
1. ABORT.
"""


def _model(selected):
    return decisions_from_dict({"product_id": "P", "created_on": "2020-01-01", "diagram_decisions": [],
                                "spec_decisions": [{"use_case": "Operate", "flow": "BF", "element": "optional-step",
                                                    "step": "2", "selected": selected}]})


def _diagram():
    return diagram_from_dict({"use_cases": [{"name": "Operate", "variant": False}]})


def test_unselected_step_renumbers_and_drops_anchored_flow():
    ps = generate_ps_specification(parse_specification(PL), _model(False), _diagram())
    uc = ps.use_cases[0]
    assert [s.number for s in uc.basic_flow.steps] == ["1", "2"]
    assert uc.flow("SAF2") is None
    resume = uc.flow("SAF1").steps[-1]
    assert resume.kind is StepKind.EXIT and resume.target == "2" and resume.text == "RESUME STEP 2."


def test_selected_step_keeps_everything():
    ps = generate_ps_specification(parse_specification(PL), _model(True), _diagram())
    uc = ps.use_cases[0]
    assert [f.id for f in uc.flows] == ["BF", "SAF1", "SAF2"]
    assert uc.basic_flow.steps[1].provenance == (step_key("Operate", "BF", "2"),)
