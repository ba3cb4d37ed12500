import warnings
from pathlib import Path

import pytest

from plucase.configurator import generate_ps_specification
from plucase.decisions import diff_decisions, load_decisions
from plucase.diagram import load_diagram
from plucase.rucm import load_specification
from plucase.synthetic import generate_line
from plucase.traceability import load_traces

from helpers import ACCEPTANCE

STO = Path(__file__).parent / "fixtures" / "sto_mini"


@pytest.fixture(scope="session")
def sto_dir():
    return STO


@pytest.fixture(scope="session")
def sto():
    """The STO-mini product line with both products configured."""
    doc = load_specification(STO / "pl.rucm")
    diagram = load_diagram(STO / "diagram.json")
    m1 = load_decisions(STO / "decisions.P1.json")
    m2 = load_decisions(STO / "decisions.P2.json")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ps1 = generate_ps_specification(doc, m1, diagram)
        ps2 = generate_ps_specification(doc, m2, diagram)
    return {
        "doc": doc, "diagram": diagram, "m1": m1, "m2": m2, "ps1": ps1, "ps2": ps2,
        "changes": diff_decisions(m1, m2), "suite": load_traces(STO / "traces.P1.csv", "P1"),
    }


@pytest.fixture(scope="session")
def line():
    return generate_line(seed=4)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
