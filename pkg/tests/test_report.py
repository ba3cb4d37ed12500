import csv
import datetime as dt
import json
from dataclasses import replace

import pytest

from plucase.classifier import TestClass as Cls, classify_test_cases
from plucase.errors import EmptyInput
from plucase.report import (CSV_COLUMNS, aggregate, dump_report_json, load_report, render_html, whole_line_new,
                            write_report)


@pytest.fixture(scope="module")
def base(sto):
    return classify_test_cases(sto["ps1"], sto["ps2"], sto["changes"], sto["suite"], previous_product="P1",
                               new_product="P2")


def _as(base, pid, **changes):
    return replace(base, previous_product=pid, **changes)


def _mode(report, label):
    (s,) = [s for s in report.selections if s.label == label]
    return s


def test_most_recent_product_is_selected(base):
    dates = {"PA": dt.date(2015, 1, 1), "PB": dt.date(2017, 1, 1)}
    rep = aggregate([_as(base, "PB"), _as(base, "PA")], dates)
    s = _mode(rep, "Recognize Gesture#1")
    assert s.mode == "retestable" and s.selected == [["PB", "t1"]]
    assert sorted(s.candidates) == [["PA", "t1", "retestable"], ["PB", "t1", "retestable"]]
    assert _mode(rep, "Provide System User Data#1").mode == "obsolete"
    assert rep.whole_line == {"reusable": 0, "retestable": 2, "manual": 0, "obsolete": 1, "new": 2}
    assert rep.previous[0] == {"product_id": "PB", "created_on": "2017-01-01"}


def test_equal_dates_pick_greatest_product_id(base):
    same = dt.date(2016, 5, 5)
    rep = aggregate([_as(base, "PB"), _as(base, "PA")], {"PA": same, "PB": same})
    assert _mode(rep, "Recognize Gesture#2").selected == [["PB", "t2"]]
    assert "lexicographically greatest" in rep.metadata["selection_tie_rule"]


def test_mixed_classes_need_manual_choice(base):
    other = dict(base.verdicts)
    other["t1"] = replace(other["t1"], test_class=Cls.REUSABLE, triggering_rules=())
    rep = aggregate([_as(base, "PA"), _as(base, "PB", verdicts=other)], {})
    s = _mode(rep, "Recognize Gesture#1")
    assert s.mode == "manual" and s.selected == []
    assert not any(r.selected for r in rep.rows if r.test_id == "t1")
    assert "Manual choices" in render_html(rep)


def test_empty_input():
    with pytest.raises(EmptyInput):
        aggregate([])


def test_whole_line_new_is_intersection(sto, base):
    both = whole_line_new([classify_test_cases(sto["ps1"], sto["ps2"], sto["changes"], sto["suite"],
                                               previous_product=p) for p in ("PA", "PB")])
    assert [f.s_new.id for f in both] == [f.s_new.id for f in base.new_scenarios]
    assert all({s.product_id for s in f.sources} == {"PA", "PB"} for f in both)
    assert whole_line_new([_as(base, "PA"), _as(base, "PB", new_scenarios=[])]) == []


def test_per_product_counts_and_unmatched(base):
    rep = aggregate([_as(base, "PA", unmatched=["t7"])], {})
    assert rep.per_product == {"PA": {"obsolete": 1, "retestable": 2, "reusable": 0, "new": 2}}
    assert rep.metadata["unmatched_tests"] == {"PA": ["t7"]}
    assert rep.new_product == "P2"


def test_outputs_round_trip(base, tmp_path):
    rep = aggregate([base], {"P1": dt.date(2015, 6, 1)})
    paths = write_report(rep, tmp_path)
    assert [p.rsplit("/", 1)[1] for p in paths] == ["impact.json", "impact.csv", "impact.html"]
    again = load_report(tmp_path / "impact.json")
    assert again == rep and dump_report_json(again) == dump_report_json(rep)
    assert json.loads(dump_report_json(rep))["schema_version"] == 1
    with open(tmp_path / "impact.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert ["t3", "P1", "obsolete", "Provide System User Data#1", "R6;R7;R9", "no"] in rows
    page = (tmp_path / "impact.html").read_text()
    assert "Legend" in page and 'class="remove"' in page and "Adapt the test of" in page


def test_unknown_format(base, tmp_path):
    with pytest.raises(ValueError):
        write_report(aggregate([base]), tmp_path, ["pdf"])
