"""Whole-line impact report built from per-product classification results.

Outputs, under an ``--out`` directory:

* ``impact.json``: canonical full report (``load_report`` reads it back);
* ``impact.csv``: one row per (test, source product);
* ``impact.html``: human-readable report with guidance markings.
"""

from __future__ import annotations

import csv
import hashlib
import html
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import date
from typing import Iterable, Mapping

from .classifier import ClassificationResult, GuidanceSource, NewScenarioFinding, filter_new_scenarios
from .errors import EmptyInput

SCHEMA_VERSION = 1
TIE_RULE = "most recent created_on; equal dates resolved by the lexicographically greatest product_id"


def scenario_digest(keys) -> str:
    return hashlib.sha1(repr(tuple(keys)).encode("utf-8")).hexdigest()[:12]


@dataclass
class ReportRow:
    test_id: str
    source_product: str
    test_class: str
    scenarios: list[str]
    rules: list[str]
    selected: bool = False
    scenario_key: str = ""


@dataclass
class Selection:
    scenario_key: str
    label: str
    mode: str  # reusable | retestable | manual | obsolete
    candidates: list[list[str]]  # [product, test, class]
    selected: list[list[str]]  # [product, test]


@dataclass
class NewScenarioEntry:
    id: str
    use_case: str
    steps: list[str]
    sources: list[dict]
    key: str = ""


@dataclass
class ImpactReport:
    new_product: str
    previous: list[dict]
    rows: list[ReportRow] = field(default_factory=list)
    selections: list[Selection] = field(default_factory=list)
    new_scenarios: list[NewScenarioEntry] = field(default_factory=list)
    per_product: dict[str, dict[str, int]] = field(default_factory=dict)
    whole_line: dict[str, int] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ImpactReport":
        data = dict(data)
        data.pop("schema_version", None)
        return cls(
            new_product=data["new_product"],
            previous=data["previous"],
            rows=[ReportRow(**r) for r in data.get("rows", [])],
            selections=[Selection(**s) for s in data.get("selections", [])],
            new_scenarios=[NewScenarioEntry(**n) for n in data.get("new_scenarios", [])],
            per_product=data.get("per_product", {}),
            whole_line=data.get("whole_line", {}),
            metadata=data.get("metadata", {}),
        )


def _recency(product: str, dates: Mapping[str, date]) -> tuple:
    d = dates.get(product)
    return (d.isoformat() if d else "", product)


def whole_line_new(results: list[ClassificationResult]) -> list[NewScenarioFinding]:
    """New scenarios not exercised by any previous product: the intersection
    of the per-product sets, with guidance sources from every product."""
    common = None
    for r in results:
        keys = {f.key for f in r.new_scenarios}
        common = keys if common is None else common & keys
    merged: list[NewScenarioFinding] = []
    for r in results:
        for f in r.new_scenarios:
            if f.key in common:
                srcs = [GuidanceSource(s.scenario, s.edits, s.product_id or r.previous_product) for s in f.sources]
                merged.append(NewScenarioFinding(f.s_new, srcs))
    return sorted(filter_new_scenarios(merged), key=lambda f: f.s_new.id)


def aggregate(results: Iterable[ClassificationResult], dates: Mapping[str, date] | None = None,
              new_product: str = "") -> ImpactReport:
    results = list(results)
    if not results:
        raise EmptyInput("no per-product classification results to aggregate")
    dates = dates or {}
    new_product = new_product or results[0].new_product
    rows: list[ReportRow] = []
    groups: dict[str, list[ReportRow]] = {}
    labels: dict[str, str] = {}
    for r in results:
        for tid in sorted(r.verdicts):
            v = r.verdicts[tid]
            keys = [r.old_scenarios[s].keys for s in v.affected_scenarios if s in r.old_scenarios]
            skey = scenario_digest(keys)
            row = ReportRow(tid, r.previous_product, v.test_class.value.lower(), list(v.affected_scenarios),
                            list(v.triggering_rules), scenario_key=skey)
            rows.append(row)
            groups.setdefault(skey, []).append(row)
            labels.setdefault(skey, ", ".join(v.affected_scenarios))

    selections = []
    for skey, members in groups.items():
        live = [m for m in members if m.test_class != "obsolete"]
        classes = {m.test_class for m in live}
        if not live:
            mode, chosen = "obsolete", []
        elif len(classes) == 1:
            mode = classes.pop()
            newest = max(_recency(m.source_product, dates) for m in live)[1]
            chosen = [m for m in live if m.source_product == newest]
        else:
            mode, chosen = "manual", []
        for m in chosen:
            m.selected = True
        selections.append(Selection(skey, labels[skey], mode,
                                    [[m.source_product, m.test_id, m.test_class] for m in members],
                                    [[m.source_product, m.test_id] for m in chosen]))

    new_entries = [
        NewScenarioEntry(f.s_new.id, f.s_new.use_case, f.s_new.steps_text(),
                         [s.to_dict() for s in f.sources], scenario_digest(f.key))
        for f in whole_line_new(results)
    ]
    whole = {c: sum(1 for s in selections if s.mode == c) for c in ("reusable", "retestable", "manual", "obsolete")}
    whole["new"] = len(new_entries)
    return ImpactReport(
        new_product=new_product,
        previous=[{"product_id": r.previous_product,
                   "created_on": dates[r.previous_product].isoformat() if r.previous_product in dates else ""}
                  for r in results],
        rows=rows,
        selections=selections,
        new_scenarios=new_entries,
        per_product={r.previous_product: r.counts() for r in results},
        whole_line=whole,
        metadata={"selection_tie_rule": TIE_RULE,
                  "unmatched_tests": {r.previous_product: r.unmatched for r in results if r.unmatched}},
    )


def dump_report_json(report: ImpactReport) -> str:
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"


def load_report(path) -> ImpactReport:
    with open(path, encoding="utf-8") as fh:
        return ImpactReport.from_dict(json.load(fh))


CSV_COLUMNS = ("test_id", "source_product", "class", "scenarios", "rules", "selected")


def write_csv(report: ImpactReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([r.test_id, r.source_product, r.test_class, ";".join(r.scenarios),
                        ";".join(r.rules), "yes" if r.selected else "no"])


_STYLE = """
body { font-family: sans-serif; margin: 2em; }
table { border-collapse: collapse; margin-bottom: 2em; }
td, th { border: 1px solid #bbb; padding: 3px 8px; text-align: left; }
.obsolete { background: #f6d5d5; } .retestable { background: #fbeec4; } .reusable { background: #d8efd8; }
.add { color: #12782a; } .remove { color: #b4141e; text-decoration: line-through; } .reorder { color: #1f4fb4; }
"""


def _edit_html(e: dict) -> str:
    op = e["op"]
    mark = {"add": "+", "remove": "-", "reorder": "~"}[op]
    where = f"{e['from']} &rarr; {e['position']}" if op == "reorder" else str(e["position"])
    return f'<li class="{op}">{mark} [{where}] {html.escape(e["text"])}</li>'


def render_html(report: ImpactReport) -> str:
    out = ["<!DOCTYPE html>", "<html><head><meta charset=\"utf-8\">",
           f"<title>Impact report for {html.escape(report.new_product)}</title>",
           f"<style>{_STYLE}</style></head><body>",
           f"<h1>Impact report for {html.escape(report.new_product)}</h1>",
           "<h2>Summary</h2><table><tr><th>previous product</th><th>obsolete</th><th>retestable</th>"
           "<th>reusable</th><th>new scenarios</th></tr>"]
    for p, c in report.per_product.items():
        out.append(f"<tr><td>{html.escape(p)}</td><td>{c['obsolete']}</td><td>{c['retestable']}</td>"
                   f"<td>{c['reusable']}</td><td>{c['new']}</td></tr>")
    w = report.whole_line
    out.append(f"<tr><th>whole line (scenarios)</th><td>{w.get('obsolete', 0)}</td><td>{w.get('retestable', 0)}</td>"
               f"<td>{w.get('reusable', 0)}</td><td>{w.get('new', 0)}</td></tr></table>")
    out.append("<h2>Test cases</h2><table><tr><th>test</th><th>product</th><th>class</th>"
               "<th>scenarios</th><th>rules</th><th>selected</th></tr>")
    for r in report.rows:
        out.append(f'<tr class="{r.test_class}"><td>{html.escape(r.test_id)}</td>'
                   f"<td>{html.escape(r.source_product)}</td><td>{r.test_class}</td>"
                   f"<td>{html.escape('; '.join(r.scenarios))}</td><td>{' '.join(r.rules)}</td>"
                   f"<td>{'yes' if r.selected else ''}</td></tr>")
    out.append("</table>")
    manual = [s for s in report.selections if s.mode == "manual"]
    if manual:
        out.append("<h2>Manual choices</h2><ul>")
        for s in manual:
            cands = ", ".join(f"{p}:{t} ({c})" for p, t, c in s.candidates)
            out.append(f"<li>{html.escape(s.label)}: {html.escape(cands)}</li>")
        out.append("</ul>")
    out.append("<h2>New scenarios</h2>")
    out.append('<p>Legend: <span class="add">+ step to add</span>, <span class="remove">- step to remove</span>, '
               '<span class="reorder">~ step to move</span>.</p>')
    for n in report.new_scenarios:
        out.append(f"<h3>{html.escape(n.id)}</h3><ol>")
        out.extend(f"<li>{html.escape(s)}</li>" for s in n.steps)
        out.append("</ol>")
        for src in n.sources:
            out.append(f"<p>Adapt the test of {html.escape(src['scenario'])} "
                       f"({html.escape(src.get('product_id', ''))}):</p><ul>")
            out.extend(_edit_html(e) for e in src["edits"])
            out.append("</ul>")
    out.append("</body></html>")
    return "\n".join(out) + "\n"


def write_report(report: ImpactReport, out_dir, formats: Iterable[str] = ("json", "csv", "html")) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for fmt in formats:
        path = os.path.join(out_dir, f"impact.{fmt}")
        if fmt == "json":
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(dump_report_json(report))
        elif fmt == "csv":
            write_csv(report, path)
        elif fmt == "html":
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(render_html(report))
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        written.append(path)
    return written
