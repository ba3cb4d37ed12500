"""Command line interface: ``plucase <subcommand> [options]``.

Options may also come from a TOML file (``--config``, default
``plucase.toml`` in the working directory when present); command line
flags win. Keys use underscores: ``pl_spec``, ``pl_diagram``,
``decisions`` (list), ``traces`` (list), ``previous`` (list), ``new``,
``history``, ``features``, ``overrides``, ``alpha``, ``format`` (list),
``out``, ``ranking``.

Exit status: 0 success, 1 validation findings, 2 errors.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import warnings

import tomli

from . import __version__
from .classifier import classify_test_cases
from .configurator import generate_ps_diagram, generate_ps_specification
from .decisions import diff_decisions, load_decisions, validate_decisions
from .diagram import cross_check, dump_diagram, load_diagram
from .errors import ConstantOutcome, NoFailures, PlucaseError
from .prioritizer import (FACTORS, build_training_set, design_matrix, evaluate_ranking, failing_tests,
                          load_features, load_history, outcomes, rank_test_cases, ranking_rows,
                          select_significant_factors)
from .prioritizer.ranking import load_ranking, write_ranking
from .report import aggregate, write_report
from .rucm import load_specification, serialize_specification, validate_document
from .traceability import load_overrides, load_traces

LIST_KEYS = {"decisions", "traces", "previous", "format"}
DEFAULTS = {"alpha": 0.05, "format": ["json", "csv", "html"], "out": "."}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with default option values")
    common.add_argument("--pl-spec", dest="pl_spec", help="PL use case specifications (.rucm)")
    common.add_argument("--pl-diagram", dest="pl_diagram", help="PL use case diagram (.json)")
    common.add_argument("--decisions", action="append", help="decision model file (repeatable)")
    common.add_argument("--previous", action="append", help="previous product id (repeatable)")
    common.add_argument("--new", help="new product id")
    common.add_argument("--traces", action="append",
                        help="trace file, as PRODUCT=path or traces.PRODUCT.csv (repeatable)")
    common.add_argument("--overrides", help="overrides.csv mapping test_id to scenario_id")
    common.add_argument("--history", help="execution history CSV")
    common.add_argument("--features", help="per-product test features CSV")
    common.add_argument("--ranking", help="ranking CSV to evaluate")
    common.add_argument("--alpha", type=float, help="Wald test significance level (default 0.05)")
    common.add_argument("--format", action="append", choices=["json", "csv", "html"], help="report format")
    common.add_argument("--out", help="output directory")

    p = argparse.ArgumentParser(prog="plucase", description="Regression test selection and prioritization "
                                "for use case driven product lines.")
    p.add_argument("--version", action="version", version=f"plucase {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("validate", "parse and cross-check the PL models and decision models"),
        ("configure", "generate PS diagrams and specifications"),
        ("diff", "change set between two decision models"),
        ("classify", "classify previous-product tests against the new product"),
        ("report", "whole-line impact report over several previous products"),
        ("prioritize", "fit the failure model and rank the new product's tests"),
        ("evaluate", "effectiveness metrics of a ranking"),
    ]:
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return p


def _resolve(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    path = args.config or ("plucase.toml" if os.path.exists("plucase.toml") else None)
    if path:
        with open(path, "rb") as fh:
            cfg = tomli.load(fh)
        cfg = cfg.get("plucase", cfg)
    opts = dict(DEFAULTS)
    for key, val in cfg.items():
        if key in LIST_KEYS and isinstance(val, str):
            val = [val]
        opts[key] = val
    for key, val in vars(args).items():
        if val is not None:
            opts[key] = val
    return opts


def _need(opts: dict, *keys: str) -> None:
    missing = [k for k in keys if not opts.get(k)]
    if missing:
        raise UsageError("missing option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _decision_models(opts: dict) -> dict:
    models = {}
    for path in opts.get("decisions") or []:
        m = load_decisions(path)
        models[m.product_id] = m
    return models


def _trace_files(opts: dict) -> dict[str, str]:
    out = {}
    untagged = []
    for item in opts.get("traces") or []:
        if "=" in item and not os.path.exists(item):
            pid, path = item.split("=", 1)
            out[pid] = path
            continue
        m = re.fullmatch(r"traces\.(.+)\.csv", os.path.basename(item))
        if m:
            out[m[1]] = item
        else:
            untagged.append(item)
    prev = opts.get("previous") or []
    if untagged:
        if len(untagged) == 1 and len(prev) == 1 and prev[0] not in out:
            out[prev[0]] = untagged[0]
        else:
            raise UsageError("cannot tell which product these trace files belong to: " + ", ".join(untagged)
                             + " (use PRODUCT=path)")
    return out


def _models(opts: dict):
    _need(opts, "pl_spec", "pl_diagram")
    return load_specification(opts["pl_spec"]), load_diagram(opts["pl_diagram"])


def _product(models: dict, pid: str):
    if pid not in models:
        raise UsageError(f"no decision model for product {pid!r} (pass it with --decisions)")
    return models[pid]


def _write_json(path: str, data) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def cmd_validate(opts: dict) -> int:
    doc, diagram = _models(opts)
    findings = [f"spec: {w}" for w in validate_document(doc)]
    findings += [f"diagram: {w}" for w in cross_check(diagram, doc)]
    for pid, m in _decision_models(opts).items():
        findings += [f"decisions {pid}: {v}" for v in validate_decisions(m, diagram, doc)]
    for line in findings:
        print(line)
    if not findings:
        print("ok")
    return 1 if findings else 0


def cmd_configure(opts: dict) -> int:
    doc, diagram = _models(opts)
    models = _decision_models(opts)
    if not models:
        raise UsageError("missing option(s): --decisions")
    out = opts["out"]
    os.makedirs(out, exist_ok=True)
    for pid, m in models.items():
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ps = generate_ps_specification(doc, m, diagram)
        for w in caught:
            print(f"warning: {pid}: {w.message}", file=sys.stderr)
        with open(os.path.join(out, f"ps.{pid}.rucm"), "w", encoding="utf-8") as fh:
            fh.write(serialize_specification(ps))
        with open(os.path.join(out, f"ps_diagram.{pid}.json"), "w", encoding="utf-8") as fh:
            fh.write(dump_diagram(generate_ps_diagram(diagram, m)))
        print(f"{pid}: {len(ps.use_cases)} use cases")
    return 0


def cmd_diff(opts: dict) -> int:
    _need(opts, "previous", "new")
    models = _decision_models(opts)
    old = _product(models, opts["previous"][-1])
    new = _product(models, opts["new"])
    text = json.dumps(diff_decisions(old, new).to_dict(), indent=2, ensure_ascii=False) + "\n"
    if opts.get("out") and opts["out"] != ".":
        path = os.path.join(opts["out"], f"diff.{old.product_id}-{new.product_id}.json")
        os.makedirs(opts["out"], exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def _classify_all(opts: dict):
    _need(opts, "previous", "new", "traces")
    doc, diagram = _models(opts)
    models = _decision_models(opts)
    traces = _trace_files(opts)
    overrides = load_overrides(opts["overrides"]) if opts.get("overrides") else None
    new = _product(models, opts["new"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        new_ps = generate_ps_specification(doc, new, diagram)
        results = []
        for pid in opts["previous"]:
            old = _product(models, pid)
            if pid not in traces:
                raise UsageError(f"no trace file for product {pid!r}")
            old_ps = generate_ps_specification(doc, old, diagram)
            suite = load_traces(traces[pid], pid)
            results.append(classify_test_cases(old_ps, new_ps, diff_decisions(old, new), suite, overrides,
                                               previous_product=pid, new_product=new.product_id))
    return results, {pid: m.created_on for pid, m in models.items()}


def cmd_classify(opts: dict) -> int:
    results, dates = _classify_all(opts)
    report = aggregate(results, dates, opts["new"])
    for path in write_report(report, opts["out"], opts["format"]):
        print(path)
    for r in results:
        c = r.counts()
        print(f"{r.previous_product} -> {r.new_product}: obsolete={c['obsolete']} retestable={c['retestable']} "
              f"reusable={c['reusable']} new={c['new']}")
    return 0


def cmd_report(opts: dict) -> int:
    results, dates = _classify_all(opts)
    report = aggregate(results, dates, opts["new"])
    for path in write_report(report, opts["out"], opts["format"]):
        print(path)
    w = report.whole_line
    print(f"whole line: reusable={w['reusable']} retestable={w['retestable']} manual={w['manual']} "
          f"obsolete={w['obsolete']} new={w['new']}")
    return 0


def cmd_prioritize(opts: dict) -> int:
    _need(opts, "history", "features", "new")
    history = load_history(opts["history"])
    features = load_features(opts["features"])
    new = opts["new"]
    past = [r for r in history if r.product_id != new]
    rows = build_training_set(past, features)
    suite = ranking_rows(history, features, new)
    new_tests = {f.test_id: f.new_scenario for (p, _), f in features.items() if p == new and f.new_scenario}
    model_info: dict
    try:
        sel = select_significant_factors(design_matrix(rows), outcomes(rows), FACTORS, alpha=opts["alpha"])
        ranking = rank_test_cases(suite, sel.refit, sel.retained, new_tests)
        model_info = {"full": sel.full_summary.to_dict(), "refit": sel.refit_summary.to_dict(),
                      "retained_factors": sel.retained, "training_rows": len(rows)}
    except ConstantOutcome as exc:
        ranking = rank_test_cases(suite, None, FACTORS, new_tests)
        model_info = {"fallback": str(exc), "training_rows": len(rows)}
    out = opts["out"]
    os.makedirs(out, exist_ok=True)
    write_ranking(ranking, os.path.join(out, "ranking.csv"))
    _write_json(os.path.join(out, "model.json"), model_info)
    print(os.path.join(out, "ranking.csv"))
    print(os.path.join(out, "model.json"))
    return 0


def cmd_evaluate(opts: dict) -> int:
    _need(opts, "ranking", "history", "new")
    order = load_ranking(opts["ranking"])
    failing = failing_tests(load_history(opts["history"]), opts["new"])
    try:
        data = {"applicable": True, **evaluate_ranking(order, failing).to_dict()}
    except NoFailures:
        data = {"applicable": False, "reason": "no failing test in the ranked suite"}
    _write_json(os.path.join(opts["out"], "metrics.json"), data)
    print(json.dumps(data, indent=2))
    return 0


COMMANDS = {
    "validate": cmd_validate, "configure": cmd_configure, "diff": cmd_diff, "classify": cmd_classify,
    "report": cmd_report, "prioritize": cmd_prioritize, "evaluate": cmd_evaluate,
}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        opts = _resolve(args)
        return COMMANDS[args.command](opts)
    except (UsageError, PlucaseError, OSError, ValueError, tomli.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
