"""Configuration decision models, decision matching and change calculation.

`decisions.<product>.json`::

    {
      "product_id": "P1",
      "created_on": "2015-06-01",
      "pl_model": "sto-mini",                       (optional)
      "diagram_decisions": [
        {"variation_point": "...", "including_use_case": "...",
         "selected": ["..."], "unselected": ["..."]}
      ],
      "spec_decisions": [
        {"use_case": "...", "flow": "BAF1", "element": "optional-flow", "selected": true},
        {"use_case": "...", "flow": "BF", "element": "variant-order", "step": "V3",
         "selected": true, "order_number": 1}
      ]
    }

``element`` is one of ``optional-step``, ``optional-flow`` or
``variant-order``. Optional elements without a decision count as
unselected.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field

from .diagram import PLDiagram
from .errors import ModelMismatch, SchemaError
from .rucm import UseCaseDocument

ELEMENTS = ("optional-step", "optional-flow", "variant-order")
UPDATE_KINDS = ("select-unselected", "unselect-selected", "both", "order-change")


@dataclass(frozen=True, order=True)
class DecisionKey:
    """Identity of a decision across products.

    kind "vp":   (including use case, variation point)
    kind "flow": (use case, optional alternative flow id)
    kind "step": (use case, flow id, step number)
    """

    kind: str
    use_case: str
    element: str
    step: str = ""

    def __str__(self) -> str:
        parts = [self.kind, self.use_case, self.element] + ([self.step] if self.step else [])
        return ":".join(parts)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "use_case": self.use_case, "element": self.element}
        if self.step:
            d["step"] = self.step
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionKey":
        return cls(d["kind"], d["use_case"], d["element"], d.get("step", ""))


def vp_key(variation_point: str, including_use_case: str) -> DecisionKey:
    return DecisionKey("vp", including_use_case, variation_point)


def flow_key(use_case: str, flow_id: str) -> DecisionKey:
    return DecisionKey("flow", use_case, flow_id)


def step_key(use_case: str, flow_id: str, step: str) -> DecisionKey:
    return DecisionKey("step", use_case, flow_id, step)


@dataclass(frozen=True)
class DiagramDecision:
    variation_point: str
    including_use_case: str
    selected: tuple[str, ...]
    unselected: tuple[str, ...] = ()

    @property
    def key(self) -> DecisionKey:
        return vp_key(self.variation_point, self.including_use_case)


@dataclass(frozen=True)
class SpecDecision:
    use_case: str
    flow: str
    element: str
    selected: bool
    step: str = ""
    order_number: int | None = None

    @property
    def key(self) -> DecisionKey:
        if self.element == "optional-flow":
            return flow_key(self.use_case, self.flow)
        return step_key(self.use_case, self.flow, self.step)


@dataclass(frozen=True)
class DecisionModel:
    product_id: str
    created_on: dt.date
    diagram_decisions: tuple[DiagramDecision, ...] = ()
    spec_decisions: tuple[SpecDecision, ...] = ()
    pl_model: str = ""

    def values(self) -> dict[DecisionKey, tuple]:
        """Comparable attribute values for every decision, keyed by identity."""
        out: dict[DecisionKey, tuple] = {}
        for d in self.diagram_decisions:
            out[d.key] = (tuple(sorted(d.selected)), tuple(sorted(d.unselected)))
        for d in self.spec_decisions:
            out[d.key] = (d.selected, d.order_number if d.selected else None)
        return out

    def selected_variants(self) -> set[str]:
        return {v for d in self.diagram_decisions for v in d.selected}

    def diagram_decision(self, variation_point: str, including_use_case: str) -> DiagramDecision | None:
        for d in self.diagram_decisions:
            if d.variation_point == variation_point and d.including_use_case == including_use_case:
                return d
        return None

    def spec_decision(self, key: DecisionKey) -> SpecDecision | None:
        for d in self.spec_decisions:
            if d.key == key:
                return d
        return None


def _str_list(obj, key, where) -> tuple[str, ...]:
    val = obj.get(key, [])
    if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
        raise SchemaError(f"{where}: {key!r} must be a list of strings")
    return tuple(val)


def decisions_from_dict(data: dict) -> DecisionModel:
    if not isinstance(data, dict):
        raise SchemaError("decision model must be a JSON object")
    for field_name in ("product_id", "created_on"):
        if not isinstance(data.get(field_name), str):
            raise SchemaError(f"decision model: {field_name!r} must be a string")
    try:
        created = dt.date.fromisoformat(data["created_on"])
    except ValueError as exc:
        raise SchemaError(f"created_on is not an ISO-8601 date: {data['created_on']!r}") from exc

    dds = []
    for i, d in enumerate(data.get("diagram_decisions", [])):
        where = f"diagram_decisions[{i}]"
        try:
            dds.append(DiagramDecision(d["variation_point"], d["including_use_case"],
                                       _str_list(d, "selected", where), _str_list(d, "unselected", where)))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"{where}: missing or malformed field {exc}") from exc

    sds = []
    for i, d in enumerate(data.get("spec_decisions", [])):
        where = f"spec_decisions[{i}]"
        try:
            element = d["element"]
            if element not in ELEMENTS:
                raise SchemaError(f"{where}: element must be one of {', '.join(ELEMENTS)}")
            step = d.get("step", "")
            if element != "optional-flow" and not step:
                raise SchemaError(f"{where}: {element} decisions need a 'step'")
            order = d.get("order_number")
            if order is not None and (isinstance(order, bool) or not isinstance(order, int)):
                raise SchemaError(f"{where}: order_number must be an integer")
            if not isinstance(d["selected"], bool):
                raise SchemaError(f"{where}: selected must be a boolean")
            sds.append(SpecDecision(d["use_case"], d["flow"], element, d["selected"], step, order))
        except KeyError as exc:
            raise SchemaError(f"{where}: missing field {exc}") from exc

    model = DecisionModel(data["product_id"], created, tuple(dds), tuple(sds), data.get("pl_model", ""))
    keys = [d.key for d in dds] + [d.key for d in sds]
    if len(set(keys)) != len(keys):
        raise SchemaError(f"{model.product_id}: duplicate decisions for the same element")
    return model


def decisions_to_dict(m: DecisionModel) -> dict:
    out: dict = {"product_id": m.product_id, "created_on": m.created_on.isoformat()}
    if m.pl_model:
        out["pl_model"] = m.pl_model
    out["diagram_decisions"] = [
        {"variation_point": d.variation_point, "including_use_case": d.including_use_case,
         "selected": list(d.selected), "unselected": list(d.unselected)}
        for d in m.diagram_decisions
    ]
    specs = []
    for d in m.spec_decisions:
        item = {"use_case": d.use_case, "flow": d.flow, "element": d.element}
        if d.step:
            item["step"] = d.step
        item["selected"] = d.selected
        if d.order_number is not None:
            item["order_number"] = d.order_number
        specs.append(item)
    out["spec_decisions"] = specs
    return out


def parse_decisions(text: str) -> DecisionModel:
    try:
        return decisions_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc


def load_decisions(path) -> DecisionModel:
    with open(path, encoding="utf-8") as fh:
        return parse_decisions(fh.read())


def dump_decisions(m: DecisionModel) -> str:
    return json.dumps(decisions_to_dict(m), indent=2) + "\n"


def _endpoint_selected(name: str, diagram: PLDiagram, m: DecisionModel) -> bool:
    if diagram.variation_point(name) is not None:
        return any(d.selected for d in m.diagram_decisions if d.variation_point == name)
    return name in m.selected_variants()


def validate_decisions(m: DecisionModel, diagram: PLDiagram, doc: UseCaseDocument | None = None) -> list[str]:
    """Cardinality, dependency and existence violations; empty when valid."""
    violations: list[str] = []
    selected_ucs = m.selected_variants()

    for d in m.diagram_decisions:
        where = f"{d.variation_point} (in {d.including_use_case})"
        vp = diagram.variation_point(d.variation_point)
        if vp is None:
            violations.append(f"{where}: unknown variation point")
            continue
        if d.including_use_case not in diagram.includers_of(vp.name):
            violations.append(f"{where}: {d.including_use_case!r} does not include this variation point")
        sel, unsel = set(d.selected), set(d.unselected)
        if sel & unsel:
            violations.append(f"{where}: {sorted(sel & unsel)} both selected and unselected")
        unknown = (sel | unsel) - set(vp.variants)
        if unknown:
            violations.append(f"{where}: unknown variants {sorted(unknown)}")
        missing = set(vp.variants) - sel - unsel
        if missing:
            violations.append(f"{where}: no decision for variants {sorted(missing)}")
        for rel in vp.relations:
            k = len(sel & set(rel.variants))
            if not rel.min <= k <= rel.max:
                violations.append(f"{where}: {k} selected in a [{rel.min}..{rel.max}] relation")
        if vp.mandatory and not sel:
            violations.append(f"{where}: mandatory variation point without a selection")

    decided = {(d.variation_point, d.including_use_case) for d in m.diagram_decisions}
    for vp in diagram.variation_points:
        if not vp.mandatory:
            continue
        for includer in diagram.includers_of(vp.name):
            active = not diagram.is_variant(includer) or includer in selected_ucs
            if active and (vp.name, includer) not in decided:
                violations.append(f"{vp.name} (in {includer}): mandatory variation point has no decision")

    for dep in diagram.dependencies:
        src = _endpoint_selected(dep.source, diagram, m)
        dst = _endpoint_selected(dep.target, diagram, m)
        if dep.kind == "require" and src and not dst:
            violations.append(f"{dep.source!r} requires {dep.target!r}")
        if dep.kind == "conflict" and src and dst:
            violations.append(f"{dep.source!r} conflicts with {dep.target!r}")

    if doc is not None:
        violations.extend(_validate_spec_decisions(m, doc))
    return violations


def _validate_spec_decisions(m: DecisionModel, doc: UseCaseDocument) -> list[str]:
    out: list[str] = []
    orders: dict[tuple[str, str], list[int]] = {}
    for d in m.spec_decisions:
        where = str(d.key)
        uc = doc.use_case(d.use_case)
        flow = uc.flow(d.flow) if uc else None
        if flow is None:
            out.append(f"{where}: no such use case flow")
            continue
        if d.element == "optional-flow":
            if not flow.optional:
                out.append(f"{where}: flow is not optional")
            continue
        step = flow.step(d.step)
        if step is None:
            out.append(f"{where}: no such step")
            continue
        if not d.selected and not step.optional:
            out.append(f"{where}: a mandatory step cannot be unselected")
        if d.element == "optional-step" and not step.optional:
            out.append(f"{where}: step is not optional")
        if d.element == "variant-order":
            if not step.is_variant_order:
                out.append(f"{where}: step has no variant order")
            elif d.selected:
                if d.order_number is None:
                    out.append(f"{where}: selected variant-order step needs an order_number")
                else:
                    orders.setdefault((d.use_case, d.flow), []).append(d.order_number)
    for (uc, fid), nums in orders.items():
        if len(set(nums)) != len(nums):
            out.append(f"{uc}/{fid}: duplicate variant order numbers {sorted(nums)}")
    return out


@dataclass(frozen=True)
class Matching:
    pairs: tuple[DecisionKey, ...]
    only_old: tuple[DecisionKey, ...]
    only_new: tuple[DecisionKey, ...]


def match_decisions(m_old: DecisionModel, m_new: DecisionModel) -> Matching:
    """Pair decisions made for the same variations (equal keys)."""
    if m_old.pl_model and m_new.pl_model and m_old.pl_model != m_new.pl_model:
        raise ModelMismatch(f"{m_old.product_id} uses {m_old.pl_model!r}, "
                            f"{m_new.product_id} uses {m_new.pl_model!r}")
    old, new = set(m_old.values()), set(m_new.values())
    return Matching(tuple(sorted(old & new)), tuple(sorted(old - new)), tuple(sorted(new - old)))


@dataclass(frozen=True)
class Update:
    key: DecisionKey
    old_value: tuple
    new_value: tuple
    update_kind: str


@dataclass(frozen=True)
class ChangeSet:
    added: frozenset = frozenset()
    deleted: frozenset = frozenset()
    updated: tuple[Update, ...] = ()
    unchanged: int = field(default=0, compare=False)

    def __bool__(self) -> bool:
        return bool(self.added or self.deleted or self.updated)

    def keys(self) -> set[DecisionKey]:
        return set(self.added) | set(self.deleted) | {u.key for u in self.updated}

    def update_for(self, key: DecisionKey) -> Update | None:
        for u in self.updated:
            if u.key == key:
                return u
        return None

    def use_cases(self) -> set[str]:
        """Use cases whose specification is directly touched by a change."""
        return {k.use_case for k in self.keys()}

    def to_dict(self) -> dict:
        return {
            "added": [k.to_dict() for k in sorted(self.added)],
            "deleted": [k.to_dict() for k in sorted(self.deleted)],
            "updated": [
                {"key": u.key.to_dict(), "old": _jsonable(u.old_value),
                 "new": _jsonable(u.new_value), "update_kind": u.update_kind}
                for u in self.updated
            ],
        }


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def _update_kind(key: DecisionKey, old: tuple, new: tuple) -> str:
    if key.kind == "vp":
        gained = set(new[0]) - set(old[0])
        lost = set(old[0]) - set(new[0])
        if gained and lost:
            return "both"
        if gained:
            return "select-unselected"
        if lost:
            return "unselect-selected"
        return "both"
    if old[0] != new[0]:
        return "select-unselected" if new[0] else "unselect-selected"
    return "order-change"


def calculate_changes(matching: Matching, m_old: DecisionModel, m_new: DecisionModel) -> ChangeSet:
    old_vals, new_vals = m_old.values(), m_new.values()
    updated = []
    same = 0
    for key in matching.pairs:
        if old_vals[key] == new_vals[key]:
            same += 1
            continue
        updated.append(Update(key, old_vals[key], new_vals[key],
                              _update_kind(key, old_vals[key], new_vals[key])))
    return ChangeSet(frozenset(matching.only_new), frozenset(matching.only_old), tuple(updated), same)


def diff_decisions(m_old: DecisionModel, m_new: DecisionModel) -> ChangeSet:
    return calculate_changes(match_decisions(m_old, m_new), m_old, m_new)
