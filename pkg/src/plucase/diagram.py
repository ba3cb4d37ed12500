"""Product line use case diagram: variants, variation points, dependencies.

`diagram.json` (schema_version 1)::

    {
      "schema_version": 1,
      "use_cases": [{"name": "Provide System User Data", "variant": false}, ...],
      "variation_points": [
        {"name": "Method of Providing Data", "mandatory": true,
         "relations": [{"variants": ["... via Standard Mode", "... via IEE QC Mode"],
                        "min": 2, "max": 2}]}
      ],
      "includes": [{"from": "Provide System User Data", "to": "Method of Providing Data"}],
      "dependencies": [{"kind": "require", "from": "Storing Error Status",
                        "to": "Clearing Error Status"}]
    }

An include target is resolved against variation points first, then use
cases. Dependency endpoints may be variation points ("some variant of it
is selected") or variant use cases ("that variant is selected").
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import SchemaError, UnknownReference
from .rucm import StepKind, UseCaseDocument

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class VariabilityRelation:
    variants: tuple[str, ...]
    min: int
    max: int

    @property
    def n(self) -> int:
        return len(self.variants)

    @property
    def mandatory(self) -> bool:
        return relation_is_mandatory(self.min, self.max, self.n)

    @property
    def optional(self) -> bool:
        return not self.mandatory


def relation_is_mandatory(lo: int, hi: int, n: int) -> bool:
    """[min..max] over n variants is mandatory iff min = max = n."""
    return lo == hi == n


@dataclass(frozen=True)
class VariationPoint:
    name: str
    mandatory: bool = False
    relations: tuple[VariabilityRelation, ...] = ()

    @property
    def variants(self) -> tuple[str, ...]:
        out: list[str] = []
        for r in self.relations:
            out.extend(v for v in r.variants if v not in out)
        return tuple(out)


@dataclass(frozen=True)
class Include:
    source: str
    target: str
    to_variation_point: bool


@dataclass(frozen=True)
class Dependency:
    kind: str
    source: str
    target: str


@dataclass(frozen=True)
class PLDiagram:
    use_cases: tuple[tuple[str, bool], ...]
    variation_points: tuple[VariationPoint, ...] = ()
    includes: tuple[Include, ...] = ()
    dependencies: tuple[Dependency, ...] = ()
    source_path: str = field(default="", compare=False)

    def variation_point(self, name: str) -> VariationPoint | None:
        for vp in self.variation_points:
            if vp.name == name:
                return vp
        return None

    def is_variant(self, name: str) -> bool | None:
        for uc, variant in self.use_cases:
            if uc == name:
                return variant
        return None

    def use_case_names(self) -> list[str]:
        return [uc for uc, _ in self.use_cases]

    def includers_of(self, vp_name: str) -> list[str]:
        return [i.source for i in self.includes if i.to_variation_point and i.target == vp_name]


def _require(obj, key, typ, where):
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    val = obj[key]
    if typ is int and isinstance(val, bool) or not isinstance(val, typ):
        raise SchemaError(f"{where}: field {key!r} must be {typ.__name__}")
    return val


def diagram_from_dict(data: dict, source_path: str = "") -> PLDiagram:
    if not isinstance(data, dict):
        raise SchemaError("diagram must be a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported diagram schema_version {version!r}")
    use_cases = []
    for i, uc in enumerate(_require(data, "use_cases", list, "diagram")):
        where = f"use_cases[{i}]"
        if not isinstance(uc, dict):
            raise SchemaError(f"{where} must be an object")
        use_cases.append((_require(uc, "name", str, where), bool(uc.get("variant", False))))
    names = [n for n, _ in use_cases]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate use case names in diagram")

    vps = []
    for i, vp in enumerate(data.get("variation_points", [])):
        where = f"variation_points[{i}]"
        rels = []
        for j, rel in enumerate(_require(vp, "relations", list, where)):
            rwhere = f"{where}.relations[{j}]"
            variants = tuple(_require(rel, "variants", list, rwhere))
            lo = _require(rel, "min", int, rwhere)
            hi = _require(rel, "max", int, rwhere)
            if lo < 0 or hi < lo or hi > len(variants):
                raise SchemaError(f"{rwhere}: need 0 <= min <= max <= {len(variants)}, got [{lo}..{hi}]")
            rels.append(VariabilityRelation(variants, lo, hi))
        mandatory = bool(vp.get("mandatory", False))
        if mandatory and not rels:
            raise SchemaError(f"{where}: a mandatory variation point needs a relation")
        vps.append(VariationPoint(_require(vp, "name", str, where), mandatory, tuple(rels)))
    vp_names = {vp.name for vp in vps}

    includes = []
    for i, inc in enumerate(data.get("includes", [])):
        where = f"includes[{i}]"
        src = _require(inc, "from", str, where)
        dst = _require(inc, "to", str, where)
        if src not in names:
            raise UnknownReference(f"{where}: unknown use case {src!r}")
        if dst in vp_names:
            includes.append(Include(src, dst, True))
        elif dst in names:
            includes.append(Include(src, dst, False))
        else:
            raise UnknownReference(f"{where}: unknown include target {dst!r}")

    for vp in vps:
        for v in vp.variants:
            if v not in names:
                raise UnknownReference(f"variation point {vp.name!r}: unknown variant {v!r}")
        if not any(inc.target == vp.name and inc.to_variation_point for inc in includes):
            raise UnknownReference(f"variation point {vp.name!r} is not included by any use case")

    deps = []
    for i, dep in enumerate(data.get("dependencies", [])):
        where = f"dependencies[{i}]"
        kind = _require(dep, "kind", str, where)
        if kind not in ("require", "conflict"):
            raise SchemaError(f"{where}: kind must be 'require' or 'conflict'")
        src = _require(dep, "from", str, where)
        dst = _require(dep, "to", str, where)
        for end in (src, dst):
            if end not in vp_names and end not in names:
                raise UnknownReference(f"{where}: unknown endpoint {end!r}")
        deps.append(Dependency(kind, src, dst))

    return PLDiagram(tuple(use_cases), tuple(vps), tuple(includes), tuple(deps), source_path)


def diagram_to_dict(d: PLDiagram) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "use_cases": [{"name": n, "variant": v} for n, v in d.use_cases],
        "variation_points": [
            {"name": vp.name, "mandatory": vp.mandatory,
             "relations": [{"variants": list(r.variants), "min": r.min, "max": r.max} for r in vp.relations]}
            for vp in d.variation_points
        ],
        "includes": [{"from": i.source, "to": i.target} for i in d.includes],
        "dependencies": [{"kind": x.kind, "from": x.source, "to": x.target} for x in d.dependencies],
    }


def parse_diagram(text: str, source_path: str = "") -> PLDiagram:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return diagram_from_dict(data, source_path)


def load_diagram(path) -> PLDiagram:
    with open(path, encoding="utf-8") as fh:
        return parse_diagram(fh.read(), str(path))


def dump_diagram(d: PLDiagram) -> str:
    return json.dumps(diagram_to_dict(d), indent=2) + "\n"


def cross_check(diagram: PLDiagram, doc: UseCaseDocument) -> list[str]:
    """Consistency findings between a PL diagram and PL specifications."""
    findings: list[str] = []
    spec_names = set(doc.names())
    vp_names = {vp.name for vp in diagram.variation_points}
    for uc in doc.use_cases:
        for f in uc.flows:
            for s in f.steps:
                if s.kind is StepKind.INCLUDE_VARIATION_POINT:
                    if s.target not in vp_names:
                        findings.append(f"{uc.name}/{f.id}: variation point {s.target!r} is not in the diagram")
                    elif not any(i.source == uc.name and i.target == s.target for i in diagram.includes):
                        findings.append(f"{uc.name}: diagram lacks include of variation point {s.target!r}")
                if s.kind is StepKind.INCLUDE_USE_CASE and s.target not in spec_names:
                    findings.append(f"{uc.name}/{f.id}: included use case {s.target!r} has no specification")
        flag = diagram.is_variant(uc.name)
        if uc.variant and flag is not True:
            findings.append(f"variant use case {uc.name!r} is not a variant in the diagram")
        if flag is True and not uc.variant:
            findings.append(f"use case {uc.name!r} is a variant in the diagram but not in its specification")
    for name, variant in diagram.use_cases:
        if variant and name not in spec_names:
            findings.append(f"variant use case {name!r} has no specification")
    return findings
