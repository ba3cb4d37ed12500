"""Product specific (PS) diagrams and specifications from PL models and decisions."""

from __future__ import annotations

import re
import warnings
from dataclasses import replace

from .decisions import DecisionModel, flow_key, step_key, validate_decisions, vp_key
from .diagram import Include, PLDiagram
from .errors import InvalidDecisions, MissingPrecondition
from .rucm import Flow, FlowKind, Step, StepKind, UseCase, UseCaseDocument, make_step, resolve_references


def _check(m: DecisionModel, diagram: PLDiagram, doc: UseCaseDocument | None = None) -> None:
    violations = validate_decisions(m, diagram, doc)
    if violations:
        raise InvalidDecisions(violations)


def included_use_cases(diagram: PLDiagram, m: DecisionModel) -> list[str]:
    """Essential use cases plus selected variants, in diagram order."""
    chosen = m.selected_variants()
    return [name for name, variant in diagram.use_cases if not variant or name in chosen]


def generate_ps_diagram(diagram: PLDiagram, m: DecisionModel) -> PLDiagram:
    _check(m, diagram)
    kept = included_use_cases(diagram, m)
    present = set(kept)
    includes: list[Include] = []
    for inc in diagram.includes:
        if inc.source not in present:
            continue
        if not inc.to_variation_point:
            if inc.target in present:
                includes.append(inc)
            continue
        d = m.diagram_decision(inc.target, inc.source)
        if d is None:
            continue
        vp = diagram.variation_point(inc.target)
        for v in vp.variants:
            if v in d.selected:
                includes.append(Include(inc.source, v, False))
    return PLDiagram(tuple((n, False) for n in kept), (), tuple(includes), ())


def _precondition_step(tag: str, variant: str, doc: UseCaseDocument, prov: tuple) -> tuple[str, Step]:
    uc = doc.use_case(variant)
    if uc is None or not uc.precondition:
        warnings.warn(f"variant use case {variant!r} has no precondition; using a placeholder",
                      MissingPrecondition, stacklevel=3)
    return tag, make_step(tag, f"The system VALIDATES THAT 'Precondition of {variant}'.", provenance=prov)


def _include_step(tag: str, variant: str, prov: tuple) -> tuple[str, Step]:
    return tag, make_step(tag, f"INCLUDE USE CASE {variant}.", provenance=prov)


def _next_saf_number(uc: UseCase) -> int:
    nums = [int(m[1]) for f in uc.alternative_flows if (m := re.fullmatch(r"SAF(\d+)", f.id))]
    return max(nums, default=0) + 1


def _configure_use_case(uc: UseCase, m: DecisionModel, diagram: PLDiagram,
                        doc: UseCaseDocument) -> UseCase:
    # Steps carry temporary tags until renumbering: original step numbers,
    # or "~k" for generated steps.
    counter = iter(range(1, 1_000_000))

    def fresh() -> str:
        return f"~{next(counter)}"

    saf_no = _next_saf_number(uc)
    flows: list[tuple[Flow, list[tuple[str, Step]]]] = []
    generated: list[tuple[Flow, list[tuple[str, Step]]]] = []

    for f in uc.flows:
        fprov: tuple = ()
        if f.optional:
            fk = flow_key(uc.name, f.id)
            d = m.spec_decision(fk)
            if d is None or not d.selected:
                continue
            fprov = (fk,)
        tagged: list[tuple[str, Step]] = []
        group: list[tuple[int, int, Step]] = []
        group_at: int | None = None
        for pos, s in enumerate(f.steps):
            prov = fprov
            if s.optional or s.is_variant_order:
                sk = step_key(uc.name, f.id, s.number)
                d = m.spec_decision(sk)
                if s.optional and (d is None or not d.selected):
                    continue
                if d is not None:
                    prov = prov + (sk,)
                if s.is_variant_order:
                    if group_at is None:
                        group_at = len(tagged)
                    order = d.order_number if d is not None and d.order_number is not None else pos + 1
                    group.append((order, pos, replace(s, optional=False, provenance=prov)))
                    continue
            if s.kind is StepKind.INCLUDE_VARIATION_POINT:
                tagged.extend(_expand_vp(uc, f, s, m, diagram, doc, fprov, fresh, generated,
                                         saf_no + len(generated)))
                continue
            tagged.append((s.number, replace(s, optional=False, provenance=prov)))
        if group:
            group.sort(key=lambda g: (g[0], g[1]))
            tagged[group_at:group_at] = [(s.number, s) for _, _, s in group]
        flows.append((replace(f, optional=False, provenance=fprov), tagged))

    all_flows = flows + generated
    kept_ids = {f.id for f, _ in all_flows}
    numbering: dict[str, dict[str, str]] = {}
    for f, tagged in all_flows:
        start = 2 if f.guard else 1
        numbering[f.id] = {tag: str(start + i) for i, (tag, _) in enumerate(tagged)}

    out_flows: list[Flow] = []
    for f, tagged in all_flows:
        if f.kind is not FlowKind.BASIC and f.ref_flow not in kept_ids:
            continue
        ref_map = numbering.get(f.ref_flow, {})
        rfs = tuple(ref_map[r] for r in f.rfs if r in ref_map)
        if f.kind in (FlowKind.SPECIFIC, FlowKind.BOUNDED) and not rfs:
            continue
        steps = []
        for tag, s in tagged:
            s = replace(s, number=numbering[f.id][tag])
            if s.kind is StepKind.EXIT:
                target = _surviving_target(f, s.target, ref_map, uc)
                if target is None:
                    continue
                s = replace(s, target=target, text=f"RESUME STEP {target}.")
            steps.append(s)
        if not steps and f.kind is not FlowKind.BASIC:
            continue
        out_flows.append(replace(f, steps=tuple(steps), rfs=rfs))

    return UseCase(uc.name, out_flows[0], tuple(out_flows[1:]), variant=False,
                   precondition=uc.precondition)


def _surviving_target(f: Flow, target: str, ref_map: dict[str, str], uc: UseCase) -> str | None:
    if target in ref_map:
        return ref_map[target]
    ref = uc.flow(f.ref_flow)
    if ref is None:
        return None
    numbers = [s.number for s in ref.steps]
    if target in numbers:
        for later in numbers[numbers.index(target) + 1:]:
            if later in ref_map:
                return ref_map[later]
    return None


def _expand_vp(uc, f, s, m, diagram, doc, fprov, fresh, generated, saf_no):
    key = vp_key(s.target, uc.name)
    d = m.diagram_decision(s.target, uc.name)
    vp = diagram.variation_point(s.target)
    if d is None or vp is None:
        return []
    chosen = [v for v in vp.variants if v in d.selected]
    prov = fprov + (key,)
    if not chosen:
        return []
    if len(chosen) == 1:
        return [(s.number, make_step(s.number, f"INCLUDE USE CASE {chosen[0]}.", provenance=prov))]

    # Validation chain: check v1 inline, then one specific flow per further variant.
    cond = _precondition_step(s.number, chosen[0], doc, prov)
    inc = _include_step(fresh(), chosen[0], prov)
    anchor_flow, anchor_tag = f.id, cond[0]
    rest = chosen[1:]
    for j, v in enumerate(rest):
        sid = f"SAF{saf_no + j}"
        body: list[tuple[str, Step]] = []
        if j < len(rest) - 1:
            body.append(_precondition_step(fresh(), v, doc, prov))
        body.append(_include_step(fresh(), v, prov))
        body.append((fresh(), make_step("0", "ABORT.", provenance=prov)))
        flow = Flow(id=sid, kind=FlowKind.SPECIFIC, rfs=(anchor_tag,), ref_flow=anchor_flow, provenance=prov)
        generated.append((flow, body))
        anchor_flow, anchor_tag = sid, body[0][0]
    return [cond, inc]


def generate_ps_specification(doc: UseCaseDocument, m: DecisionModel, diagram: PLDiagram) -> UseCaseDocument:
    """Resolve all variability of ``doc`` according to ``m``.

    Emits MissingPrecondition warnings for multi-variant selections whose
    variants lack a precondition.
    """
    _check(m, diagram, doc)
    keep = set(included_use_cases(diagram, m))
    ucs = []
    for uc in doc.use_cases:
        if uc.variant and uc.name not in keep:
            continue
        if diagram.is_variant(uc.name) and uc.name not in keep:
            continue
        ucs.append(_configure_use_case(uc, m, diagram, doc))
    ps = UseCaseDocument(tuple(ucs), source_path="")
    resolve_references(ps)
    return ps
