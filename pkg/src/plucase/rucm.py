"""Restricted use case (RUCM) documents with product line extensions.

The `.rucm` format is line oriented::

    USE CASE Recognize Gesture
    PRECONDITION The system is powered.          (optional)
    1.1 Basic Flow (BF)
    1. The system REQUESTS move capacitance FROM the sensors.
    2. INCLUDE USE CASE Identify System Operating Status.
    3. The system VALIDATES THAT the operating status is valid.
    1.2 <OPTIONAL> Bounded Alternative Flow (BAF1)
    RFS 1-3
    1. IF voltage fluctuation is detected THEN
    2. ABORT.
    3. ENDIF

    <VARIANT> USE CASE Provide System User Data via Standard Mode
    1.1 Basic Flow (BF)
    V1. <OPTIONAL> The system SENDS calibration TO the tester.

Keywords are matched case-sensitively. ``RFS`` may name a reference flow
other than the basic flow (``RFS SAF1 1``). ``RESUME STEP n`` ends an
alternative flow by returning to step ``n`` of its reference flow.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import DanglingReference, RucmSyntaxError

STOP_WORDS = frozenset({"the", "a", "an"})


class StepKind(str, enum.Enum):
    INPUT = "Input"
    OUTPUT = "Output"
    CONDITION = "Condition"
    INTERNAL = "Internal"
    INCLUDE_USE_CASE = "IncludeUseCase"
    INCLUDE_VARIATION_POINT = "IncludeVariationPoint"
    ABORT = "Abort"
    EXIT = "Exit"


class FlowKind(str, enum.Enum):
    BASIC = "Basic"
    SPECIFIC = "SpecificAlt"
    BOUNDED = "BoundedAlt"
    GLOBAL = "GlobalAlt"


_FLOW_TITLES = {
    FlowKind.BASIC: "Basic Flow",
    FlowKind.SPECIFIC: "Specific Alternative Flow",
    FlowKind.BOUNDED: "Bounded Alternative Flow",
    FlowKind.GLOBAL: "Global Alternative Flow",
}
_TITLE_TO_KIND = {v: k for k, v in _FLOW_TITLES.items()}


@dataclass(frozen=True)
class Step:
    number: str
    kind: StepKind
    text: str
    optional: bool = False
    actor: str = ""
    entity: str = ""
    condition: str = ""
    target: str = ""
    # decision keys the configurator stamped on this step
    provenance: tuple = field(default=(), compare=False)

    @property
    def is_variant_order(self) -> bool:
        return self.number.startswith("V")


@dataclass(frozen=True)
class Flow:
    id: str
    kind: FlowKind
    steps: tuple[Step, ...] = ()
    optional: bool = False
    rfs: tuple[str, ...] = ()
    ref_flow: str = "BF"
    guard: str = ""
    postcondition: str = ""
    provenance: tuple = field(default=(), compare=False)

    def step(self, number: str) -> Step | None:
        for s in self.steps:
            if s.number == number:
                return s
        return None

    @property
    def returns(self) -> bool:
        """True when the flow resumes its reference flow instead of aborting."""
        if self.kind is FlowKind.BASIC:
            return False
        return not (self.steps and self.steps[-1].kind is StepKind.ABORT)


@dataclass(frozen=True)
class UseCase:
    name: str
    basic_flow: Flow
    alternative_flows: tuple[Flow, ...] = ()
    variant: bool = False
    precondition: str = ""

    @property
    def flows(self) -> tuple[Flow, ...]:
        return (self.basic_flow,) + self.alternative_flows

    def flow(self, flow_id: str) -> Flow | None:
        for f in self.flows:
            if f.id == flow_id:
                return f
        return None


@dataclass(frozen=True)
class UseCaseDocument:
    use_cases: tuple[UseCase, ...]
    source_path: str = field(default="", compare=False)

    def use_case(self, name: str) -> UseCase | None:
        for uc in self.use_cases:
            if uc.name == name:
                return uc
        return None

    def names(self) -> list[str]:
        return [uc.name for uc in self.use_cases]

    @property
    def is_product_line(self) -> bool:
        for uc in self.use_cases:
            if uc.variant:
                return True
            for f in uc.flows:
                if f.optional:
                    return True
                for s in f.steps:
                    if s.optional or s.is_variant_order or s.kind is StepKind.INCLUDE_VARIATION_POINT:
                        return True
        return False


def normalize_phrase(text: str) -> str:
    """Lowercase, drop articles and punctuation, collapse whitespace."""
    words = re.findall(r"[a-z0-9_]+", text.lower())
    return " ".join(w for w in words if w not in STOP_WORDS)


_INCLUDE_UC = re.compile(r"^INCLUDE USE CASE\s+(?P<target>.+)$")
_INCLUDE_VP = re.compile(r"^INCLUDE\s*<\s*VARIATION POINT\s*:\s*(?P<target>[^>]+?)\s*>$")
_ABORT = re.compile(r"^ABORT$")
_RESUME = re.compile(r"^RESUME STEP\s+(?P<target>V?\d+)$")
_VALIDATES = re.compile(r"^(?P<subject>.*?)\s*\bVALIDATES THAT\s+(?P<cond>.+)$")
_REQUESTS = re.compile(r"^(?P<subject>.*?)\s*\bREQUESTS\s+(?P<entity>.+?)\s+FROM\s+(?P<actor>.+)$")
_SENDS = re.compile(r"^(?P<subject>.*?)\s*\bSENDS\s+(?P<entity>.+?)\s+TO\s+(?P<actor>.+)$")


def _is_system(subject: str) -> bool:
    return subject.strip().lower() in ("the system", "system")


def classify_step(step_text: str) -> tuple[StepKind, dict]:
    """Return the step kind and its keyword payload. Internal is the fallback."""
    text = step_text.strip()
    if text.endswith("."):
        text = text[:-1].rstrip()
    m = _INCLUDE_UC.match(text)
    if m:
        return StepKind.INCLUDE_USE_CASE, {"target": m["target"].strip()}
    m = _INCLUDE_VP.match(text)
    if m:
        return StepKind.INCLUDE_VARIATION_POINT, {"target": m["target"].strip()}
    if _ABORT.match(text):
        return StepKind.ABORT, {}
    m = _RESUME.match(text)
    if m:
        return StepKind.EXIT, {"target": m["target"]}
    m = _VALIDATES.match(text)
    if m:
        return StepKind.CONDITION, {"condition": m["cond"].strip()}
    m = _REQUESTS.match(text)
    if m:
        return StepKind.INPUT, {"actor": m["actor"].strip(), "entity": normalize_phrase(m["entity"])}
    m = _SENDS.match(text)
    if m:
        entity = normalize_phrase(m["entity"])
        if _is_system(m["subject"]):
            return StepKind.OUTPUT, {"actor": m["actor"].strip(), "entity": entity}
        return StepKind.INPUT, {"actor": m["subject"].strip(), "entity": entity}
    return StepKind.INTERNAL, {}


def make_step(number: str, text: str, optional: bool = False, provenance: tuple = ()) -> Step:
    kind, payload = classify_step(text)
    return Step(number=number, kind=kind, text=text.strip(), optional=optional,
                provenance=provenance, **payload)


_USE_CASE = re.compile(r"^(?P<variant><VARIANT>\s*)?USE CASE\s+(?P<name>.+?)\s*$")
_FLOW_HEADER = re.compile(
    r"^\d+\.\d+\s+(?P<opt><OPTIONAL>\s*)?"
    r"(?P<title>Basic Flow|Specific Alternative Flow|Bounded Alternative Flow|Global Alternative Flow)"
    r"\s*\(\s*(?P<id>[A-Za-z][A-Za-z0-9_]*)\s*\)\s*$"
)
_STEP = re.compile(r"^(?P<num>V?\d+)\.\s*(?P<opt><OPTIONAL>\s*)?(?P<text>.*?)\s*$")
_IF = re.compile(r"^IF\s+(?P<cond>.+?)\s+THEN$")
_RFS = re.compile(r"^RFS(?:\s+(?P<flow>[A-Za-z][A-Za-z0-9_]*(?=\s|$)))?\s*(?P<refs>.*)$")
_PRE = re.compile(r"^PRECONDITION\s+(?P<text>.+)$")
_POST = re.compile(r"^POSTCONDITION\s+(?P<text>.+)$")
_HEADERISH = re.compile(r"^\d+\.\d+\s")


def _expand_refs(refs: str, lineno: int) -> tuple[str, ...]:
    out: list[str] = []
    for part in re.split(r"\s*,\s*", refs.strip()):
        if not part:
            continue
        m = re.fullmatch(r"(V?)(\d+)\s*-\s*(V?)(\d+)", part)
        if m:
            lo, hi = int(m[2]), int(m[4])
            if hi < lo:
                raise RucmSyntaxError(f"descending RFS range {part!r}", lineno)
            out.extend(f"{m[1]}{i}" for i in range(lo, hi + 1))
        elif re.fullmatch(r"V?\d+", part):
            out.append(part)
        else:
            raise RucmSyntaxError(f"bad RFS reference {part!r}", lineno)
    return tuple(out)


def _compress_refs(refs: Iterable[str]) -> str:
    refs = list(refs)
    parts: list[str] = []
    i = 0
    while i < len(refs):
        m = re.fullmatch(r"(V?)(\d+)", refs[i])
        j = i
        if m:
            while j + 1 < len(refs):
                n = re.fullmatch(r"(V?)(\d+)", refs[j + 1])
                if n and n[1] == m[1] and int(n[2]) == int(m[2]) + (j + 1 - i):
                    j += 1
                else:
                    break
        parts.append(refs[i] if j == i else f"{refs[i]}-{refs[j]}")
        i = j + 1
    return ", ".join(parts)


class _FlowBuilder:
    def __init__(self, flow_id, kind, optional, lineno):
        self.id = flow_id
        self.kind = kind
        self.optional = optional
        self.lineno = lineno
        self.rfs: tuple[str, ...] = ()
        self.ref_flow = "BF"
        self.has_rfs = False
        self.guard = ""
        self.closed_guard = False
        self.post = ""
        self.steps: list[Step] = []

    def build(self) -> Flow:
        return Flow(id=self.id, kind=self.kind, steps=tuple(self.steps), optional=self.optional,
                    rfs=self.rfs, ref_flow=self.ref_flow, guard=self.guard, postcondition=self.post)


def parse_specification(text: str, source_path: str = "", resolve: bool = True) -> UseCaseDocument:
    """Parse `.rucm` text into a resolved document.

    ``resolve`` checks RFS references, and for product specific documents
    also INCLUDE USE CASE targets and the absence of variation point
    includes.
    """
    use_cases: list[UseCase] = []
    cur: dict | None = None
    flow: _FlowBuilder | None = None

    def close_flow():
        nonlocal flow
        if flow is not None:
            assert cur is not None
            if flow.kind is FlowKind.BASIC:
                if cur["basic"] is not None:
                    raise RucmSyntaxError(f"use case {cur['name']!r} has two basic flows", flow.lineno)
                cur["basic"] = flow.build()
            else:
                cur["alts"].append(flow.build())
            flow = None

    def close_use_case():
        nonlocal cur
        close_flow()
        if cur is not None:
            if cur["basic"] is None:
                raise RucmSyntaxError(f"use case {cur['name']!r} has no basic flow", cur["lineno"])
            use_cases.append(UseCase(name=cur["name"], basic_flow=cur["basic"],
                                     alternative_flows=tuple(cur["alts"]),
                                     variant=cur["variant"], precondition=cur["pre"]))
            cur = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _USE_CASE.match(line)
        if m:
            close_use_case()
            cur = {"name": m["name"], "variant": bool(m["variant"]), "pre": "",
                   "basic": None, "alts": [], "lineno": lineno}
            continue
        if cur is None:
            raise RucmSyntaxError(f"expected 'USE CASE', got {line!r}", lineno)
        m = _PRE.match(line)
        if m and flow is None:
            cur["pre"] = m["text"].strip()
            continue
        m = _FLOW_HEADER.match(line)
        if m:
            close_flow()
            kind = _TITLE_TO_KIND[m["title"]]
            if kind is FlowKind.BASIC and m["opt"]:
                raise RucmSyntaxError("a basic flow cannot be optional", lineno)
            flow = _FlowBuilder(m["id"], kind, bool(m["opt"]), lineno)
            continue
        if _HEADERISH.match(line):
            raise RucmSyntaxError(f"malformed flow header {line!r}", lineno)
        if flow is None:
            raise RucmSyntaxError(f"expected a flow header, got {line!r}", lineno)
        m = _RFS.match(line)
        if m and line.startswith("RFS"):
            if flow.kind is FlowKind.BASIC:
                raise RucmSyntaxError("RFS in a basic flow", lineno)
            flow.has_rfs = True
            if m["flow"] and not re.fullmatch(r"V?\d+", m["flow"]):
                flow.ref_flow = m["flow"]
                flow.rfs = _expand_refs(m["refs"], lineno)
            else:
                flow.rfs = _expand_refs(line[3:], lineno)
            continue
        m = _POST.match(line)
        if m:
            flow.post = m["text"].strip()
            continue
        m = _STEP.match(line)
        if not m:
            raise RucmSyntaxError(f"unrecognized line {line!r}", lineno)
        body = m["text"]
        if not body:
            raise RucmSyntaxError("empty step", lineno)
        g = _IF.match(body.rstrip("."))
        if g:
            if flow.steps or flow.guard:
                raise RucmSyntaxError("IF .. THEN must open the flow", lineno)
            flow.guard = g["cond"].strip()
            continue
        if body.rstrip(".") == "ENDIF":
            if not flow.guard:
                raise RucmSyntaxError("ENDIF without IF", lineno)
            flow.closed_guard = True
            continue
        if flow.closed_guard:
            raise RucmSyntaxError("step after ENDIF", lineno)
        flow.steps.append(make_step(m["num"], body, optional=bool(m["opt"])))

    close_use_case()
    if not use_cases:
        raise RucmSyntaxError("document contains no use case")
    doc = UseCaseDocument(tuple(use_cases), source_path=source_path)
    _check_structure(doc)
    if resolve:
        resolve_references(doc)
    return doc


def _check_structure(doc: UseCaseDocument) -> None:
    seen: set[str] = set()
    for uc in doc.use_cases:
        if uc.name in seen:
            raise RucmSyntaxError(f"duplicate use case {uc.name!r}")
        seen.add(uc.name)
        ids: set[str] = set()
        for f in uc.flows:
            if f.id in ids:
                raise RucmSyntaxError(f"duplicate flow id {f.id!r} in {uc.name!r}")
            ids.add(f.id)
            if f.kind is FlowKind.SPECIFIC and len(f.rfs) != 1:
                raise RucmSyntaxError(f"{uc.name}/{f.id}: specific flow needs exactly one RFS step")
            if f.kind is FlowKind.BOUNDED and not f.rfs:
                raise RucmSyntaxError(f"{uc.name}/{f.id}: bounded flow needs RFS steps")
            if f.kind is FlowKind.GLOBAL and f.rfs:
                raise RucmSyntaxError(f"{uc.name}/{f.id}: global flow takes no RFS steps")
            if not f.steps and f.kind is not FlowKind.BASIC:
                raise RucmSyntaxError(f"{uc.name}/{f.id}: empty alternative flow")


def resolve_references(doc: UseCaseDocument) -> None:
    """Raise DanglingReference for unresolved RFS, RESUME or (PS) include targets."""
    product_specific = not doc.is_product_line
    names = set(doc.names())
    for uc in doc.use_cases:
        for f in uc.flows:
            if f.kind is FlowKind.BASIC:
                continue
            ref = uc.flow(f.ref_flow)
            if ref is None:
                raise DanglingReference(f"{uc.name}/{f.id}: unknown reference flow {f.ref_flow!r}")
            for r in f.rfs:
                if ref.step(r) is None:
                    raise DanglingReference(f"{uc.name}/{f.id}: RFS {r} not in {f.ref_flow}")
            for s in f.steps:
                if s.kind is StepKind.EXIT and ref.step(s.target) is None:
                    raise DanglingReference(f"{uc.name}/{f.id}: RESUME STEP {s.target} not in {f.ref_flow}")
        if product_specific:
            for f in uc.flows:
                for s in f.steps:
                    if s.kind is StepKind.INCLUDE_USE_CASE and s.target not in names:
                        raise DanglingReference(f"{uc.name}/{f.id}: include of unknown use case {s.target!r}")


def validate_document(doc: UseCaseDocument) -> list[str]:
    """Non-fatal findings: SAF anchors that are not conditions, VP includes in global flows."""
    warnings: list[str] = []
    for uc in doc.use_cases:
        for f in uc.alternative_flows:
            ref = uc.flow(f.ref_flow)
            if f.kind is FlowKind.SPECIFIC and ref is not None:
                anchor = ref.step(f.rfs[0])
                if anchor is not None and anchor.kind is not StepKind.CONDITION and not f.guard:
                    warnings.append(f"{uc.name}/{f.id}: RFS step {f.rfs[0]} is not a condition step")
            if f.kind is FlowKind.GLOBAL:
                for s in f.steps:
                    if s.kind is StepKind.INCLUDE_VARIATION_POINT:
                        warnings.append(f"{uc.name}/{f.id}: global flow includes variation point {s.target!r}")
    return warnings


def _step_line(step: Step) -> str:
    opt = "<OPTIONAL> " if step.optional else ""
    return f"{step.number}. {opt}{step.text}"


def serialize_specification(doc: UseCaseDocument) -> str:
    """Canonical `.rucm` text; parsing it gives back an equal document."""
    blocks: list[str] = []
    for uc in doc.use_cases:
        lines = [("<VARIANT> " if uc.variant else "") + f"USE CASE {uc.name}"]
        if uc.precondition:
            lines.append(f"PRECONDITION {uc.precondition}")
        for i, f in enumerate(uc.flows, start=1):
            opt = "<OPTIONAL> " if f.optional else ""
            lines.append(f"1.{i} {opt}{_FLOW_TITLES[f.kind]} ({f.id})")
            if f.kind in (FlowKind.SPECIFIC, FlowKind.BOUNDED):
                prefix = f"{f.ref_flow} " if f.ref_flow != "BF" else ""
                lines.append(f"RFS {prefix}{_compress_refs(f.rfs)}")
            elif f.kind is FlowKind.GLOBAL and f.ref_flow != "BF":
                lines.append(f"RFS {f.ref_flow}")
            if f.guard:
                lines.append(f"{_guard_number(f)}. IF {f.guard} THEN")
            lines.extend(_step_line(s) for s in f.steps)
            if f.guard:
                lines.append(f"{_endif_number(f)}. ENDIF")
            if f.postcondition:
                lines.append(f"POSTCONDITION {f.postcondition}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _numeric(number: str) -> int | None:
    m = re.fullmatch(r"V?(\d+)", number)
    return int(m[1]) if m else None


def _guard_number(f: Flow) -> int:
    if f.steps:
        n = _numeric(f.steps[0].number)
        if n is not None and n > 1:
            return n - 1
    return 1


def _endif_number(f: Flow) -> int:
    if f.steps:
        n = _numeric(f.steps[-1].number)
        if n is not None:
            return n + 1
    return _guard_number(f) + 1


def renumber_flow(flow: Flow) -> tuple[Flow, dict[str, str]]:
    """Number steps 1..n (after the guard line, if any); returns the old->new map."""
    start = 2 if flow.guard else 1
    mapping: dict[str, str] = {}
    steps = []
    for i, s in enumerate(flow.steps):
        new = str(start + i)
        mapping[s.number] = new
        steps.append(replace(s, number=new))
    return replace(flow, steps=tuple(steps)), mapping


def load_specification(path) -> UseCaseDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_specification(fh.read(), source_path=str(path))
