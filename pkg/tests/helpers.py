"""Random model generators and independent oracles shared by the tests."""

from __future__ import annotations

import datetime as dt
import random
from contextlib import contextmanager

from plucase.decisions import decisions_from_dict
from plucase.diagram import diagram_from_dict
from plucase.rucm import normalize_phrase, parse_specification
from plucase.scenarios import NodeKind, build_graphs

# criterion number -> (title, passed, detail), printed at the end of the run
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@contextmanager
def criterion(number: int, title: str):
    """Record and print one pass/fail line for an acceptance criterion."""
    info = {"detail": ""}
    try:
        yield info
    except BaseException:
        ACCEPTANCE[number] = (title, False, info["detail"])
        print(f"criterion {number:2d} FAIL  {title}  {info['detail']}")
        raise
    ACCEPTANCE[number] = (title, True, info["detail"])
    print(f"criterion {number:2d} PASS  {title}  {info['detail']}")


NOUNS = ["speed", "torque", "door", "sensor", "timer", "battery", "signal", "relay"]
UC_NAME = "Operate Device"


def step_text(rng: random.Random, kind: str) -> str:
    n = rng.choice(NOUNS)
    if kind == "internal":
        return f"The system updates the {n} counter."
    if kind == "input":
        return f"The operator SENDS the {n} request TO the system."
    if kind == "output":
        return f"The system SENDS the {n} status TO the operator."
    return f"The system VALIDATES THAT the {n} {rng.choice(['request', 'level'])} is valid."


def _alt_body(rng, numbers, ending):
    body = [step_text(rng, rng.choice(["internal", "output", "input"])) for _ in range(rng.randint(0, 2))]
    if ending == "abort":
        body.append("ABORT.")
    elif ending == "resume":
        body.append(f"RESUME STEP {rng.choice(numbers)}.")
    elif not body:
        body.append(step_text(rng, "internal"))
    return body


def _flow_lines(header, rfs, guard, body):
    lines = [header]
    if rfs:
        lines.append(f"RFS {rfs}")
    k = 1
    if guard:
        lines.append(f"1. IF the {guard} flag is set THEN")
        k = 2
    for i, text in enumerate(body):
        lines.append(f"{k + i}. {text}")
    if guard:
        lines.append(f"{k + len(body)}. ENDIF")
    return lines


def random_ps_text(rng: random.Random) -> str:
    """A single product-specific use case with specific, bounded and global flows."""
    n = rng.randint(3, 7)
    kinds = [rng.choice(["internal", "input", "output", "condition", "condition"]) for _ in range(n)]
    numbers = [str(i) for i in range(1, n + 1)]
    lines = [f"USE CASE {UC_NAME}", "1.1 Basic Flow (BF)"]
    lines += [f"{i}. {step_text(rng, k)}" for i, k in zip(numbers, kinds)]
    section, saf = 2, 1
    for num, k in zip(numbers, kinds):
        if k != "condition":
            continue
        for extra in range(2):
            if rng.random() >= (0.6 if extra == 0 else 0.2):
                break
            guard = rng.choice(NOUNS) if extra else ""
            ending = rng.choice(["abort", "resume", "return"])
            lines += _flow_lines(f"1.{section} Specific Alternative Flow (SAF{saf})", num, guard,
                                 _alt_body(rng, numbers, ending))
            section += 1
            saf += 1
    if rng.random() < 0.3:
        a = rng.randint(1, n)
        b = rng.randint(a, n)
        lines += _flow_lines(f"1.{section} Bounded Alternative Flow (BAF1)", f"{a}-{b}" if b > a else str(a),
                             rng.choice(NOUNS), _alt_body(rng, numbers, rng.choice(["abort", "return"])))
        section += 1
    if rng.random() < 0.15:
        lines += _flow_lines(f"1.{section} Global Alternative Flow (GAF1)", "", rng.choice(NOUNS),
                             _alt_body(rng, numbers, "abort"))
    return "\n".join(lines) + "\n"


def random_ps_case(rng: random.Random, max_conditions=4, max_returning=2):
    """Resample until the graph has at most the given condition nodes and returning flows."""
    while True:
        doc = parse_specification(random_ps_text(rng))
        uc = doc.use_cases[0]
        if sum(f.returns for f in uc.alternative_flows) > max_returning:
            continue
        graphs = build_graphs(doc)
        conds = graphs[uc.name].count(NodeKind.CONDITION)
        if 1 <= conds <= max_conditions:
            return doc, graphs


# ---------------------------------------------------------------- path oracle

def brute_force_paths(uc, g):
    """Every start-to-termination path; an alternative flow counts as entered on a
    move into its first step and may be entered once."""
    first = {f"{uc.name}|{f.id}|{f.steps[0].number}": f.id for f in uc.alternative_flows if f.steps}
    out = []

    def dfs(nid, path, entered):
        node = g.nodes[nid]
        path = path + [nid]
        assert len(path) < 400, "runaway path"
        if node.kind is NodeKind.ABORT or (node.kind is NodeKind.EXIT and node.next is None):
            out.append((path, entered))
            return
        succs = [node.true, node.false] if node.kind is NodeKind.CONDITION else [node.next]
        for s in succs:
            if g.nodes[s].implicit:
                continue
            f = first.get(s)
            if f is not None:
                if f in entered:
                    continue
                dfs(s, path, entered + (f,))
            else:
                dfs(s, path, entered)

    dfs(g.start, [], ())
    return out


def path_entries(uc, node_ids):
    first = {f"{uc.name}|{f.id}|{f.steps[0].number}": f.id for f in uc.alternative_flows if f.steps}
    return [first[n] for n in node_ids if n in first]


# ---------------------------------------------------------------- product line generator

def random_pl_case(rng: random.Random):
    """A one-use-case product line and two decision models; returns (doc, diagram, m_old, m_new)."""
    n = rng.randint(3, 7)
    kinds = [rng.choice(["internal", "input", "output", "condition", "condition"]) for _ in range(n)]
    opt = [rng.random() < 0.3 for _ in range(n)]
    vgroup = [rng.choice(["internal", "input", "output", "condition"]) for _ in range(rng.choice([0, 2, 3]))]
    vgroup = vgroup[: 10 - n]
    at = rng.randint(0, n)
    numbers = [str(i) for i in range(1, n + 1)]

    lines = [f"USE CASE {UC_NAME}", "1.1 Basic Flow (BF)"]
    body = [f"{num}. {'<OPTIONAL> ' if o else ''}{step_text(rng, k)}" for num, k, o in zip(numbers, kinds, opt)]
    vlines = [f"V{j}. <OPTIONAL> {step_text(rng, k)}" for j, k in enumerate(vgroup, start=1)]
    lines += body[:at] + vlines + body[at:]

    optional_flows = []
    section, saf = 2, 1
    for num, k in zip(numbers, kinds):
        if k != "condition" or rng.random() >= 0.65:
            continue
        o = rng.random() < 0.4
        fid = f"SAF{saf}"
        header = f"1.{section} {'<OPTIONAL> ' if o else ''}Specific Alternative Flow ({fid})"
        lines += _flow_lines(header, num, "", _alt_body(rng, numbers, rng.choice(["abort", "resume", "return"])))
        if o:
            optional_flows.append(fid)
        section += 1
        saf += 1
    if rng.random() < 0.35:
        a = rng.randint(1, n)
        b = rng.randint(a, n)
        o = rng.random() < 0.6
        header = f"1.{section} {'<OPTIONAL> ' if o else ''}Bounded Alternative Flow (BAF1)"
        lines += _flow_lines(header, f"{a}-{b}" if b > a else str(a), rng.choice(NOUNS),
                             _alt_body(rng, numbers, rng.choice(["abort", "return"])))
        if o:
            optional_flows.append("BAF1")
    doc = parse_specification("\n".join(lines) + "\n")
    diagram = diagram_from_dict({"schema_version": 1, "use_cases": [{"name": UC_NAME, "variant": False}],
                                 "variation_points": [], "includes": [], "dependencies": []})

    state = {
        "steps": {num: rng.random() < 0.6 for num, o in zip(numbers, opt) if o},
        "flows": {f: rng.random() < 0.6 for f in optional_flows},
        "order": [f"V{j}" for j in range(1, len(vgroup) + 1) if rng.random() < 0.75],
        "vsteps": [f"V{j}" for j in range(1, len(vgroup) + 1)],
    }
    rng.shuffle(state["order"])
    m_old = _decisions("OLD", state, dt.date(2020, 1, 1))
    new = _mutate(rng, state, rng.randint(1, 3))
    m_new = _decisions("NEW", new, dt.date(2021, 1, 1))
    return doc, diagram, m_old, m_new


def _mutate(rng, state, n_changes):
    s = {"steps": dict(state["steps"]), "flows": dict(state["flows"]), "order": list(state["order"]),
         "vsteps": state["vsteps"]}
    for _ in range(n_changes):
        ops = []
        if s["steps"]:
            ops.append("step")
        if s["flows"]:
            ops.append("flow")
        if s["vsteps"]:
            ops.append("vtoggle")
        if len(s["order"]) >= 2:
            ops.append("vswap")
        if not ops:
            break
        op = rng.choice(ops)
        if op == "step":
            k = rng.choice(sorted(s["steps"]))
            s["steps"][k] = not s["steps"][k]
        elif op == "flow":
            k = rng.choice(sorted(s["flows"]))
            s["flows"][k] = not s["flows"][k]
        elif op == "vtoggle":
            v = rng.choice(s["vsteps"])
            if v in s["order"]:
                s["order"].remove(v)
            else:
                s["order"].insert(rng.randint(0, len(s["order"])), v)
        else:
            i, j = rng.sample(range(len(s["order"])), 2)
            s["order"][i], s["order"][j] = s["order"][j], s["order"][i]
    return s


def _decisions(pid, state, created):
    spec = []
    for num, sel in sorted(state["steps"].items()):
        spec.append({"use_case": UC_NAME, "flow": "BF", "element": "optional-step", "step": num, "selected": sel})
    for fid, sel in sorted(state["flows"].items()):
        spec.append({"use_case": UC_NAME, "flow": fid, "element": "optional-flow", "selected": sel})
    for v in state["vsteps"]:
        d = {"use_case": UC_NAME, "flow": "BF", "element": "variant-order", "step": v,
             "selected": v in state["order"]}
        if v in state["order"]:
            d["order_number"] = state["order"].index(v) + 1
        spec.append(d)
    return decisions_from_dict({"product_id": pid, "created_on": created.isoformat(), "pl_model": "random",
                                "diagram_decisions": [], "spec_decisions": spec})


# ---------------------------------------------------------------- rule oracle

SEVERITY = {"Reusable": 0, "Retestable": 1, "Obsolete": 2}
RULE_CLASS = {"R1": "Retestable", "R2": "Retestable", "R3": "Retestable", "R4": "Obsolete", "R5": "Obsolete",
              "R6": "Obsolete", "R7": "Obsolete", "R8": "Obsolete", "R9": "Reusable"}
_RELEVANT = {NodeKind.INTERACTION, NodeKind.INTERNAL, NodeKind.CONDITION}


def _elements(g, node_ids):
    firsts: dict[tuple, int] = {}
    nodes = {}
    for nid in node_ids:
        node = g.nodes[nid]
        if node.kind in _RELEVANT and node.identity not in firsts:
            firsts[node.identity] = len(firsts)
            nodes[node.identity] = node
    return firsts, nodes


def _refers(condition: str, entities) -> bool:
    c = f" {normalize_phrase(condition)} "
    return any(e and f" {normalize_phrase(e)} " in c for e in entities)


def table_oracle(old_uc, old_g, old_path, new_uc, new_g):
    """Literal rule evaluation of one old path against the new product.

    The counterpart is the new path entering exactly the surviving alternative
    flows in their old order; when the new product cannot enter all of them in
    that order, the path entering the longest possible prefix of them and
    nothing else.
    """
    entries = path_entries(old_uc, old_path)
    surviving = [f for f in entries if new_uc.flow(f) is not None]
    removed = sorted({f for f in entries if new_uc.flow(f) is None})
    paths = brute_force_paths(new_uc, new_g)
    for k in range(len(surviving), -1, -1):
        cands = [p for p, e in paths if list(e) == surviving[:k]]
        if cands:
            break
    assert len(cands) == 1, "counterpart must be unique"
    new_path = cands[0]

    of, on = _elements(old_g, old_path)
    nf, nn = _elements(new_g, new_path)
    inputs = {n.entity for n in list(on.values()) + list(nn.values())
              if n.step_kind is not None and n.step_kind.value == "Input"}
    rules = []
    for ident in [k for k in of if k not in nf] + [k for k in nf if k not in of]:
        node = on.get(ident) or nn[ident]
        if node.kind is NodeKind.CONDITION:
            rules.append("R4" if _refers(node.condition or node.text, inputs) else "R3")
        elif node.kind is NodeKind.INTERNAL:
            rules.append("R1")
        else:
            rules.append("R6")
    common = [k for k in of if k in nf]
    moved = {a for a in common for b in common if (of[a] < of[b]) != (nf[a] < nf[b])}
    for ident in moved:
        kind = on[ident].kind
        rules.append({NodeKind.INTERNAL: "R2", NodeKind.CONDITION: "R5"}.get(kind, "R7"))
    rules += ["R8"] * len(removed)
    if len(rules) >= 2:
        rules.append("R9")
    cls = max((RULE_CLASS[r] for r in rules), key=SEVERITY.get, default="Reusable")
    return cls, sorted(set(rules), key=lambda r: int(r[1:]))
