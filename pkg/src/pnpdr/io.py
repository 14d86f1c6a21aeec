"""Reading nets and properties, writing traces and certificates.

Textual net format, one declaration per line (``#`` starts a comment)::

    net       ::= line*
    line      ::= "pl" NAME [INT] | "tr" NAME arc* "->" arc*
    arc       ::= NAME ["*" INT]

Property files hold ``key: value`` headers followed by one predicate::

    goal: invariant          (or: reachable)
    net: parity.net          (optional, relative to the property file)
    expect: INVARIANT        (optional, used by the benchmark runner)
    p >= 1
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .encoding import VarSpace, primed
from .formula import And, Predicate, conjoin, format_predicate, negate, parse_predicate
from .pdr import certificate_queries
from .petri import NAME_RE, Marking, Net, NetError
from .smt import to_smt

GOALS = ("invariant", "reachable")
VERDICTS = ("INVARIANT", "REACHABLE", "UNKNOWN")
CERT_HEADER = "[PDR] Certificate of invariance"
TRACE_HEADER = "[PDR] Counterexample trace"


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class Problem:
    net: Net
    m0: Marking
    goal: str
    predicate: Predicate
    name: str = ""
    expect: str | None = None

    @property
    def invariant(self) -> Predicate:
        """The property whose invariance is checked."""
        return self.predicate if self.goal == "invariant" else negate(self.predicate)


# ---------------------------------------------------------------------------
# Textual nets


_ARC_RE = re.compile(r"(?P<name>[^\s*]+)(?:\*(?P<w>-?\d+))?\Z")


def _parse_arcs(items: Sequence[str], lineno: int) -> dict[str, int]:
    out: dict[str, int] = {}
    for item in items:
        m = _ARC_RE.match(item)
        if not m:
            raise ParseError(f"bad arc {item!r}", lineno)
        w = int(m.group("w")) if m.group("w") else 1
        if w < 0:
            raise ParseError(f"negative weight in {item!r}", lineno)
        out[m.group("name")] = out.get(m.group("name"), 0) + w
    return out


def parse_net_text(text: str) -> tuple[Net, Marking]:
    places: list[str] = []
    tokens: dict[str, int] = {}
    arcs: dict[str, tuple[dict[str, int], dict[str, int]]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "pl":
            if len(fields) not in (2, 3):
                raise ParseError("expected: pl NAME [TOKENS]", lineno)
            name = fields[1]
            if not NAME_RE.match(name):
                raise ParseError(f"invalid place name {name!r}", lineno)
            if name in tokens:
                raise ParseError(f"duplicate place {name!r}", lineno)
            try:
                count = int(fields[2]) if len(fields) == 3 else 0
            except ValueError:
                raise ParseError(f"bad token count {fields[2]!r}", lineno) from None
            if count < 0:
                raise ParseError("negative token count", lineno)
            places.append(name)
            tokens[name] = count
        elif kind == "tr":
            if len(fields) < 2 or fields.count("->") != 1 or fields[1] == "->":
                raise ParseError("expected: tr NAME inputs -> outputs", lineno)
            name = fields[1]
            if not NAME_RE.match(name):
                raise ParseError(f"invalid transition name {name!r}", lineno)
            if name in arcs:
                raise ParseError(f"duplicate transition {name!r}", lineno)
            sep = fields.index("->")
            ins = _parse_arcs(fields[2:sep], lineno)
            outs = _parse_arcs(fields[sep + 1 :], lineno)
            for p in list(ins) + list(outs):
                if p not in tokens:
                    raise ParseError(f"unknown place {p!r}", lineno)
            arcs[name] = (ins, outs)
        else:
            raise ParseError(f"unknown declaration {kind!r}", lineno)
    try:
        net = Net.from_arcs(places, arcs)
    except NetError as exc:
        raise ParseError(str(exc)) from None
    return net, tuple(tokens[p] for p in places)


def print_net_text(net: Net, m0: Sequence[int]) -> str:
    lines = []
    for p, x in zip(net.places, m0):
        lines.append(f"pl {p} {x}")

    def arcs(vec):
        return " ".join(p if w == 1 else f"{p}*{w}" for p, w in zip(net.places, vec) if w)

    for t in net.transitions:
        ins, outs = arcs(net.pre[t]), arcs(net.post[t])
        lines.append(" ".join(x for x in ("tr", t, ins, "->", outs) if x))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# PNML


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _child(elem, name: str):
    for c in elem:
        if _local(c.tag) == name:
            return c
    return None


def _text_of(elem, name: str) -> str | None:
    c = _child(elem, name)
    if c is None:
        return None
    t = _child(c, "text")
    return (t.text if t is not None else c.text or "").strip()


def parse_pnml(data: bytes | str) -> tuple[Net, Marking]:
    """Place/transition nets in PNML; pages are flattened in document order."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from None
    nets = [e for e in root.iter() if _local(e.tag) == "net"]
    if len(nets) != 1:
        raise ParseError(f"expected exactly one <net>, found {len(nets)}")
    net_elem = nets[0]
    ntype = net_elem.get("type", "")
    if ntype and not ntype.rstrip("/#").endswith("ptnet"):
        raise ParseError(f"only place/transition nets are supported, got type {ntype!r}")
    places: list[str] = []
    tokens: dict[str, int] = {}
    transitions: list[str] = []
    arcs_raw = []
    for e in net_elem.iter():
        tag = _local(e.tag)
        if tag in ("hlinitialMarking", "hlinscription", "declaration"):
            raise ParseError("colored net markup is not supported")
        if tag == "place":
            pid = e.get("id")
            if not pid or not NAME_RE.match(pid):
                raise ParseError(f"invalid place id {pid!r}")
            if pid in tokens or pid in transitions:
                raise ParseError(f"duplicate id {pid!r}")
            text = _text_of(e, "initialMarking")
            try:
                count = int(text) if text else 0
            except ValueError:
                raise ParseError(f"bad initial marking {text!r} for place {pid!r}") from None
            if count < 0:
                raise ParseError(f"negative initial marking for place {pid!r}")
            places.append(pid)
            tokens[pid] = count
        elif tag == "transition":
            tid = e.get("id")
            if not tid or not NAME_RE.match(tid):
                raise ParseError(f"invalid transition id {tid!r}")
            if tid in tokens or tid in transitions:
                raise ParseError(f"duplicate id {tid!r}")
            transitions.append(tid)
        elif tag == "arc":
            arcs_raw.append(e)
    pre = {t: {} for t in transitions}
    post = {t: {} for t in transitions}
    tset = set(transitions)
    for e in arcs_raw:
        src, dst = e.get("source"), e.get("target")
        text = _text_of(e, "inscription")
        try:
            w = int(text) if text else 1
        except ValueError:
            raise ParseError(f"bad arc weight {text!r}") from None
        if w < 0:
            raise ParseError(f"negative arc weight on arc {e.get('id')!r}")
        for node in (src, dst):
            if node not in tokens and node not in tset:
                raise ParseError(f"arc {e.get('id')!r} references unknown node {node!r}")
        if src in tokens and dst in tset:
            pre[dst][src] = pre[dst].get(src, 0) + w
        elif src in tset and dst in tokens:
            post[src][dst] = post[src].get(dst, 0) + w
        else:
            raise ParseError(f"arc {e.get('id')!r} connects two nodes of the same kind")
    net = Net.from_arcs(places, {t: (pre[t], post[t]) for t in transitions})
    return net, tuple(tokens[p] for p in places)


def load_net(path: str | Path) -> tuple[Net, Marking]:
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() in (".pnml", ".xml") or data.lstrip().startswith(b"<"):
        return parse_pnml(data)
    return parse_net_text(data.decode())


# ---------------------------------------------------------------------------
# Properties


def parse_property(text: str) -> tuple[dict[str, str], str]:
    """Split a property file into its headers and predicate text."""
    headers: dict[str, str] = {}
    body = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip() if not body else raw.split("#", 1)[0]
        m = re.match(r"\s*(goal|net|expect|name)\s*:\s*(.*?)\s*\Z", line) if not body else None
        if m:
            key, value = m.group(1), m.group(2)
            if key == "goal" and value not in GOALS:
                raise ParseError(f"goal must be invariant or reachable, got {value!r}", lineno)
            if key == "expect" and value not in VERDICTS:
                raise ParseError(f"unknown expected verdict {value!r}", lineno)
            headers[key] = value
        elif line.strip():
            body.append(line)
    if not body:
        raise ParseError("property file has no predicate")
    return headers, " ".join(x.strip() for x in body)


def load_problem(prop_path: str | Path, net_path: str | Path | None = None) -> Problem:
    prop_path = Path(prop_path)
    headers, text = parse_property(prop_path.read_text())
    if net_path is None:
        if "net" not in headers:
            raise ParseError(f"{prop_path}: no net given and no 'net:' header")
        net_path = prop_path.parent / headers["net"]
    net, m0 = load_net(net_path)
    pred = parse_predicate(text, net)
    return Problem(
        net,
        m0,
        headers.get("goal", "invariant"),
        pred,
        headers.get("name", prop_path.stem),
        headers.get("expect"),
    )


# ---------------------------------------------------------------------------
# Output


def format_marking(net: Net, m: Sequence[int]) -> str:
    return " ".join(f"{p}={x}" for p, x in zip(net.places, m)) or "(no places)"


def write_trace(trace: Sequence[str], net: Net, m0: Sequence[int], final: Sequence[int]) -> str:
    lines = [TRACE_HEADER]
    if trace:
        lines.append("trace: " + " ".join(trace))
    else:
        lines.append("trace: (empty, the initial marking is already a counterexample)")
    lines.append("initial: " + format_marking(net, m0))
    lines.append("final: " + format_marking(net, final))
    return "\n".join(lines) + "\n"


def conjuncts(pred: Predicate) -> list[Predicate]:
    if isinstance(pred, And) and pred.args:
        return list(pred.args)
    return [pred]


def write_certificate(cert: Predicate) -> str:
    """Human-readable certificate: one conjunct per ``#`` line."""
    lines = [CERT_HEADER] + ["# " + format_predicate(c) for c in conjuncts(cert)]
    return "\n".join(lines) + "\n"


def read_certificate(text: str, net: Net) -> Predicate:
    """Parse the output of :func:`write_certificate` (the header is optional)."""
    parts = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line == CERT_HEADER or line.startswith(";"):
            continue
        if not line.startswith("#"):
            raise ParseError("certificate lines must start with '#'", lineno)
        try:
            parts.append(parse_predicate(line[1:], net))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if not parts:
        raise ParseError("empty certificate")
    return conjoin(parts)


def write_certificate_script(
    net: Net, m0: Sequence[int], prop: Predicate, cert: Predicate, check_command: str = "(check-sat)"
) -> str:
    """Self-contained SMT-LIB script; each of its three checks must answer unsat."""
    space = VarSpace(net)
    queries = certificate_queries(net, m0, prop, cert)
    lines = [
        "; Certificate of invariance. Every check-sat below must answer unsat:",
        ";   initial:   the initial marking satisfies the certificate",
        ";   inductive: one transition from the certificate stays in it",
        ";   entails:   the certificate implies the property",
        "; Place variables range over the naturals; quantifiers range over k >= 0.",
    ]
    for c in conjuncts(cert):
        lines.append(";   # " + format_predicate(c))
    lines.append("(set-logic LIA)")
    for p in net.places:
        for sym in (space.symbol(p), space.symbol(primed(p))):
            lines.append(f"(declare-const {sym} Int)")
            lines.append(f"(assert (>= {sym} 0))")
    for key, q in queries.items():
        lines.append(f'(echo "{key}")')
        lines.append("(push 1)")
        lines.append(f"(assert {to_smt(q, space)})")
        lines.append(check_command)
        lines.append("(pop 1)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"
