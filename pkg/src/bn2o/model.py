"""BN2O network and case data model, text formats, parsing and serialization.

Network file::

    bn2o 1
    disease <id> <prior>
    finding <id> [leak=<L>]
    edge <finding-id> <disease-id> <activation>

Case file::

    case 1
    + <finding-id>
    - <finding-id>

``#`` starts a comment and blank lines are ignored in both formats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from bn2o.errors import ParseError

NETWORK_HEADER = ("bn2o", "1")
CASE_HEADER = ("case", "1")


@dataclass(frozen=True)
class Disease:
    id: str
    prior: float

    def __post_init__(self):
        _check_token(self.id, "disease id")
        if not 0.0 < self.prior < 1.0:
            raise ValueError(f"prior out of range (0,1) for disease {self.id}: {self.prior!r}")


@dataclass(frozen=True)
class Finding:
    """A noisy-or child node.

    ``parents`` holds ``(disease_index, activation)`` pairs sorted by disease
    index. The activation of a link is the probability that the finding is
    present when that disease alone is present.
    """

    id: str
    parents: tuple[tuple[int, float], ...]
    leak: float = 0.0

    def __post_init__(self):
        _check_token(self.id, "finding id")
        if not 0.0 <= self.leak < 1.0:
            raise ValueError(f"leak out of range [0,1) for finding {self.id}: {self.leak!r}")
        if not self.parents:
            raise ValueError(f"finding {self.id} has no parents")
        prev = -1
        for d, c in self.parents:
            if d <= prev:
                raise ValueError(f"parents of finding {self.id} must be distinct and sorted by disease index")
            prev = d
            if not 0.0 < c <= 1.0:
                raise ValueError(f"activation out of range (0,1] on edge {self.id}: {c!r}")

    @property
    def parent_indices(self) -> tuple[int, ...]:
        return tuple(d for d, _ in self.parents)


@dataclass(frozen=True)
class Network:
    diseases: tuple[Disease, ...]
    findings: tuple[Finding, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "diseases", tuple(self.diseases))
        object.__setattr__(self, "findings", tuple(self.findings))
        if len({d.id for d in self.diseases}) != len(self.diseases):
            raise ValueError("duplicate disease id")
        if len({f.id for f in self.findings}) != len(self.findings):
            raise ValueError("duplicate finding id")
        n = len(self.diseases)
        for f in self.findings:
            for d, _ in f.parents:
                if not 0 <= d < n:
                    raise ValueError(f"finding {f.id} references unknown disease index {d}")

    @property
    def n_diseases(self) -> int:
        return len(self.diseases)

    @property
    def n_findings(self) -> int:
        return len(self.findings)

    @cached_property
    def disease_index(self) -> dict[str, int]:
        return {d.id: i for i, d in enumerate(self.diseases)}

    @cached_property
    def finding_index(self) -> dict[str, int]:
        return {f.id: j for j, f in enumerate(self.findings)}

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        """Finding indices for each disease, ascending."""
        kids: list[list[int]] = [[] for _ in self.diseases]
        for j, f in enumerate(self.findings):
            for d, _ in f.parents:
                kids[d].append(j)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def fail_links(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        """Per finding, ``(disease_index, 1 - c)``: the c' factor of a present parent."""
        return tuple(tuple((i, 1.0 - c) for i, c in f.parents) for f in self.findings)

    @cached_property
    def leak_keep(self) -> tuple[float, ...]:
        """Per finding, ``1 - leak``."""
        return tuple(1.0 - f.leak for f in self.findings)

    def n_links(self) -> int:
        return sum(len(f.parents) for f in self.findings)


@dataclass(frozen=True)
class CaseEvidence:
    """Observed findings, as sorted tuples of finding indices."""

    positives: tuple[int, ...] = ()
    negatives: tuple[int, ...] = ()

    def __post_init__(self):
        pos = tuple(sorted(set(self.positives)))
        neg = tuple(sorted(set(self.negatives)))
        if len(pos) != len(self.positives) or len(neg) != len(self.negatives):
            raise ValueError("duplicate finding in evidence")
        if set(pos) & set(neg):
            raise ValueError("finding observed both positive and negative")
        object.__setattr__(self, "positives", pos)
        object.__setattr__(self, "negatives", neg)

    def validate(self, net: Network) -> None:
        for j in self.positives + self.negatives:
            if not 0 <= j < net.n_findings:
                raise ValueError(f"evidence references unknown finding index {j}")

    def with_positive(self, j: int) -> "CaseEvidence":
        return CaseEvidence(self.positives + (j,), self.negatives)

    def with_negative(self, j: int) -> "CaseEvidence":
        return CaseEvidence(self.positives, self.negatives + (j,))

    @property
    def is_empty(self) -> bool:
        return not self.positives and not self.negatives


def _check_token(token: str, what: str) -> None:
    if not token or any(ch.isspace() for ch in token):
        raise ValueError(f"{what} must be a non-empty token without whitespace: {token!r}")


# ---------------------------------------------------------------------------
# parsing


@dataclass
class _Line:
    number: int
    tokens: list[str]
    columns: list[int] = field(default_factory=list)


def _lines(text: str) -> list[_Line]:
    out = []
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens, columns = [], []
        col = 0
        for part in body.split():
            col = body.index(part, col)
            tokens.append(part)
            columns.append(col + 1)
            col += len(part)
        if tokens:
            out.append(_Line(number, tokens, columns))
    return out


def _number(line: _Line, pos: int, what: str) -> float:
    tok = line.tokens[pos]
    try:
        value = float(tok)
    except ValueError:
        raise ParseError(f"invalid number for {what}: {tok!r}", line.number, line.columns[pos]) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite number for {what}: {tok!r}", line.number, line.columns[pos])
    return value


def _header(lines: list[_Line], expected: tuple[str, str], kind: str) -> None:
    if not lines:
        raise ParseError(f"empty {kind} file: expected header {' '.join(expected)!r}", 1)
    first = lines[0]
    if tuple(first.tokens) != expected:
        raise ParseError(
            f"bad header: expected {' '.join(expected)!r}, got {' '.join(first.tokens)!r}",
            first.number,
            1,
        )


def parse_network(text: str) -> Network:
    """Parse and validate a network file.

    Statements may appear in any order after the header; edges are resolved
    once every disease and finding has been declared.
    """
    lines = _lines(text)
    _header(lines, NETWORK_HEADER, "network")

    diseases: list[Disease] = []
    disease_ids: dict[str, int] = {}
    finding_decl: list[tuple[str, float, _Line]] = []
    finding_ids: dict[str, int] = {}
    edges: list[_Line] = []

    for line in lines[1:]:
        kw = line.tokens[0]
        if kw == "disease":
            if len(line.tokens) != 3:
                raise ParseError("expected 'disease <id> <prior>'", line.number, 1)
            did = line.tokens[1]
            if did in disease_ids:
                raise ParseError(f"duplicate disease id {did}", line.number, line.columns[1])
            prior = _number(line, 2, "prior")
            if not 0.0 < prior < 1.0:
                raise ParseError("prior out of range (0,1)", line.number, line.columns[2])
            disease_ids[did] = len(diseases)
            diseases.append(Disease(did, prior))
        elif kw == "finding":
            if len(line.tokens) not in (2, 3):
                raise ParseError("expected 'finding <id> [leak=<L>]'", line.number, 1)
            fid = line.tokens[1]
            if fid in finding_ids:
                raise ParseError(f"duplicate finding id {fid}", line.number, line.columns[1])
            leak = 0.0
            if len(line.tokens) == 3:
                opt = line.tokens[2]
                if not opt.startswith("leak="):
                    raise ParseError(f"unknown finding option {opt!r}", line.number, line.columns[2])
                line.tokens[2] = opt[len("leak="):]
                line.columns[2] += len("leak=")
                leak = _number(line, 2, "leak")
                if not 0.0 <= leak < 1.0:
                    raise ParseError("leak out of range [0,1)", line.number, line.columns[2])
            finding_ids[fid] = len(finding_decl)
            finding_decl.append((fid, leak, line))
        elif kw == "edge":
            if len(line.tokens) != 4:
                raise ParseError("expected 'edge <finding-id> <disease-id> <c>'", line.number, 1)
            edges.append(line)
        else:
            raise ParseError(f"unknown statement {kw!r}", line.number, line.columns[0])

    links: list[dict[int, float]] = [{} for _ in finding_decl]
    for line in edges:
        fid, did = line.tokens[1], line.tokens[2]
        if fid not in finding_ids:
            raise ParseError(f"unknown finding {fid}", line.number, line.columns[1])
        if did not in disease_ids:
            raise ParseError(f"unknown disease {did}", line.number, line.columns[2])
        c = _number(line, 3, "activation")
        if not 0.0 < c <= 1.0:
            raise ParseError("activation out of range (0,1]", line.number, line.columns[3])
        j, i = finding_ids[fid], disease_ids[did]
        if i in links[j]:
            raise ParseError(f"duplicate edge {fid} {did}", line.number, 1)
        links[j][i] = c

    findings = []
    for (fid, leak, line), parents in zip(finding_decl, links):
        if not parents:
            raise ParseError(f"finding {fid} has no parents", line.number, line.columns[1])
        findings.append(Finding(fid, tuple(sorted(parents.items())), leak))
    return Network(tuple(diseases), tuple(findings))


def parse_case(text: str, net: Network) -> CaseEvidence:
    lines = _lines(text)
    _header(lines, CASE_HEADER, "case")
    sign: dict[int, str] = {}
    for line in lines[1:]:
        if len(line.tokens) != 2 or line.tokens[0] not in ("+", "-"):
            raise ParseError("expected '+ <finding-id>' or '- <finding-id>'", line.number, 1)
        s, fid = line.tokens
        j = net.finding_index.get(fid)
        if j is None:
            raise ParseError(f"unknown finding {fid}", line.number, line.columns[1])
        if j in sign:
            if sign[j] != s:
                raise ParseError(f"conflicting evidence for {fid}", line.number, line.columns[1])
            raise ParseError(f"duplicate evidence for {fid}", line.number, line.columns[1])
        sign[j] = s
    return CaseEvidence(
        tuple(j for j, s in sign.items() if s == "+"),
        tuple(j for j, s in sign.items() if s == "-"),
    )


# ---------------------------------------------------------------------------
# serialization

def _fmt(x: float) -> str:
    # repr is the shortest decimal that round-trips a binary64
    return repr(float(x))


def serialize_network(net: Network) -> str:
    out = ["bn2o 1"]
    for d in net.diseases:
        out.append(f"disease {d.id} {_fmt(d.prior)}")
    for f in net.findings:
        out.append(f"finding {f.id}" + (f" leak={_fmt(f.leak)}" if f.leak else ""))
    for f in net.findings:
        for i, c in f.parents:
            out.append(f"edge {f.id} {net.diseases[i].id} {_fmt(c)}")
    return "\n".join(out) + "\n"


def serialize_case(case: CaseEvidence, net: Network) -> str:
    out = ["case 1"]
    out += [f"+ {net.findings[j].id}" for j in case.positives]
    out += [f"- {net.findings[j].id}" for j in case.negatives]
    return "\n".join(out) + "\n"


def make_network(
    diseases: Sequence[tuple[str, float]],
    findings: Iterable[tuple[str, Sequence[tuple[str, float]]] | tuple[str, Sequence[tuple[str, float]], float]],
) -> Network:
    """Build a network from ids, for tests and scripts.

    ``findings`` items are ``(id, [(disease_id, c), ...])`` with an optional
    third element giving the leak.
    """
    ds = tuple(Disease(i, p) for i, p in diseases)
    index = {d.id: k for k, d in enumerate(ds)}
    fs = []
    for item in findings:
        fid, links = item[0], item[1]
        leak = item[2] if len(item) > 2 else 0.0
        fs.append(Finding(fid, tuple(sorted((index[d], c) for d, c in links)), leak))
    return Network(ds, tuple(fs))


def make_case(net: Network, positives: Iterable[str] = (), negatives: Iterable[str] = ()) -> CaseEvidence:
    idx = net.finding_index
    return CaseEvidence(tuple(idx[f] for f in positives), tuple(idx[f] for f in negatives))
