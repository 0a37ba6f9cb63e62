"""Dedicated/shared ground truth for hosting IPs via an ordered rule cascade.

Rules, first match wins:

1. one hosted apex: dedicated
2. every apex has a usable registrant: all equal means dedicated, otherwise shared
3. every apex reaches one common sink through redirects: dedicated
4. a manual annotation, if given
5. otherwise undecidable
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from ipaddress import IPv4Address
from typing import Iterable, Mapping, Optional, Sequence

from .datamodel import SharingLabel, apex_of, format_ip, normalize_org, parse_ip
from .errors import IngestError, LabelingError
from .ingest import LoadStats, PdnsStore, _iter_objects, _str_field

REDIRECT_HOP_LIMIT = 10


class Rule(str, Enum):
    SINGLE_DOMAIN = "SingleDomain"
    REGISTRANT_MATCH = "RegistrantMatch"
    REGISTRANT_MISMATCH = "RegistrantMismatch"
    REDIRECT_CONVERGENCE = "RedirectConvergence"
    MANUAL_ANNOTATION = "ManualAnnotation"
    UNDECIDABLE = "Undecidable"


@dataclass(frozen=True, slots=True)
class DomainWhois:
    domain: str
    registrant: Optional[str] = None
    privacy_protected: bool = False

    @property
    def usable(self) -> bool:
        return not self.privacy_protected and bool(self.key)

    @property
    def key(self) -> str:
        """Registrant normalized for comparison (case, punctuation, spacing)."""
        return normalize_org(self.registrant)

    def to_json(self) -> dict:
        return {"domain": self.domain, "registrant": self.registrant, "privacy_protected": self.privacy_protected}


@dataclass(frozen=True, slots=True)
class RedirectEdge:
    src: str
    dst: str

    def to_json(self) -> dict:
        return {"from": self.src, "to": self.dst}


@dataclass(frozen=True, slots=True)
class LabelDecision:
    ip: IPv4Address
    label: Optional[SharingLabel]
    rule: Rule
    note: str = ""

    def __post_init__(self):
        if (self.label is None) != (self.rule is Rule.UNDECIDABLE):
            raise LabelingError(f"label {self.label} inconsistent with rule {self.rule.value}")


class RedirectGraph:
    """Redirect edges with self-loops dropped; one outgoing target per apex is
    not assumed, so resolution follows every path."""

    def __init__(self, edges: Iterable[RedirectEdge] = ()):
        out: dict[str, set[str]] = {}
        for e in edges:
            if e.src == e.dst:
                continue
            out.setdefault(e.src, set()).add(e.dst)
        self.out = {k: frozenset(v) for k, v in out.items()}

    def __len__(self) -> int:
        return sum(len(v) for v in self.out.values())

    def sinks(self, apex: str, hop_limit: int = REDIRECT_HOP_LIMIT) -> Optional[frozenset[str]]:
        """Terminal apexes reachable from ``apex``.

        Returns None when a cycle is met or a chain exceeds ``hop_limit``; the
        caller treats that as "no convergence".
        """
        found: set[str] = set()

        def walk(node: str, depth: int, path: frozenset) -> bool:
            nxt = self.out.get(node)
            if not nxt:
                found.add(node)
                return True
            if depth >= hop_limit:
                return False
            for n in nxt:
                if n in path or not walk(n, depth + 1, path | {n}):
                    return False
            return True

        if not walk(apex, 0, frozenset([apex])):
            return None
        return frozenset(found)

    def common_sink(self, apexes: Iterable[str], hop_limit: int = REDIRECT_HOP_LIMIT) -> Optional[str]:
        """The single apex every input reaches, or None."""
        target: Optional[frozenset] = None
        for a in apexes:
            s = self.sinks(a, hop_limit)
            if s is None or len(s) != 1:
                return None
            if target is None:
                target = s
            elif s != target:
                return None
        return next(iter(target)) if target else None


def label_apexes(
    apexes: Iterable[str],
    whois: Mapping[str, DomainWhois],
    redirects: RedirectGraph | Sequence[RedirectEdge],
    manual: Optional[SharingLabel | str] = None,
) -> tuple[Optional[SharingLabel], Rule, str]:
    apexes = sorted(set(apexes))
    if not apexes:
        raise LabelingError("not a hosting candidate: no hosted apex")
    if len(apexes) == 1:
        return SharingLabel.DEDICATED, Rule.SINGLE_DOMAIN, apexes[0]
    recs = [whois.get(a) for a in apexes]
    if all(r is not None and r.usable for r in recs):
        keys = {r.key for r in recs}
        if len(keys) == 1:
            return SharingLabel.DEDICATED, Rule.REGISTRANT_MATCH, next(iter(keys))
        return SharingLabel.SHARED, Rule.REGISTRANT_MISMATCH, f"{len(keys)} registrants"
    graph = redirects if isinstance(redirects, RedirectGraph) else RedirectGraph(redirects)
    sink = graph.common_sink(apexes)
    if sink is not None:
        return SharingLabel.DEDICATED, Rule.REDIRECT_CONVERGENCE, sink
    if manual is not None:
        return SharingLabel(manual), Rule.MANUAL_ANNOTATION, ""
    return None, Rule.UNDECIDABLE, "no rule applies"


def label_ip(
    pdns: PdnsStore,
    ip: IPv4Address,
    whois: Mapping[str, DomainWhois],
    redirects: RedirectGraph | Sequence[RedirectEdge] = (),
    manual: Optional[SharingLabel | str] = None,
) -> LabelDecision:
    apexes = pdns.apexes(ip)
    if not apexes:
        raise LabelingError(f"{format_ip(ip)} is not a hosting candidate: no hosted apex")
    label, rule, note = label_apexes(apexes, whois, redirects, manual)
    return LabelDecision(ip, label, rule, note)


@dataclass(frozen=True)
class LabelSummary:
    counts: dict[str, int]
    total: int

    def to_dict(self) -> dict:
        return {"total": self.total, "by_rule": dict(self.counts)}


def label_corpus(
    pdns: PdnsStore,
    ips: Sequence[IPv4Address],
    whois: Mapping[str, DomainWhois],
    redirects: RedirectGraph | Sequence[RedirectEdge] = (),
    manual: Mapping[IPv4Address, SharingLabel | str] | None = None,
) -> tuple[list[LabelDecision], LabelSummary]:
    """Label every IP in input order; per-IP failures become Undecidable."""
    graph = redirects if isinstance(redirects, RedirectGraph) else RedirectGraph(redirects)
    manual = manual or {}
    out = []
    for ip in ips:
        try:
            out.append(label_ip(pdns, ip, whois, graph, manual.get(ip)))
        except LabelingError as exc:
            out.append(LabelDecision(ip, None, Rule.UNDECIDABLE, str(exc)))
    counts = Counter(d.rule.value for d in out)
    ordered = {r.value: counts[r.value] for r in Rule if counts[r.value]}
    return out, LabelSummary(ordered, len(out))


# ------------------------------------------------------------------- file io


def _parse_domain_whois(obj: dict, suffixes=None) -> DomainWhois:
    domain = apex_of(_str_field(obj, "domain"), suffixes)
    if domain is None:
        raise ValueError("domain has no registrable part")
    reg = obj.get("registrant")
    if reg is not None and not isinstance(reg, str):
        raise TypeError("registrant must be a string or null")
    priv = obj.get("privacy_protected", False)
    if not isinstance(priv, bool):
        raise TypeError("privacy_protected must be a boolean")
    return DomainWhois(domain, reg, priv)


def load_domain_whois(path, suffixes=None, strict: bool = False) -> dict[str, DomainWhois]:
    """Registrant records keyed by apex; a later line for the same apex wins."""
    stats = LoadStats(path=str(path))
    out: dict[str, DomainWhois] = {}
    for rec in _iter_objects(path, strict, stats, lambda o: _parse_domain_whois(o, suffixes)):
        out[rec.domain] = rec
    return out


def _parse_redirect(obj: dict, suffixes=None) -> RedirectEdge:
    src = apex_of(_str_field(obj, "from"), suffixes)
    dst = apex_of(_str_field(obj, "to"), suffixes)
    if src is None or dst is None:
        raise ValueError("redirect endpoint has no registrable part")
    return RedirectEdge(src, dst)


def load_redirects(path, suffixes=None, strict: bool = False) -> list[RedirectEdge]:
    stats = LoadStats(path=str(path))
    return list(_iter_objects(path, strict, stats, lambda o: _parse_redirect(o, suffixes)))


def _parse_manual(obj: dict) -> tuple[IPv4Address, SharingLabel]:
    ip = parse_ip(_str_field(obj, "ip"))
    return ip, SharingLabel(_str_field(obj, "label").strip().lower())


def load_manual(path, strict: bool = False) -> dict[IPv4Address, SharingLabel]:
    stats = LoadStats(path=str(path))
    return dict(_iter_objects(path, strict, stats, _parse_manual))


def write_labels_csv(path, decisions: Iterable[LabelDecision]) -> None:
    """``ip,label,rule`` sorted by numeric IP; undecided labels are ``NA``."""
    rows = sorted(decisions, key=lambda d: int(d.ip))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ip", "label", "rule"])
        for d in rows:
            w.writerow([format_ip(d.ip), d.label.value if d.label else "NA", d.rule.value])


def read_labels_csv(path) -> dict[IPv4Address, LabelDecision]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:3] != ["ip", "label", "rule"]:
            raise IngestError("labels file must start with header ip,label,rule", str(path), 1)
        for line_no, row in enumerate(reader, start=2):
            try:
                ip = parse_ip(row["ip"])
                label = None if row["label"] == "NA" else SharingLabel(row["label"])
                out[ip] = LabelDecision(ip, label, Rule(row["rule"]))
            except (ValueError, LabelingError) as exc:
                raise IngestError(str(exc), str(path), line_no) from exc
    return out
