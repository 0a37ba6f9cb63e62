"""Loading and indexing of the passive-DNS, IP-WHOIS and IP-to-ASN corpora.

All three inputs are UTF-8 files with one JSON object per line.  Malformed
lines are counted and skipped unless ``strict=True``, in which case the first
one aborts the load with its line number.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from .datamodel import (
    SECONDS_PER_YEAR,
    AsnRecord,
    DomainName,
    NetType,
    PdnsRecord,
    Prefix24,
    WhoisSnapshot,
    day_index,
    normalize_org,
    parse_domain,
    parse_ip,
)
from .errors import AsnConflictError, HostingTypeError, IngestError

log = logging.getLogger(__name__)

MAX_REPORTED_ERRORS = 20


@dataclass
class LoadStats:
    path: str = ""
    lines: int = 0
    loaded: int = 0
    malformed: int = 0
    skipped_non_a: int = 0
    merged: int = 0
    errors: list[str] = field(default_factory=list)

    def note_error(self, line_no: int, message: str):
        self.malformed += 1
        if len(self.errors) < MAX_REPORTED_ERRORS:
            self.errors.append(f"line {line_no}: {message}")


class _Skip(Exception):
    """Line is well formed but intentionally not consumed."""


def _iter_objects(path, strict: bool, stats: LoadStats, parse: Callable[[dict], object]) -> Iterator:
    stats.path = str(path)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read file: {exc.strerror}", str(path)) from exc
    with fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            stats.lines += 1
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                item = parse(obj)
            except _Skip:
                stats.skipped_non_a += 1
                continue
            except (ValueError, KeyError, TypeError, HostingTypeError) as exc:
                msg = f"{type(exc).__name__}: {exc}"
                if strict:
                    raise IngestError(msg, str(path), line_no) from exc
                stats.note_error(line_no, msg)
                continue
            stats.loaded += 1
            yield item
    if stats.malformed:
        log.warning("%s: skipped %d malformed line(s)", path, stats.malformed)


def _int_field(obj: dict, key: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"{key} must be an integer, got {value!r}")
    return value


def _str_field(obj: dict, key: str) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise TypeError(f"{key} must be a string, got {value!r}")
    return value


# ---------------------------------------------------------------- passive DNS


class PdnsStore:
    """In-memory passive-DNS index keyed by IP and by /24 prefix.

    Only ``A`` records are held.  Records identical in (name, ip, rrtype) are
    merged: earliest first-seen, latest last-seen, summed counts.  Derived
    views (name sets, apex intervals, daily apex sets) are computed on first
    use and cached; the underlying records never change.
    """

    def __init__(self, records: Iterable[PdnsRecord] = ()):
        merged: dict[tuple, PdnsRecord] = {}
        self.merged_duplicates = 0
        self.skipped_non_a = 0
        for rec in records:
            if rec.rrtype != "A":
                self.skipped_non_a += 1
                continue
            key = (rec.name.text, rec.ip)
            prev = merged.get(key)
            if prev is None:
                merged[key] = rec
            else:
                self.merged_duplicates += 1
                merged[key] = PdnsRecord(
                    prev.name,
                    "A",
                    prev.ip,
                    min(prev.time_first, rec.time_first),
                    max(prev.time_last, rec.time_last),
                    prev.count + rec.count,
                )
        by_ip: dict[IPv4Address, list[PdnsRecord]] = defaultdict(list)
        for rec in merged.values():
            by_ip[rec.ip].append(rec)
        self.by_ip: dict[IPv4Address, tuple[PdnsRecord, ...]] = {ip: tuple(v) for ip, v in by_ip.items()}
        by_prefix: dict[Prefix24, set] = defaultdict(set)
        for ip in self.by_ip:
            by_prefix[Prefix24.of(ip)].add(ip)
        self.by_prefix: dict[Prefix24, frozenset[IPv4Address]] = {p: frozenset(s) for p, s in by_prefix.items()}
        self._name_sets: dict = {}
        self._apex_intervals: dict = {}
        self._apex_index: Optional[dict[str, frozenset]] = None

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_ip.values())

    def ips(self) -> list[IPv4Address]:
        return sorted(self.by_ip)

    def records(self, ip: IPv4Address) -> tuple[PdnsRecord, ...]:
        return self.by_ip.get(ip, ())

    def prefix_ips(self, prefix: Prefix24) -> frozenset[IPv4Address]:
        return self.by_prefix.get(prefix, frozenset())

    def name_sets(self, ip: IPv4Address) -> tuple[frozenset, frozenset, frozenset]:
        """Distinct (tld2, tld3, full name) strings seen on ``ip``."""
        hit = self._name_sets.get(ip)
        if hit is None:
            tld2, tld3, names = set(), set(), set()
            for rec in self.by_ip.get(ip, ()):
                n = rec.name
                names.add(n.text)
                if n.tld2 is not None:
                    tld2.add(n.tld2)
                if n.tld3 is not None:
                    tld3.add(n.tld3)
            hit = (frozenset(tld2), frozenset(tld3), frozenset(names))
            self._name_sets[ip] = hit
        return hit

    def apexes(self, ip: IPv4Address) -> frozenset[str]:
        return self.name_sets(ip)[0]

    def apex_intervals(self, ip: IPv4Address) -> dict[str, tuple[tuple[int, int], ...]]:
        """Per apex, the (time_first, time_last) of every record on ``ip``."""
        hit = self._apex_intervals.get(ip)
        if hit is None:
            acc: dict[str, list] = defaultdict(list)
            for rec in self.by_ip.get(ip, ()):
                if rec.name.tld2 is not None:
                    acc[rec.name.tld2].append((rec.time_first, rec.time_last))
            hit = {k: tuple(v) for k, v in acc.items()}
            self._apex_intervals[ip] = hit
        return hit

    def daily_apexes(self, ip: IPv4Address, day: int) -> frozenset[str]:
        """Apexes with at least one record on ``ip`` active on UTC ``day``."""
        out = set()
        for apex, spans in self.apex_intervals(ip).items():
            for first, last in spans:
                if day_index(first) <= day <= day_index(last):
                    out.add(apex)
                    break
        return frozenset(out)

    def ips_for_apex(self, apex: str) -> frozenset[IPv4Address]:
        if self._apex_index is None:
            index: dict[str, set] = defaultdict(set)
            for ip in self.by_ip:
                for a in self.apexes(ip):
                    index[a].add(ip)
            self._apex_index = {a: frozenset(s) for a, s in index.items()}
        return self._apex_index.get(apex, frozenset())


def parse_pdns_object(obj: dict, suffixes=None) -> PdnsRecord:
    rrtype = _str_field(obj, "rrtype").upper()
    name = parse_domain(_str_field(obj, "name"), suffixes)
    ip_text = _str_field(obj, "ip")
    if rrtype != "A":
        raise _Skip()
    return PdnsRecord(
        name=name,
        rrtype="A",
        ip=parse_ip(ip_text),
        time_first=_int_field(obj, "time_first"),
        time_last=_int_field(obj, "time_last"),
        count=_int_field(obj, "count"),
    )


def read_pdns_records(path, suffixes=None, strict: bool = False, stats: LoadStats | None = None) -> list[PdnsRecord]:
    stats = stats if stats is not None else LoadStats()
    suffixes = frozenset(suffixes) if suffixes is not None else None
    ip_cache: dict[str, IPv4Address] = {}
    apex_cache: dict[str, str] = {}

    def parse(obj):
        rrtype = _str_field(obj, "rrtype").upper()
        name = parse_domain(_str_field(obj, "name"), suffixes)
        ip_text = _str_field(obj, "ip")
        if rrtype != "A":
            raise _Skip()
        # share address objects and apex strings across records
        ip = ip_cache.get(ip_text)
        if ip is None:
            ip = ip_cache[ip_text] = parse_ip(ip_text)
        if name.tld2 is not None:
            t2 = apex_cache.setdefault(name.tld2, name.tld2)
            t3 = apex_cache.setdefault(name.tld3, name.tld3) if name.tld3 is not None else None
            name = DomainName(name.text, name.suffix_len, t2, t3)
        return PdnsRecord(name, "A", ip, _int_field(obj, "time_first"), _int_field(obj, "time_last"), _int_field(obj, "count"))

    return list(_iter_objects(path, strict, stats, parse))


def load_pdns(path, suffixes=None, strict: bool = False) -> PdnsStore:
    """Load a passive-DNS file into a :class:`PdnsStore`.

    The returned store carries the load statistics as ``store.stats``.
    """
    stats = LoadStats()
    store = PdnsStore(read_pdns_records(path, suffixes, strict, stats))
    stats.merged = store.merged_duplicates
    store.stats = stats
    return store


def write_jsonl(path, objects: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for obj in objects:
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


# ---------------------------------------------------------------------- WHOIS


class WhoisStore:
    """Historical IP-WHOIS snapshots, queried by containment of an address.

    Queries return the snapshots whose range contains the IP and whose
    ``observed`` time lies in ``[reference - horizon_years, reference]``,
    sorted by ``observed`` ascending.
    """

    def __init__(self, snapshots: Iterable[WhoisSnapshot] = (), horizon_years: int = 10):
        self.snapshots: tuple[WhoisSnapshot, ...] = tuple(
            sorted(snapshots, key=lambda s: (s.observed, int(s.ip_range_start), int(s.ip_range_end), s.owner))
        )
        self.horizon_years = horizon_years
        self._starts = np.array([int(s.ip_range_start) for s in self.snapshots], dtype=np.int64)
        self._ends = np.array([int(s.ip_range_end) for s in self.snapshots], dtype=np.int64)
        self._containing: dict[IPv4Address, tuple[WhoisSnapshot, ...]] = {}

    def __len__(self) -> int:
        return len(self.snapshots)

    def containing(self, ip: IPv4Address) -> tuple[WhoisSnapshot, ...]:
        """All snapshots covering ``ip`` regardless of time."""
        hit = self._containing.get(ip)
        if hit is None:
            v = int(ip)
            idx = np.flatnonzero((self._starts <= v) & (self._ends >= v))
            hit = tuple(self.snapshots[i] for i in idx)
            self._containing[ip] = hit
        return hit

    def history(self, ip: IPv4Address, reference: int) -> tuple[WhoisSnapshot, ...]:
        lo = reference - self.horizon_years * SECONDS_PER_YEAR
        return tuple(s for s in self.containing(ip) if lo <= s.observed <= reference)


def parse_whois_object(obj: dict) -> WhoisSnapshot:
    net_type = obj.get("net_type")
    if net_type is not None and not isinstance(net_type, str):
        raise TypeError(f"net_type must be a string, got {net_type!r}")
    owner = obj.get("owner")
    if owner is not None and not isinstance(owner, str):
        raise TypeError(f"owner must be a string, got {owner!r}")
    return WhoisSnapshot(
        ip_range_start=parse_ip(_str_field(obj, "range_start")),
        ip_range_end=parse_ip(_str_field(obj, "range_end")),
        owner=normalize_org(owner),
        net_type=NetType.parse(net_type),
        updated=_int_field(obj, "updated"),
        observed=_int_field(obj, "observed"),
    )


def load_whois(path, strict: bool = False, horizon_years: int = 10) -> WhoisStore:
    stats = LoadStats()
    store = WhoisStore(_iter_objects(path, strict, stats, parse_whois_object), horizon_years)
    store.stats = stats
    return store


# ------------------------------------------------------------------------ ASN


class AsnDb:
    """Longest-prefix-match table of :class:`AsnRecord`."""

    def __init__(self, records: Iterable[AsnRecord] = ()):
        self._by_len: dict[int, dict[int, AsnRecord]] = defaultdict(dict)
        for rec in records:
            table = self._by_len[rec.cidr.prefixlen]
            key = int(rec.cidr.network_address)
            prev = table.get(key)
            if prev is not None:
                if prev.asn != rec.asn:
                    raise AsnConflictError(f"conflicting ASN for {rec.cidr}: AS{prev.asn} vs AS{rec.asn}")
                continue
            table[key] = rec
        self._lengths = sorted(self._by_len, reverse=True)
        self.records: tuple[AsnRecord, ...] = tuple(
            sorted(
                (r for t in self._by_len.values() for r in t.values()),
                key=lambda r: (int(r.cidr.network_address), r.cidr.prefixlen),
            )
        )

    def __len__(self) -> int:
        return len(self.records)

    def lookup(self, ip: IPv4Address) -> Optional[AsnRecord]:
        v = int(ip)
        for plen in self._lengths:
            mask = (0xFFFFFFFF << (32 - plen)) & 0xFFFFFFFF
            rec = self._by_len[plen].get(v & mask)
            if rec is not None:
                return rec
        return None


def lookup_asn(db: AsnDb, ip: IPv4Address) -> Optional[AsnRecord]:
    return db.lookup(ip)


def parse_asn_object(obj: dict) -> AsnRecord:
    cidr_text = _str_field(obj, "cidr")
    if ":" in cidr_text:
        raise ValueError(f"IPv6 is not supported: {cidr_text!r}")
    return AsnRecord(
        cidr=IPv4Network(cidr_text, strict=True),
        asn=_int_field(obj, "asn"),
        org=_str_field(obj, "org"),
    )


def load_asn(path, strict: bool = False) -> AsnDb:
    stats = LoadStats()
    db = AsnDb(_iter_objects(path, strict, stats, parse_asn_object))
    db.stats = stats
    return db
