"""Core domain types: addresses, domain names, PDNS and WHOIS records, labels."""

from __future__ import annotations

import ipaddress
import re
import string
from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv4Address, IPv4Network
from typing import Iterable, Iterator, Optional

from .errors import AddressError, DomainParseError

SECONDS_PER_DAY = 86_400
SECONDS_PER_YEAR = 365.25 * SECONDS_PER_DAY

IpV4 = IPv4Address

_LABEL_RE = re.compile(r"^[a-z0-9_-]+$")
_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def parse_ip(text: str) -> IPv4Address:
    """Parse a dotted-quad IPv4 address; IPv6 is rejected explicitly."""
    text = str(text).strip()
    try:
        addr = ipaddress.ip_address(text)
    except ValueError as exc:
        raise AddressError(f"not an IP address: {text!r}") from exc
    if addr.version != 4:
        raise AddressError(f"IPv6 is not supported: {text!r}")
    return addr


def format_ip(ip: IPv4Address) -> str:
    return str(ip)


def day_index(ts: int | float) -> int:
    """UTC day number of an epoch timestamp."""
    return int(ts // SECONDS_PER_DAY)


def normalize_org(name: str | None) -> str:
    """Lowercase, strip punctuation and collapse whitespace.

    >>> normalize_org("  ACME Hosting,  Inc. ")
    'acme hosting inc'
    """
    if name is None:
        return ""
    return " ".join(name.lower().translate(_PUNCT_TABLE).split())


@dataclass(frozen=True, slots=True, order=True)
class Prefix24:
    """A /24 block, identified by its network address."""

    base: IPv4Address

    def __post_init__(self):
        if int(self.base) & 0xFF:
            raise AddressError(f"/24 base must end in .0: {self.base}")

    @classmethod
    def of(cls, ip: IPv4Address) -> "Prefix24":
        return cls(IPv4Address(int(ip) & 0xFFFFFF00))

    def contains(self, ip: IPv4Address) -> bool:
        return (int(ip) & 0xFFFFFF00) == int(self.base)

    def addresses(self) -> Iterator[IPv4Address]:
        start = int(self.base)
        for i in range(256):
            yield IPv4Address(start + i)

    def __str__(self) -> str:
        return f"{self.base}/24"


@dataclass(frozen=True, slots=True)
class DomainName:
    """A parsed, lowercased DNS name with its public-suffix length.

    ``tld2`` (the apex) and ``tld3`` are precomputed at parse time since
    feature extraction asks for them once per record.
    """

    text: str
    suffix_len: int
    tld2: Optional[str] = field(default=None, compare=False)
    tld3: Optional[str] = field(default=None, compare=False)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.text.split("."))

    def __str__(self) -> str:
        return self.text


def _suffix_len(labels: list[str], suffixes: frozenset[str] | set[str] | None) -> int:
    if suffixes:
        for j in range(len(labels), 0, -1):
            if ".".join(labels[-j:]) in suffixes:
                return j
    return 1


def parse_domain(text: str, suffixes: Iterable[str] | None = None) -> DomainName:
    """Parse ``text`` into a :class:`DomainName`.

    The suffix length is the label count of the longest entry of ``suffixes``
    matching the end of the name; without a match (or without a list) the
    last label alone is the suffix.
    """
    raw = text
    text = text.strip().lower()
    if text.endswith("."):
        text = text[:-1]
    if not text:
        raise DomainParseError(raw, "", "empty name")
    labels = text.split(".")
    for label in labels:
        if not label:
            raise DomainParseError(raw, label, "empty label")
        if len(label) > 63:
            raise DomainParseError(raw, label, "label longer than 63 characters")
        if not _LABEL_RE.match(label):
            raise DomainParseError(raw, label, "illegal characters")
    if suffixes is not None and not isinstance(suffixes, (set, frozenset)):
        suffixes = frozenset(suffixes)
    s = _suffix_len(labels, suffixes)
    n = len(labels)
    tld2 = ".".join(labels[n - s - 1:]) if n >= s + 1 else None
    tld3 = ".".join(labels[n - s - 2:]) if n >= s + 2 else None
    return DomainName(text, s, tld2, tld3)


def tld2_of(d: DomainName) -> Optional[str]:
    return d.tld2


def tld3_of(d: DomainName) -> Optional[str]:
    return d.tld3


def apex_of(text: str, suffixes: Iterable[str] | None = None) -> Optional[str]:
    """Registered domain of a hostname, or None for a bare suffix."""
    return parse_domain(text, suffixes).tld2


def load_suffix_list(path) -> frozenset[str]:
    """Read a public-suffix style list: one suffix per line, ``//`` comments.

    Wildcard (``*.``) and exception (``!``) rules are not supported and are
    skipped.
    """
    out = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("//"):
                continue
            entry = line.split()[0].lower().rstrip(".")
            if entry.startswith(("*", "!")):
                continue
            out.add(entry)
    return frozenset(out)


@dataclass(frozen=True, slots=True)
class PdnsRecord:
    name: DomainName
    rrtype: str
    ip: IPv4Address
    time_first: int
    time_last: int
    count: int = 1

    def __post_init__(self):
        if self.time_first > self.time_last:
            raise ValueError(f"time_first {self.time_first} > time_last {self.time_last}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")

    def to_json(self) -> dict:
        return {
            "name": self.name.text,
            "rrtype": self.rrtype,
            "ip": str(self.ip),
            "time_first": self.time_first,
            "time_last": self.time_last,
            "count": self.count,
        }


class NetType(str, Enum):
    DIRECT_ALLOCATION = "DirectAllocation"
    DIRECT_ASSIGNMENT = "DirectAssignment"
    REALLOCATED = "Reallocated"
    REASSIGNED = "Reassigned"
    UNKNOWN = "Unknown"

    @classmethod
    def parse(cls, text: str | None) -> "NetType":
        """Map a registry NET TYPE string onto the four known categories."""
        key = re.sub(r"[^a-z]", "", (text or "").lower())
        return _NET_TYPE_KEYS.get(key, cls.UNKNOWN)

    @property
    def column(self) -> str:
        return _NET_TYPE_COLUMNS[self]


_NET_TYPE_KEYS = {
    "directallocation": NetType.DIRECT_ALLOCATION,
    "directassignment": NetType.DIRECT_ASSIGNMENT,
    "reallocated": NetType.REALLOCATED,
    "reassigned": NetType.REASSIGNED,
    "unknown": NetType.UNKNOWN,
}
_NET_TYPE_COLUMNS = {
    NetType.DIRECT_ALLOCATION: "direct_allocation",
    NetType.DIRECT_ASSIGNMENT: "direct_assignment",
    NetType.REALLOCATED: "reallocated",
    NetType.REASSIGNED: "reassigned",
    NetType.UNKNOWN: "unknown",
}
NET_TYPE_ORDER = tuple(NetType)


@dataclass(frozen=True, slots=True)
class WhoisSnapshot:
    """One historical IP-WHOIS record. ``owner`` is stored normalized."""

    ip_range_start: IPv4Address
    ip_range_end: IPv4Address
    owner: str
    net_type: NetType
    updated: int
    observed: int

    def __post_init__(self):
        if int(self.ip_range_start) > int(self.ip_range_end):
            raise ValueError(f"range start {self.ip_range_start} > end {self.ip_range_end}")

    def size(self) -> int:
        return int(self.ip_range_end) - int(self.ip_range_start) + 1

    def contains(self, ip: IPv4Address) -> bool:
        return int(self.ip_range_start) <= int(ip) <= int(self.ip_range_end)

    def to_json(self) -> dict:
        return {
            "range_start": str(self.ip_range_start),
            "range_end": str(self.ip_range_end),
            "owner": self.owner,
            "net_type": self.net_type.value,
            "updated": self.updated,
            "observed": self.observed,
        }


def inetnum_size(s: WhoisSnapshot) -> int:
    return s.size()


@dataclass(frozen=True, slots=True)
class AsnRecord:
    cidr: IPv4Network
    asn: int
    org: str

    def to_json(self) -> dict:
        return {"cidr": str(self.cidr), "asn": self.asn, "org": self.org}


class HostingLabel(str, Enum):
    """Stage-1 label space."""

    HOSTING = "hosting"
    NON_HOSTING = "non-hosting"


class SharingLabel(str, Enum):
    """Stage-2 label space (hosting IPs only)."""

    DEDICATED = "dedicated"
    SHARED = "shared"


class Stage(str, Enum):
    HOSTING = "hosting"
    DEDICATED = "dedicated"

    @property
    def labels(self) -> tuple[str, str]:
        if self is Stage.HOSTING:
            return (HostingLabel.HOSTING.value, HostingLabel.NON_HOSTING.value)
        return (SharingLabel.DEDICATED.value, SharingLabel.SHARED.value)

    @property
    def default_positive(self) -> str:
        return self.labels[0]
