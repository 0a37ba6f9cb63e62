"""Measurement products over classified IPs that host malicious domains.

The malicious unit is the apex.  A malicious apex seen on several IPs counts
once per IP for IP-level statistics and once per provider for rankings.
"""

from __future__ import annotations

import csv
import json
import os
from collections import defaultdict
from dataclasses import dataclass, field
from ipaddress import IPv4Address
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .datamodel import apex_of, format_ip
from .errors import AnalysisError, ConfigError
from .ingest import AsnDb, LoadStats, PdnsStore, _int_field, _iter_objects, _str_field
from .pipeline import IpVerdict, Stage1, Stage2

UNKNOWN_ORG = "UNKNOWN"
DEFAULT_MIN_POSITIVES = 5


@dataclass(frozen=True)
class MaliciousDomainSet:
    apexes: frozenset[str]
    min_positives: int = DEFAULT_MIN_POSITIVES
    n_lines: int = 0
    n_below_threshold: int = 0
    n_malformed: int = 0

    def __post_init__(self):
        if self.min_positives < 1:
            raise ConfigError(f"min_positives must be >= 1, got {self.min_positives}")

    def __len__(self) -> int:
        return len(self.apexes)

    def __contains__(self, apex: object) -> bool:
        return apex in self.apexes


def _parse_feed(obj: dict, suffixes) -> tuple[Optional[str], int]:
    return apex_of(_str_field(obj, "domain"), suffixes), _int_field(obj, "positives")


def filter_vt_feed(path, min_positives: int = DEFAULT_MIN_POSITIVES, suffixes=None, strict: bool = False) -> MaliciousDomainSet:
    """Apexes of feed domains flagged by at least ``min_positives`` scanners."""
    if min_positives < 1:
        raise ConfigError(f"min_positives must be >= 1, got {min_positives}")
    stats = LoadStats()
    keep: set[str] = set()
    below = 0
    for apex, pos in _iter_objects(path, strict, stats, lambda o: _parse_feed(o, suffixes)):
        if pos < min_positives:
            below += 1
        elif apex is not None:
            keep.add(apex)
    return MaliciousDomainSet(frozenset(keep), min_positives, stats.lines, below, stats.malformed)


def resolve_malicious(pdns: PdnsStore, mal: MaliciousDomainSet | Iterable[str]) -> dict[IPv4Address, frozenset[str]]:
    """IP to the malicious apexes it hosts; IPs with none are left out."""
    apexes = mal.apexes if isinstance(mal, MaliciousDomainSet) else frozenset(mal)
    out: dict[IPv4Address, set[str]] = defaultdict(set)
    for a in apexes:
        for ip in pdns.ips_for_apex(a):
            out[ip].add(a)
    return {ip: frozenset(out[ip]) for ip in sorted(out, key=int)}


def unresolved_apexes(pdns: PdnsStore, mal: MaliciousDomainSet | Iterable[str]) -> list[str]:
    apexes = mal.apexes if isinstance(mal, MaliciousDomainSet) else frozenset(mal)
    return sorted(a for a in apexes if not pdns.ips_for_apex(a))


def _verdict_map(verdicts: Iterable[IpVerdict]) -> dict[IPv4Address, IpVerdict]:
    return {v.ip: v for v in verdicts}


def _require(verdicts: Mapping[IPv4Address, IpVerdict], ips: Iterable[IPv4Address]) -> None:
    missing = sorted((ip for ip in ips if ip not in verdicts), key=int)
    if missing:
        shown = ", ".join(format_ip(ip) for ip in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise AnalysisError(f"no verdict for {len(missing)} IP(s): {shown}{more}")


def _pct(a: int, b: int) -> Optional[float]:
    return 100.0 * a / (a + b) if a + b else None


# ------------------------------------------------------------------ splits


@dataclass(frozen=True)
class SplitCounts:
    hosting: int = 0
    non_hosting: int = 0
    abstain_1: int = 0
    error: int = 0
    shared: int = 0
    dedicated: int = 0
    abstain_2: int = 0

    @property
    def decided_1(self) -> int:
        return self.hosting + self.non_hosting

    @property
    def decided_2(self) -> int:
        return self.shared + self.dedicated

    def to_dict(self) -> dict:
        return {
            "hosting": self.hosting,
            "non_hosting": self.non_hosting,
            "abstain_1": self.abstain_1,
            "error": self.error,
            "shared": self.shared,
            "dedicated": self.dedicated,
            "abstain_2": self.abstain_2,
            "pct_hosting": _pct(self.hosting, self.non_hosting),
            "pct_non_hosting": _pct(self.non_hosting, self.hosting),
            "pct_shared": _pct(self.shared, self.dedicated),
            "pct_dedicated": _pct(self.dedicated, self.shared),
        }


def _count(pairs: Iterable[tuple[IpVerdict, int]]) -> SplitCounts:
    c = defaultdict(int)
    for v, w in pairs:
        if v.stage1 is Stage1.HOSTING:
            c["hosting"] += w
        elif v.stage1 is Stage1.NON_HOSTING:
            c["non_hosting"] += w
        elif v.stage1 is Stage1.ABSTAIN:
            c["abstain_1"] += w
        else:
            c["error"] += w
        if v.stage2 is Stage2.SHARED:
            c["shared"] += w
        elif v.stage2 is Stage2.DEDICATED:
            c["dedicated"] += w
        elif v.stage2 is Stage2.ABSTAIN:
            c["abstain_2"] += w
        elif v.stage2 is Stage2.ERROR:
            c["error"] += w
    return SplitCounts(**c)


@dataclass(frozen=True)
class SplitReport:
    """Stage splits over the IPs hosting malicious apexes.

    ``by_ip`` counts each IP once; ``by_domain`` weights it by how many
    malicious apexes it hosts.
    """

    n_ips: int
    by_ip: SplitCounts
    by_domain: SplitCounts

    @property
    def no_decided_ips(self) -> bool:
        return self.by_ip.decided_1 == 0

    def to_dict(self) -> dict:
        return {
            "n_ips": self.n_ips,
            "no_decided_ips": self.no_decided_ips,
            "by_ip": self.by_ip.to_dict(),
            "by_domain": self.by_domain.to_dict(),
        }


def hosting_split_report(verdicts: Iterable[IpVerdict], ip_to_mal: Mapping[IPv4Address, Iterable[str]]) -> SplitReport:
    vm = _verdict_map(verdicts)
    _require(vm, ip_to_mal)
    ips = sorted(ip_to_mal, key=int)
    by_ip = _count((vm[ip], 1) for ip in ips)
    by_dom = _count((vm[ip], len(set(ip_to_mal[ip]))) for ip in ips)
    return SplitReport(len(ips), by_ip, by_dom)


# --------------------------------------------------------- per-IP distribution


@dataclass(frozen=True, slots=True)
class SharedIpRow:
    ip: IPv4Address
    n_total: int
    n_malicious: int
    stage2: str


def ecdf(values: Iterable[int | float]) -> list[tuple[float, float]]:
    """Points (x, F(x)) at each distinct value, F being the fraction <= x."""
    xs = sorted(values)
    n = len(xs)
    out = []
    for i, x in enumerate(xs):
        if i + 1 == n or xs[i + 1] != x:
            out.append((x, (i + 1) / n))
    return out


@dataclass(frozen=True)
class SharedDistribution:
    rows: tuple[SharedIpRow, ...]
    cdf_total: tuple[tuple[float, float], ...]
    cdf_malicious: tuple[tuple[float, float], ...]


def per_ip_distribution(
    pdns: PdnsStore,
    verdicts: Iterable[IpVerdict],
    ip_to_mal: Mapping[IPv4Address, Iterable[str]],
) -> SharedDistribution:
    """Total and malicious apex counts for every IP classified shared."""
    rows = []
    for v in sorted(verdicts, key=lambda v: int(v.ip)):
        if v.stage2 is not Stage2.SHARED:
            continue
        mal = set(ip_to_mal.get(v.ip, ()))
        rows.append(SharedIpRow(v.ip, len(pdns.apexes(v.ip)), len(mal), v.stage2.value))
    return SharedDistribution(
        tuple(rows),
        tuple(ecdf(r.n_total for r in rows)),
        tuple(ecdf(r.n_malicious for r in rows)),
    )


# ---------------------------------------------------------------- providers


@dataclass(frozen=True, slots=True)
class ProviderAggregate:
    org: str
    n_domains_total: int = 0
    n_malicious_shared: int = 0
    n_malicious_dedicated: int = 0

    def __post_init__(self):
        if min(self.n_domains_total, self.n_malicious_shared, self.n_malicious_dedicated) < 0:
            raise AnalysisError(f"negative count for provider {self.org!r}")


@dataclass(frozen=True)
class Conservation:
    """Malicious apex-IP pairs split by where they end up.

    ``shared + dedicated + unknown + undecided == total`` always holds;
    ``unknown`` holds stage-2 decided pairs on IPs with no ASN match.
    """

    shared: int
    dedicated: int
    unknown: int
    undecided: int
    total: int

    @property
    def balanced(self) -> bool:
        return self.shared + self.dedicated + self.unknown + self.undecided == self.total

    def to_dict(self) -> dict:
        return {
            "shared": self.shared,
            "dedicated": self.dedicated,
            "unknown": self.unknown,
            "undecided": self.undecided,
            "total": self.total,
            "balanced": self.balanced,
        }


@dataclass(frozen=True)
class ProviderRanking:
    k: int
    by_total: tuple[tuple[str, int], ...]
    by_shared: tuple[tuple[str, int], ...]
    by_dedicated: tuple[tuple[str, int], ...]
    aggregates: tuple[ProviderAggregate, ...]
    conservation: Conservation

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "by_total": [list(p) for p in self.by_total],
            "by_shared": [list(p) for p in self.by_shared],
            "by_dedicated": [list(p) for p in self.by_dedicated],
            "conservation": self.conservation.to_dict(),
        }


def _top(counts: Mapping[str, int], k: int) -> tuple[tuple[str, int], ...]:
    ranked = sorted(((org, n) for org, n in counts.items() if n > 0), key=lambda p: (-p[1], p[0]))
    return tuple(ranked[:k])


def provider_ranking(
    asn: AsnDb,
    pdns: PdnsStore,
    verdicts: Iterable[IpVerdict],
    ip_to_mal: Mapping[IPv4Address, Iterable[str]],
    k: int = 5,
) -> ProviderRanking:
    """Top-k providers by all apexes, malicious apexes on shared IPs, and on dedicated IPs.

    All-apex totals run over every IP in ``pdns``.  Counts are distinct
    (apex, org) pairs.  Unmatched IPs fall under ``UNKNOWN``.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    org_cache: dict[IPv4Address, str] = {}

    def org_of(ip: IPv4Address) -> str:
        if ip not in org_cache:
            rec = asn.lookup(ip)
            org_cache[ip] = rec.org if rec is not None else UNKNOWN_ORG
        return org_cache[ip]

    total: dict[str, set[str]] = defaultdict(set)
    for ip in pdns.ips():
        total[org_of(ip)].update(pdns.apexes(ip))

    vm = _verdict_map(verdicts)
    shared: dict[str, set[str]] = defaultdict(set)
    dedicated: dict[str, set[str]] = defaultdict(set)
    pairs = {"shared": 0, "dedicated": 0, "unknown": 0, "undecided": 0}
    for ip in sorted(ip_to_mal, key=int):
        mal = set(ip_to_mal[ip])
        v = vm.get(ip)
        st2 = v.stage2 if v is not None else None
        if st2 is Stage2.SHARED or st2 is Stage2.DEDICATED:
            org = org_of(ip)
            (shared if st2 is Stage2.SHARED else dedicated)[org].update(mal)
            if org == UNKNOWN_ORG:
                pairs["unknown"] += len(mal)
            else:
                pairs["shared" if st2 is Stage2.SHARED else "dedicated"] += len(mal)
        else:
            pairs["undecided"] += len(mal)
    n_pairs = sum(len(set(m)) for m in ip_to_mal.values())

    orgs = sorted(set(total) | set(shared) | set(dedicated))
    aggs = tuple(ProviderAggregate(o, len(total.get(o, ())), len(shared.get(o, ())), len(dedicated.get(o, ()))) for o in orgs)
    return ProviderRanking(
        k=k,
        by_total=_top({a.org: a.n_domains_total for a in aggs}, k),
        by_shared=_top({a.org: a.n_malicious_shared for a in aggs}, k),
        by_dedicated=_top({a.org: a.n_malicious_dedicated for a in aggs}, k),
        aggregates=aggs,
        conservation=Conservation(total=n_pairs, **pairs),
    )


# ------------------------------------------------------------------- bundle


@dataclass(frozen=True)
class AnalysisReport:
    malicious: MaliciousDomainSet
    n_resolved_ips: int
    unresolved: tuple[str, ...]
    splits: SplitReport
    distribution: SharedDistribution
    providers: ProviderRanking
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "malicious_apexes": len(self.malicious),
            "min_positives": self.malicious.min_positives,
            "feed_lines": self.malicious.n_lines,
            "feed_below_threshold": self.malicious.n_below_threshold,
            "resolved_ips": self.n_resolved_ips,
            "unresolved_apexes": len(self.unresolved),
            "splits": self.splits.to_dict(),
            "shared_ips": len(self.distribution.rows),
            "providers": self.providers.to_dict(),
            **self.extra,
        }


def analyze(
    pdns: PdnsStore,
    asn: AsnDb,
    verdicts: Sequence[IpVerdict],
    mal: MaliciousDomainSet,
    k: int = 5,
) -> AnalysisReport:
    ip_to_mal = resolve_malicious(pdns, mal)
    return AnalysisReport(
        malicious=mal,
        n_resolved_ips=len(ip_to_mal),
        unresolved=tuple(unresolved_apexes(pdns, mal)),
        splits=hosting_split_report(verdicts, ip_to_mal),
        distribution=per_ip_distribution(pdns, verdicts, ip_to_mal),
        providers=provider_ranking(asn, pdns, verdicts, ip_to_mal, k),
    )


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_report(out_dir, report: AnalysisReport) -> list[Path]:
    """Summary JSON plus CSV tables; returns the written paths."""
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    paths = {
        "summary": out / "summary.json",
        "shared": out / "shared_ips.csv",
        "cdf_total": out / "cdf_total_domains.csv",
        "cdf_mal": out / "cdf_malicious_domains.csv",
        "providers": out / "providers.csv",
        "top": out / "top_providers.csv",
    }
    with open(paths["summary"], "w", encoding="utf-8") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    d = report.distribution
    _write_rows(paths["shared"], ["ip", "n_total", "n_malicious", "stage2"],
                ([format_ip(r.ip), r.n_total, r.n_malicious, r.stage2] for r in d.rows))
    _write_rows(paths["cdf_total"], ["x", "F"], d.cdf_total)
    _write_rows(paths["cdf_mal"], ["x", "F"], d.cdf_malicious)
    p = report.providers
    _write_rows(paths["providers"], ["org", "n_domains_total", "n_malicious_shared", "n_malicious_dedicated"],
                ([a.org, a.n_domains_total, a.n_malicious_shared, a.n_malicious_dedicated] for a in p.aggregates))
    top_rows = []
    for name, lst in (("all_domains", p.by_total), ("malicious_shared", p.by_shared), ("malicious_dedicated", p.by_dedicated)):
        top_rows.extend((name, rank, org, n) for rank, (org, n) in enumerate(lst, start=1))
    _write_rows(paths["top"], ["list", "rank", "org", "count"], top_rows)
    return list(paths.values())
