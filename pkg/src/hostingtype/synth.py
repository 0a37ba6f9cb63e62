"""Synthetic passive-DNS / IP-WHOIS / ASN corpora with planted ground truth.

Each IP is drawn from a class profile.  Domain counts are negative-binomial
around the profile means; WHOIS histories are drawn per allocation group (a
set of /24 blocks that share one registry history); daily churn is planted
as bursts of departures whose size is solved so that both the mean and the
standard deviation of the per-IP churn series match the profile on average.

Everything flows from one seed, and the same config always yields the same
corpus, byte for byte.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from ipaddress import IPv4Address, IPv4Network
from typing import Optional

import numpy as np
from scipy import stats

from .datamodel import (
    SECONDS_PER_DAY,
    SECONDS_PER_YEAR,
    AsnRecord,
    DomainName,
    HostingLabel,
    NetType,
    PdnsRecord,
    SharingLabel,
    day_index,
)
from .errors import ConfigError
from .ingest import AsnDb, PdnsStore, WhoisStore, parse_whois_object, write_jsonl
from .labeler import DomainWhois, RedirectEdge

# 2021-01-15 12:00:00 UTC
DEFAULT_REFERENCE = 1_610_712_000

TERRITORY_SIZE = 1 << 24
SUFFIXES = ("com", "net", "org", "info", "io", "uk", "co.uk", "org.uk")
_TLDS = ("com", "net", "org", "info", "io", "co.uk")
_STEMS = ("site", "shop", "blog", "web", "app", "mail", "news", "cloud", "store", "media")
_ORG_ADJ = ("Blue", "North", "Prime", "Rapid", "Silver", "Atlas", "Nova", "Summit", "Harbor", "Vertex")
_ORG_NOUN = ("Networks", "Telecom", "Hosting", "Datacenter", "Cloud", "Communications", "Broadband", "Systems")
_NET_TYPE_TEXT = {
    NetType.DIRECT_ALLOCATION: ("Direct Allocation", "DIRECT ALLOCATION"),
    NetType.DIRECT_ASSIGNMENT: ("Direct Assignment", "DIRECT ASSIGNMENT"),
    NetType.REALLOCATED: ("Reallocated", "REALLOCATED"),
    NetType.REASSIGNED: ("Reassigned", "REASSIGNED"),
    NetType.UNKNOWN: (None, ""),
}


# ------------------------------------------------------------------ profiles


@dataclass(frozen=True)
class ClassProfile:
    """Distribution parameters for one class of IPs.

    Means are population targets.  ``fqdn_mean`` below ``tld2_mean +
    tld3_mean`` cannot be realised (every apex and TLD+3 name is itself a
    name); such profiles generate at the effective mean instead.  The same
    holds for ``whois_mean`` below ``owners_mean``, since every owner is
    seen in at least one snapshot.
    """

    name: str
    tld2_mean: float
    tld3_mean: float
    fqdn_mean: float
    owners_mean: float
    whois_mean: float
    inetnum_size_mean: float
    years_since_update_mean: float
    churn_mean: float
    churn_std: float
    duration_mean: float
    duration_std: float
    net_type_weights: tuple[tuple[str, float], ...]
    min_apexes: int = 1
    count_shape: float = 0.3
    owner_shape: float = 5.0
    update_shape: float = 6.0
    size_concentration: float = 0.2
    size_jitter: float = 0.0
    neighbors_mean: float = 0.1
    historical_fraction: float = 0.3
    duration_ip_shape: float = 16.0

    def validate(self) -> "ClassProfile":
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not isinstance(v, bool) and (v < 0 or not math.isfinite(v)):
                raise ConfigError(f"profile {self.name!r}: {f.name} must be a finite value >= 0, got {v}")
        if self.min_apexes < 1:
            raise ConfigError(f"profile {self.name!r}: min_apexes must be >= 1")
        if self.tld2_mean < self.min_apexes:
            raise ConfigError(f"profile {self.name!r}: tld2_mean below min_apexes")
        if self.owners_mean < 1:
            raise ConfigError(f"profile {self.name!r}: owners_mean must be >= 1")
        for attr in ("count_shape", "owner_shape", "update_shape", "size_concentration", "duration_ip_shape"):
            if getattr(self, attr) <= 0:
                raise ConfigError(f"profile {self.name!r}: {attr} must be > 0")
        if not 0 < self.inetnum_size_mean < TERRITORY_SIZE:
            raise ConfigError(f"profile {self.name!r}: inetnum_size_mean must lie in (0, 2^24)")
        if self.duration_mean <= 0 or self.duration_std <= 0:
            raise ConfigError(f"profile {self.name!r}: duration mean and std must be > 0")
        weights = dict(self.net_type_weights)
        try:
            for k in weights:
                NetType(k)
        except ValueError as exc:
            raise ConfigError(f"profile {self.name!r}: {exc}") from exc
        if any(w < 0 for w in weights.values()) or abs(sum(weights.values()) - 1.0) > 1e-9:
            raise ConfigError(f"profile {self.name!r}: net-type weights must be >= 0 and sum to 1")
        return self

    @property
    def effective_fqdn_mean(self) -> float:
        return max(self.fqdn_mean, self.tld2_mean + self.tld3_mean)

    @property
    def effective_whois_mean(self) -> float:
        return max(self.whois_mean, self.owners_mean)

    def whois_key(self) -> tuple:
        """Profiles with equal keys draw from one pool of allocation groups."""
        return (
            self.owners_mean,
            self.whois_mean,
            self.inetnum_size_mean,
            self.years_since_update_mean,
            self.net_type_weights,
            self.owner_shape,
            self.update_shape,
            self.size_concentration,
            self.size_jitter,
            self.neighbors_mean,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["net_type_weights"] = [list(p) for p in self.net_type_weights]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClassProfile":
        d = dict(d)
        if "net_type_weights" in d:
            w = d["net_type_weights"]
            items = w.items() if isinstance(w, dict) else w
            d["net_type_weights"] = tuple((str(k), float(v)) for k, v in items)
        try:
            return cls(**d).validate()
        except TypeError as exc:
            raise ConfigError(f"bad profile: {exc}") from exc


NON_HOSTING = "non-hosting"
HOSTING = "hosting"
DEDICATED = "dedicated"
SHARED = "shared"


def default_profiles() -> dict[str, ClassProfile]:
    """The four class profiles anchored on the published class statistics.

    Net-type weights, distribution shapes and the non-hosting duration
    parameters are not published and are set here.  The hosting profile's
    churn and duration fields are the 50/50 mixture of the two leaf
    profiles; per-IP behaviour is drawn from the leaf of the IP's planted
    dedicated/shared truth.
    """
    hosting = ClassProfile(
        name=HOSTING,
        tld2_mean=452.6,
        tld3_mean=40.3,
        fqdn_mean=691.45,
        owners_mean=6.8,
        whois_mean=3.67,
        inetnum_size_mean=8_652_824.7,
        years_since_update_mean=2.0,
        churn_mean=0.65,
        churn_std=3.295,
        duration_mean=1.75,
        duration_std=1.25,
        net_type_weights=(
            ("DirectAllocation", 0.6),
            ("DirectAssignment", 0.1),
            ("Reallocated", 0.15),
            ("Reassigned", 0.1),
            ("Unknown", 0.05),
        ),
        min_apexes=1,
        count_shape=0.15,
    )
    nonhosting = ClassProfile(
        name=NON_HOSTING,
        tld2_mean=1.06,
        tld3_mean=0.56,
        fqdn_mean=2.07,
        owners_mean=1.2,
        whois_mean=1.26,
        inetnum_size_mean=15_893_510.4,
        years_since_update_mean=7.0,
        churn_mean=0.0,
        churn_std=0.0,
        duration_mean=3.0,
        duration_std=2.0,
        net_type_weights=(
            ("DirectAllocation", 0.15),
            ("DirectAssignment", 0.35),
            ("Reallocated", 0.1),
            ("Reassigned", 0.3),
            ("Unknown", 0.1),
        ),
        min_apexes=1,
        owner_shape=50.0,
    )
    dedicated = replace(
        hosting,
        name=DEDICATED,
        tld2_mean=796.08,
        tld3_mean=43.25,
        fqdn_mean=539.828,
        churn_mean=0.12,
        churn_std=0.68,
        duration_mean=2.3,
        duration_std=1.4,
        min_apexes=2,
        count_shape=1.0,
    )
    shared = replace(
        dedicated,
        name=SHARED,
        tld2_mean=2624.18,
        tld3_mean=609.88,
        fqdn_mean=1650.06,
        churn_mean=1.18,
        churn_std=5.91,
        duration_mean=1.2,
        duration_std=1.1,
    )
    return {p.name: p.validate() for p in (nonhosting, hosting, dedicated, shared)}


# -------------------------------------------------------------------- config


@dataclass(frozen=True)
class MaliciousConfig:
    n_ips: int = 400
    hosting_fraction: float = 0.95
    shared_fraction: float = 0.97
    decoy_fraction: float = 0.2
    unresolved_fraction: float = 0.05
    multi_home_fraction: float = 0.1
    min_positives: int = 5


@dataclass(frozen=True)
class SynthConfig:
    """What to generate.

    ``n_hosting`` IPs use the hosting profile's counts, with a dedicated or
    shared truth drawn at ``shared_fraction``; ``n_dedicated`` and
    ``n_shared`` IPs use the leaf profiles throughout.
    """

    n_nonhosting: int = 0
    n_hosting: int = 0
    n_dedicated: int = 0
    n_shared: int = 0
    shared_fraction: float = 0.5
    malicious: Optional[MaliciousConfig] = None
    privacy_fraction: float = 0.0
    redirect_fraction: float = 0.3
    asn_coverage: float = 0.95
    seed: int = 0
    reference: int = DEFAULT_REFERENCE
    window_days: int = 60
    horizon_years: int = 10
    ips_per_group: int = 10
    noise: bool = True
    profiles: Optional[dict] = None

    def resolved_profiles(self) -> dict[str, ClassProfile]:
        profs = default_profiles()
        for name, p in (self.profiles or {}).items():
            if isinstance(p, ClassProfile):
                profs[name] = p.validate()
            else:
                base = profs.get(name)
                merged = {**(base.to_dict() if base else {}), **dict(p), "name": name}
                profs[name] = ClassProfile.from_dict(merged)
        return profs

    def validate(self) -> "SynthConfig":
        counts = (self.n_nonhosting, self.n_hosting, self.n_dedicated, self.n_shared)
        if any(n < 0 for n in counts):
            raise ConfigError("IP counts must be >= 0")
        if sum(counts) + (self.malicious.n_ips if self.malicious else 0) < 1:
            raise ConfigError("nothing to generate")
        for name in ("shared_fraction", "privacy_fraction", "redirect_fraction", "asn_coverage"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.window_days < 2:
            raise ConfigError("window_days must be >= 2")
        if self.horizon_years < 1:
            raise ConfigError("horizon_years must be >= 1")
        if self.ips_per_group < 1:
            raise ConfigError("ips_per_group must be >= 1")
        if self.malicious is not None:
            m = self.malicious
            if m.n_ips < 1 or not (0 <= m.hosting_fraction <= 1 and 0 <= m.shared_fraction <= 1):
                raise ConfigError("malicious config out of range")
        self.resolved_profiles()
        return self

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("malicious", "profiles")}
        d["malicious"] = asdict(self.malicious) if self.malicious else None
        d["profiles"] = {k: v.to_dict() for k, v in sorted(self.resolved_profiles().items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        mal = d.pop("malicious", None)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        if mal is not None and not isinstance(mal, MaliciousConfig):
            mal = MaliciousConfig(**mal)
        return cls(**d, malicious=mal).validate()


def hosting_gt_config(n: int = 1000, seed: int = 0, **kw) -> SynthConfig:
    """Balanced hosting / non-hosting set, ``n`` IPs per class."""
    return SynthConfig(n_nonhosting=n, n_hosting=n, seed=seed, **kw).validate()


def dedicated_gt_config(n: int = 400, seed: int = 0, **kw) -> SynthConfig:
    """Balanced dedicated / shared set, ``n`` IPs per class."""
    return SynthConfig(n_dedicated=n, n_shared=n, seed=seed, **kw).validate()


# -------------------------------------------------------------------- corpus


@dataclass(frozen=True)
class TruthRow:
    ip: IPv4Address
    stage1_truth: str
    stage2_truth: Optional[str]
    owners: tuple[str, ...]
    malicious: tuple[str, ...] = ()
    cohort: str = ""

    def to_json(self) -> dict:
        return {
            "ip": str(self.ip),
            "stage1_truth": self.stage1_truth,
            "stage2_truth": self.stage2_truth,
            "owners": list(self.owners),
            "malicious": list(self.malicious),
            "cohort": self.cohort,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TruthRow":
        return cls(
            IPv4Address(obj["ip"]),
            obj["stage1_truth"],
            obj.get("stage2_truth"),
            tuple(obj.get("owners", ())),
            tuple(obj.get("malicious", ())),
            obj.get("cohort", ""),
        )


@dataclass
class SynthCorpus:
    config: SynthConfig
    pdns: list[PdnsRecord]
    whois_rows: list[dict]
    asn: list[AsnRecord]
    truth: list[TruthRow]
    domain_whois: list[DomainWhois]
    redirects: list[RedirectEdge]
    vt_feed: list[dict]
    pdns_noise: list[dict] = field(default_factory=list)
    suffixes: tuple[str, ...] = SUFFIXES

    FILES = {
        "pdns": "pdns.jsonl",
        "whois": "whois.jsonl",
        "asn": "asn.jsonl",
        "truth": "truth.jsonl",
        "domain_whois": "domain_whois.jsonl",
        "redirects": "redirects.jsonl",
        "vt_feed": "vt_feed.jsonl",
        "suffixes": "suffixes.txt",
        "config": "synth_config.json",
    }

    def pdns_store(self) -> PdnsStore:
        return PdnsStore(self.pdns)

    def whois_store(self) -> WhoisStore:
        return WhoisStore((parse_whois_object(o) for o in self.whois_rows), self.config.horizon_years)

    def asn_db(self) -> AsnDb:
        return AsnDb(self.asn)

    def domain_whois_map(self) -> dict[str, DomainWhois]:
        return {d.domain: d for d in self.domain_whois}

    def truth_by_ip(self) -> dict[IPv4Address, TruthRow]:
        return {t.ip: t for t in self.truth}

    def ips(self, cohort: str | None = None) -> list[IPv4Address]:
        return [t.ip for t in self.truth if cohort is None or t.cohort == cohort]

    def write(self, out_dir) -> dict[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = {k: os.path.join(out_dir, v) for k, v in self.FILES.items()}
        pdns_lines = [r.to_json() for r in self.pdns] + list(self.pdns_noise)
        pdns_lines.sort(key=lambda o: (o["name"], o["ip"], o["rrtype"]))
        write_jsonl(paths["pdns"], pdns_lines)
        write_jsonl(paths["whois"], self.whois_rows)
        write_jsonl(paths["asn"], (r.to_json() for r in self.asn))
        write_jsonl(paths["truth"], (t.to_json() for t in sorted(self.truth, key=lambda t: int(t.ip))))
        write_jsonl(paths["domain_whois"], (d.to_json() for d in self.domain_whois))
        write_jsonl(paths["redirects"], (e.to_json() for e in self.redirects))
        write_jsonl(paths["vt_feed"], self.vt_feed)
        with open(paths["suffixes"], "w", encoding="utf-8") as fh:
            fh.write("// suffix list for the synthetic corpus\n")
            fh.write("\n".join(self.suffixes) + "\n")
        with open(paths["config"], "w", encoding="utf-8") as fh:
            json.dump(self.config.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
        return paths


def read_truth(path) -> list[TruthRow]:
    with open(path, encoding="utf-8") as fh:
        return [TruthRow.from_json(json.loads(line)) for line in fh if line.strip()]


# ----------------------------------------------------------------- sampling


def _nb(rng: np.random.Generator, mean: float, shape: float, size=None):
    """Negative binomial with the given mean; variance mean + mean^2/shape."""
    if mean <= 0:
        return np.zeros(size, dtype=np.int64) if size is not None else 0
    return rng.negative_binomial(shape, shape / (shape + mean), size=size)


def _stratified(rng: np.random.Generator, n: int) -> np.ndarray:
    """One uniform draw inside each of ``n`` equal strata of (0, 1), shuffled."""
    return (rng.permutation(n) + rng.uniform(0.0, 1.0, n)) / n


def _nb_ppf(q: np.ndarray, mean: float, shape: float) -> np.ndarray:
    if mean <= 0:
        return np.zeros(q.shape, dtype=np.int64)
    return stats.nbinom.ppf(q, shape, shape / (shape + mean)).astype(np.int64)


def burst_size(mu: float, sigma: float, n: int) -> float:
    """Burst size b such that bursts of b departures on Poisson-many days give
    per-IP churn series whose mean is ``mu`` and whose std averages ``sigma``.

    With N burst days out of n the series has mean N*b/n and population std
    b*sqrt(p(1-p)), p = N/n; N ~ Poisson(mu*n/b).
    """
    if mu <= 0:
        return 0.0
    N = np.arange(n + 1)
    p = N / n
    root = np.sqrt(p * (1 - p))

    def avg_sd(b: float) -> float:
        lam = mu * n / b
        pmf = stats.poisson.pmf(N, lam)
        pmf[-1] += stats.poisson.sf(n, lam)
        return b * float(np.sum(pmf * root))

    lo, hi = max(mu * n / n, 1.0), mu * n * 50.0
    if avg_sd(lo) >= sigma:
        return lo
    if avg_sd(hi) <= sigma:
        return hi
    for _ in range(100):
        mid = (lo + hi) / 2
        if avg_sd(mid) < sigma:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _noisy_org(rng: np.random.Generator, canonical: str, r: Optional[int] = None) -> str:
    """A formatting variant that normalizes back to ``canonical``."""
    if r is None:
        r = int(rng.integers(0, 4))
    if r == 0:
        return canonical
    if r == 1:
        return canonical.upper()
    if r == 2:
        return "  " + canonical.replace(" ", "  ") + " "
    return canonical.replace(" ", ", ", 1) + "."


# ---------------------------------------------------------------- generation


@dataclass
class _Group:
    territory: int
    ips: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    addresses: list = field(default_factory=list)
    provider: tuple[int, str] = (0, "")


@dataclass
class _IpPlan:
    ip: IPv4Address
    profile: ClassProfile
    leaf: ClassProfile
    stage1: str
    stage2: Optional[str]
    cohort: str
    malicious: bool = False


class _Generator:
    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg.validate()
        self.profiles = cfg.resolved_profiles()
        self.rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5717]))
        self.R = cfg.reference
        self.ref_day = day_index(self.R)
        self.window_first = self.ref_day - cfg.window_days + 1
        self.apex_counter = 0
        self.registrant_counter = 0
        self.records: list[PdnsRecord] = []
        self.noise: list[dict] = []
        self.whois_rows: list[dict] = []
        self.asn: list[AsnRecord] = []
        self.dwhois: list[DomainWhois] = []
        self.redirects: list[RedirectEdge] = []
        self.ip_apexes: dict[IPv4Address, list[str]] = {}
        self.apex_registrant: dict[str, str] = {}
        self.mal_apexes: dict[IPv4Address, list[str]] = {}
        self.bursts: dict[str, float] = {}

    # -- cohort layout

    def plans(self) -> list[tuple[ClassProfile, ClassProfile, str, Optional[str], str, bool]]:
        cfg, P, rng = self.cfg, self.profiles, self.rng
        out = []
        out += [(P[NON_HOSTING], P[NON_HOSTING], HostingLabel.NON_HOSTING.value, None, "hgt", False)] * cfg.n_nonhosting
        n_sh = int(round(cfg.shared_fraction * cfg.n_hosting))
        leaf_flags = rng.permutation([True] * n_sh + [False] * (cfg.n_hosting - n_sh))
        for is_shared in leaf_flags:
            leaf = P[SHARED] if is_shared else P[DEDICATED]
            out.append((P[HOSTING], leaf, HostingLabel.HOSTING.value, leaf.name, "hgt", False))
        out += [(P[DEDICATED], P[DEDICATED], HostingLabel.HOSTING.value, DEDICATED, "dgt", False)] * cfg.n_dedicated
        out += [(P[SHARED], P[SHARED], HostingLabel.HOSTING.value, SHARED, "dgt", False)] * cfg.n_shared
        m = cfg.malicious
        if m is not None:
            n_h = int(round(m.hosting_fraction * m.n_ips))
            n_s = int(round(m.shared_fraction * n_h))
            out += [(P[NON_HOSTING], P[NON_HOSTING], HostingLabel.NON_HOSTING.value, None, "mal", True)] * (m.n_ips - n_h)
            out += [(P[DEDICATED], P[DEDICATED], HostingLabel.HOSTING.value, DEDICATED, "mal", True)] * (n_h - n_s)
            out += [(P[SHARED], P[SHARED], HostingLabel.HOSTING.value, SHARED, "mal", True)] * n_s
        return out

    # -- address space and WHOIS

    def territories(self) -> list[int]:
        firsts = [o for o in range(1, 224) if o not in (10, 127)]
        return [int(o) << 24 for o in self.rng.permutation(firsts)]

    def layout(self, plans) -> list[_IpPlan]:
        """Deal IPs to allocation groups, place them in /24 blocks, write WHOIS and ASN."""
        rng = self.rng
        pools: dict[tuple, list[int]] = {}
        for i, p in enumerate(plans):
            pools.setdefault(p[0].whois_key(), []).append(i)
        keys = list(pools)
        territories = self.territories()
        n_total = len(plans)
        budget = len(territories)
        want = {k: max(1, math.ceil(len(pools[k]) / self.cfg.ips_per_group)) for k in keys}
        if sum(want.values()) > budget:
            want = {k: max(1, int(budget * len(pools[k]) / n_total)) for k in keys}
        result: list[Optional[_IpPlan]] = [None] * n_total
        t_next = 0
        providers = self._providers()
        for k in keys:
            members = pools[k]
            profile = plans[members[0]][0]
            G = want[k]
            groups = [_Group(territories[t_next + g]) for g in range(G)]
            t_next += G
            order = rng.permutation(len(members))
            for j, idx in enumerate(order):
                groups[j % G].ips.append(members[idx])
            kind = "hosting" if plans[members[0]][2] == HostingLabel.HOSTING.value else "access"
            self._whois_for_pool(profile, groups, kind, providers[kind])
            for g in groups:
                for idx, ip in zip(g.ips, g.addresses):
                    prof, leaf, s1, s2, cohort, mal = plans[idx]
                    result[idx] = _IpPlan(ip, prof, leaf, s1, s2, cohort, mal)
        return result

    def _providers(self) -> dict[str, list[tuple[int, str, float]]]:
        out = {}
        for kind, count, base, label in (("hosting", 10, 64_600, "Hosting Provider"), ("access", 6, 64_700, "Access Network")):
            w = 1.0 / np.arange(1, count + 1)
            out[kind] = [(base + i, f"{label} {i + 1:02d}", float(w[i] / w.sum())) for i in range(count)]
        return out

    def _whois_for_pool(self, prof: ClassProfile, groups: list[_Group], kind: str, providers) -> None:
        rng, R, Y = self.rng, self.R, SECONDS_PER_YEAR
        G = len(groups)
        owners = 1 + _nb_ppf(_stratified(rng, G), prof.owners_mean - 1, prof.owner_shape)
        extras = stats.poisson.ppf(_stratified(rng, G), max(0.0, prof.whois_mean - prof.owners_mean)).astype(np.int64) \
            if prof.whois_mean > prof.owners_mean else np.zeros(G, dtype=np.int64)
        years = stats.gamma.ppf(_stratified(rng, G), prof.update_shape, scale=prof.years_since_update_mean / prof.update_shape)
        r = prof.inetnum_size_mean / TERRITORY_SIZE
        a, b = r * prof.size_concentration, (1 - r) * prof.size_concentration
        latest_ratio = stats.beta.ppf(_stratified(rng, G), a, b)
        types = [NetType(t) for t, _ in prof.net_type_weights]
        weights = np.array([w for _, w in prof.net_type_weights])
        quota = np.floor(weights * G).astype(int)
        rest = np.argsort(-(weights * G - quota), kind="stable")[: G - quota.sum()]
        quota[rest] += 1
        pool_types = [t for t, q in zip(types, quota) for _ in range(q)]
        latest_types = [pool_types[i] for i in rng.permutation(G)]
        prov_w = np.array([p[2] for p in providers])

        for gi, g in enumerate(groups):
            # /24 blocks holding the group's IPs
            blocks: list[list[int]] = []
            left = len(g.ips)
            while left > 0:
                cap = min(254, left, 1 + int(rng.poisson(prof.neighbors_mean)))
                blocks.append(sorted(int(h) for h in rng.choice(np.arange(1, 255), size=cap, replace=False)))
                left -= cap
            start_block = int(rng.integers(0, 65_536 - len(blocks)))
            for bi, hosts in enumerate(blocks):
                base = g.territory + (start_block + bi) * 256
                g.blocks.append(base)
                g.addresses.extend(IPv4Address(base + h) for h in hosts)
            lo = start_block * 256
            hi = (start_block + len(blocks)) * 256 - 1
            extent = hi - lo + 1
            prov = providers[int(rng.choice(len(providers), p=prov_w))]
            g.provider = (prov[0], prov[1])
            for base in g.blocks:
                if rng.random() < self.cfg.asn_coverage:
                    self.asn.append(AsnRecord(IPv4Network((base, 24)), prov[0], prov[1]))

            def draw_range(size: int) -> tuple[int, int]:
                size = int(min(TERRITORY_SIZE, max(extent, size)))
                s_lo = max(0, hi + 1 - size)
                s_hi = min(lo, TERRITORY_SIZE - size)
                start = int(rng.integers(s_lo, s_hi + 1))
                return g.territory + start, g.territory + start + size - 1

            O, X = int(owners[gi]), int(extras[gi])
            K = O + X
            y = float(years[gi])
            last_obs = R - int(rng.uniform(0, min(y, 1.0)) * Y)
            horizon_start = R - int((self.cfg.horizon_years - 0.1) * Y)
            obs = np.sort(rng.integers(horizon_start, last_obs + 1, size=K - 1)).tolist() + [last_obs]
            repeat = set((1 + rng.permutation(K - 1)[:X]).tolist()) if K > 1 else set()
            epoch = -1
            epoch_info = []
            for slot in range(K):
                if slot not in repeat:
                    epoch += 1
                    is_last = epoch == O - 1
                    jitter = 1.0 if is_last else math.exp(rng.normal(0.0, prof.size_jitter))
                    ratio = min(1.0, latest_ratio[gi] * jitter)
                    ntype = latest_types[gi] if is_last else types[int(rng.choice(len(types), p=weights))]
                    name = f"{_ORG_ADJ[rng.integers(len(_ORG_ADJ))]} {_ORG_NOUN[rng.integers(len(_ORG_NOUN))]} {kind[0].upper()}{gi:03d}-{epoch + 1}"
                    epoch_info.append((draw_range(int(round(ratio * TERRITORY_SIZE))), name, ntype))
                (r_lo, r_hi), name, ntype = epoch_info[-1]
                if slot == K - 1:
                    updated = R - int(y * Y)
                else:
                    updated = min(obs[slot], R - int(y * Y)) - int(rng.uniform(0, 1.0) * Y)
                self._emit_whois(r_lo, r_hi, _noisy_org(rng, name) if self.cfg.noise else name, ntype, updated, obs[slot])
            if rng.random() < 0.25:
                stale_obs = R - int((self.cfg.horizon_years + rng.uniform(0.05, 3.0)) * Y)
                r_lo, r_hi = draw_range(int(rng.beta(a, b) * TERRITORY_SIZE))
                self._emit_whois(r_lo, r_hi, f"Former Holder {kind[0].upper()}{gi:03d}", types[0], stale_obs - int(rng.uniform(0, 1) * Y), stale_obs)

    def _emit_whois(self, lo: int, hi: int, owner: str, ntype: NetType, updated: int, observed: int) -> None:
        text = _NET_TYPE_TEXT[ntype][int(self.rng.integers(2))] if self.cfg.noise else ntype.value
        self.whois_rows.append({
            "range_start": str(IPv4Address(lo)),
            "range_end": str(IPv4Address(hi)),
            "owner": owner,
            "net_type": text,
            "updated": updated,
            "observed": observed,
        })

    # -- passive DNS

    def _new_apexes(self, n: int) -> list[str]:
        c = self.apex_counter
        self.apex_counter += n
        stems = self.rng.integers(len(_STEMS), size=n).tolist()
        tlds = self.rng.integers(len(_TLDS), size=n).tolist()
        return [f"{_STEMS[s]}{c + i:07d}.{_TLDS[t]}" for i, (s, t) in enumerate(zip(stems, tlds))]

    def _registrant(self) -> str:
        self.registrant_counter += 1
        return f"Registrant {self.registrant_counter:06d} LLC"

    def _burst(self, leaf: ClassProfile) -> float:
        if leaf.name not in self.bursts:
            self.bursts[leaf.name] = burst_size(leaf.churn_mean, leaf.churn_std, self.cfg.window_days - 1)
        return self.bursts[leaf.name]

    def _intervals(self, leaf: ClassProfile, A: int) -> tuple[np.ndarray, np.ndarray]:
        """(first, last) timestamps per apex with planted churn and durations."""
        rng, R, Y, D = self.rng, self.R, SECONDS_PER_YEAR, SECONDS_PER_DAY
        W = self.cfg.window_days
        m_ip = rng.gamma(leaf.duration_ip_shape, leaf.duration_mean / leaf.duration_ip_shape)
        k = (leaf.duration_mean / leaf.duration_std) ** 2
        dur = np.maximum(1, (rng.gamma(k, m_ip / k, size=A) * Y).astype(np.int64))
        first = np.empty(A, dtype=np.int64)
        last = np.empty(A, dtype=np.int64)
        long_enough = dur >= W * D
        events: list[tuple[int, int]] = []
        b = self._burst(leaf)
        if b > 0:
            n_bursts = min(W - 1, int(rng.poisson(leaf.churn_mean * (W - 1) / b)))
            days = rng.choice(W - 1, size=n_bursts, replace=False)
            eligible = rng.permutation(np.flatnonzero(long_enough)).tolist()
            for t in days:
                size = int(b) + int(rng.random() < b - int(b))
                for _ in range(size):
                    if not eligible:
                        break
                    events.append((eligible.pop(), int(t)))
        is_event = np.zeros(A, dtype=bool)
        for a, t in events:
            is_event[a] = True
            last[a] = (self.window_first + t) * D + int(rng.integers(0, D))
            first[a] = last[a] - dur[a]
        hist = ~long_enough | (rng.random(A) < leaf.historical_fraction)
        for a in np.flatnonzero(~is_event):
            if hist[a]:
                last[a] = self.window_first * D - 1 - int(rng.uniform(0, 2.0) * Y)
            else:
                last[a] = R
            first[a] = last[a] - dur[a]
        return first, last

    def _add_record(self, text: str, suffix_len: int, tld2: str, tld3: Optional[str], ip: IPv4Address, first: int, last: int, count: int):
        self.records.append(PdnsRecord(DomainName(text, suffix_len, tld2, tld3), "A", ip, first, last, count))

    def plant_ip(self, plan: _IpPlan) -> None:
        rng, prof = self.rng, plan.profile
        A = prof.min_apexes + int(_nb(rng, prof.tld2_mean - prof.min_apexes, prof.count_shape))
        if plan.stage2 == SHARED:
            A = max(A, 2)  # two owners need two apexes
        T = int(_nb(rng, prof.tld3_mean, prof.count_shape))
        d_mean = prof.effective_fqdn_mean - prof.tld2_mean - prof.tld3_mean
        p_t = 1.0 - (prof.count_shape / (prof.count_shape + prof.tld3_mean)) ** prof.count_shape if prof.tld3_mean > 0 else 0.0
        Dn = int(_nb(rng, d_mean / p_t, prof.count_shape)) if T > 0 and p_t > 0 else 0
        apexes = self._new_apexes(A)
        first, last = self._intervals(plan.leaf, A)
        suffix = [2 if a.endswith(".co.uk") else 1 for a in apexes]
        fl, ll = first.tolist(), last.tolist()
        t_owner = rng.integers(0, A, size=T).tolist()
        tld3_names: list[tuple[str, int, str]] = []
        per_apex = [0] * A
        for j in t_owner:
            apex = apexes[j]
            name = f"h{per_apex[j]}.{apex}"
            per_apex[j] += 1
            tld3_names.append((name, int(j), apex))
        counts = iter(rng.integers(1, 50, size=A + T + Dn).tolist())
        for j, apex in enumerate(apexes):
            self._add_record(apex, suffix[j], apex, None, plan.ip, fl[j], ll[j], next(counts))
        for name, j, apex in tld3_names:
            self._add_record(name, suffix[j], apex, name, plan.ip, fl[j], ll[j], next(counts))
        if Dn:
            hosts = rng.integers(0, len(tld3_names), size=Dn).tolist()
            for k, h in enumerate(hosts):
                name, j, apex = tld3_names[h]
                self._add_record(f"n{k}.{name}", suffix[j], apex, name, plan.ip, fl[j], ll[j], next(counts))
        if self.cfg.noise and rng.random() < 0.05:
            self.noise.append({"name": f"alias.{apexes[0]}", "rrtype": "CNAME", "ip": apexes[0], "time_first": int(first[0]), "time_last": int(last[0]), "count": 1})
        self.ip_apexes[plan.ip] = apexes
        self._plant_registrants(plan, apexes)

    def _plant_registrants(self, plan: _IpPlan, apexes: list[str]) -> None:
        rng = self.rng
        if plan.stage2 == DEDICATED:
            owner = self._registrant()
            for a in apexes:
                self.apex_registrant[a] = owner
            if len(apexes) >= 2 and rng.random() < self.cfg.redirect_fraction:
                sink = apexes[0]
                for i, a in enumerate(apexes[1:], start=1):
                    via = apexes[1] if i >= 2 and rng.random() < 0.3 else sink
                    self.redirects.append(RedirectEdge(a, via))
        elif plan.stage2 == SHARED:
            k = min(len(apexes), 2 + int(rng.poisson(3)))
            pool = [self._registrant() for _ in range(k)]
            picks = np.concatenate([np.arange(k), rng.integers(0, k, size=len(apexes) - k)])
            for a, i in zip(apexes, rng.permutation(picks)):
                self.apex_registrant[a] = pool[int(i)]
        else:
            for a in apexes:
                self.apex_registrant[a] = self._registrant()

    def plant_malicious(self, plans: list[_IpPlan]) -> None:
        m = self.cfg.malicious
        if m is None:
            return
        rng = self.rng
        mal = [p for p in plans if p.malicious]
        for p in mal:
            apexes = self.ip_apexes[p.ip]
            if p.stage2 is None:
                k = 1
            elif p.stage2 == DEDICATED:
                k = min(len(apexes), 1 + int(rng.poisson(1)))
            else:
                k = min(len(apexes), 1 + int(rng.poisson(2)))
            self.mal_apexes[p.ip] = sorted(rng.choice(apexes, size=k, replace=False).tolist())
        shared = [p for p in mal if p.stage2 == SHARED]
        if len(shared) >= 2:
            for p in shared:
                if rng.random() >= m.multi_home_fraction:
                    continue
                other = shared[int(rng.integers(len(shared)))]
                if other.ip == p.ip:
                    continue
                apex = self.mal_apexes[p.ip][0]
                if apex in self.ip_apexes[other.ip]:
                    continue
                f, l = self._intervals(other.leaf, 1)
                s = 2 if apex.endswith(".co.uk") else 1
                self._add_record(apex, s, apex, None, other.ip, int(f[0]), int(l[0]), int(rng.integers(1, 50)))
                self.ip_apexes[other.ip].append(apex)
                self.mal_apexes[other.ip] = sorted(set(self.mal_apexes[other.ip]) | {apex})

    def vt_feed(self) -> list[dict]:
        m = self.cfg.malicious
        if m is None:
            return []
        rng = self.rng
        feed = []
        bad = sorted({a for v in self.mal_apexes.values() for a in v})
        for a in bad:
            name = a if rng.random() < 0.7 else f"login.{a}"
            feed.append({"domain": name, "positives": int(rng.integers(m.min_positives, 40))})
            if rng.random() < 0.1:
                feed.append({"domain": a, "positives": int(rng.integers(m.min_positives, 40))})
        benign = sorted({a for ip in self.mal_apexes for a in self.ip_apexes[ip]} - set(bad))
        n_decoy = min(len(benign), int(round(m.decoy_fraction * len(bad))))
        for a in rng.choice(benign, size=n_decoy, replace=False) if n_decoy else []:
            feed.append({"domain": str(a), "positives": int(rng.integers(1, m.min_positives))})
        for i in range(int(round(m.unresolved_fraction * len(bad)))):
            feed.append({"domain": f"ghost{i:05d}.com", "positives": int(rng.integers(m.min_positives, 40))})
        order = rng.permutation(len(feed))
        return [feed[i] for i in order]

    def domain_whois(self) -> list[DomainWhois]:
        rng, out = self.rng, []
        apexes = sorted(self.apex_registrant)
        private = (rng.random(len(apexes)) < self.cfg.privacy_fraction).tolist()
        variants = rng.integers(0, 4, size=len(apexes)).tolist()
        for apex, priv, r in zip(apexes, private, variants):
            if priv:
                out.append(DomainWhois(apex, "REDACTED FOR PRIVACY", True))
            else:
                reg = self.apex_registrant[apex]
                out.append(DomainWhois(apex, _noisy_org(rng, reg, r) if self.cfg.noise else reg, False))
        return out

    def run(self) -> SynthCorpus:
        plans = self.layout(self.plans())
        for p in plans:
            self.plant_ip(p)
        self.plant_malicious(plans)
        truth = []
        for p in plans:
            owners = tuple(sorted({self.apex_registrant[a] for a in self.ip_apexes[p.ip]}))
            truth.append(TruthRow(p.ip, p.stage1, p.stage2, owners, tuple(self.mal_apexes.get(p.ip, ())), p.cohort))
        vt = self.vt_feed()
        dw = self.domain_whois()
        return SynthCorpus(
            config=self.cfg,
            pdns=self.records,
            whois_rows=self.whois_rows,
            asn=sorted(self.asn, key=lambda r: int(r.cidr.network_address)),
            truth=truth,
            domain_whois=dw,
            redirects=self.redirects,
            vt_feed=vt,
            pdns_noise=self.noise,
        )


def generate(config: SynthConfig) -> SynthCorpus:
    """Generate a corpus; the same config (seed included) gives the same corpus."""
    return _Generator(config).run()
