"""Hosting / non-hosting feature vector (16 features, 20 model columns)."""

from __future__ import annotations

from dataclasses import dataclass, fields
from ipaddress import IPv4Address

from .datamodel import NET_TYPE_ORDER, SECONDS_PER_YEAR, NetType, Prefix24, inetnum_size
from .ingest import PdnsStore, WhoisStore

# f15 for an IP without any WHOIS history
NO_WHOIS_YEARS = 10.0

HOSTING_SCHEMA: tuple[str, ...] = (
    "f1_num_tld2",
    "f2_num_tld3",
    "f3_num_domains",
    "f4_pct_dns_in_24",
    "f5_mean_tld3_in_24",
    "f6_max_tld3_in_24",
    "f7_mean_tld2_in_24",
    "f8_max_tld2_in_24",
    "f9_num_owners",
    "f10_num_inetnums",
    "f11_max_inetnum_size",
    "f12_min_inetnum_size",
    "f13_inetnum_size",
    *(f"f14_{t.column}" for t in NET_TYPE_ORDER),
    "f15_years_since_update",
    "f16_num_whois",
)


@dataclass(frozen=True)
class HostingFeatures:
    f1_num_tld2: int = 0
    f2_num_tld3: int = 0
    f3_num_domains: int = 0
    f4_pct_dns_in_24: float = 0.0
    f5_mean_tld3_in_24: float = 0.0
    f6_max_tld3_in_24: int = 0
    f7_mean_tld2_in_24: float = 0.0
    f8_max_tld2_in_24: int = 0
    f9_num_owners: int = 0
    f10_num_inetnums: int = 0
    f11_max_inetnum_size: int = 0
    f12_min_inetnum_size: int = 0
    f13_inetnum_size: int = 0
    f14_net_type: NetType = NetType.UNKNOWN
    f15_years_since_update: float = NO_WHOIS_YEARS
    f16_num_whois: int = 0

    def as_row(self) -> list[float]:
        """Model-boundary encoding: f14 expanded to five one-hot columns."""
        values = [getattr(self, name) for name in _FIELD_NAMES]
        onehot = [1.0 if self.f14_net_type is t else 0.0 for t in NET_TYPE_ORDER]
        return [float(v) for v in values[:13]] + onehot + [float(values[14]), float(values[15])]

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


_FIELD_NAMES = HostingFeatures.field_names()


def resolution_counts(store: PdnsStore, ip: IPv4Address) -> tuple[int, int, int]:
    tld2, tld3, names = store.name_sets(ip)
    return len(tld2), len(tld3), len(names)


def prefix_stats(store: PdnsStore, ip: IPv4Address) -> tuple[float, float, int, float, int]:
    """Statistics over the 256 addresses of the /24 containing ``ip``.

    Means divide by 256, so addresses without records count as zeros.
    """
    populated = store.prefix_ips(Prefix24.of(ip))
    if not populated:
        return 0.0, 0.0, 0, 0.0, 0
    n2 = []
    n3 = []
    for other in populated:
        t2, t3, _ = store.name_sets(other)
        n2.append(len(t2))
        n3.append(len(t3))
    return (
        100.0 * len(populated) / 256,
        sum(n3) / 256,
        max(n3),
        sum(n2) / 256,
        max(n2),
    )


def whois_history_features(store: WhoisStore, ip: IPv4Address, reference: int):
    """Features 9-16 over the snapshots in the look-back horizon."""
    history = store.history(ip, reference)
    if not history:
        return 0, 0, 0, 0, 0, NetType.UNKNOWN, NO_WHOIS_YEARS, 0
    owners = {s.owner for s in history}
    ranges = {(int(s.ip_range_start), int(s.ip_range_end)) for s in history}
    sizes = [e - s + 1 for s, e in ranges]
    latest = history[-1]
    last_update = max(s.updated for s in history)
    years = max(0.0, (reference - last_update) / SECONDS_PER_YEAR)
    return (
        len(owners),
        len(ranges),
        max(sizes),
        min(sizes),
        inetnum_size(latest),
        latest.net_type,
        years,
        len(history),
    )


def extract_hosting_features(pdns: PdnsStore, whois: WhoisStore, ip: IPv4Address, reference: int) -> HostingFeatures:
    return HostingFeatures(
        *resolution_counts(pdns, ip),
        *prefix_stats(pdns, ip),
        *whois_history_features(whois, ip, reference),
    )
