"""Dedicated / shared feature vector: domain counts, ownership, churn, duration."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from ipaddress import IPv4Address
from typing import Sequence

import numpy as np

from .datamodel import SECONDS_PER_YEAR, day_index
from .features_hosting import resolution_counts, whois_history_features
from .ingest import PdnsStore, WhoisStore

CHURN_WINDOW_DAYS = 60

DEDICATED_SCHEMA: tuple[str, ...] = (
    "g1_num_tld2",
    "g2_num_tld3",
    "g3_num_domains",
    "g4_num_owners",
    "g5_num_whois",
    "g6_avg_daily_churn",
    "g7_std_daily_churn",
    "g8_avg_duration",
    "g9_std_duration",
)


@dataclass(frozen=True)
class DedicatedFeatures:
    g1_num_tld2: int = 0
    g2_num_tld3: int = 0
    g3_num_domains: int = 0
    g4_num_owners: int = 0
    g5_num_whois: int = 0
    g6_avg_daily_churn: float = 0.0
    g7_std_daily_churn: float = 0.0
    g8_avg_duration: float = 0.0
    g9_std_duration: float = 0.0

    def as_row(self) -> list[float]:
        return [float(getattr(self, name)) for name in DEDICATED_SCHEMA]

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def mean_pstd(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation.

    A constant series yields exactly 0.0 for the deviation.
    """
    n = len(values)
    if n == 0:
        raise ValueError("empty series")
    first = values[0]
    if all(v == first for v in values):
        return float(first), 0.0
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def _activity_matrix(store: PdnsStore, ip: IPv4Address, first_day: int, n_days: int) -> np.ndarray:
    """Boolean (apex x day) matrix of apex activity over ``n_days`` days."""
    spans = store.apex_intervals(ip)
    active = np.zeros((len(spans), n_days), dtype=bool)
    for row, intervals in enumerate(spans.values()):
        for t_first, t_last in intervals:
            lo = day_index(t_first) - first_day
            hi = day_index(t_last) - first_day
            if hi < 0 or lo >= n_days:
                continue
            active[row, max(lo, 0):min(hi, n_days - 1) + 1] = True
    return active


def daily_churn_series(store: PdnsStore, ip: IPv4Address, reference: int, window_days: int = CHURN_WINDOW_DAYS) -> list[int]:
    """Size of the symmetric difference of consecutive daily apex sets.

    The window is the ``window_days`` UTC days ending with the day containing
    ``reference``; the series has ``window_days - 1`` entries.
    """
    if window_days < 2:
        raise ValueError("window_days must be >= 2")
    first_day = day_index(reference) - window_days + 1
    active = _activity_matrix(store, ip, first_day, window_days)
    if active.shape[0] == 0:
        return [0] * (window_days - 1)
    flips = active[:, 1:] != active[:, :-1]
    return [int(v) for v in flips.sum(axis=0)]


def churn_stats(series: Sequence[float]) -> tuple[float, float]:
    if len(series) == 0:
        raise ValueError("churn series is empty (window too small)")
    return mean_pstd(series)


def duration_stats(store: PdnsStore, ip: IPv4Address) -> tuple[float, float]:
    """Mean and population std, in years, of per-apex hosting durations on ``ip``."""
    spans = store.apex_intervals(ip)
    if not spans:
        return 0.0, 0.0
    durations = [
        (max(last for _, last in iv) - min(first for first, _ in iv)) / SECONDS_PER_YEAR
        for iv in spans.values()
    ]
    return mean_pstd(durations)


def extract_dedicated_features(
    pdns: PdnsStore,
    whois: WhoisStore,
    ip: IPv4Address,
    reference: int,
    window_days: int = CHURN_WINDOW_DAYS,
) -> DedicatedFeatures:
    g1, g2, g3 = resolution_counts(pdns, ip)
    hist = whois_history_features(whois, ip, reference)
    g6, g7 = churn_stats(daily_churn_series(pdns, ip, reference, window_days))
    g8, g9 = duration_stats(pdns, ip)
    return DedicatedFeatures(g1, g2, g3, hist[0], hist[7], g6, g7, g8, g9)

