"""Two-stage classification with a confidence gate at each stage.

Stage 1 separates hosting from non-hosting IPs; IPs confidently called
hosting go on to stage 2 (dedicated vs shared).  A stage abstains when
neither class reaches the threshold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from ipaddress import IPv4Address
from typing import Iterable, Optional, Sequence

import numpy as np

from .datamodel import HostingLabel, SharingLabel, Stage, format_ip, parse_ip
from .errors import ConfigError, IngestError, SchemaMismatchError, StageMismatchError
from .features_dedicated import CHURN_WINDOW_DAYS
from .featureset import feature_row, schema_for
from .forest.ensemble import ForestModel
from .ingest import PdnsStore, WhoisStore

DEFAULT_THRESHOLD = 0.95
ABSTAIN = "abstain"
ERROR = "error"
NA = "NA"


class Stage1(str, Enum):
    HOSTING = HostingLabel.HOSTING.value
    NON_HOSTING = HostingLabel.NON_HOSTING.value
    ABSTAIN = ABSTAIN
    ERROR = ERROR


class Stage2(str, Enum):
    DEDICATED = SharingLabel.DEDICATED.value
    SHARED = SharingLabel.SHARED.value
    ABSTAIN = ABSTAIN
    ERROR = ERROR


@dataclass(frozen=True, slots=True)
class IpVerdict:
    ip: IPv4Address
    p_hosting: Optional[float]
    stage1: Stage1
    p_shared: Optional[float] = None
    stage2: Optional[Stage2] = None
    pdns_present: bool = True
    whois_present: bool = True
    error: str = ""


def gate(p_pos: float, p_neg: float, threshold: float, pos, neg, abstain):
    """Positive if p_pos clears the threshold, else negative if p_neg does, else abstain."""
    if p_pos >= threshold:
        return pos
    if p_neg >= threshold:
        return neg
    return abstain


def _check_threshold(t: float) -> float:
    if not 0.5 <= t <= 1.0:
        raise ConfigError(f"confidence threshold must lie in [0.5, 1], got {t}")
    return t


def check_models(m1: ForestModel, m2: Optional[ForestModel]) -> None:
    if m1.stage != Stage.HOSTING.value:
        raise StageMismatchError(f"stage-1 model is tagged {m1.stage!r}, expected 'hosting'")
    if tuple(m1.schema) != schema_for(Stage.HOSTING):
        raise SchemaMismatchError("stage-1 model schema does not match the hosting feature schema")
    if m2 is not None:
        if m2.stage != Stage.DEDICATED.value:
            raise StageMismatchError(f"stage-2 model is tagged {m2.stage!r}, expected 'dedicated'")
        if tuple(m2.schema) != schema_for(Stage.DEDICATED):
            raise SchemaMismatchError("stage-2 model schema does not match the dedicated feature schema")


def _probs(model: ForestModel, X: np.ndarray, pos: str, neg: str) -> tuple[np.ndarray, np.ndarray]:
    # both columns come straight from vote fractions, so p_pos + p_neg is exact
    proba = model.predict_proba_matrix(X)
    return proba[:, model.labels.index(pos)], proba[:, model.labels.index(neg)]


@dataclass(frozen=True)
class BatchSummary:
    n_total: int
    n_hosting: int
    n_nonhosting: int
    n_abstain_1: int
    n_shared: int
    n_dedicated: int
    n_abstain_2: int
    n_error: int = 0

    @property
    def pct_hosting(self) -> Optional[float]:
        d = self.n_hosting + self.n_nonhosting
        return 100.0 * self.n_hosting / d if d else None

    @property
    def pct_nonhosting(self) -> Optional[float]:
        d = self.n_hosting + self.n_nonhosting
        return 100.0 * self.n_nonhosting / d if d else None

    @property
    def pct_shared(self) -> Optional[float]:
        d = self.n_shared + self.n_dedicated
        return 100.0 * self.n_shared / d if d else None

    @property
    def pct_dedicated(self) -> Optional[float]:
        d = self.n_shared + self.n_dedicated
        return 100.0 * self.n_dedicated / d if d else None

    def to_dict(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_hosting": self.n_hosting,
            "n_nonhosting": self.n_nonhosting,
            "n_abstain_1": self.n_abstain_1,
            "n_shared": self.n_shared,
            "n_dedicated": self.n_dedicated,
            "n_abstain_2": self.n_abstain_2,
            "n_error": self.n_error,
            "pct_hosting": self.pct_hosting,
            "pct_nonhosting": self.pct_nonhosting,
            "pct_shared": self.pct_shared,
            "pct_dedicated": self.pct_dedicated,
        }


def summarize(verdicts: Iterable[IpVerdict]) -> BatchSummary:
    c = {k: 0 for k in ("h", "n", "a1", "s", "d", "a2", "e")}
    total = 0
    for v in verdicts:
        total += 1
        if v.stage1 is Stage1.ERROR or v.stage2 is Stage2.ERROR:
            c["e"] += 1
        if v.stage1 is Stage1.HOSTING:
            c["h"] += 1
        elif v.stage1 is Stage1.NON_HOSTING:
            c["n"] += 1
        elif v.stage1 is Stage1.ABSTAIN:
            c["a1"] += 1
        if v.stage2 is Stage2.SHARED:
            c["s"] += 1
        elif v.stage2 is Stage2.DEDICATED:
            c["d"] += 1
        elif v.stage2 is Stage2.ABSTAIN:
            c["a2"] += 1
    return BatchSummary(total, c["h"], c["n"], c["a1"], c["s"], c["d"], c["a2"], c["e"])


def classify_batch(
    pdns: PdnsStore,
    whois: WhoisStore,
    m1: ForestModel,
    m2: ForestModel,
    ips: Sequence[IPv4Address],
    reference: int,
    threshold: float = DEFAULT_THRESHOLD,
    threshold2: Optional[float] = None,
    window_days: int = CHURN_WINDOW_DAYS,
) -> tuple[list[IpVerdict], BatchSummary]:
    """Verdicts in input order plus the batch summary.

    Feature failures for one IP are recorded on its verdict and never abort
    the batch.  ``threshold2`` defaults to ``threshold``.
    """
    check_models(m1, m2)
    t1 = _check_threshold(threshold)
    t2 = _check_threshold(threshold if threshold2 is None else threshold2)
    n = len(ips)
    X1 = np.zeros((n, len(m1.schema)))
    errors = [""] * n
    for i, ip in enumerate(ips):
        try:
            X1[i] = feature_row(Stage.HOSTING, pdns, whois, ip, reference, window_days)
        except (ValueError, ArithmeticError) as exc:
            errors[i] = f"stage-1 features: {exc}"
    ok = [i for i in range(n) if not errors[i]]
    p_pos = np.full(n, math.nan)
    p_neg = np.full(n, math.nan)
    if ok:
        p_pos[ok], p_neg[ok] = _probs(m1, X1[ok], HostingLabel.HOSTING.value, HostingLabel.NON_HOSTING.value)
    s1: list[Stage1] = [Stage1.ERROR] * n
    for i in ok:
        s1[i] = gate(p_pos[i], p_neg[i], t1, Stage1.HOSTING, Stage1.NON_HOSTING, Stage1.ABSTAIN)

    hosting = [i for i in range(n) if s1[i] is Stage1.HOSTING]
    X2 = np.zeros((len(hosting), len(m2.schema)))
    ok2 = []
    for j, i in enumerate(hosting):
        try:
            X2[j] = feature_row(Stage.DEDICATED, pdns, whois, ips[i], reference, window_days)
            ok2.append(j)
        except (ValueError, ArithmeticError) as exc:
            errors[i] = f"stage-2 features: {exc}"
    p_sh = np.full(len(hosting), math.nan)
    p_de = np.full(len(hosting), math.nan)
    if ok2:
        p_sh[ok2], p_de[ok2] = _probs(m2, X2[ok2], SharingLabel.SHARED.value, SharingLabel.DEDICATED.value)
    s2: dict[int, tuple[Optional[float], Stage2]] = {}
    for j, i in enumerate(hosting):
        if math.isnan(p_sh[j]):
            s2[i] = (None, Stage2.ERROR)
        else:
            s2[i] = (float(p_sh[j]), gate(p_sh[j], p_de[j], t2, Stage2.SHARED, Stage2.DEDICATED, Stage2.ABSTAIN))

    out = []
    for i, ip in enumerate(ips):
        p_sh_i, st2 = s2.get(i, (None, None))
        out.append(
            IpVerdict(
                ip=ip,
                p_hosting=None if math.isnan(p_pos[i]) else float(p_pos[i]),
                stage1=s1[i],
                p_shared=p_sh_i,
                stage2=st2,
                pdns_present=ip in pdns.by_ip,
                whois_present=bool(whois.history(ip, reference)),
                error=errors[i],
            )
        )
    return out, summarize(out)


def classify_ip(
    pdns: PdnsStore,
    whois: WhoisStore,
    m1: ForestModel,
    m2: ForestModel,
    ip: IPv4Address,
    reference: int,
    threshold: float = DEFAULT_THRESHOLD,
    threshold2: Optional[float] = None,
    window_days: int = CHURN_WINDOW_DAYS,
) -> IpVerdict:
    verdicts, _ = classify_batch(pdns, whois, m1, m2, [ip], reference, threshold, threshold2, window_days)
    return verdicts[0]


# ------------------------------------------------------------------ verdicts csv

VERDICT_HEADER = ["ip", "p_hosting", "stage1", "p_shared", "stage2"]


def _fmt_p(p: Optional[float]) -> str:
    return NA if p is None else repr(float(p))


def write_verdicts_csv(path, verdicts: Iterable[IpVerdict]) -> None:
    rows = sorted(verdicts, key=lambda v: int(v.ip))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VERDICT_HEADER)
        for v in rows:
            w.writerow([
                format_ip(v.ip),
                _fmt_p(v.p_hosting),
                v.stage1.value,
                _fmt_p(v.p_shared),
                v.stage2.value if v.stage2 is not None else NA,
            ])


def read_verdicts_csv(path) -> list[IpVerdict]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames[:5]) != VERDICT_HEADER:
            raise IngestError("verdict file must start with header " + ",".join(VERDICT_HEADER), str(path), 1)
        for line_no, row in enumerate(reader, start=2):
            try:
                out.append(
                    IpVerdict(
                        ip=parse_ip(row["ip"]),
                        p_hosting=None if row["p_hosting"] == NA else float(row["p_hosting"]),
                        stage1=Stage1(row["stage1"]),
                        p_shared=None if row["p_shared"] == NA else float(row["p_shared"]),
                        stage2=None if row["stage2"] == NA else Stage2(row["stage2"]),
                    )
                )
            except (ValueError, TypeError) as exc:
                raise IngestError(str(exc), str(path), line_no) from exc
    return out
