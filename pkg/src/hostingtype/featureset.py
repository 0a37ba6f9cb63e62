"""Feature matrices for many IPs and their CSV form."""

from __future__ import annotations

import csv
from ipaddress import IPv4Address
from typing import Mapping, Optional, Sequence

import numpy as np

from .datamodel import Stage, format_ip, parse_ip
from .errors import IngestError, SchemaMismatchError
from .features_dedicated import CHURN_WINDOW_DAYS, DEDICATED_SCHEMA, extract_dedicated_features
from .features_hosting import HOSTING_SCHEMA, extract_hosting_features
from .forest.dataset import Dataset
from .ingest import PdnsStore, WhoisStore


def schema_for(stage: Stage | str) -> tuple[str, ...]:
    return HOSTING_SCHEMA if Stage(stage) is Stage.HOSTING else DEDICATED_SCHEMA


def feature_row(
    stage: Stage | str,
    pdns: PdnsStore,
    whois: WhoisStore,
    ip: IPv4Address,
    reference: int,
    window_days: int = CHURN_WINDOW_DAYS,
) -> list[float]:
    if Stage(stage) is Stage.HOSTING:
        return extract_hosting_features(pdns, whois, ip, reference).as_row()
    return extract_dedicated_features(pdns, whois, ip, reference, window_days).as_row()


def feature_matrix(
    stage: Stage | str,
    pdns: PdnsStore,
    whois: WhoisStore,
    ips: Sequence[IPv4Address],
    reference: int,
    window_days: int = CHURN_WINDOW_DAYS,
) -> np.ndarray:
    schema = schema_for(stage)
    out = np.zeros((len(ips), len(schema)))
    for i, ip in enumerate(ips):
        out[i] = feature_row(stage, pdns, whois, ip, reference, window_days)
    return out


def build_dataset(
    stage: Stage | str,
    pdns: PdnsStore,
    whois: WhoisStore,
    labels: Mapping[IPv4Address, str],
    reference: int,
    window_days: int = CHURN_WINDOW_DAYS,
) -> Dataset:
    """Training set over the labeled IPs, ordered by numeric IP."""
    stage = Stage(stage)
    ips = sorted(labels, key=int)
    rows = feature_matrix(stage, pdns, whois, ips, reference, window_days)
    return Dataset(schema_for(stage), rows, tuple(str(labels[ip]) for ip in ips), tuple(format_ip(ip) for ip in ips), stage.value)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 2**53 else repr(float(v))


def write_feature_csv(path, schema: Sequence[str], ids: Sequence[str], rows, labels: Optional[Sequence[str]] = None) -> None:
    """IP first, feature columns, then ``label`` when labels are given; rows sorted by IP."""
    rows = np.asarray(rows, dtype=np.float64)
    order = sorted(range(len(ids)), key=lambda i: int(parse_ip(ids[i])))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ip", *schema, *(["label"] if labels is not None else [])])
        for i in order:
            tail = [labels[i]] if labels is not None else []
            w.writerow([ids[i], *(_fmt(v) for v in rows[i]), *tail])


def write_dataset_csv(path, data: Dataset, with_labels: bool = True) -> None:
    write_feature_csv(path, data.schema, data.ids, data.rows, data.labels if with_labels else None)


def read_feature_csv(path, expected_schema: Optional[Sequence[str]] = None, stage: Stage | str | None = None) -> Dataset:
    """Inverse of :func:`write_feature_csv`; unlabeled files get empty-string labels."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("feature file is empty", str(path), 1) from None
        if not header or header[0] != "ip":
            raise IngestError("feature file must start with an ip column", str(path), 1)
        has_label = header[-1] == "label"
        schema = tuple(header[1:-1] if has_label else header[1:])
        if expected_schema is not None and tuple(expected_schema) != schema:
            raise SchemaMismatchError(f"feature columns {list(schema)} differ from expected {list(expected_schema)}")
        ids, rows, labels = [], [], []
        for line_no, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise IngestError(f"expected {len(header)} fields, got {len(rec)}", str(path), line_no)
            try:
                ids.append(format_ip(parse_ip(rec[0])))
                rows.append([float(v) for v in rec[1:1 + len(schema)]])
            except ValueError as exc:
                raise IngestError(str(exc), str(path), line_no) from exc
            labels.append(rec[-1] if has_label else "")
    arr = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(schema))
    return Dataset(schema, arr, tuple(labels), tuple(ids), Stage(stage).value if stage is not None and has_label else None)
