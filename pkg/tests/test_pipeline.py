from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corpora import REFERENCE, build_stores, random_corpus
from hostingtype.datamodel import Stage, parse_ip
from hostingtype.errors import ConfigError, IngestError, SchemaMismatchError, StageMismatchError
from hostingtype.featureset import feature_matrix, schema_for
from hostingtype.forest import Dataset, ForestParams, train_forest
from hostingtype.pipeline import (
    IpVerdict,
    Stage1,
    Stage2,
    check_models,
    classify_batch,
    classify_ip,
    gate,
    read_verdicts_csv,
    summarize,
    write_verdicts_csv,
)


def _gate1(p, t=0.95):
    return gate(p, 1 - p, t, Stage1.HOSTING, Stage1.NON_HOSTING, Stage1.ABSTAIN)


def test_gate_examples():
    assert _gate1(0.96) is Stage1.HOSTING
    assert _gate1(0.90) is Stage1.ABSTAIN
    assert _gate1(0.02) is Stage1.NON_HOSTING
    assert gate(0.98, 0.02, 0.95, Stage2.SHARED, Stage2.DEDICATED, Stage2.ABSTAIN) is Stage2.SHARED


@given(st.integers(0, 100), st.floats(0.5, 1.0), st.floats(0.5, 1.0))
def test_raising_threshold_only_adds_abstentions(votes, t_lo, t_hi):
    t_lo, t_hi = sorted((t_lo, t_hi))
    p = votes / 100
    lo, hi = _gate1(p, t_lo), _gate1(p, t_hi)
    assert hi is lo or hi is Stage1.ABSTAIN
    if lo is Stage1.ABSTAIN:
        assert hi is Stage1.ABSTAIN


def _models(seed=0):
    """Stage models trained on random corpora features with a rule-based labeling."""
    p, w, ips = random_corpus(seed, max_records=2000, max_whois=200)
    ps, ws = build_stores(p, w)
    addrs = [parse_ip(i) for i in ips]
    X1 = feature_matrix(Stage.HOSTING, ps, ws, addrs, REFERENCE)
    X2 = feature_matrix(Stage.DEDICATED, ps, ws, addrs, REFERENCE)
    med = np.median(X1[:, 0])
    y1 = ["hosting" if v > med else "non-hosting" for v in X1[:, 0]]
    y2 = ["shared" if v > med else "dedicated" for v in X2[:, 0]]
    if len(set(y1)) < 2:
        y1[0] = "non-hosting" if y1[0] == "hosting" else "hosting"
        y2[0] = "dedicated" if y2[0] == "shared" else "shared"
    ids = [str(a) for a in addrs]
    m1 = train_forest(Dataset(schema_for(Stage.HOSTING), X1, tuple(y1), tuple(ids), "hosting"), ForestParams(n_trees=30, seed=1))
    m2 = train_forest(Dataset(schema_for(Stage.DEDICATED), X2, tuple(y2), tuple(ids), "dedicated"), ForestParams(n_trees=30, seed=2))
    return ps, ws, addrs, m1, m2


@pytest.fixture(scope="module")
def setup():
    return _models(3)


def test_check_models(setup):
    _, _, _, m1, m2 = setup
    check_models(m1, m2)
    with pytest.raises(StageMismatchError):
        check_models(m2, m1)
    bad = Dataset.from_rows(["x"], [[0], [1]], ["hosting", "non-hosting"], stage="hosting")
    with pytest.raises(SchemaMismatchError):
        check_models(train_forest(bad, ForestParams(n_trees=2)), m2)


def test_threshold_range(setup):
    ps, ws, addrs, m1, m2 = setup
    with pytest.raises(ConfigError):
        classify_batch(ps, ws, m1, m2, addrs, REFERENCE, threshold=0.4)


def test_verdict_invariants(setup):
    ps, ws, addrs, m1, m2 = setup
    t = 0.8
    verdicts, summary = classify_batch(ps, ws, m1, m2, addrs + [parse_ip("203.0.113.9")], REFERENCE, threshold=t)
    for v in verdicts:
        assert (v.stage2 is not None) == (v.stage1 is Stage1.HOSTING)
        decided = max(v.p_hosting, 1 - v.p_hosting) >= t
        assert (v.stage1 is Stage1.ABSTAIN) == (not decided)
        if v.stage2 is not None:
            assert (v.stage2 is Stage2.ABSTAIN) == (max(v.p_shared, 1 - v.p_shared) < t)
    assert summary.n_hosting > 0 and summary.n_nonhosting > 0
    assert not verdicts[-1].pdns_present
    assert summary.n_total == len(verdicts)
    assert summary.n_hosting + summary.n_nonhosting + summary.n_abstain_1 == summary.n_total
    assert summary.n_shared + summary.n_dedicated + summary.n_abstain_2 == summary.n_hosting


def test_threshold_sweep_is_monotone(setup):
    ps, ws, addrs, m1, m2 = setup
    prev = None
    for t in np.linspace(0.5, 0.99, 8):
        cur, _ = classify_batch(ps, ws, m1, m2, addrs, REFERENCE, threshold=float(t))
        if prev is not None:
            for a, b in zip(prev, cur):
                assert b.stage1 is a.stage1 or b.stage1 is Stage1.ABSTAIN
                if b.stage2 is not None and b.stage2 is not Stage2.ABSTAIN:
                    assert a.stage2 is b.stage2
        prev = cur


def test_batch_order_independence(setup):
    ps, ws, addrs, m1, m2 = setup
    fwd, _ = classify_batch(ps, ws, m1, m2, addrs, REFERENCE, threshold=0.7)
    rev, _ = classify_batch(ps, ws, m1, m2, addrs[::-1], REFERENCE, threshold=0.7)
    assert fwd == rev[::-1]
    assert classify_ip(ps, ws, m1, m2, addrs[0], REFERENCE, threshold=0.7) == fwd[0]


def test_empty_batch(setup):
    ps, ws, _, m1, m2 = setup
    verdicts, summary = classify_batch(ps, ws, m1, m2, [], REFERENCE)
    assert verdicts == [] and summary.n_total == 0 and summary.pct_hosting is None


def test_summary_percentages_over_decided():
    ip = parse_ip("1.1.1.1")
    vs = [IpVerdict(ip, 0.99, Stage1.HOSTING, 0.99, Stage2.SHARED)] * 9 + [IpVerdict(ip, 0.01, Stage1.NON_HOSTING)] + [IpVerdict(ip, 0.5, Stage1.ABSTAIN)]
    s = summarize(vs)
    assert s.pct_hosting == 90.0 and s.pct_nonhosting == 10.0
    assert s.pct_shared == 100.0


def test_verdict_csv_round_trip(tmp_path):
    vs = [
        IpVerdict(parse_ip("9.9.9.9"), 0.5, Stage1.ABSTAIN),
        IpVerdict(parse_ip("1.1.1.1"), 0.97, Stage1.HOSTING, 0.12, Stage2.ABSTAIN),
    ]
    path = tmp_path / "v.csv"
    write_verdicts_csv(path, vs)
    lines = path.read_text().splitlines()
    assert lines[0] == "ip,p_hosting,stage1,p_shared,stage2"
    assert lines[2] == "9.9.9.9,0.5,abstain,NA,NA"
    back = read_verdicts_csv(path)
    assert [(v.ip, v.p_hosting, v.stage1, v.p_shared, v.stage2) for v in back] == [
        (vs[1].ip, 0.97, Stage1.HOSTING, 0.12, Stage2.ABSTAIN),
        (vs[0].ip, 0.5, Stage1.ABSTAIN, None, None),
    ]
    path.write_text("ip,x\n")
    with pytest.raises(IngestError):
        read_verdicts_csv(path)
