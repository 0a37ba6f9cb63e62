from __future__ import annotations

import filecmp

import numpy as np
import pytest

from hostingtype.datamodel import SharingLabel
from hostingtype.errors import ConfigError
from hostingtype.featureset import feature_matrix
from hostingtype.labeler import Rule, label_corpus
from hostingtype.synth import (
    ClassProfile,
    MaliciousConfig,
    SynthConfig,
    dedicated_gt_config,
    default_profiles,
    generate,
    hosting_gt_config,
    read_truth,
)


def test_default_profiles_anchor_values():
    p = default_profiles()
    assert set(p) == {"non-hosting", "hosting", "dedicated", "shared"}
    assert (p["non-hosting"].tld2_mean, p["non-hosting"].tld3_mean, p["non-hosting"].fqdn_mean) == (1.06, 0.56, 2.07)
    assert (p["hosting"].tld2_mean, p["hosting"].tld3_mean, p["hosting"].fqdn_mean) == (452.6, 40.3, 691.45)
    assert (p["shared"].churn_mean, p["shared"].churn_std) == (1.18, 5.91)
    assert (p["dedicated"].churn_mean, p["dedicated"].churn_std) == (0.12, 0.68)
    assert (p["dedicated"].duration_mean, p["dedicated"].duration_std) == (2.3, 1.4)
    for prof in p.values():
        assert sum(w for _, w in prof.net_type_weights) == pytest.approx(1.0)


def test_invalid_profile_and_config():
    with pytest.raises(ConfigError):
        ClassProfile.from_dict({**default_profiles()["hosting"].to_dict(), "tld2_mean": -1})
    with pytest.raises(ConfigError):
        SynthConfig(n_hosting=1, profiles={"hosting": {"churn_std": -2}}).validate()
    with pytest.raises(ConfigError):
        SynthConfig().validate()
    with pytest.raises(ConfigError):
        SynthConfig(n_hosting=1, privacy_fraction=2).validate()
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({"n_hosting": 1, "bogus": 3})


def test_determinism(tmp_path):
    cfg = SynthConfig(n_nonhosting=10, n_hosting=10, seed=7, malicious=MaliciousConfig(n_ips=10)).validate()
    a = generate(cfg).write(tmp_path / "a")
    b = generate(cfg).write(tmp_path / "b")
    for key in a:
        assert filecmp.cmp(a[key], b[key], shallow=False), key
    c = generate(SynthConfig.from_dict({**cfg.to_dict(), "seed": 8})).write(tmp_path / "c")
    assert not filecmp.cmp(a["pdns"], c["pdns"], shallow=False)


def test_truth_rows(tmp_path):
    corpus = generate(hosting_gt_config(10, seed=2))
    assert len(corpus.truth) == 20
    assert len({t.ip for t in corpus.truth}) == 20
    for t in corpus.truth:
        assert (t.stage2_truth is not None) == (t.stage1_truth == "hosting")
    paths = corpus.write(tmp_path)
    assert read_truth(paths["truth"]) == sorted(corpus.truth, key=lambda t: int(t.ip))


def test_planted_ownership():
    corpus = generate(dedicated_gt_config(30, seed=3))
    for t in corpus.truth:
        if t.stage2_truth == "dedicated":
            assert len(set(t.owners)) == 1
        else:
            assert len(set(t.owners)) >= 2


@pytest.mark.parametrize("privacy", [0.0, 1.0])
def test_labeler_reproduces_planted_truth(privacy):
    corpus = generate(dedicated_gt_config(40, seed=4, privacy_fraction=privacy, redirect_fraction=0.0 if privacy else 0.3))
    decisions, summary = label_corpus(corpus.pdns_store(), corpus.ips(), corpus.domain_whois_map(), corpus.redirects)
    truth = corpus.truth_by_ip()
    if privacy == 0.0:
        assert all(d.label is not None and d.label.value == truth[d.ip].stage2_truth for d in decisions)
    else:
        assert all(d.rule is Rule.UNDECIDABLE for d in decisions)
        assert summary.counts == {"Undecidable": 80}


def _class_means(corpus, stage, label_of, cols):
    ips = corpus.ips()
    X = feature_matrix(stage, corpus.pdns_store(), corpus.whois_store(), ips, corpus.config.reference)
    truth = corpus.truth_by_ip()
    y = np.array([label_of(truth[i]) for i in ips])
    return {lab: X[y == lab][:, cols].mean(axis=0) for lab in set(y)}


def test_hosting_class_means():
    corpus = generate(hosting_gt_config(1000, seed=5))
    m = _class_means(corpus, "hosting", lambda t: t.stage1_truth, [0, 1, 2, 8, 18])
    # owners per hosting IP around 6.8
    assert abs(m["hosting"][3] - 6.8) <= 0.7
    assert m["hosting"][:3] == pytest.approx([452.6, 40.3, 691.45], rel=0.1)
    assert m["non-hosting"][:3] == pytest.approx([1.06, 0.56, 2.07], rel=0.1)
    assert m["hosting"][4] == pytest.approx(2.0, rel=0.1)
    assert m["non-hosting"][4] == pytest.approx(7.0, rel=0.1)


def test_dedicated_class_means():
    corpus = generate(dedicated_gt_config(300, seed=6))
    m = _class_means(corpus, "dedicated", lambda t: t.stage2_truth, [5, 6, 7, 8])
    assert m["dedicated"] == pytest.approx([0.12, 0.68, 2.3, 1.4], rel=0.2)
    assert m["shared"] == pytest.approx([1.18, 5.91, 1.2, 1.1], rel=0.2)
    assert SharingLabel.SHARED.value in m
