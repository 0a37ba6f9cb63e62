from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import pytest
from click.testing import CliRunner

from hostingtype.cli import main, parse_reference, sub_seed

REF = "2021-01-15T12:00:00"


def run(*args, ok=True):
    res = CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)
    if ok:
        assert res.exit_code == 0, res.output
    return res


def manifest(d) -> dict:
    return json.loads((Path(d) / "run_manifest.json").read_text())


def by_name(digests: dict) -> dict:
    return {os.path.basename(k): v for k, v in digests.items()}


def test_sub_seed_and_reference():
    assert sub_seed(7, "synth") == sub_seed(7, "synth") != sub_seed(7, "train")
    assert 0 <= sub_seed(1, "x") < 2**63
    assert parse_reference(REF) == parse_reference("1610712000") == 1_610_712_000


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    """synth -> features -> label -> train -> eval -> classify -> analyze on one tiny corpus."""
    d = tmp_path_factory.mktemp("chain")
    c = d / "corpus"
    run("synth", "--n", 20, "--n-stage2", 20, "--malicious", 20, "--seed", 7, "--reference", REF, "--out", c)
    common = ["--pdns", c / "pdns.jsonl", "--whois", c / "whois.jsonl", "--suffixes", c / "suffixes.txt", "--reference", REF]
    run("features", "--stage", "hosting", *common, "--truth", c / "truth.jsonl", "--cohort", "hgt", "--out", d / "f1" / "x.csv")
    run("label", "--pdns", c / "pdns.jsonl", "--domain-whois", c / "domain_whois.jsonl", "--redirects", c / "redirects.jsonl",
        "--truth", c / "truth.jsonl", "--cohort", "dgt", "--suffixes", c / "suffixes.txt", "--out", d / "lab" / "labels.csv")
    run("features", "--stage", "dedicated", *common, "--labels", d / "lab" / "labels.csv", "--out", d / "f2" / "x.csv")
    run("train", "--stage", "hosting", "--features", d / "f1" / "x.csv", "--trees", 20, "--out", d / "m1" / "model.json")
    run("train", "--stage", "dedicated", "--features", d / "f2" / "x.csv", "--trees", 20, "--out", d / "m2" / "model.json")
    run("eval", "--stage", "hosting", "--features", d / "f1" / "x.csv", "--trees", 10, "--kfold", 3, "--out", d / "ev")
    run("classify", *common, "--model1", d / "m1" / "model.json", "--model2", d / "m2" / "model.json", "--out", d / "cl" / "verdicts.csv")
    run("analyze", "--pdns", c / "pdns.jsonl", "--asn", c / "asn.jsonl", "--verdicts", d / "cl" / "verdicts.csv",
        "--vt-feed", c / "vt_feed.jsonl", "--suffixes", c / "suffixes.txt", "--out", d / "an")
    return d


def test_chain_outputs(chain):
    with open(chain / "lab" / "labels.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 40 and all(r["label"] in ("dedicated", "shared") for r in rows)
    rep = json.loads((chain / "ev" / "eval_report.json").read_text())
    assert {"precision", "recall", "fpr", "auc", "confusion"} <= set(rep)
    assert (chain / "ev" / "roc.csv").read_text().startswith("fpr,tpr,threshold\n")
    assert (chain / "cl" / "verdicts.csv").read_text().startswith("ip,p_hosting,stage1,p_shared,stage2\n")
    summary = json.loads((chain / "an" / "summary.json").read_text())
    assert summary["resolved_ips"] > 0
    assert summary["providers"]["conservation"]["balanced"]
    for sub in ("corpus", "f1", "lab", "m1", "ev", "cl", "an"):
        m = manifest(chain / sub)
        assert m["outputs"]
        assert not {"timestamp", "created", "time"} & set(m)


def test_reruns_are_byte_identical(chain, tmp_path):
    run("synth", "--n", 20, "--n-stage2", 20, "--malicious", 20, "--seed", 7, "--reference", REF, "--out", tmp_path / "c")
    assert by_name(manifest(tmp_path / "c")["outputs"]) == by_name(manifest(chain / "corpus")["outputs"])
    run("train", "--stage", "hosting", "--features", chain / "f1" / "x.csv", "--trees", 20, "--jobs", 2, "--out", tmp_path / "m.json")
    assert (tmp_path / "m.json").read_bytes() == (chain / "m1" / "model.json").read_bytes()


def test_error_line_and_exit_code(chain, tmp_path):
    res = run("train", "--stage", "dedicated", "--features", chain / "f1" / "x.csv", "--out", tmp_path / "m.json", ok=False)
    assert res.exit_code == 2
    line = res.output.strip().splitlines()[-1]
    assert line.startswith("error: E_") and line.count(":") >= 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"name": "a.com", "rrtype": "A", "ip": "1.2.3.4", "time_first": 9, "time_last": 1, "count": 1}\n')
    res = run("features", "--stage", "hosting", "--pdns", bad, "--whois", bad, "--ips", bad, "--strict", "--reference", REF,
              "--out", tmp_path / "f.csv", ok=False)
    assert res.exit_code == 2 and "error: E_" in res.output


def test_missing_reference_is_usage_error(chain, tmp_path):
    res = run("features", "--stage", "hosting", "--pdns", chain / "corpus" / "pdns.jsonl", "--whois", chain / "corpus" / "whois.jsonl",
              "--ips", chain / "corpus" / "pdns.jsonl", "--out", tmp_path / "f.csv", ok=False)
    assert res.exit_code != 0 and "--reference" in res.output


def test_config_file_with_flag_override(chain, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(f"seed: 7\nreference: '{REF}'\ntrain:\n  trees: 3\n")
    run("--config", cfg, "train", "--stage", "hosting", "--features", chain / "f1" / "x.csv", "--out", tmp_path / "a" / "m.json")
    assert json.loads((tmp_path / "a" / "m.json").read_text())["params"]["n_trees"] == 3
    run("--config", cfg, "train", "--stage", "hosting", "--features", chain / "f1" / "x.csv", "--trees", 4, "--out", tmp_path / "b" / "m.json")
    assert json.loads((tmp_path / "b" / "m.json").read_text())["params"]["n_trees"] == 4
    m = manifest(tmp_path / "a")
    assert str(cfg) in m["inputs"]
