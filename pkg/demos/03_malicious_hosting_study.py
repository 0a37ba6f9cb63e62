"""
Where malicious domains are hosted
==================================

Train both stages on synthetic ground truth, classify the IPs that host
flagged domains, and summarize: how many are hosting IPs, how many of those
are shared, which providers carry them and how crowded the shared IPs are.
"""

# %%
from __future__ import annotations

import tempfile
from pathlib import Path

from hostingtype.analysis import analyze, filter_vt_feed, resolve_malicious
from hostingtype.featureset import build_dataset
from hostingtype.forest import ForestParams, train_forest
from hostingtype.ingest import write_jsonl
from hostingtype.pipeline import classify_batch
from hostingtype.synth import MaliciousConfig, SynthConfig, generate

cfg = SynthConfig(n_nonhosting=100, n_hosting=100, n_dedicated=150, n_shared=150, malicious=MaliciousConfig(n_ips=150), seed=4).validate()
corpus = generate(cfg)
pdns, whois, truth = corpus.pdns_store(), corpus.whois_store(), corpus.truth_by_ip()

m1 = train_forest(build_dataset("hosting", pdns, whois, {ip: truth[ip].stage1_truth for ip in corpus.ips("hgt")}, cfg.reference), ForestParams(seed=1))
m2 = train_forest(build_dataset("dedicated", pdns, whois, {ip: truth[ip].stage2_truth for ip in corpus.ips("dgt")}, cfg.reference), ForestParams(seed=2))

# %%
# The feed lists scanner detections per domain; keep apexes flagged by at least 5.
feed = Path(tempfile.mkdtemp()) / "vt_feed.jsonl"
write_jsonl(feed, corpus.vt_feed)
mal = filter_vt_feed(feed, 5, corpus.suffixes)
ips = sorted(resolve_malicious(pdns, mal), key=int)
print(f"{len(mal)} malicious apexes resolve to {len(ips)} IPs")

verdicts, summary = classify_batch(pdns, whois, m1, m2, ips, cfg.reference, threshold=0.95)
report = analyze(pdns, corpus.asn_db(), verdicts, mal, k=5)

# %%
split = report.splits.by_ip.to_dict()
print(f"hosting {split['pct_hosting']:.1f}%  non-hosting {split['pct_non_hosting']:.1f}%  (abstained {split['abstain_1']})")
print(f"shared {split['pct_shared']:.1f}%  dedicated {split['pct_dedicated']:.1f}%  (abstained {split['abstain_2']})")

# %%
p = report.providers
for title, rows in (("all domains", p.by_total), ("malicious on shared IPs", p.by_shared), ("malicious on dedicated IPs", p.by_dedicated)):
    print(f"\ntop providers by {title}")
    for org, n in rows:
        print(f"  {org:<32} {n}")

# %%
# Crowding of shared IPs: fraction of them with more than 200 apexes, and the
# fraction hosting at most a handful of malicious ones.
rows = report.distribution.rows
crowded = sum(r.n_total > 200 for r in rows) / len(rows)
few = sum(r.n_malicious <= 5 for r in rows) / len(rows)
print(f"\n{len(rows)} shared IPs: {crowded:.0%} host over 200 apexes, {few:.0%} host 5 or fewer malicious apexes")
