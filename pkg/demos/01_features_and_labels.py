"""
Features and ground truth on a small synthetic corpus
=====================================================

Generate a few hosting and non-hosting IPs, look at the feature vectors the
two classifiers see, then label the hosting IPs as dedicated or shared
from registrant and redirect evidence.
"""

# %%
from __future__ import annotations

import numpy as np

from hostingtype.features_dedicated import extract_dedicated_features
from hostingtype.features_hosting import extract_hosting_features
from hostingtype.labeler import label_corpus
from hostingtype.synth import SynthConfig, generate

corpus = generate(SynthConfig(n_nonhosting=20, n_hosting=20, n_dedicated=15, n_shared=15, seed=1).validate())
pdns, whois = corpus.pdns_store(), corpus.whois_store()
truth = corpus.truth_by_ip()
ref = corpus.config.reference
print(f"{len(corpus.truth)} IPs, {len(corpus.pdns)} passive-DNS records, {len(corpus.whois_rows)} WHOIS snapshots")

# %%
# One IP of each stage-1 class.  Hosting IPs carry hundreds of apexes and a
# recently updated, multi-owner WHOIS history; non-hosting IPs a couple of
# names and a stale record.
for label in ("hosting", "non-hosting"):
    ip = next(ip for ip in corpus.ips("hgt") if truth[ip].stage1_truth == label)
    f = extract_hosting_features(pdns, whois, ip, ref)
    print(f"\n{label} {ip}")
    for name in ("f1_num_tld2", "f3_num_domains", "f9_num_owners", "f15_years_since_update", "f16_num_whois"):
        print(f"  {name:<24} {getattr(f, name):.2f}")

# %%
# Stage-2 features: daily apex churn and how long apexes stay on the IP.
rows = {"dedicated": [], "shared": []}
for ip in corpus.ips("dgt"):
    rows[truth[ip].stage2_truth].append(extract_dedicated_features(pdns, whois, ip, ref).as_row())
for label, r in rows.items():
    m = np.mean(r, axis=0)
    print(f"{label:<10} churn {m[5]:.2f} (std {m[6]:.2f})   duration {m[7]:.2f}y (std {m[8]:.2f})")

# %%
# The labeling cascade: one apex, then registrants, then redirects.
decisions, summary = label_corpus(pdns, corpus.ips("dgt"), corpus.domain_whois_map(), corpus.redirects)
agree = sum(d.label is not None and d.label.value == truth[d.ip].stage2_truth for d in decisions)
print(summary.to_dict())
print(f"{agree}/{len(decisions)} labels match the planted ownership")
