"""
Training and cross-validating both classifiers
==============================================

Balanced synthetic ground-truth sets for each stage, 5-fold random-forest
evaluation, and the features the forest leans on.
"""

# %%
from __future__ import annotations

from hostingtype.featureset import build_dataset
from hostingtype.forest import ForestParams, kfold_eval, ranked_importances, train_forest
from hostingtype.synth import dedicated_gt_config, generate, hosting_gt_config


def labeled(corpus, stage):
    truth = corpus.truth_by_ip()
    key = "stage1_truth" if stage == "hosting" else "stage2_truth"
    labels = {ip: getattr(truth[ip], key) for ip in corpus.ips()}
    return build_dataset(stage, corpus.pdns_store(), corpus.whois_store(), labels, corpus.config.reference)


params = ForestParams(n_trees=100, seed=0)

# %%
# Stage 1: hosting vs non-hosting, 300 IPs per class.
hosting = labeled(generate(hosting_gt_config(300, seed=2)), "hosting")
res = kfold_eval(hosting, 5, params, seed=1, positive="hosting").pooled
print(f"stage 1  precision {res.precision:.2f}  recall {res.recall:.2f}  fpr {res.fpr:.2f}  auc {res.auc:.4f}")

model = train_forest(hosting, params)
print("top features:")
for name, value in ranked_importances(model)[:5]:
    print(f"  {name:<26} {value:.3f}")

# %%
# Stage 2: dedicated vs shared, 200 IPs per class.
dedicated = labeled(generate(dedicated_gt_config(200, seed=3)), "dedicated")
res = kfold_eval(dedicated, 5, params, seed=1, positive="dedicated").pooled
print(f"stage 2  precision {res.precision:.2f}  recall {res.recall:.2f}  fpr {res.fpr:.2f}  auc {res.auc:.4f}")
print("confusion (actual x predicted):", res.confusion.as_matrix())
