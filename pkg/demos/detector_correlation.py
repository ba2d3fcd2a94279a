"""
From metrics to a detector's verdict
====================================

A synthetic detector flags an image when its MSE exceeds the median. It
also flips 5% of its verdicts at random. We follow the batch workflow:

1. write PNG pairs and a labelled manifest,
2. compute the 12-metric matrix,
3. correlate every metric with the verdict,
4. train a random forest on a 66/34 split, once per feature group,
5. rank the features by mean decrease in impurity.
"""

import tempfile
from pathlib import Path

from advmetrics.pipeline import (
    OracleConfig,
    cmd_corr,
    cmd_importance,
    cmd_metrics,
    cmd_synth,
    cmd_train,
    format_corr,
    format_eval,
    format_importance,
)

work = Path(tempfile.mkdtemp(prefix="advmetrics-demo-"))
cmd_synth(work, n_per_family=100, oracles=[OracleConfig("detector", "mse", None, 0.05)], seed=1)
cmd_metrics(work / "manifest.csv", work / "matrix.csv")

print(format_corr(cmd_corr(work / "matrix.csv", "detector")))

###############################################################################
# Feature groups
# --------------
# Train on a single norm, on the norms, on the quality metrics, and on
# everything together.

for features in ("l2", "norms", "quality", "all"):
    report, _ = cmd_train(work / "matrix.csv", "detector", features, seed=0,
                          model_out=work / f"model-{features}.json")
    print(f"\n[{features}]")
    print(format_eval(report))

print()
print(format_importance(cmd_importance(work / "model-all.json")))
