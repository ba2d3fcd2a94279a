"""
Held-out attack families
========================

Three families: two draw from the same gaussian noise distribution and a
third uses much stronger uniform noise. Each family is held out of
training in turn and the forest is scored on it alone.

The twins predict each other well. The outlier sits outside the training
range, so its score shows how far the learned rule extrapolates.
"""

import tempfile
from pathlib import Path

from advmetrics.forest import ForestHyperparams
from advmetrics.pipeline import OracleConfig, cmd_loo, cmd_metrics, cmd_synth, format_loo, parse_family

work = Path(tempfile.mkdtemp(prefix="advmetrics-loo-"))
families = [
    parse_family("twin_a=gaussian:2-16"),
    parse_family("twin_b=gaussian:2-16"),
    parse_family("strong=uniform_linf:60-90"),
]
cmd_synth(
    work,
    families=families,
    n_per_family=100,
    oracles=[OracleConfig("by_l2", "l2"), OracleConfig("by_vifp", "vifp", None, 0.05)],
    seed=3,
)
cmd_metrics(work / "manifest.csv", work / "matrix.csv")

reports = cmd_loo(work / "matrix.csv", ["by_l2", "by_vifp"], "all", ForestHyperparams(n_trees=50))
print(format_loo(reports))
