"""The twelve named perturbation metrics that make up one feature row."""
from __future__ import annotations

import math

from .norms import compute_norms
from .quality import DEFAULT_CONFIG, QualityConfig, quality_vector
from .tensor import ImagePair

NORM_FEATURES = ("l0", "l1", "l2", "linf")
QUALITY_FEATURES = ("mse", "uqi", "ergas", "sam", "scc", "rase", "vifp", "psnrb")
FEATURE_NAMES = NORM_FEATURES + QUALITY_FEATURES

# Metrics that grow with the amount of perturbation; the rest shrink.
INCREASING = frozenset(NORM_FEATURES + ("mse", "ergas", "sam", "rase"))

FEATURE_GROUPS = {
    "norms": NORM_FEATURES,
    "quality": QUALITY_FEATURES,
    "all": FEATURE_NAMES,
}


def metric_vector(
    pair: ImagePair, cfg: QualityConfig = DEFAULT_CONFIG, l0_tolerance: float = 0.0
) -> dict[str, float]:
    """All twelve metrics of a pair; psnrb may be ``inf``."""
    out = compute_norms(pair, l0_tolerance)._asdict()
    out.update(quality_vector(pair, cfg)._asdict())
    return out


def cap_infinite(values: dict[str, float], cfg: QualityConfig = DEFAULT_CONFIG) -> dict[str, float]:
    """Replace an infinite psnrb with the configured cap so rows stay finite."""
    out = dict(values)
    if math.isinf(out.get("psnrb", 0.0)) and out["psnrb"] > 0:
        out["psnrb"] = cfg.psnrb_cap_db
    return out


def resolve_features(spec) -> list[str]:
    """Turn ``"norms"``, ``"quality"``, ``"all"``, a comma list or a sequence into names."""
    if isinstance(spec, str):
        if spec in FEATURE_GROUPS:
            return list(FEATURE_GROUPS[spec])
        names = [s.strip() for s in spec.split(",") if s.strip()]
    else:
        names = list(spec)
    if not names:
        raise ValueError("empty feature set")
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate feature names in {names}")
    return names
