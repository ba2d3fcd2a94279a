"""Synthetic perturbation families and a threshold "detector" for desk-scale runs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import SpecError
from .features import FEATURE_NAMES, INCREASING, cap_infinite, metric_vector
from .quality import DEFAULT_CONFIG, QualityConfig
from .tensor import ImagePair, ImageTensor

FAMILIES = ("uniform_linf", "gaussian", "sparse_pixels", "block_patch")


@dataclass(frozen=True)
class PerturbationSpec:
    family: str
    magnitude: float
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown perturbation family {self.family!r}")
        if not self.magnitude > 0:
            raise SpecError("magnitude must be positive")
        if self.count < 1:
            raise SpecError("count must be at least 1")


@dataclass(frozen=True)
class OracleDetectorSpec:
    metric: str
    threshold: float
    flip_noise: float = 0.0

    def __post_init__(self):
        if self.metric not in FEATURE_NAMES:
            raise SpecError(f"unknown metric {self.metric!r}")
        if not np.isfinite(self.threshold):
            raise SpecError("threshold must be finite")
        if not 0 <= self.flip_noise < 0.5:
            raise SpecError("flip_noise must be in [0, 0.5)")


def flat_base(height: int = 32, width: int = 32, channels: int = 3, level: float = 128.0) -> ImageTensor:
    return ImageTensor(np.full((height, width, channels), float(level)))


def textured_base(height: int = 32, width: int = 32, channels: int = 3, seed: int = 0) -> ImageTensor:
    """Smooth random 8-bit image with structure at a few spatial scales."""
    rng = np.random.default_rng(seed)
    img = np.zeros((height, width, channels))
    for sigma, amp in ((4.0, 60.0), (1.5, 25.0), (0.0, 6.0)):
        noise = rng.standard_normal((height, width, channels))
        if sigma:
            noise = gaussian_filter(noise, sigma=(sigma, sigma, 0), mode="wrap")
            noise /= noise.std() or 1.0
        img += amp * noise
    img += rng.uniform(60, 190, size=channels)
    return ImageTensor(np.clip(np.rint(img), 0, 255))


def generate_pair(base: ImageTensor, spec: PerturbationSpec, pair_id: str = "") -> ImagePair:
    """Perturb ``base`` per ``spec`` and clip the result to [0, 255]."""
    rng = np.random.default_rng(spec.seed)
    x = base.data
    h, w, c = x.shape
    delta = np.zeros_like(x)
    if spec.family == "uniform_linf":
        delta = rng.uniform(-spec.magnitude, spec.magnitude, size=x.shape)
    elif spec.family == "gaussian":
        delta = rng.normal(0.0, spec.magnitude, size=x.shape)
    elif spec.family == "sparse_pixels":
        if spec.count > x.size:
            raise SpecError(f"cannot alter {spec.count} of {x.size} coordinates")
        flat = delta.reshape(-1)
        where = rng.choice(x.size, size=spec.count, replace=False)
        flat[where] = rng.choice((-1.0, 1.0), size=spec.count) * spec.magnitude
    elif spec.family == "block_patch":
        side = spec.count
        if side > h or side > w:
            raise SpecError(f"{side}x{side} patch does not fit a {h}x{w} image")
        top = int(rng.integers(0, h - side + 1))
        left = int(rng.integers(0, w - side + 1))
        delta[top:top + side, left:left + side, :] = spec.magnitude
    adv = np.clip(x + delta, 0.0, 255.0)
    return ImagePair(base, ImageTensor(adv), pair_id)


def oracle_decision(features: dict, spec: OracleDetectorSpec, cfg: QualityConfig = DEFAULT_CONFIG) -> int:
    """Noise-free detector verdict from an already computed metric map."""
    value = cap_infinite(features, cfg)[spec.metric]
    if spec.metric in INCREASING:
        return int(value > spec.threshold)
    return int(value < spec.threshold)


def flip(label: int, flip_noise: float, sample_seed: int) -> int:
    if flip_noise > 0 and np.random.default_rng(sample_seed).random() < flip_noise:
        return 1 - label
    return label


def oracle_label(
    pair: ImagePair,
    spec: OracleDetectorSpec,
    cfg: QualityConfig = DEFAULT_CONFIG,
    sample_seed: int = 0,
) -> int:
    """1 ("detected") when the chosen metric signals more perturbation than the threshold.

    The verdict is flipped with probability ``flip_noise`` under ``sample_seed``.
    """
    return flip(oracle_decision(metric_vector(pair, cfg), spec, cfg), spec.flip_noise, sample_seed)
