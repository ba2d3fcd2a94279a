"""Full-reference image quality metrics on an original/adversarial pair.

All metrics take the original as the reference. Convolutions use the valid
region only; no padding is ever applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np
from scipy.ndimage import maximum_filter, minimum_filter
from scipy.signal import convolve2d

from .errors import DegenerateInput
from .tensor import ImagePair

LAPLACIAN = np.array([[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]])
_VIF_EPS = 1e-10


@dataclass(frozen=True)
class QualityConfig:
    uqi_window: int = 8
    ergas_ratio: float = 4.0
    ergas_mean_epsilon: float = 1e-12
    vifp_scales: int = 4
    vifp_sigma_nsq: float = 2.0
    psnrb_block: int = 8
    psnrb_peak: float = 255.0
    psnrb_cap_db: float = 100.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"QualityConfig.{f.name} must be strictly positive")


DEFAULT_CONFIG = QualityConfig()


class QualityVector(NamedTuple):
    mse: float
    uqi: float
    ergas: float
    sam: float
    scc: float
    rase: float
    vifp: float
    psnrb: float


def _arrays(pair: ImagePair) -> tuple[np.ndarray, np.ndarray]:
    return pair.original.data, pair.adversarial.data


def _rmse_per_band(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean((x - y) ** 2, axis=(0, 1)))


def mse(pair: ImagePair) -> float:
    x, y = _arrays(pair)
    d = (y - x).reshape(-1)
    return float(np.dot(d, d) / d.size)


def _box_mean(a: np.ndarray, win: int) -> np.ndarray:
    """Mean over every valid ``win`` x ``win`` window of the leading two axes."""
    c = np.cumsum(np.cumsum(a, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)) + ((0, 0),) * (a.ndim - 2))
    s = c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]
    return s / (win * win)


def _box_range(a: np.ndarray, win: int) -> np.ndarray:
    """max - min over every valid window, per channel."""
    size = (win, win, 1)
    lo = win // 2  # scipy centres a size-n footprint at offset n // 2
    hi = lo + a.shape[0] - win + 1, lo + a.shape[1] - win + 1
    rng = maximum_filter(a, size=size) - minimum_filter(a, size=size)
    return rng[lo:hi[0], lo:hi[1]]


def uqi(pair: ImagePair, cfg: QualityConfig = DEFAULT_CONFIG) -> float:
    """Mean universal quality index over all stride-1 windows and channels.

    Windows with a zero denominator count as 1 when both windows are equal
    and are skipped otherwise.
    """
    x, y = _arrays(pair)
    h, w, _ = x.shape
    win = min(cfg.uqi_window, h, w)
    mx = _box_mean(x, win)
    my = _box_mean(y, win)
    vx = _box_mean(x * x, win) - mx * mx
    vy = _box_mean(y * y, win) - my * my
    cxy = _box_mean(x * y, win) - mx * my
    # A constant window has exactly zero variance; do not trust rounding.
    vx[_box_range(x, win) == 0] = 0.0
    vy[_box_range(y, win) == 0] = 0.0

    den = (vx + vy) * (mx * mx + my * my)
    ok = den != 0
    q = np.empty_like(den)
    q[ok] = 4.0 * cxy[ok] * mx[ok] * my[ok] / den[ok]
    same = _box_range(np.abs(x - y), win) == 0
    same &= _box_mean(np.abs(x - y), win) == 0
    q[~ok & same] = 1.0
    keep = ok | same
    if not keep.any():
        raise DegenerateInput("uqi: every window has a zero denominator")
    return float(q[keep].mean())


def ergas(pair: ImagePair, cfg: QualityConfig = DEFAULT_CONFIG) -> float:
    x, y = _arrays(pair)
    rmse = _rmse_per_band(x, y)
    mu = np.maximum(x.mean(axis=(0, 1)), cfg.ergas_mean_epsilon)
    return float(100.0 / cfg.ergas_ratio * np.sqrt(np.mean((rmse / mu) ** 2)))


def sam(pair: ImagePair) -> float:
    """Mean spectral angle in radians between per-pixel channel vectors."""
    x, y = _arrays(pair)
    c = x.shape[2]
    xv = x.reshape(-1, c)
    yv = y.reshape(-1, c)
    nx = np.linalg.norm(xv, axis=1)
    ny = np.linalg.norm(yv, axis=1)
    both = (nx > 0) & (ny > 0)
    angles = np.zeros(xv.shape[0])
    u = xv[both] / nx[both, None]
    v = yv[both] / ny[both, None]
    # half-angle form: exact 0 for parallel vectors, unlike arccos near 1
    angles[both] = 2.0 * np.arctan2(np.linalg.norm(u - v, axis=1), np.linalg.norm(u + v, axis=1))
    angles[(nx > 0) ^ (ny > 0)] = math.pi / 2
    return float(angles.mean())


def _pearson_or_policy(a: np.ndarray, b: np.ndarray) -> float:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 1.0 if np.array_equal(a, b) else 0.0
    a = a - a.mean()
    b = b - b.mean()
    a /= np.abs(a).max()
    b /= np.abs(b).max()
    r = float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))
    return min(1.0, max(-1.0, r))


def scc(pair: ImagePair) -> float:
    """Spatial correlation coefficient of Laplacian-filtered channels."""
    x, y = _arrays(pair)
    h, w, c = x.shape
    if h < 3 or w < 3:
        raise DegenerateInput(f"scc needs at least 3x3 pixels, got {h}x{w}")
    vals = []
    for k in range(c):
        fx = convolve2d(x[:, :, k], LAPLACIAN, mode="valid").ravel()
        fy = convolve2d(y[:, :, k], LAPLACIAN, mode="valid").ravel()
        vals.append(_pearson_or_policy(fx, fy))
    return float(np.mean(vals))


def rase(pair: ImagePair) -> float:
    x, y = _arrays(pair)
    m = x.mean()
    if m == 0:
        return math.inf
    rmse = _rmse_per_band(x, y)
    return float(100.0 / m * np.sqrt(np.mean(rmse**2)))


def gaussian_window(size: int, sd: float) -> np.ndarray:
    """Normalized 2-D Gaussian of ``size`` x ``size`` taps centred on the grid."""
    t = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(t[:, None] ** 2 + t[None, :] ** 2) / (2.0 * sd * sd))
    return g / g.sum()


def _valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return convolve2d(img, np.rot90(kernel, 2), mode="valid")


def _vifp_channel(ref: np.ndarray, dist: np.ndarray, scales: int, sigma_nsq: float):
    num = 0.0
    den = 0.0
    for s in range(1, scales + 1):
        n = 2 ** (scales - s + 1) + 1
        sd = n / 5.0
        if s > 1:
            win = gaussian_window(min(n, *ref.shape), sd)
            ref = _valid(ref, win)[::2, ::2]
            dist = _valid(dist, win)[::2, ::2]
        # Windows larger than the current image are clipped to fit it.
        win = gaussian_window(min(n, *ref.shape), sd)
        mu1 = _valid(ref, win)
        mu2 = _valid(dist, win)
        s1 = _valid(ref * ref, win) - mu1 * mu1
        s2 = _valid(dist * dist, win) - mu2 * mu2
        s12 = _valid(ref * dist, win) - mu1 * mu2
        s1[s1 < 0] = 0.0
        s2[s2 < 0] = 0.0

        g = s12 / (s1 + _VIF_EPS)
        sv = s2 - g * s12

        low1 = s1 < _VIF_EPS
        g[low1] = 0.0
        sv[low1] = s2[low1]
        s1[low1] = 0.0

        low2 = s2 < _VIF_EPS
        g[low2] = 0.0
        sv[low2] = 0.0

        neg = g < 0
        sv[neg] = s2[neg]
        g[neg] = 0.0
        sv[sv <= _VIF_EPS] = _VIF_EPS

        num += float(np.sum(np.log10(1.0 + g * g * s1 / (sv + sigma_nsq))))
        den += float(np.sum(np.log10(1.0 + s1 / sigma_nsq)))
    return num, den


def vifp(pair: ImagePair, cfg: QualityConfig = DEFAULT_CONFIG) -> float:
    """Multi-scale pixel-domain visual information fidelity, averaged over channels.

    Identical channels score exactly 1. A channel whose reference carries no
    information (zero denominator) and differs from the distorted one scores 0.
    """
    x, y = _arrays(pair)
    ratios = []
    for k in range(x.shape[2]):
        if np.array_equal(x[:, :, k], y[:, :, k]):
            ratios.append(1.0)
            continue
        num, den = _vifp_channel(x[:, :, k], y[:, :, k], cfg.vifp_scales, cfg.vifp_sigma_nsq)
        ratios.append(num / den if den > 0 else 0.0)
    return float(np.mean(ratios))


def blocking_effect_factor(channel: np.ndarray, block: int) -> float:
    """Blocking effect factor of one channel for ``block``-sized tiles."""
    h, w = channel.shape
    dh = np.diff(channel, axis=1) ** 2  # pairs (j, j+1) along rows
    dv = np.diff(channel, axis=0) ** 2  # pairs (i, i+1) along columns
    col_boundary = (np.arange(w - 1) + 1) % block == 0
    row_boundary = (np.arange(h - 1) + 1) % block == 0

    b_sum = dh[:, col_boundary].sum() + dv[row_boundary, :].sum()
    b_cnt = h * col_boundary.sum() + w * row_boundary.sum()
    bc_sum = dh[:, ~col_boundary].sum() + dv[~row_boundary, :].sum()
    bc_cnt = h * (~col_boundary).sum() + w * (~row_boundary).sum()

    d_b = b_sum / b_cnt if b_cnt else 0.0
    d_bc = bc_sum / bc_cnt if bc_cnt else 0.0
    if d_b <= d_bc or block < 2:
        return 0.0
    eta = math.log2(block) / math.log2(min(h, w))
    return float(eta * (d_b - d_bc))


def psnrb(pair: ImagePair, cfg: QualityConfig = DEFAULT_CONFIG) -> float:
    """PSNR penalized by the adversarial image's blocking effect factor.

    Returns ``math.inf`` for an identical pair.
    """
    x, y = _arrays(pair)
    h, w, c = x.shape
    b = cfg.psnrb_block
    if h < b or w < b:
        raise DegenerateInput(f"psnrb needs at least one {b}x{b} block, got {h}x{w}")
    m = mse(pair)
    if m == 0:
        return math.inf
    bef = float(np.mean([blocking_effect_factor(y[:, :, k], b) for k in range(c)]))
    return 10.0 * math.log10(cfg.psnrb_peak**2 / (m + bef))


def quality_vector(pair: ImagePair, cfg: QualityConfig = DEFAULT_CONFIG) -> QualityVector:
    return QualityVector(
        mse=mse(pair),
        uqi=uqi(pair, cfg),
        ergas=ergas(pair, cfg),
        sam=sam(pair),
        scc=scc(pair),
        rase=rase(pair),
        vifp=vifp(pair, cfg),
        psnrb=psnrb(pair, cfg),
    )
