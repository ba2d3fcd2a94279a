"""Pixel Lp distances between the two images of a pair."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .tensor import ImagePair, diff


class NormQuadruple(NamedTuple):
    l0: float
    l1: float
    l2: float
    linf: float


def compute_norms(pair: ImagePair, l0_tolerance: float = 0.0) -> NormQuadruple:
    """L0, L1, L2 and L-infinity of ``adversarial - original``.

    L0 counts channel coordinates (not spatial pixels) whose absolute change
    exceeds ``l0_tolerance``.
    """
    if l0_tolerance < 0:
        raise ValueError("l0_tolerance must be non-negative")
    a = np.abs(diff(pair))
    linf = float(a.max())
    # scale by the max so tiny differences do not underflow when squared
    l2 = linf * float(np.sqrt(np.dot(a / linf, a / linf))) if linf > 0 else 0.0
    return NormQuadruple(
        l0=float(np.count_nonzero(a > l0_tolerance)),
        l1=float(a.sum()),
        l2=l2,
        linf=linf,
    )


def rescale_norms(norms: NormQuadruple, scale: float = 255.0) -> NormQuadruple:
    """Convert norms measured on [0, 255] pixels to [0, 255/scale] pixels."""
    return NormQuadruple(norms.l0, norms.l1 / scale, norms.l2 / scale, norms.linf / scale)
