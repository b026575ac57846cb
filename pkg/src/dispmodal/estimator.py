"""Disparity estimators over per-pixel probability distributions.

Three strategies, all sub-pixel:

* soft_argmax    full-band probability-weighted mean; over-smooths
                 multi-modal pixels toward depths between surfaces.
* sme_estimate   single-modal: take the global probability peak, expand
                 while the probability keeps strictly decreasing, average
                 inside.  Pixel-level winner-take-all, sensitive to sharp
                 narrow spikes.
* dme_estimate   dominant-modal: split the distribution into modals at
                 strict local minima, pick the one with the largest
                 cumulative probability (object-level winner-take-all),
                 average inside.

Modal boundaries sit at strict local minima; plateau minima split at the
plateau midpoint (left-biased for even plateaus) and the boundary
candidate belongs to the segment on its left, so the segments always
partition {0..D-1}.  All ties (equal peak probability, equal modal mass)
break toward the lower disparity.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .raster_io import DisparityMap, DistributionVolume

METHODS = ("softargmax", "sme", "dme")


@dataclass(frozen=True)
class ModalSegment:
    """One modal of a distribution: inclusive candidate range and its stats."""

    d_l: int
    d_r: int
    peak: float
    mass: float
    mean: float


def _as_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("empty distribution")
    return p


def soft_argmax(p) -> float:
    """Full-band weighted mean over all candidates."""
    p = _as_distribution(p)
    total = p.sum()
    if abs(total - 1.0) > 1e-4:
        raise ValueError(f"distribution sums to {total}, not 1")
    return float(np.arange(p.size, dtype=np.float64) @ p)


def segment_modals(p, peak_threshold: float = 0.0) -> list:
    """Split a distribution into modal segments.

    Segments whose peak falls below peak_threshold are discarded (used by
    the modal statistics with the 1% rule); with threshold 0 the segments
    partition the full support and their masses sum to 1.
    """
    p = _as_distribution(p)
    d_max = p.size
    bounds = []
    l = 0
    while l < d_max:
        r = l
        while r + 1 < d_max and p[r + 1] == p[l]:
            r += 1
        if 0 < l and r < d_max - 1 and p[l - 1] > p[l] and p[r + 1] > p[r]:
            bounds.append((l + r) // 2)
        l = r + 1

    segments = []
    prev = -1
    for boundary in [*bounds, d_max - 1]:
        l, r = prev + 1, boundary
        inside = p[l:r + 1]
        mass = float(inside.sum())
        peak = float(inside.max())
        mean = float(np.arange(l, r + 1, dtype=np.float64) @ inside / mass) if mass > 0 else 0.5 * (l + r)
        if peak >= peak_threshold:
            segments.append(ModalSegment(l, r, peak, mass, mean))
        prev = boundary
    return segments


def sme_estimate(p) -> float:
    """Single-modal estimate around the global probability peak."""
    p = _as_distribution(p)
    peak = int(np.argmax(p))  # ties -> lower disparity
    d_l = peak
    while d_l > 0 and p[d_l - 1] < p[d_l]:
        d_l -= 1
    d_r = peak
    while d_r < p.size - 1 and p[d_r + 1] < p[d_r]:
        d_r += 1
    inside = p[d_l:d_r + 1]
    return float(np.arange(d_l, d_r + 1, dtype=np.float64) @ inside / inside.sum())


def dme_estimate(p) -> float:
    """Dominant-modal estimate: the modal with maximum cumulative probability."""
    segments = segment_modals(p, peak_threshold=0.0)
    best = max(segments, key=lambda s: s.mass)  # max() keeps the first = lower d_l
    return best.mean


def estimate_volume(volume: DistributionVolume, method: str) -> DisparityMap:
    """Apply an estimator per pixel; skipped (all-zero) columns become invalid."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    code = METHODS.index(method)
    h, w = volume.height, volume.width
    if backend.using_numba():
        from ._numba_kernels import estimate_volume_kernel

        out = np.zeros((h, w), dtype=np.float32)
        out_valid = np.zeros((h, w), dtype=bool)
        estimate_volume_kernel(volume.probs, code, out, out_valid)
    else:
        from ._numpy_kernels import estimate_volume_numpy

        out, out_valid = estimate_volume_numpy(volume.probs, code)
    return DisparityMap(out, out_valid)
