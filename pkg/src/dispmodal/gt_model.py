"""Adaptive multi-modal ground-truth distribution modeling.

Each labeled pixel gets a mixture of discretized Laplacians over the
disparity candidates {0..D-1}: the window's disparities are clustered,
every cluster contributes one Laplacian centered on its mean (the center
cluster's mean is replaced by the pixel's exact ground truth), and the
mixture weights follow the cluster cardinalities with a fixed share
``alpha`` reserved for the central pixel.  Non-edge pixels (one cluster)
degenerate to a uni-modal Laplacian with weight exactly one.

Components are normalized over the candidate range first and then mixed,
so the result sums to one even when a mean sits at the range border.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .clustering import ClusterSet, WindowConfig
from .raster_io import DisparityMap, DistributionVolume


@dataclass(frozen=True)
class ModelParams:
    """Mixture parameters: center weight alpha, Laplacian scale b, candidates D."""

    alpha: float = 0.8
    b: float = 0.8
    d_max: int = 192

    def __post_init__(self):
        if not 0.5 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0.5, 1] (ground-truth modal dominance)")
        if not self.b > 0:
            raise ValueError("b must be > 0")
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")


def laplacian_distribution(mu: float, b: float, d_max: int) -> np.ndarray:
    """Discretized Laplacian over {0..d_max-1}, normalized to sum 1.

    This is the single source for mixture components in both backends;
    the uni-modal degenerate case of the mixture is bitwise-equal to it.
    """
    if backend.using_numba():
        from ._numba_kernels import laplacian_kernel

        return laplacian_kernel(float(mu), float(b), int(d_max))
    from ._numpy_kernels import laplacian_numpy

    return laplacian_numpy(float(mu), float(b), int(d_max))


def compute_weights(clusters: ClusterSet, params: ModelParams) -> np.ndarray:
    """Mixture weight per cluster (aligned with clusters.clusters).

    The center cluster gets alpha plus the per-neighbor share for its
    remaining members; every other cluster gets the per-neighbor share
    times its cardinality.  N is the member total, so sparse windows and
    border-clipped windows are handled identically.  Weights sum to 1.
    """
    n = clusters.valid_count
    if n < 1:
        raise ValueError("empty ClusterSet")
    alpha = params.alpha
    weights = np.empty(clusters.k, dtype=np.float64)
    for k, cluster in enumerate(clusters.clusters):
        if k == clusters.center_cluster_index:
            weights[k] = 1.0 if n == 1 else alpha + (cluster.size - 1) * (1.0 - alpha) / (n - 1)
        else:
            weights[k] = cluster.size * (1.0 - alpha) / (n - 1)
    return weights


def build_gt_distribution(clusters: ClusterSet, center_gt: float,
                          params: ModelParams) -> np.ndarray:
    """Per-pixel ground-truth distribution (length d_max, sums to 1).

    center_gt replaces the center cluster's mean so supervision stays
    exact; it must lie inside [0, d_max-1] (out-of-range pixels are
    skipped by the volume builder rather than clamped).
    """
    if not 0.0 <= center_gt <= params.d_max - 1:
        raise ValueError(f"center ground truth {center_gt} outside [0, {params.d_max - 1}]")
    weights = compute_weights(clusters, params)
    p = np.zeros(params.d_max, dtype=np.float64)
    for k, cluster in enumerate(clusters.clusters):
        mu = center_gt if k == clusters.center_cluster_index else cluster.mean
        p += weights[k] * laplacian_distribution(mu, params.b, params.d_max)
    return p


def build_gt_volume(gt: DisparityMap, cfg: WindowConfig, params: ModelParams):
    """Model every labeled pixel of a map; returns (volume, skip mask).

    Pixels without ground truth or with out-of-range ground truth are
    skipped: their columns stay all-zero and the skip mask marks them
    True.  Work is partitioned across pixels with no shared mutable
    state, so results are independent of scheduling.
    """
    volume, skip, _ = build_gt_volume_with_counts(gt, cfg, params)
    return volume, skip


def build_gt_volume_with_counts(gt: DisparityMap, cfg: WindowConfig, params: ModelParams):
    """build_gt_volume variant that also returns the per-pixel cluster-count map
    (0 for skipped pixels), shared with edge classification and statistics."""
    h, w = gt.values.shape
    if backend.using_numba():
        from ._numba_kernels import gt_volume_kernel

        vol = np.empty((params.d_max, h, w), dtype=np.float32)
        vol.fill(0.0)  # sequential first touch; the kernel writes pages strided
        skip = np.ones((h, w), dtype=bool)
        kmap = np.zeros((h, w), dtype=np.int32)
        gt_volume_kernel(gt.values, gt.valid, cfg.rows, cfg.cols,
                         float(cfg.eps), cfg.min_pts, params.alpha, params.b,
                         params.d_max, vol, skip, kmap)
    else:
        from ._numpy_kernels import gt_volume_numpy

        vol, skip, kmap = gt_volume_numpy(gt.values, gt.valid, cfg.rows, cfg.cols,
                                          float(cfg.eps), cfg.min_pts,
                                          params.alpha, params.b, params.d_max)
    return DistributionVolume(vol, skip), skip, kmap


def cluster_count_map(gt: DisparityMap, cfg: WindowConfig) -> np.ndarray:
    """Per-pixel cluster count K over the whole map (0 where no ground truth)."""
    if backend.using_numba():
        from ._numba_kernels import cluster_count_kernel

        kmap = np.zeros(gt.values.shape, dtype=np.int32)
        cluster_count_kernel(gt.values, gt.valid, cfg.rows, cfg.cols,
                             float(cfg.eps), cfg.min_pts, kmap)
        return kmap
    from ._numpy_kernels import cluster_count_numpy

    return cluster_count_numpy(gt.values, gt.valid, cfg.rows, cfg.cols,
                               float(cfg.eps), cfg.min_pts)
