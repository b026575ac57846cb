"""Evaluation metrics, modal-pattern statistics, edge classification,
ground-truth sparsification, and point-cloud export.

Edges are defined through the same window clustering that builds the
ground-truth model: a pixel is an edge iff its window yields K >= 2
clusters, so "edge" in every statistic matches "multi-modal in the GT
model" exactly.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .clustering import WindowConfig
from .estimator import estimate_volume, segment_modals
from .gt_model import cluster_count_map
from .raster_io import DisparityMap, DistributionVolume


@dataclass
class RegionMetrics:
    epe: float
    rate_gt_1px: float  # percent
    rate_gt_2px: float
    rate_gt_3px: float
    d1: float
    count: int


@dataclass
class MetricsReport:
    """EPE / >kpx / D1 over pixels valid in both maps, split by region."""

    all: RegionMetrics
    edge: RegionMetrics
    nonedge: RegionMetrics

    def to_text(self) -> str:
        lines = []
        for name in ("all", "edge", "nonedge"):
            r = getattr(self, name)
            lines += [
                f"{name}_epe={r.epe:.9f}",
                f"{name}_rate_gt_1px={r.rate_gt_1px:.9f}",
                f"{name}_rate_gt_2px={r.rate_gt_2px:.9f}",
                f"{name}_rate_gt_3px={r.rate_gt_3px:.9f}",
                f"{name}_d1={r.d1:.9f}",
                f"{name}_count={r.count}",
            ]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["region,epe,rate_gt_1px,rate_gt_2px,rate_gt_3px,d1,count"]
        for name in ("all", "edge", "nonedge"):
            r = getattr(self, name)
            rows.append(f"{name},{r.epe:.9f},{r.rate_gt_1px:.9f},{r.rate_gt_2px:.9f},"
                        f"{r.rate_gt_3px:.9f},{r.d1:.9f},{r.count}")
        return "\n".join(rows) + "\n"


@dataclass
class RegionModalStats:
    pct_1: float        # percent of counted pixels with exactly 1 modal
    pct_2: float
    pct_3plus: float
    outlier_rate: float  # percent with |dme - gt| > 3 px
    count: int           # pixels in the modal-count population
    zero_modal: int      # pixels excluded (no modal reached the peak threshold)


@dataclass
class ModalStats:
    """Fractions of pixels by modal count {1, 2, >=3} per region (percent)."""

    all: RegionModalStats
    edge: RegionModalStats
    nonedge: RegionModalStats
    peak_threshold: float

    def to_text(self) -> str:
        lines = [f"peak_threshold={self.peak_threshold:.6f}"]
        for name in ("all", "edge", "nonedge"):
            r = getattr(self, name)
            lines += [
                f"{name}_pct_1={r.pct_1:.6f}",
                f"{name}_pct_2={r.pct_2:.6f}",
                f"{name}_pct_3plus={r.pct_3plus:.6f}",
                f"{name}_outlier_rate={r.outlier_rate:.6f}",
                f"{name}_count={r.count}",
                f"{name}_zero_modal={r.zero_modal}",
            ]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["region,pct_1,pct_2,pct_3plus,outlier_rate,count,zero_modal"]
        for name in ("all", "edge", "nonedge"):
            r = getattr(self, name)
            rows.append(f"{name},{r.pct_1:.6f},{r.pct_2:.6f},{r.pct_3plus:.6f},"
                        f"{r.outlier_rate:.6f},{r.count},{r.zero_modal}")
        return "\n".join(rows) + "\n"


def _region_metrics(err, gt_vals, mask) -> RegionMetrics:
    n = int(mask.sum())
    if n == 0:
        nan = float("nan")
        return RegionMetrics(nan, nan, nan, nan, nan, 0)
    e = err[mask]
    g = gt_vals[mask]
    rates = [float((e > k).mean() * 100.0) for k in (1.0, 2.0, 3.0)]
    d1 = float(((e > 3.0) & (e > 0.05 * g)).mean() * 100.0)
    return RegionMetrics(float(e.mean()), rates[0], rates[1], rates[2], d1, n)


def compute_metrics(pred: DisparityMap, gt: DisparityMap, edge_mask) -> MetricsReport:
    """EPE, >kpx (k in 1,2,3) and KITTI D1 (error > 3px and > 5% of GT)."""
    if pred.values.shape != gt.values.shape:
        raise ValueError(f"shape mismatch: {pred.values.shape} vs {gt.values.shape}")
    edge_mask = np.asarray(edge_mask, dtype=bool)
    if edge_mask.shape != gt.values.shape:
        raise ValueError("edge mask shape mismatch")
    both = pred.valid & gt.valid
    if not both.any():
        raise ValueError("no pixels valid in both maps")
    err = np.abs(pred.values.astype(np.float64) - gt.values.astype(np.float64))
    gt_vals = gt.values.astype(np.float64)
    return MetricsReport(
        all=_region_metrics(err, gt_vals, both),
        edge=_region_metrics(err, gt_vals, both & edge_mask),
        nonedge=_region_metrics(err, gt_vals, both & ~edge_mask),
    )


def classify_edges(gt: DisparityMap, cfg: WindowConfig) -> np.ndarray:
    """Edge mask: pixel is an edge iff its window clusters to K >= 2."""
    return cluster_count_map(gt, cfg) >= 2


def modal_statistics(volume: DistributionVolume, gt: DisparityMap, edge_mask,
                     peak_threshold: float = 0.01) -> ModalStats:
    """Modal-count fractions {1, 2, >=3} and >3px DME outlier rate per region.

    Population: pixels with valid ground truth and a non-skipped column.
    Modals with peak below peak_threshold are not counted; pixels whose
    every modal falls below it are reported separately as zero_modal and
    excluded from the fractions (which then sum to 100 per region).  The
    outlier rate covers the full population regardless of the threshold.
    """
    if volume.probs.shape[1:] != gt.values.shape:
        raise ValueError("volume and map dimensions differ")
    edge_mask = np.asarray(edge_mask, dtype=bool)
    counted = gt.valid & ~volume.skip

    nmodals = np.zeros(gt.values.shape, dtype=np.int32)
    if backend.using_numba():
        from ._numba_kernels import modal_count_kernel

        modal_count_kernel(volume.probs, float(peak_threshold), counted, nmodals)
    else:
        for y, x in zip(*np.nonzero(counted)):
            p = volume.probs[:, y, x].astype(np.float64)
            nmodals[y, x] = len(segment_modals(p, peak_threshold))

    dme = estimate_volume(volume, "dme")
    err = np.abs(dme.values.astype(np.float64) - gt.values.astype(np.float64))
    outlier = (err > 3.0) & counted & dme.valid

    def region(mask) -> RegionModalStats:
        m = counted & mask
        n_all = int(m.sum())
        pop = m & (nmodals >= 1)
        n = int(pop.sum())
        zero = n_all - n
        if n == 0:
            nan = float("nan")
            out = float(outlier[m].mean() * 100.0) if n_all else nan
            return RegionModalStats(nan, nan, nan, out, 0, zero)
        k = nmodals[pop]
        return RegionModalStats(
            pct_1=float((k == 1).mean() * 100.0),
            pct_2=float((k == 2).mean() * 100.0),
            pct_3plus=float((k >= 3).mean() * 100.0),
            outlier_rate=float(outlier[m].mean() * 100.0),
            count=n,
            zero_modal=zero,
        )

    ones = np.ones_like(edge_mask, dtype=bool)
    return ModalStats(region(ones), region(edge_mask), region(~edge_mask), peak_threshold)


def downsample_gt(gt: DisparityMap, keep_fraction: float, seed: int) -> DisparityMap:
    """Randomly keep each valid pixel with probability keep_fraction.

    Uses a counter-based generator (Philox) keyed on the seed, so the
    result is reproducible and independent of evaluation order.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must be in (0, 1]")
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random(gt.values.shape)
    keep = gt.valid & (u < keep_fraction)
    return DisparityMap(np.where(keep, gt.values, 0.0).astype(np.float32), keep)


def disparity_to_pointcloud(dmap: DisparityMap, focal: float, baseline: float,
                            cx: float, cy: float) -> np.ndarray:
    """Back-project valid nonzero disparities: (N, 3) points in meters.

    Z = focal * baseline / d;  X = (x - cx) Z / focal;  Y = (y - cy) Z / focal.
    """
    if focal <= 0 or baseline <= 0:
        raise ValueError("focal and baseline must be > 0")
    ok = dmap.valid & (dmap.values > 0)
    ys, xs = np.nonzero(ok)
    d = dmap.values[ys, xs].astype(np.float64)
    z = focal * baseline / d
    x = (xs - cx) * z / focal
    y = (ys - cy) * z / focal
    return np.column_stack([x, y, z])
