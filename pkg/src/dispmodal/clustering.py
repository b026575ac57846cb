"""Density clustering of ground-truth disparities inside a local window.

One-dimensional DBSCAN: with the default min_pts=1 every value is a core
point and the clusters are exactly the connected components of the
"distance <= eps" graph, so the implementation sorts the window values and
splits where a consecutive gap exceeds eps (exact, O(w log w)).  The
cluster containing the central pixel anchors the ground-truth modal and is
therefore always housed, even when min_pts > 1 declares it noise.
"""

from dataclasses import dataclass, field

import numpy as np

from .raster_io import DisparityMap


@dataclass(frozen=True)
class WindowConfig:
    """Local-window and DBSCAN parameters (rows x cols, both odd)."""

    rows: int = 1
    cols: int = 9
    eps: float = 3.0
    min_pts: int = 1

    def __post_init__(self):
        if self.rows < 1 or self.rows % 2 == 0:
            raise ValueError("rows must be odd and >= 1")
        if self.cols < 1 or self.cols % 2 == 0:
            raise ValueError("cols must be odd and >= 1")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass
class Cluster:
    members: np.ndarray  # sorted member disparities, float64
    mean: float

    @property
    def size(self) -> int:
        return self.members.size


@dataclass
class ClusterSet:
    """Disjoint clusters covering the window's valid disparities.

    Clusters are ordered by ascending disparity; ``center_cluster_index``
    names the one containing the central pixel.  ``valid_count`` counts
    cluster members only (noise under min_pts > 1 is excluded), which is
    the N that the mixture weights divide by.
    """

    clusters: list = field(default_factory=list)
    center_cluster_index: int = 0

    @property
    def k(self) -> int:
        return len(self.clusters)

    @property
    def valid_count(self) -> int:
        return sum(c.size for c in self.clusters)

    @property
    def center(self) -> Cluster:
        return self.clusters[self.center_cluster_index]


def extract_window(gt: DisparityMap, pixel, cfg: WindowConfig):
    """Collect the valid disparities in the window centered on ``pixel``.

    Returns (values, center_index): values in row-major window order,
    clipped at image borders, invalid entries dropped.  Raises ValueError
    when the central pixel itself has no ground truth (such pixels are
    never modeled).
    """
    y, x = pixel
    if not (0 <= y < gt.height and 0 <= x < gt.width):
        raise ValueError(f"pixel {pixel} outside the image")
    if not gt.valid[y, x]:
        raise ValueError(f"pixel {pixel} has no valid ground truth")
    rh, rw = cfg.rows // 2, cfg.cols // 2
    ys = slice(max(0, y - rh), min(gt.height, y + rh + 1))
    xs = slice(max(0, x - rw), min(gt.width, x + rw + 1))
    patch = gt.values[ys, xs].astype(np.float64)
    mask = gt.valid[ys, xs]
    flat_center = (y - ys.start) * patch.shape[1] + (x - xs.start)
    values = patch.ravel()[mask.ravel()]
    center_index = int(np.count_nonzero(mask.ravel()[:flat_center]))
    return values, center_index


def _core_flags(sorted_vals: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    # neighbor counts include the point itself (classic DBSCAN)
    lo = np.searchsorted(sorted_vals, sorted_vals - eps, side="left")
    hi = np.searchsorted(sorted_vals, sorted_vals + eps, side="right")
    return (hi - lo) >= min_pts


def cluster_disparities(values: np.ndarray, center_index: int, cfg: WindowConfig) -> ClusterSet:
    """Partition window disparities into DBSCAN clusters.

    With min_pts = 1 this is sort-then-split-at-gaps.  With min_pts > 1,
    core points chain through gaps <= eps, border points join the nearest
    core's cluster (ties toward the lower disparity), remaining noise is
    dropped, except the center, which becomes a singleton cluster because
    the ground-truth modal must always exist.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("empty window")
    if not 0 <= center_index < values.size:
        raise ValueError("center_index out of range")
    center_value = values[center_index]

    order = np.argsort(values, kind="stable")
    svals = values[order]

    if cfg.min_pts == 1:
        labels = np.zeros(svals.size, dtype=np.int64)
        if svals.size > 1:
            labels[1:] = np.cumsum(np.diff(svals) > cfg.eps)
    else:
        core = _core_flags(svals, cfg.eps, cfg.min_pts)
        labels = np.full(svals.size, -1, dtype=np.int64)
        core_idx = np.flatnonzero(core)
        comp = -1
        prev_core_val = None
        for i in core_idx:
            if prev_core_val is None or svals[i] - prev_core_val > cfg.eps:
                comp += 1
            labels[i] = comp
            prev_core_val = svals[i]
        for i in np.flatnonzero(~core):
            dists = np.abs(svals[core_idx] - svals[i])
            if dists.size and dists.min() <= cfg.eps:
                nearest = core_idx[np.argmin(dists)]  # argmin ties -> lower value
                labels[i] = labels[nearest]

    # position of the center value in sorted order (duplicates share a label)
    center_pos = int(np.searchsorted(svals, center_value, side="left"))
    center_label = labels[center_pos]

    clusters = []
    center_cluster_index = -1
    # noise center (min_pts > 1 only): carve out a singleton ground-truth cluster
    singleton = np.array([center_value]) if center_label < 0 else None

    for label in range(labels.max() + 1 if labels.size else 0):
        members = svals[labels == label]
        if members.size == 0:
            continue
        clusters.append(Cluster(members, float(members.mean())))
        if label == center_label:
            center_cluster_index = len(clusters) - 1

    if singleton is not None:
        clusters.append(Cluster(singleton, float(center_value)))
        clusters.sort(key=lambda c: c.members[0])
        center_cluster_index = next(
            i for i, c in enumerate(clusters) if c.size == 1 and c.members[0] == center_value
        )
    else:
        # labels were assigned in ascending value order for cores, but border
        # attachment can interleave; normalize to ascending order
        order_keys = np.argsort([c.members[0] for c in clusters], kind="stable")
        clusters = [clusters[i] for i in order_keys]
        center_cluster_index = int(np.flatnonzero(order_keys == center_cluster_index)[0])

    return ClusterSet(clusters, center_cluster_index)


def cluster_window(gt: DisparityMap, pixel, cfg: WindowConfig) -> ClusterSet:
    """extract_window + cluster_disparities for one pixel."""
    values, center_index = extract_window(gt, pixel, cfg)
    return cluster_disparities(values, center_index, cfg)
