"""Adaptive multi-modal disparity distribution modeling and estimation."""

from . import backend
from .analysis import (
    MetricsReport,
    ModalStats,
    classify_edges,
    compute_metrics,
    disparity_to_pointcloud,
    downsample_gt,
    modal_statistics,
)
from .clustering import (
    Cluster,
    ClusterSet,
    WindowConfig,
    cluster_disparities,
    cluster_window,
    extract_window,
)
from .estimator import (
    METHODS,
    ModalSegment,
    dme_estimate,
    estimate_volume,
    segment_modals,
    sme_estimate,
    soft_argmax,
)
from .gt_model import (
    ModelParams,
    build_gt_distribution,
    build_gt_volume,
    build_gt_volume_with_counts,
    cluster_count_map,
    compute_weights,
    laplacian_distribution,
)
from .loss import (
    LossReport,
    ce_gradient_wrt_logits,
    cross_entropy,
    smooth_l1,
    softmax,
    volume_loss,
    volume_loss_and_grad,
)
from .raster_io import (
    DisparityMap,
    DistributionVolume,
    FormatError,
    read_kitti_png,
    read_pfm,
    read_volume,
    write_kitti_png,
    write_pfm,
    write_ply,
    write_volume,
)

__version__ = "0.1.0"
