"""Training losses: cross-entropy against the modeled ground truth,
smooth L1 baseline, analytic gradients, and the edge/non-edge loss split.

Cross-entropy uses natural log (nats) with predicted probabilities clamped
below at 1e-12, so values are reproducible bit for bit.  Volume reductions
go through numpy's pairwise summation over a per-pixel loss map, which is
deterministic and independent of how the per-pixel pass was scheduled.
"""

from dataclasses import dataclass

import numpy as np

from . import backend

LOG_CLAMP = 1e-12


@dataclass
class LossReport:
    """Mean cross-entropy over non-skipped pixels, split by edge mask."""

    total: float
    edge_mean: float
    nonedge_mean: float
    edge_count: int
    nonedge_count: int

    @property
    def valid_count(self) -> int:
        return self.edge_count + self.nonedge_count

    def to_text(self) -> str:
        lines = [
            f"total={self.total:.9f}",
            f"edge_mean={self.edge_mean:.9f}",
            f"nonedge_mean={self.nonedge_mean:.9f}",
            f"edge_count={self.edge_count}",
            f"nonedge_count={self.nonedge_count}",
        ]
        return "\n".join(lines) + "\n"


def _check_pair(p_gt, p):
    p_gt = np.asarray(p_gt, dtype=np.float64).ravel()
    p = np.asarray(p, dtype=np.float64).ravel()
    if p_gt.shape != p.shape:
        raise ValueError(f"length mismatch: {p_gt.size} vs {p.size}")
    return p_gt, p


def cross_entropy(p_gt, p) -> float:
    """-sum p_gt(d) * log p(d), natural log, p clamped at 1e-12."""
    p_gt, p = _check_pair(p_gt, p)
    return float(-(p_gt @ np.log(np.maximum(p, LOG_CLAMP))))


def softmax(logits) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def ce_gradient_wrt_logits(p_gt, logits) -> np.ndarray:
    """Gradient of cross_entropy(p_gt, softmax(logits)) wrt the logits."""
    p_gt, logits = _check_pair(p_gt, logits)
    return softmax(logits) - p_gt


def smooth_l1(d_hat: float, d_gt: float) -> float:
    delta = abs(float(d_hat) - float(d_gt))
    return 0.5 * delta * delta if delta < 1.0 else delta - 0.5


def _ce_map(p_gt_probs, p_probs):
    if backend.using_numba():
        from ._numba_kernels import ce_map_kernel

        out = np.empty(p_gt_probs.shape[1:], dtype=np.float64)
        ce_map_kernel(p_gt_probs, p_probs, out)
        return out
    from ._numpy_kernels import ce_map_numpy

    return ce_map_numpy(p_gt_probs, p_probs)


def volume_loss(p_gt_volume, skip_mask, p_volume, edge_mask) -> LossReport:
    """Per-pixel cross-entropy averaged over non-skipped pixels.

    The total is the valid-pixel-weighted combination of the edge and
    non-edge means.  Accepts DistributionVolume or raw (D, H, W) arrays.
    """
    p_gt_probs = getattr(p_gt_volume, "probs", p_gt_volume)
    p_probs = getattr(p_volume, "probs", p_volume)
    if p_gt_probs.shape != p_probs.shape:
        raise ValueError(f"volume shape mismatch: {p_gt_probs.shape} vs {p_probs.shape}")
    skip_mask = np.asarray(skip_mask, dtype=bool)
    edge_mask = np.asarray(edge_mask, dtype=bool)
    if skip_mask.shape != p_gt_probs.shape[1:] or edge_mask.shape != p_gt_probs.shape[1:]:
        raise ValueError("mask shape mismatch")

    ce = _ce_map(p_gt_probs, p_probs)
    counted = ~skip_mask
    edge = counted & edge_mask
    nonedge = counted & ~edge_mask
    edge_sum = float(ce[edge].sum())
    nonedge_sum = float(ce[nonedge].sum())
    n_edge = int(edge.sum())
    n_nonedge = int(nonedge.sum())
    n = n_edge + n_nonedge
    return LossReport(
        total=(edge_sum + nonedge_sum) / n if n else float("nan"),
        edge_mean=edge_sum / n_edge if n_edge else float("nan"),
        nonedge_mean=nonedge_sum / n_nonedge if n_nonedge else float("nan"),
        edge_count=n_edge,
        nonedge_count=n_nonedge,
    )


def volume_loss_and_grad(p_gt_volume, logits_volume, skip_mask):
    """Mean cross-entropy of softmax(logits) over non-skipped pixels and its
    analytic gradient wrt the logits (zero at skipped pixels).

    This is the training-loop entry point the bindings marshal; the
    gradient per pixel is (softmax(logits) - p_gt) / n_counted.
    """
    p_gt_probs = getattr(p_gt_volume, "probs", p_gt_volume)
    logits = np.asarray(logits_volume, dtype=np.float64)
    if p_gt_probs.shape != logits.shape:
        raise ValueError(f"volume shape mismatch: {p_gt_probs.shape} vs {logits.shape}")
    skip_mask = np.asarray(skip_mask, dtype=bool)
    counted = ~skip_mask
    n = int(counted.sum())
    if n == 0:
        return float("nan"), np.zeros_like(logits, dtype=np.float32)
    probs = softmax(logits)
    ce = _ce_map(p_gt_probs, probs)
    grad = (probs - np.asarray(p_gt_probs, dtype=np.float64)) / n
    grad[:, skip_mask] = 0.0
    return float(ce[counted].sum() / n), grad.astype(np.float32)
