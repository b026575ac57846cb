"""In-process training-loop bindings for the dispmodal core.

Three entry points marshal plain numpy arrays to and from the core
package; they contain no logic of their own, so outputs are bitwise-equal
to the core's and all correctness guarantees live in the core's tests.

Array exchange is zero-copy where dtypes permit: float32 C-contiguous
volumes and maps are passed through as-is (d-major (D, H, W) layout,
matching the core's volume convention and the ADLV file order).  The
numba kernels release the GIL while computing; configure their worker
pool with dispmodal.backend.set_threads().
"""

import numpy as np

from dispmodal import (
    DisparityMap,
    DistributionVolume,
    ModelParams,
    WindowConfig,
    build_gt_volume,
    estimate_volume,
    volume_loss_and_grad,
)

__version__ = "0.1.0"

__all__ = ["py_build_gt_volume", "py_loss_and_grad", "py_estimate"]

_CONFIG_DEFAULTS = {
    "window": "1x9",
    "eps": 3.0,
    "min_pts": 1,
    "alpha": 0.8,
    "b": 0.8,
    "dmax": 192,
}


def _parse_config(config):
    cfg = dict(_CONFIG_DEFAULTS)
    if config:
        unknown = set(config) - set(_CONFIG_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        cfg.update(config)
    window = cfg["window"]
    if isinstance(window, str):
        rows, cols = (int(v) for v in window.lower().split("x"))
    else:
        rows, cols = window
    wcfg = WindowConfig(rows, cols, float(cfg["eps"]), int(cfg["min_pts"]))
    params = ModelParams(float(cfg["alpha"]), float(cfg["b"]), int(cfg["dmax"]))
    return wcfg, params


def py_build_gt_volume(gt, valid, config=None):
    """Model a ground-truth map into a distribution volume.

    gt: (H, W) disparities; valid: (H, W) booleans; config keys mirror the
    CLI flags (window "MxN", eps, min_pts, alpha, b, dmax).  Returns
    (volume (D, H, W) float32, skip (H, W) bool).
    """
    wcfg, params = _parse_config(config)
    gt_map = DisparityMap(np.asarray(gt, dtype=np.float32),
                          np.asarray(valid, dtype=bool))
    volume, skip = build_gt_volume(gt_map, wcfg, params)
    return volume.probs, skip


def py_loss_and_grad(p_gt, logits, skip):
    """Mean cross-entropy of softmax(logits) against the modeled ground
    truth over non-skipped pixels, with its analytic gradient.

    Returns (scalar loss, gradient volume (D, H, W) float32, zero at
    skipped pixels).
    """
    return volume_loss_and_grad(np.asarray(p_gt), np.asarray(logits),
                                np.asarray(skip, dtype=bool))


def py_estimate(volume, method):
    """Per-pixel disparity from a distribution volume.

    method is one of softargmax | sme | dme.  Returns an (H, W) float32
    array with NaN at pixels whose column is all zero (skipped).
    """
    probs = np.asarray(volume, dtype=np.float32)
    dmap = estimate_volume(DistributionVolume(probs), method)
    out = dmap.values.copy()
    out[~dmap.valid] = np.nan
    return out
