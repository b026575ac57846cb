"""Pure-numpy fallbacks for the hot kernels (DISPMODAL_BACKEND=numpy).

The min_pts=1 paths are vectorized across pixels (window gather + sort +
gap split, per-cluster stats via bincount, mixtures evaluated in
row chunks); min_pts > 1 and the SME/DME estimators fall back to per-pixel
loops over the scalar reference implementations, which keeps this module
a correctness baseline rather than a performance path.
"""

import numpy as np

_CHUNK_BYTES = 256 << 20


def laplacian_numpy(mu, b, d_max):
    grid = np.arange(d_max, dtype=np.float64)
    dist = np.abs(grid - mu)
    shift = 0.0
    if mu < -1.0:
        shift = -mu
    elif mu > d_max:
        shift = mu - (d_max - 1.0)
    raw = np.exp(-(dist - shift) / b)
    return raw / raw.sum()


def _gather_sorted_windows(values, valid, rows, cols):
    """(H, W, rows*cols) sorted window values with NaN padding."""
    h, w = values.shape
    rh, rw = rows // 2, cols // 2
    wvals = np.full((h, w, rows * cols), np.nan)
    slot = 0
    for dy in range(-rh, rh + 1):
        for dx in range(-rw, rw + 1):
            sy0, sy1 = max(0, dy), min(h, h + dy)
            sx0, sx1 = max(0, dx), min(w, w + dx)
            ty0, ty1 = sy0 - dy, sy1 - dy
            tx0, tx1 = sx0 - dx, sx1 - dx
            patch = values[sy0:sy1, sx0:sx1].astype(np.float64)
            ok = valid[sy0:sy1, sx0:sx1]
            wvals[ty0:ty1, tx0:tx1, slot] = np.where(ok, patch, np.nan)
            slot += 1
    wvals.sort(axis=-1)  # NaNs sort to the end
    return wvals


def _cluster_stats(values, valid, rows, cols, eps, d_max=None):
    """Vectorized min_pts=1 clustering over every valid pixel.

    Returns (model mask, counts N, kmap, cluster counts/means (H, W, J),
    center cluster id per pixel) with J = max cluster count.
    """
    h, w = values.shape
    sw = _gather_sorted_windows(values, valid, rows, cols)
    nslots = sw.shape[-1]
    counts = nslots - np.isnan(sw).sum(axis=-1)

    center = values.astype(np.float64)
    model = valid.copy()
    if d_max is not None:
        model &= (center >= 0.0) & (center <= d_max - 1.0)

    gaps = np.diff(sw, axis=-1)
    cid = np.zeros((h, w, nslots), dtype=np.int64)
    cid[:, :, 1:] = np.cumsum(gaps > eps, axis=-1)

    kmap = np.zeros((h, w), dtype=np.int32)
    last = np.maximum(counts - 1, 0)
    kmap_vals = np.take_along_axis(cid, last[..., None], axis=-1)[..., 0] + 1
    kmap[model] = kmap_vals[model].astype(np.int32)

    slot_valid = ~np.isnan(sw)
    pix = np.arange(h * w).reshape(h, w, 1)
    keys = (pix * nslots + cid)[slot_valid]
    csize = np.bincount(keys, minlength=h * w * nslots).reshape(h, w, nslots)
    csum = np.bincount(keys, weights=sw[slot_valid], minlength=h * w * nslots)
    csum = csum.reshape(h, w, nslots)

    jmax = int(kmap.max()) if kmap.size else 1
    jmax = max(jmax, 1)
    csize = csize[:, :, :jmax]
    with np.errstate(invalid="ignore"):
        cmean = np.where(csize > 0, csum[:, :, :jmax] / np.maximum(csize, 1), 0.0)

    # center cluster = cluster of the first sorted slot equal to the center value
    cpos = (sw < center[..., None]).sum(axis=-1)
    cpos = np.minimum(cpos, nslots - 1)
    ccid = np.take_along_axis(cid, cpos[..., None], axis=-1)[..., 0]
    return model, counts, kmap, csize, cmean, ccid


def _mixture_weights(csize, counts, ccid, alpha):
    h, w, jmax = csize.shape
    nm1 = np.maximum(counts - 1, 1).astype(np.float64)[..., None]
    wt = csize * (1.0 - alpha) / nm1
    jgrid = np.arange(jmax)
    is_center = jgrid[None, None, :] == ccid[..., None]
    center_size = np.take_along_axis(csize, ccid[..., None], axis=-1).astype(np.float64)
    wt_center = alpha + (center_size - 1.0) * (1.0 - alpha) / nm1
    wt_center = np.where(counts[..., None] == 1, 1.0, wt_center)
    wt = np.where(is_center, wt_center, wt)
    wt[csize == 0] = 0.0
    return wt


def gt_volume_numpy(values, valid, rows, cols, eps, min_pts, alpha, b, d_max):
    h, w = values.shape
    vol = np.zeros((d_max, h, w), dtype=np.float32)
    skip = np.ones((h, w), dtype=bool)
    if min_pts != 1:
        kmap = np.zeros((h, w), dtype=np.int32)
        _gt_volume_loop(values, valid, rows, cols, eps, min_pts, alpha, b, d_max,
                        vol, skip, kmap)
        return vol, skip, kmap

    model, counts, kmap, csize, cmean, ccid = _cluster_stats(
        values, valid, rows, cols, eps, d_max=d_max)
    skip = ~model
    kmap = np.where(model, kmap, 0).astype(np.int32)
    # non-model pixels may carry cluster ids beyond the sliced axis; their
    # weights are zeroed below, so clamping is safe
    ccid = np.minimum(ccid, csize.shape[-1] - 1)

    center = values.astype(np.float64)
    mu = np.where(csize > 0, cmean, 0.0)
    np.put_along_axis(mu, ccid[..., None], center[..., None], axis=-1)
    wt = _mixture_weights(csize, counts, ccid, alpha)
    wt[~model] = 0.0

    jmax = mu.shape[-1]
    grid = np.arange(d_max, dtype=np.float64)
    rows_per_chunk = max(1, _CHUNK_BYTES // max(1, w * jmax * d_max * 8))
    shift = np.zeros_like(mu)
    shift = np.where(mu < -1.0, -mu, shift)
    shift = np.where(mu > d_max, mu - (d_max - 1.0), shift)
    for y0 in range(0, h, rows_per_chunk):
        y1 = min(h, y0 + rows_per_chunk)
        dist = np.abs(grid - mu[y0:y1, :, :, None])
        raw = np.exp(-(dist - shift[y0:y1, :, :, None]) / b)
        z = raw.sum(axis=-1, keepdims=True)
        mix = (wt[y0:y1, :, :, None] * (raw / z)).sum(axis=2)
        vol[:, y0:y1, :] = np.moveaxis(mix, -1, 0).astype(np.float32)
    vol[:, skip] = 0.0
    return vol, skip, kmap


def _gt_volume_loop(values, valid, rows, cols, eps, min_pts, alpha, b, d_max,
                    vol, skip, kmap):
    # reference path for min_pts > 1: scalar clustering per pixel
    from .clustering import WindowConfig, cluster_window
    from .raster_io import DisparityMap

    cfg = WindowConfig(rows, cols, eps, min_pts)
    gt = DisparityMap(values, valid)
    h, w = values.shape
    for y in range(h):
        for x in range(w):
            c = float(values[y, x])
            if not valid[y, x] or not 0.0 <= c <= d_max - 1.0:
                continue
            cset = cluster_window(gt, (y, x), cfg)
            kmap[y, x] = cset.k
            n = cset.valid_count
            acc = np.zeros(d_max, dtype=np.float64)
            for k, cluster in enumerate(cset.clusters):
                if k == cset.center_cluster_index:
                    mu = c
                    wk = 1.0 if n == 1 else alpha + (cluster.size - 1) * (1.0 - alpha) / (n - 1)
                else:
                    mu = cluster.mean
                    wk = cluster.size * (1.0 - alpha) / (n - 1)
                acc += wk * laplacian_numpy(mu, b, d_max)
            vol[:, y, x] = acc.astype(np.float32)
            skip[y, x] = False


def cluster_count_numpy(values, valid, rows, cols, eps, min_pts):
    h, w = values.shape
    if min_pts != 1:
        from .clustering import WindowConfig, cluster_window
        from .raster_io import DisparityMap

        cfg = WindowConfig(rows, cols, eps, min_pts)
        gt = DisparityMap(values, valid)
        kmap = np.zeros((h, w), dtype=np.int32)
        for y in range(h):
            for x in range(w):
                if valid[y, x]:
                    kmap[y, x] = cluster_window(gt, (y, x), cfg).k
        return kmap
    model, _, kmap, _, _, _ = _cluster_stats(values, valid, rows, cols, eps)
    return np.where(model, kmap, 0).astype(np.int32)


def estimate_volume_numpy(probs, method):
    from . import estimator

    d_max, h, w = probs.shape
    out = np.zeros((h, w), dtype=np.float32)
    out_valid = np.any(probs != 0.0, axis=0)
    if method == 0:  # softargmax, fully vectorized
        grid = np.arange(d_max, dtype=np.float64)
        est = np.tensordot(grid, probs.astype(np.float64), axes=(0, 0))
        out[out_valid] = est[out_valid].astype(np.float32)
        return out, out_valid
    fn = estimator.sme_estimate if method == 1 else estimator.dme_estimate
    for y, x in zip(*np.nonzero(out_valid)):
        p = probs[:, y, x].astype(np.float64)
        out[y, x] = np.float32(fn(p))
    return out, out_valid


def ce_map_numpy(p_gt, p):
    d_max, h, w = p_gt.shape
    out = np.empty((h, w), dtype=np.float64)
    rows_per_chunk = max(1, _CHUNK_BYTES // max(1, w * d_max * 8))
    for y0 in range(0, h, rows_per_chunk):
        y1 = min(h, y0 + rows_per_chunk)
        q = np.maximum(p[:, y0:y1, :].astype(np.float64), 1e-12)
        out[y0:y1] = -(p_gt[:, y0:y1, :].astype(np.float64) * np.log(q)).sum(axis=0)
    return out
