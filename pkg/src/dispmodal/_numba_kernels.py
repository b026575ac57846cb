"""Numba @njit kernels for the hot per-pixel loops.

Semantics mirror the scalar reference implementations in clustering.py,
gt_model.py and estimator.py exactly; the cross-path tests and the
union-find oracle in the acceptance suite keep them honest.  All kernels
compute in float64 and cast to float32 only when storing volumes/maps.
"""

import math

import numpy as np
from numba import njit, prange

# method codes for estimate_volume_kernel
SOFTARGMAX, SME, DME = 0, 1, 2


@njit(cache=True, inline="always")
def _laplacian_raw_into(mu, b, d_max, out):
    # shift keeps exp() in range when mu lies far outside the candidate grid;
    # in-range means never take it, so the plain formula's floats are preserved
    shift = 0.0
    if mu < -1.0:
        shift = -mu
    elif mu > d_max:
        shift = mu - (d_max - 1.0)
    z = 0.0
    for d in range(d_max):
        t = math.exp(-(abs(d - mu) - shift) / b)
        out[d] = t
        z += t
    return z


@njit(cache=True, nogil=True)
def laplacian_kernel(mu, b, d_max):
    out = np.empty(d_max, np.float64)
    z = _laplacian_raw_into(mu, b, d_max, out)
    for d in range(d_max):
        out[d] = out[d] / z
    return out


@njit(cache=True, inline="always")
def _insertion_sort(buf, cnt):
    for i in range(1, cnt):
        key = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > key:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = key


@njit(cache=True)
def _dbscan_labels(svals, cnt, eps, min_pts, labels):
    """Cluster labels over sorted values; -1 marks noise. Returns K."""
    if min_pts == 1:
        k = 0
        labels[0] = 0
        for i in range(1, cnt):
            if svals[i] - svals[i - 1] > eps:
                k += 1
            labels[i] = k
        return k + 1
    # core points: neighborhood count (self included) >= min_pts
    lo = 0
    hi = 0
    ncomp = 0
    prev_core = -1
    for i in range(cnt):
        while svals[i] - svals[lo] > eps:
            lo += 1
        if hi < i:
            hi = i
        while hi + 1 < cnt and svals[hi + 1] - svals[i] <= eps:
            hi += 1
        if hi - lo + 1 >= min_pts:
            if prev_core < 0 or svals[i] - svals[prev_core] > eps:
                ncomp += 1
            labels[i] = ncomp - 1
            prev_core = i
        else:
            labels[i] = -2  # border or noise, resolved below
    # border points attach to the nearest core (ties -> lower disparity);
    # resolved borders are encoded <= -3 so later borders cannot chain off them
    for i in range(cnt):
        if labels[i] != -2:
            continue
        best = -1
        bestd = eps
        for j in range(cnt):
            if labels[j] >= 0 and j != i:
                dij = abs(svals[i] - svals[j])
                if dij <= bestd and (best < 0 or dij < bestd):
                    best = j
                    bestd = dij
        labels[i] = (-3 - labels[best]) if best >= 0 else -1
    for i in range(cnt):
        if labels[i] <= -3:
            labels[i] = -3 - labels[i]
    return ncomp


@njit(cache=True, inline="always")
def _gather_window(values, valid, y, x, rh, rw, buf):
    h, w = values.shape
    y0 = y - rh if y - rh > 0 else 0
    y1 = y + rh + 1 if y + rh + 1 < h else h
    x0 = x - rw if x - rw > 0 else 0
    x1 = x + rw + 1 if x + rw + 1 < w else w
    cnt = 0
    for wy in range(y0, y1):
        for wx in range(x0, x1):
            if valid[wy, wx]:
                buf[cnt] = np.float64(values[wy, wx])
                cnt += 1
    return cnt


@njit(cache=True, parallel=True, nogil=True)
def gt_volume_kernel(values, valid, rows, cols, eps, min_pts, alpha, b, d_max,
                     vol, skip, kmap):
    h, w = values.shape
    rh = rows // 2
    rw = cols // 2
    wcap = rows * cols
    for y in prange(h):
        row = np.empty((w, d_max), np.float64)
        buf = np.empty(wcap, np.float64)
        labels = np.empty(wcap, np.int64)
        comp = np.empty(d_max, np.float64)
        for x in range(w):
            c = np.float64(values[y, x])
            if not valid[y, x] or not (0.0 <= c <= d_max - 1.0):
                for d in range(d_max):
                    row[x, d] = 0.0
                continue
            cnt = _gather_window(values, valid, y, x, rh, rw, buf)
            _insertion_sort(buf, cnt)
            k = _dbscan_labels(buf, cnt, eps, min_pts, labels)

            # center value's position in sorted order (first occurrence)
            cpos = 0
            while buf[cpos] != c:
                cpos += 1
            clabel = labels[cpos]
            singleton = clabel < 0  # noise center -> singleton GT cluster
            if singleton:
                k += 1
            kmap[y, x] = k

            n_members = 0
            for i in range(cnt):
                if labels[i] >= 0:
                    n_members += 1
            if singleton:
                n_members += 1
            nm1 = np.float64(n_members - 1)

            # iterate clusters in ascending disparity = runs of equal labels,
            # inserting the singleton at its sorted position
            first = True
            emitted_singleton = False
            i = 0
            while i < cnt or (singleton and not emitted_singleton):
                if singleton and not emitted_singleton and (i >= cnt or buf[i] >= c):
                    mu = c
                    sz = 1
                    is_center = True
                    emitted_singleton = True
                elif i < cnt and labels[i] < 0:
                    i += 1
                    continue
                else:
                    lbl = labels[i]
                    s = 0.0
                    sz = 0
                    is_center = lbl == clabel
                    while i < cnt and (labels[i] == lbl or labels[i] < 0):
                        if labels[i] == lbl:
                            s += buf[i]
                            sz += 1
                        i += 1
                    mu = s / sz
                    if is_center:
                        mu = c
                if is_center:
                    wk = 1.0 if n_members == 1 else alpha + (sz - 1) * (1.0 - alpha) / nm1
                else:
                    wk = sz * (1.0 - alpha) / nm1
                z = _laplacian_raw_into(mu, b, d_max, comp)
                if first:
                    for d in range(d_max):
                        row[x, d] = wk * (comp[d] / z)
                    first = False
                else:
                    for d in range(d_max):
                        row[x, d] += wk * (comp[d] / z)
            skip[y, x] = False
        for d in range(d_max):
            for x in range(w):
                vol[d, y, x] = np.float32(row[x, d])


@njit(cache=True, parallel=True, nogil=True)
def cluster_count_kernel(values, valid, rows, cols, eps, min_pts, kmap):
    h, w = values.shape
    rh = rows // 2
    rw = cols // 2
    wcap = rows * cols
    for y in prange(h):
        buf = np.empty(wcap, np.float64)
        labels = np.empty(wcap, np.int64)
        for x in range(w):
            if not valid[y, x]:
                continue
            c = np.float64(values[y, x])
            cnt = _gather_window(values, valid, y, x, rh, rw, buf)
            _insertion_sort(buf, cnt)
            k = _dbscan_labels(buf, cnt, eps, min_pts, labels)
            cpos = 0
            while buf[cpos] != c:
                cpos += 1
            if labels[cpos] < 0:
                k += 1
            kmap[y, x] = k


@njit(cache=True, inline="always")
def _segment_scan(p, d_max, bounds):
    """Strict-local-minimum boundaries (plateaus split at their midpoint)."""
    nb = 0
    l = 0
    while l < d_max:
        r = l
        while r + 1 < d_max and p[r + 1] == p[l]:
            r += 1
        if 0 < l and r < d_max - 1 and p[l - 1] > p[l] and p[r + 1] > p[r]:
            bounds[nb] = (l + r) // 2
            nb += 1
        l = r + 1
    return nb


@njit(cache=True, parallel=True, nogil=True)
def estimate_volume_kernel(probs, method, out, out_valid):
    d_max, h, w = probs.shape
    for y in prange(h):
        p = np.empty(d_max, np.float64)
        bounds = np.empty(d_max, np.int64)
        for x in range(w):
            nonzero = False
            for d in range(d_max):
                v = np.float64(probs[d, y, x])
                p[d] = v
                if v != 0.0:
                    nonzero = True
            if not nonzero:
                continue  # skipped column -> invalid output pixel
            if method == SOFTARGMAX:
                est = 0.0
                for d in range(d_max):
                    est += d * p[d]
            elif method == SME:
                peak = 0
                for d in range(1, d_max):
                    if p[d] > p[peak]:
                        peak = d
                dl = peak
                while dl > 0 and p[dl - 1] < p[dl]:
                    dl -= 1
                dr = peak
                while dr < d_max - 1 and p[dr + 1] < p[dr]:
                    dr += 1
                mass = 0.0
                mom = 0.0
                for d in range(dl, dr + 1):
                    mass += p[d]
                    mom += d * p[d]
                est = mom / mass
            else:  # DME
                nb = _segment_scan(p, d_max, bounds)
                best_mass = -1.0
                best_l = 0
                best_r = 0
                l = 0
                for j in range(nb + 1):
                    r = bounds[j] if j < nb else d_max - 1
                    mass = 0.0
                    for d in range(l, r + 1):
                        mass += p[d]
                    if mass > best_mass:  # ties keep the lower-disparity segment
                        best_mass = mass
                        best_l = l
                        best_r = r
                    l = r + 1
                mom = 0.0
                for d in range(best_l, best_r + 1):
                    mom += d * p[d]
                est = mom / best_mass
            out[y, x] = np.float32(est)
            out_valid[y, x] = True


@njit(cache=True, parallel=True, nogil=True)
def modal_count_kernel(probs, peak_threshold, counted, out):
    d_max, h, w = probs.shape
    for y in prange(h):
        p = np.empty(d_max, np.float64)
        bounds = np.empty(d_max, np.int64)
        for x in range(w):
            if not counted[y, x]:
                continue
            for d in range(d_max):
                p[d] = np.float64(probs[d, y, x])
            nb = _segment_scan(p, d_max, bounds)
            n = 0
            l = 0
            for j in range(nb + 1):
                r = bounds[j] if j < nb else d_max - 1
                peak = p[l]
                for d in range(l + 1, r + 1):
                    if p[d] > peak:
                        peak = p[d]
                if peak >= peak_threshold:
                    n += 1
                l = r + 1
            out[y, x] = n


@njit(cache=True, parallel=True, nogil=True)
def ce_map_kernel(p_gt, p, out):
    d_max, h, w = p_gt.shape
    for y in prange(h):
        for x in range(w):
            acc = 0.0
            for d in range(d_max):
                q = np.float64(p[d, y, x])
                if q < 1e-12:
                    q = 1e-12
                acc += np.float64(p_gt[d, y, x]) * math.log(q)
            out[y, x] = -acc
