#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the hot pipeline stages on a synthetic scene under both backends and
reports the speedup plus the largest cross-backend deviation (float32
scale, expected ~1e-6 from summation-order differences).

    python3 benchmarks/bench_backends.py --width 480 --height 270 --dmax 96
"""

import argparse
import time

import numpy as np

from dispmodal import (
    DisparityMap,
    ModelParams,
    WindowConfig,
    backend,
    build_gt_volume,
    estimate_volume,
    volume_loss,
)


def synthetic_scene(width, height, d_max, seed=0):
    rng = np.random.default_rng(seed)
    base = np.cumsum(rng.uniform(-0.4, 0.4, (height, width)), axis=1) + d_max * 0.3
    base[:, width // 3:] += d_max * 0.25   # two depth discontinuities
    base[:, 2 * width // 3:] -= d_max * 0.35
    vals = np.clip(base, 0, d_max - 1).astype(np.float32)
    return DisparityMap(vals, np.ones((height, width), bool))


def timed(fn, reps):
    best = float("inf")
    result = None
    for _ in range(reps):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--width", type=int, default=480)
    ap.add_argument("--height", type=int, default=270)
    ap.add_argument("--dmax", type=int, default=96)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--threads", type=int, default=8)
    args = ap.parse_args()

    if not backend.HAS_NUMBA:
        raise SystemExit("numba unavailable; nothing to compare")
    threads = backend.set_threads(args.threads)
    gt = synthetic_scene(args.width, args.height, args.dmax)
    cfg = WindowConfig(1, 9, 3.0, 1)
    params = ModelParams(0.8, 0.8, args.dmax)
    print(f"scene {args.width}x{args.height}, D={args.dmax}, "
          f"{threads} thread(s), best of {args.reps}\n")

    stages = {}
    for name in ("numba", "numpy"):
        backend.set_backend(name)
        if name == "numba":  # JIT warmup outside the timing
            small = DisparityMap(gt.values[:4, :12], gt.valid[:4, :12])
            v, _ = build_gt_volume(small, cfg, ModelParams(0.8, 0.8, args.dmax))
            for m in ("softargmax", "sme", "dme"):
                estimate_volume(v, m)

        t, (vol, skip) = timed(lambda: build_gt_volume(gt, cfg, params), args.reps)
        stages.setdefault("build_gt_volume", {})[name] = (t, vol.probs)
        for m in ("softargmax", "sme", "dme"):
            t, est = timed(lambda m=m: estimate_volume(vol, m), args.reps)
            stages.setdefault(f"estimate[{m}]", {})[name] = (t, est.values)
        edge = np.zeros((args.height, args.width), bool)
        t, report = timed(lambda: volume_loss(vol, skip, vol, edge), args.reps)
        stages.setdefault("volume_loss", {})[name] = (t, np.float64(report.total))

    print(f"{'stage':<22}{'numba':>10}{'numpy':>10}{'speedup':>9}{'max |diff|':>12}")
    for stage, rows in stages.items():
        tn, rn = rows["numba"]
        tp, rp = rows["numpy"]
        diff = float(np.max(np.abs(np.asarray(rn, np.float64) - np.asarray(rp, np.float64))))
        print(f"{stage:<22}{tn:>9.3f}s{tp:>9.3f}s{tp / tn:>8.1f}x{diff:>12.2e}")


if __name__ == "__main__":
    main()
