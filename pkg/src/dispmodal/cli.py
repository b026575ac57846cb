"""Command-line pipeline driver.

Subcommands: gen-gt, estimate, eval, stats, sparsify, cloud.  Parameter
precedence is flags > --config JSON file > built-in defaults, and the
effective configuration is echoed into every output for provenance.
Map format is chosen by extension: .pfm or .png (KITTI 16-bit).

Exit codes: 0 success, 2 usage, 3 I/O failure, 4 invalid/malformed data.
"""

import argparse
import json
import sys

import numpy as np

from . import analysis, backend, estimator, gt_model, loss, raster_io
from .clustering import WindowConfig
from .estimator import METHODS
from .gt_model import ModelParams

DEFAULTS = {
    "window": None,          # auto: 1x9 dense, 3x9 sparse
    "mode": "auto",          # dense | sparse | auto (from valid coverage)
    "eps": 3.0,
    "min_pts": 1,
    "alpha": 0.8,
    "b": 0.8,
    "dmax": 192,
    "method": "dme",
    "peak_threshold": 0.01,
    "keep": None,
    "seed": 0,
    "threads": None,
}

EXIT_IO, EXIT_INVALID = 3, 4


def _parse_window(text):
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except Exception:
        raise ValueError(f"--window expects MxN (e.g. 1x9), got {text!r}")


def _read_map(path) -> raster_io.DisparityMap:
    p = str(path).lower()
    if p.endswith(".pfm"):
        return raster_io.read_pfm(path)
    if p.endswith(".png"):
        return raster_io.read_kitti_png(path)
    raise ValueError(f"{path}: unknown disparity-map extension (use .pfm or .png)")


def _write_map(dmap, path):
    p = str(path).lower()
    if p.endswith(".pfm"):
        raster_io.write_pfm(dmap, path)
    elif p.endswith(".png"):
        raster_io.write_kitti_png(dmap, path)
    else:
        raise ValueError(f"{path}: unknown disparity-map extension (use .pfm or .png)")


def _merge_config(args):
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as f:
            file_cfg = json.load(f)
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"{args.config}: unknown config keys {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _resolve_window(cfg, gt_map):
    if cfg["window"] is not None:
        rows, cols = _parse_window(cfg["window"]) if isinstance(cfg["window"], str) \
            else cfg["window"]
    else:
        mode = cfg["mode"]
        if mode == "auto":
            mode = "sparse" if gt_map is not None and gt_map.valid_fraction < 0.5 else "dense"
        rows, cols = (3, 9) if mode == "sparse" else (1, 9)
    cfg["window"] = f"{rows}x{cols}"
    return WindowConfig(rows, cols, cfg["eps"], cfg["min_pts"])


def _config_lines(cfg, keys):
    return [f"{k}={cfg[k]}" for k in keys if cfg.get(k) is not None]


def _emit(text, report_path, header_lines):
    header = "".join(f"# {line}\n" for line in header_lines)
    sys.stdout.write(header + text)
    if report_path:
        with open(report_path, "w", encoding="utf-8") as f:
            f.write(header + text)


def _setup_threads(cfg):
    if cfg["threads"] is not None:
        effective = backend.set_threads(int(cfg["threads"]))
        cfg["threads"] = effective


def cmd_gen_gt(args):
    cfg = _merge_config(args)
    _setup_threads(cfg)
    gt = _read_map(args.gt)
    wcfg = _resolve_window(cfg, gt)
    params = ModelParams(cfg["alpha"], cfg["b"], cfg["dmax"])
    volume, skip, kmap = gt_model.build_gt_volume_with_counts(gt, wcfg, params)
    raster_io.write_volume(volume, args.out)
    skip_path = args.skip_mask or f"{args.out}.skip.png"
    modeled = raster_io.DisparityMap((~skip).astype(np.float32), ~skip)
    raster_io.write_kitti_png(modeled, skip_path)

    edge = kmap >= 2
    lines = []
    for name, mask in (("all", kmap >= 1), ("edge", edge), ("nonedge", (kmap == 1))):
        k = kmap[mask]
        lines.append(f"k_histogram_{name}_1={int((k == 1).sum())}")
        lines.append(f"k_histogram_{name}_2={int((k == 2).sum())}")
        lines.append(f"k_histogram_{name}_3plus={int((k >= 3).sum())}")
    lines.append(f"modeled_pixels={int((~skip).sum())}")
    lines.append(f"skipped_pixels={int(skip.sum())}")
    keys = ("window", "eps", "min_pts", "alpha", "b", "dmax", "threads")
    _emit("\n".join(lines) + "\n", None, _config_lines(cfg, keys))
    return 0


def cmd_estimate(args):
    cfg = _merge_config(args)
    _setup_threads(cfg)
    volume = raster_io.read_volume(args.volume)
    dmap = estimator.estimate_volume(volume, cfg["method"])
    _write_map(dmap, args.out)
    _emit(f"estimated_pixels={int(dmap.valid.sum())}\n", None,
          _config_lines(cfg, ("method", "threads")))
    return 0


def cmd_eval(args):
    cfg = _merge_config(args)
    _setup_threads(cfg)
    pred = _read_map(args.pred)
    gt = _read_map(args.gt)
    wcfg = _resolve_window(cfg, gt)
    edges = analysis.classify_edges(gt, wcfg)
    report = analysis.compute_metrics(pred, gt, edges)
    keys = ("window", "eps", "min_pts", "threads")
    _emit(report.to_text(), args.report, _config_lines(cfg, keys))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as f:
            f.write(report.to_csv())
    return 0


def cmd_stats(args):
    cfg = _merge_config(args)
    _setup_threads(cfg)
    volume = raster_io.read_volume(args.volume)
    gt = _read_map(args.gt)
    wcfg = _resolve_window(cfg, gt)
    edges = analysis.classify_edges(gt, wcfg)
    stats = analysis.modal_statistics(volume, gt, edges, cfg["peak_threshold"])
    keys = ("window", "eps", "min_pts", "peak_threshold", "threads")
    _emit(stats.to_text(), args.report, _config_lines(cfg, keys))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as f:
            f.write(stats.to_csv())
    return 0


def cmd_sparsify(args):
    cfg = _merge_config(args)
    if cfg["keep"] is None:
        raise ValueError("sparsify requires --keep")
    gt = _read_map(args.gt)
    out = analysis.downsample_gt(gt, cfg["keep"], cfg["seed"])
    _write_map(out, args.out)
    _emit(f"kept_pixels={int(out.valid.sum())}\nsource_pixels={int(gt.valid.sum())}\n",
          None, _config_lines(cfg, ("keep", "seed")))
    return 0


def cmd_cloud(args):
    cfg = _merge_config(args)
    dmap = _read_map(args.map)
    cx = args.cx if args.cx is not None else (dmap.width - 1) / 2.0
    cy = args.cy if args.cy is not None else (dmap.height - 1) / 2.0
    points = analysis.disparity_to_pointcloud(dmap, args.focal, args.baseline, cx, cy)
    comments = [f"focal={args.focal}", f"baseline={args.baseline}", f"cx={cx}", f"cy={cy}"]
    raster_io.write_ply(points, args.out, comments)
    _emit(f"points={points.shape[0]}\n", None, comments)
    return 0


def _add_common(sub, *, window=True, model=False, threads=True):
    sub.add_argument("--config", help="JSON config file (flags override it)")
    if window:
        sub.add_argument("--window", help="local window MxN (default 1x9 dense / 3x9 sparse)")
        sub.add_argument("--mode", choices=("auto", "dense", "sparse"),
                         help="GT density mode for the default window")
        sub.add_argument("--eps", type=float, help="DBSCAN distance threshold (px)")
        sub.add_argument("--min-pts", dest="min_pts", type=int, help="DBSCAN density threshold")
    if model:
        sub.add_argument("--alpha", type=float, help="center weight fraction [0.5, 1]")
        sub.add_argument("--b", type=float, help="Laplacian scale (px)")
        sub.add_argument("--dmax", type=int, help="disparity candidate count D")
    if threads:
        sub.add_argument("--threads", type=int, help="worker thread count")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dispmodal",
        description="Adaptive multi-modal GT distribution modeling, disparity "
                    "estimators, and stereo evaluation.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-gt", help="model a GT map into a distribution volume")
    p.add_argument("gt", help="ground-truth map (.pfm or .png)")
    p.add_argument("out", help="output ADLV volume path")
    p.add_argument("--skip-mask", help="skip-mask PNG path (default <out>.skip.png)")
    _add_common(p, model=True)
    p.set_defaults(fn=cmd_gen_gt)

    p = subs.add_parser("estimate", help="estimate a disparity map from a volume")
    p.add_argument("volume", help="input ADLV volume")
    p.add_argument("out", help="output map (.pfm or .png)")
    p.add_argument("--method", choices=METHODS, help="softargmax | sme | dme")
    _add_common(p, window=False)
    p.set_defaults(fn=cmd_estimate)

    p = subs.add_parser("eval", help="EPE / >kpx / D1 metrics against GT")
    p.add_argument("pred", help="predicted map")
    p.add_argument("gt", help="ground-truth map")
    p.add_argument("--report", help="also write the key=value report here")
    p.add_argument("--csv", help="also write a CSV report here")
    _add_common(p)
    p.set_defaults(fn=cmd_eval)

    p = subs.add_parser("stats", help="modal-count statistics of a volume")
    p.add_argument("volume", help="input ADLV volume")
    p.add_argument("gt", help="ground-truth map (regions + outliers)")
    p.add_argument("--peak-threshold", dest="peak_threshold", type=float,
                   help="minimum modal peak counted (default 0.01)")
    p.add_argument("--report", help="also write the key=value report here")
    p.add_argument("--csv", help="also write a CSV report here")
    _add_common(p)
    p.set_defaults(fn=cmd_stats)

    p = subs.add_parser("sparsify", help="randomly downsample GT density")
    p.add_argument("gt", help="input map")
    p.add_argument("out", help="output map")
    p.add_argument("--keep", type=float, help="keep fraction in (0, 1]")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    _add_common(p, window=False, threads=False)
    p.set_defaults(fn=cmd_sparsify)

    p = subs.add_parser("cloud", help="export a disparity map as an ASCII PLY point cloud")
    p.add_argument("map", help="input map")
    p.add_argument("out", help="output .ply path")
    p.add_argument("--focal", type=float, required=True, help="focal length (px)")
    p.add_argument("--baseline", type=float, required=True, help="stereo baseline (m)")
    p.add_argument("--cx", type=float, help="principal point x (default image center)")
    p.add_argument("--cy", type=float, help="principal point y (default image center)")
    _add_common(p, window=False, threads=False)
    p.set_defaults(fn=cmd_cloud)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except OSError as e:
        print(f"dispmodal: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"dispmodal: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
