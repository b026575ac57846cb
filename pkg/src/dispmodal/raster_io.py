"""Disparity-map and distribution-volume file I/O.

Centralizes every on-disk format the pipeline touches so no other module
opens files directly:

* PFM        grayscale "Pf", little-endian float32, bottom-up rows on disk.
             Invalid pixels are stored as 0 with a validity-PNG sidecar
             (``<path>.mask.png``) written only when the map has any.
* KITTI PNG  16-bit single-channel, disparity = stored / 256.0, 0 = invalid.
* ADLV       self-describing distribution volume: magic "ADLV", u32
             version=1, u32 W, u32 H, u32 D, then D*H*W little-endian
             float32 in d-major, row-major order.
* PLY        ASCII point clouds (x y z in meters), see write_ply.

Readers and writers are pure with respect to in-memory state; maps and
volumes are treated as immutable after construction.
"""

import os
import struct
import warnings
from dataclasses import dataclass, field

import cv2
import numpy as np


class FormatError(ValueError):
    """Malformed or unsupported file content."""


@dataclass
class DisparityMap:
    """H x W real disparities plus a validity mask (sparse-GT support).

    Invalid entries are ignored by every consumer; valid entries are
    finite and >= 0.
    """

    values: np.ndarray  # (H, W) float32
    valid: np.ndarray   # (H, W) bool

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.valid.shape:
            raise ValueError("values and valid must be matching 2-D arrays")
        v = self.values[self.valid]
        if v.size and (not np.all(np.isfinite(v)) or np.any(v < 0)):
            raise ValueError("valid disparities must be finite and >= 0")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if self.valid.size else 0.0


@dataclass
class DistributionVolume:
    """Per-pixel probability over D disparity candidates, d-major (D, H, W).

    Every pixel column with any nonzero entry sums to 1 within 1e-5;
    all-zero columns mark pixels that were skipped by the producer.
    """

    probs: np.ndarray  # (D, H, W) float32
    skip: np.ndarray = field(default=None)  # (H, W) bool, True = skipped

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float32)
        if self.probs.ndim != 3:
            raise ValueError("probs must have shape (D, H, W)")
        if self.skip is None:
            self.skip = ~np.any(self.probs != 0.0, axis=0)
        self.skip = np.asarray(self.skip, dtype=bool)
        if self.skip.shape != self.probs.shape[1:]:
            raise ValueError("skip mask shape must match (H, W)")

    @property
    def d_max(self) -> int:
        return self.probs.shape[0]

    @property
    def height(self) -> int:
        return self.probs.shape[1]

    @property
    def width(self) -> int:
        return self.probs.shape[2]

    def normalization_error(self) -> float:
        """Largest |column sum - 1| over non-skipped pixels."""
        sums = self.probs.sum(axis=0, dtype=np.float64)
        errs = np.abs(sums - 1.0)[~self.skip]
        return float(errs.max()) if errs.size else 0.0


def _sidecar_path(path) -> str:
    return f"{os.fspath(path)}.mask.png"


def read_pfm(path) -> DisparityMap:
    """Read a grayscale PFM disparity map.

    Rows are normalized to top-down regardless of on-disk order; non-finite
    and negative entries become invalid.  A validity sidecar written by
    write_pfm is applied when present.
    """
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic == b"PF":
            raise FormatError(f"{path}: color (3-channel) PFM is not supported")
        if magic != b"Pf":
            raise FormatError(f"{path}: not a grayscale PFM (magic {magic!r})")
        dims = f.readline().split()
        if len(dims) != 2:
            raise FormatError(f"{path}: malformed PFM dimension line")
        try:
            width, height = int(dims[0]), int(dims[1])
        except ValueError as e:
            raise FormatError(f"{path}: malformed PFM dimensions") from e
        if width <= 0 or height <= 0:
            raise FormatError(f"{path}: non-positive PFM dimensions")
        try:
            scale = float(f.readline().strip())
        except ValueError as e:
            raise FormatError(f"{path}: malformed PFM scale line") from e
        endian = "<" if scale < 0 else ">"
        payload = f.read(width * height * 4)
    if len(payload) != width * height * 4:
        raise FormatError(f"{path}: truncated PFM payload")
    data = np.frombuffer(payload, dtype=f"{endian}f4").reshape(height, width)
    data = np.flipud(data).astype(np.float32)  # disk order is bottom-up

    valid = np.isfinite(data) & (data >= 0)
    values = np.where(valid, data, 0.0).astype(np.float32)

    sidecar = _sidecar_path(path)
    if os.path.exists(sidecar):
        mask = read_kitti_png(sidecar)
        if mask.values.shape != values.shape:
            raise FormatError(f"{sidecar}: sidecar dimensions do not match {path}")
        valid &= mask.valid
    return DisparityMap(values, valid)


def write_pfm(dmap: DisparityMap, path) -> None:
    """Write a PFM (scale -1.0, little-endian, bottom-up rows).

    Invalid pixels are stored as 0; when any exist a validity sidecar
    ``<path>.mask.png`` is written so round-trips preserve the mask.
    """
    data = np.where(dmap.valid, dmap.values, np.float32(0.0)).astype("<f4")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{dmap.width} {dmap.height}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.flipud(data).tobytes())
    sidecar = _sidecar_path(path)
    if not np.all(dmap.valid):
        mask = DisparityMap(dmap.valid.astype(np.float32), dmap.valid)
        write_kitti_png(mask, sidecar)
    elif os.path.exists(sidecar):
        os.remove(sidecar)  # stale sidecar would corrupt the next read


def read_kitti_png(path) -> DisparityMap:
    """Read a KITTI disparity PNG: 16-bit single-channel, value / 256.0."""
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FormatError(f"{path}: not a readable PNG")
    if raw.ndim != 2:
        raise FormatError(f"{path}: expected single-channel PNG, got {raw.ndim} dims")
    if raw.dtype != np.uint16:
        raise FormatError(f"{path}: expected 16-bit PNG, got {raw.dtype}")
    valid = raw > 0
    values = (raw.astype(np.float32) / np.float32(256.0)) * valid
    return DisparityMap(values, valid)


def write_kitti_png(dmap: DisparityMap, path) -> None:
    """Write a KITTI disparity PNG (stored = round(d * 256), invalid = 0).

    Valid disparities must be < 256.  A valid disparity below 1/512 px
    would quantize to the invalid marker 0; it is stored as 1 instead.
    """
    v = dmap.values[dmap.valid]
    if v.size and v.max() >= 256.0:
        raise ValueError(f"{path}: disparities >= 256 are not representable")
    stored = np.round(dmap.values.astype(np.float64) * 256.0).astype(np.uint16)
    stored = np.where(dmap.valid, np.maximum(stored, 1), 0).astype(np.uint16)
    if not cv2.imwrite(os.fspath(path), stored):
        raise OSError(f"{path}: PNG write failed")


_VOLUME_MAGIC = b"ADLV"
_VOLUME_VERSION = 1
_MAX_VOLUME_ELEMS = 1 << 40


def read_volume(path) -> DistributionVolume:
    """Read an ADLV distribution volume.

    Normalization is the caller's job: columns that fail it only raise a
    UserWarning here.
    """
    with open(path, "rb") as f:
        header = f.read(20)
        if len(header) < 20 or header[:4] != _VOLUME_MAGIC:
            raise FormatError(f"{path}: bad ADLV magic")
        version, width, height, d_max = struct.unpack("<4I", header[4:])
        if version != _VOLUME_VERSION:
            raise FormatError(f"{path}: unsupported ADLV version {version}")
        if min(width, height, d_max) == 0 or width * height * d_max > _MAX_VOLUME_ELEMS:
            raise FormatError(f"{path}: ADLV dimension overflow ({width}x{height}x{d_max})")
        count = width * height * d_max
        payload = f.read(count * 4)
    if len(payload) != count * 4:
        raise FormatError(f"{path}: truncated ADLV payload")
    probs = np.frombuffer(payload, dtype="<f4").reshape(d_max, height, width).copy()
    volume = DistributionVolume(probs)
    err = volume.normalization_error()
    if err > 1e-5:
        warnings.warn(
            f"{path}: some columns are not normalized (max |sum-1| = {err:.3g})",
            UserWarning,
            stacklevel=2,
        )
    return volume


def write_volume(volume: DistributionVolume, path) -> None:
    """Write an ADLV distribution volume (bit-exact round-trip)."""
    with open(path, "wb") as f:
        f.write(_VOLUME_MAGIC)
        f.write(struct.pack("<4I", _VOLUME_VERSION, volume.width, volume.height, volume.d_max))
        f.write(np.ascontiguousarray(volume.probs, dtype="<f4").tobytes())


def write_ply(points: np.ndarray, path, comments=()) -> None:
    """Write an (N, 3) point array as ASCII PLY (x y z, meters)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    with open(path, "w", encoding="ascii") as f:
        f.write("ply\nformat ascii 1.0\n")
        for c in comments:
            f.write(f"comment {c}\n")
        f.write(f"element vertex {points.shape[0]}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write("end_header\n")
        for x, y, z in points:
            f.write(f"{x:.6f} {y:.6f} {z:.6f}\n")
