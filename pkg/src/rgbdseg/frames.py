"""Frame and mask I/O: RGB / 16-bit depth sequence loading, depth rescaling,
RGBD packing, nearest-neighbour depth resampling and ground-truth masks.

Conventions:
  - RGB rasters are uint8 arrays of shape (H, W, 3).
  - Depth maps are uint16 arrays of shape (H, W); the value 0 means the sensor
    produced no reading at that pixel (invalid depth).
  - Packed RGBD frames are uint8 arrays of shape (H, W, 4) in (r, g, b, d)
    order; the depth channel keeps 0 as the invalid code.
  - Foreground masks are uint8 arrays of shape (H, W) with 0 = background and
    255 = foreground.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .errors import DimensionError, FormatError, SequenceError

# Ground-truth label codes.
GT_BACKGROUND = 0
GT_FOREGROUND = 1
GT_IGNORE = 2

_DEPTH_SUFFIXES = (".png", ".pgm")


def scale_depth_16_to_8(d16: int) -> int:
    """Rescale one 16-bit depth value to 8 bits.

    0 stays 0 (invalid depth); any nonzero reading maps to
    max(1, floor(d16 * 255 / 65535)) so that a valid reading can never
    collapse onto the invalid code.
    """
    if d16 == 0:
        return 0
    return max(1, (int(d16) * 255) // 65535)


def scale_depth_map(depth16: np.ndarray) -> np.ndarray:
    """Vectorised scale_depth_16_to_8 over a whole uint16 depth map."""
    d = depth16.astype(np.uint32)
    d8 = (d * 255) // 65535
    d8 = np.maximum(d8, 1)
    d8[depth16 == 0] = 0
    return d8.astype(np.uint8)


def pack_frame(rgb: np.ndarray, depth16: np.ndarray) -> np.ndarray:
    """Pack an RGB raster and a 16-bit depth map into an (H, W, 4) frame.

    Depth is rescaled to 8 bits; dimensions must already match (resample the
    depth map first if they do not).
    """
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionError(f"rgb raster must be (H, W, 3), got {rgb.shape}")
    if depth16.shape != rgb.shape[:2]:
        raise DimensionError(
            f"depth dimensions {depth16.shape} do not match rgb {rgb.shape[:2]}"
        )
    frame = np.empty(rgb.shape[:2] + (4,), dtype=np.uint8)
    frame[:, :, :3] = rgb
    frame[:, :, 3] = scale_depth_map(depth16)
    return frame


def resample_depth(depth16: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Nearest-neighbour resample of a depth map to (target_h, target_w).

    Nearest-neighbour (pixel-centre mapping) is used instead of interpolation:
    blending across depth discontinuities or invalid (0) pixels would invent
    geometry that the sensor never saw. An output pixel is 0 exactly when its
    nearest source pixel is 0.
    """
    if target_w <= 0 or target_h <= 0:
        raise DimensionError("target dimensions must be positive")
    src_h, src_w = depth16.shape
    if (src_w, src_h) == (target_w, target_h):
        return depth16.copy()
    ys = np.minimum(((np.arange(target_h) + 0.5) * src_h / target_h).astype(np.int64), src_h - 1)
    xs = np.minimum(((np.arange(target_w) + 0.5) * src_w / target_w).astype(np.int64), src_w - 1)
    return depth16[np.ix_(ys, xs)]


@dataclass
class RgbdFrame:
    """A packed RGBD frame: per-pixel 8-bit (r, g, b, d) quadruples."""

    pixels: np.ndarray  # uint8, (H, W, 4)

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 4:
            raise DimensionError(f"packed frame must be (H, W, 4), got {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise FormatError(f"packed frame must be uint8, got {self.pixels.dtype}")
        if self.width <= 0 or self.height <= 0:
            raise DimensionError("frame dimensions must be positive")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def rgb(self) -> np.ndarray:
        return self.pixels[:, :, :3]

    @property
    def depth8(self) -> np.ndarray:
        return self.pixels[:, :, 3]


@dataclass
class GroundTruthMask:
    """Per-pixel labels: GT_BACKGROUND / GT_FOREGROUND / GT_IGNORE."""

    labels: np.ndarray  # uint8, (H, W)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


def load_rgb(path) -> np.ndarray:
    """Load an 8-bit RGB PNG as an (H, W, 3) uint8 array."""
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise FormatError(f"cannot read rgb image {path}: {exc}") from exc
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def load_depth(path) -> np.ndarray:
    """Load a 16-bit depth map from PNG (single channel) or binary PGM (P5).

    Returns a uint16 (H, W) array; raises FormatError for 8-bit or
    multi-channel inputs.
    """
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return _read_pgm16(path)
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise FormatError(f"cannot read depth image {path}: {exc}") from exc
    if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
        raise FormatError(
            f"depth image {path} must be 16-bit single-channel, got mode {img.mode!r}"
        )
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise FormatError(f"depth image {path} is not single-channel")
    if arr.dtype != np.uint16:
        if arr.min() < 0 or arr.max() > 65535:
            raise FormatError(f"depth image {path} has values outside uint16 range")
        arr = arr.astype(np.uint16)
    return arr


def write_depth_png(path, depth16: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(depth16, dtype=np.uint16)).save(path)


def _read_pgm16(path: Path) -> np.ndarray:
    """Minimal binary PGM (P5, maxval 65535, big-endian) reader."""
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise FormatError(f"{path} is not a binary PGM (P5) file")
    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if maxval != 65535:
        raise FormatError(f"{path}: PGM maxval must be 65535 for 16-bit depth, got {maxval}")
    expected = w * h * 2
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise FormatError(f"{path}: PGM raster truncated")
    return np.frombuffer(raster, dtype=">u2").reshape(h, w).astype(np.uint16)


def write_depth_pgm(path, depth16: np.ndarray) -> None:
    """Write a depth map as binary PGM (P5, maxval 65535, big-endian)."""
    h, w = depth16.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + depth16.astype(">u2").tobytes())


def load_ground_truth(path) -> GroundTruthMask:
    """Load a ground-truth mask from an 8-bit single-channel PNG.

    0 maps to background, 255 to foreground, and anything else (e.g. the
    SBM-RGBD out-of-ROI 85 / unknown 170 codes) to ignore.
    """
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise FormatError(f"cannot read ground truth {path}: {exc}") from exc
    if img.mode != "L":
        raise FormatError(
            f"ground truth {path} must be 8-bit single-channel, got mode {img.mode!r}"
        )
    raw = np.asarray(img, dtype=np.uint8)
    labels = np.full(raw.shape, GT_IGNORE, dtype=np.uint8)
    labels[raw == 0] = GT_BACKGROUND
    labels[raw == 255] = GT_FOREGROUND
    return GroundTruthMask(labels)


def load_mask(path) -> np.ndarray:
    """Load a segmentation result mask; any pixel above 127 counts as foreground."""
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise FormatError(f"cannot read mask {path}: {exc}") from exc
    if img.mode != "L":
        img = img.convert("L")
    raw = np.asarray(img, dtype=np.uint8)
    return np.where(raw > 127, 255, 0).astype(np.uint8)


def write_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(mask, dtype=np.uint8), mode="L").save(path)


def write_rgb_png(path, rgb: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def _list_frames(directory: Path, suffixes) -> list[Path]:
    return sorted(
        p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in suffixes
    )


@dataclass
class SequenceSource:
    """A directory-backed RGBD sequence.

    Expected layout: `<seq>/rgb/NNNNNN.png`, `<seq>/depth/NNNNNN.png` (16-bit)
    or `.pgm`, and optionally `<seq>/gt/NNNNNN.png`. Frames are paired by
    sorted filename order; the zero-padded stem is the frame index.
    """

    rgb_paths: list = field(default_factory=list)
    depth_paths: Optional[list] = None
    gt_paths: Optional[list] = None

    @classmethod
    def discover(cls, rgb_dir, depth_dir=None, gt_dir=None) -> "SequenceSource":
        rgb_dir = Path(rgb_dir)
        if not rgb_dir.is_dir():
            raise SequenceError(f"rgb directory not found: {rgb_dir}")
        rgb = _list_frames(rgb_dir, (".png",))
        if not rgb:
            raise SequenceError(f"no .png frames in rgb directory {rgb_dir}")
        depth = None
        if depth_dir is not None:
            depth_dir = Path(depth_dir)
            if not depth_dir.is_dir():
                raise SequenceError(f"depth directory not found: {depth_dir}")
            depth = _list_frames(depth_dir, _DEPTH_SUFFIXES)
            if len(depth) != len(rgb):
                raise SequenceError(
                    f"frame count mismatch: {len(rgb)} rgb vs {len(depth)} depth frames"
                )
        gt = None
        if gt_dir is not None:
            gt_dir = Path(gt_dir)
            if not gt_dir.is_dir():
                raise SequenceError(f"ground-truth directory not found: {gt_dir}")
            gt = _list_frames(gt_dir, (".png",))
            if len(gt) != len(rgb):
                raise SequenceError(
                    f"frame count mismatch: {len(rgb)} rgb vs {len(gt)} ground-truth frames"
                )
        return cls(rgb_paths=rgb, depth_paths=depth, gt_paths=gt)

    def __len__(self) -> int:
        return len(self.rgb_paths)

    def frame_id(self, i: int) -> str:
        return self.rgb_paths[i].stem

    @classmethod
    def from_root(cls, root, with_gt=False) -> "SequenceSource":
        """Discover the conventional rgb/ depth/ gt/ layout under one root."""
        root = Path(root)
        depth = root / "depth"
        gt = root / "gt"
        return cls.discover(
            root / "rgb",
            depth if depth.is_dir() else None,
            gt if (with_gt and gt.is_dir()) else None,
        )


def frame_number(stem: str) -> int:
    """Parse the trailing integer of a frame stem (zero-padded index)."""
    m = re.search(r"(\d+)$", stem)
    if not m:
        raise SequenceError(f"frame name {stem!r} carries no index")
    return int(m.group(1))
