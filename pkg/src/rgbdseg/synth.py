"""Synthetic RGB-D test sequences.

Five scenarios stress the classic background-subtraction failure modes:

  static             constant frames, empty ground truth
  colour_camouflage  object invisible in RGB (copies the background texture)
                     but closer in depth by depth_offset 8-bit units
  depth_camouflage   object at exactly the background depth but brightened
                     in RGB by colour_offset
  illumination_ramp  background brightness ramps up from entry_frame on;
                     ground truth stays empty (a false-positive stressor)
  shadow             textured object with a darkened shadow band beside it;
                     only the object is foreground in the ground truth

All scenarios share a deterministic, temporally constant background texture
and a flat background depth plane. The moving object is a rectangle
entering at entry_frame and sliding right at speed px/frame until it leaves
the raster. Every frame is a pure function of (spec, t), so sequences need
no stored state and can be re-rendered for verification.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import frames as frame_io
from .errors import ConfigError

SCENARIOS = ("static", "colour_camouflage", "depth_camouflage",
             "illumination_ramp", "shadow")

# Background depth plane: 40000 sensor units -> 155 after 8-bit rescale.
BG_DEPTH16 = 40000
# 8-bit depth units -> 16-bit sensor units (255 ~ 65535 means 1 ~ 257).
DEPTH8_UNIT = 257


@dataclass
class SynthSpec:
    scenario: str
    width: int = 160
    height: int = 120
    frames: int = 160
    entry_frame: int = 100
    object_w: int = 40
    object_h: int = 40
    speed: int = 4
    depth_offset: int = 80       # 8-bit depth units the object sits closer
    colour_offset: int = 90      # additive RGB offset for depth_camouflage
    ramp_slope: float = 0.01     # brightness gain per frame past entry
    shadow_strength: float = 0.55

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; valid scenarios: "
                + ", ".join(SCENARIOS)
            )
        if self.width <= 0 or self.height <= 0 or self.frames <= 0:
            raise ConfigError("width, height and frames must be positive")
        if not 0 < self.depth_offset < 155:
            raise ConfigError("depth_offset must stay within the 8-bit depth range")


def background_rgb(width: int, height: int) -> np.ndarray:
    """Deterministic textured background (gradients plus hash speckle)."""
    xs = np.arange(width)
    ys = np.arange(height)
    r = 60 + (xs * 120) // max(width - 1, 1)
    g = 60 + (ys * 120) // max(height - 1, 1)
    rgb = np.empty((height, width, 3), dtype=np.uint8)
    rgb[:, :, 0] = r[np.newaxis, :]
    rgb[:, :, 1] = g[:, np.newaxis]
    rgb[:, :, 2] = 90 + ((xs[np.newaxis, :] + ys[:, np.newaxis]) * 80) // max(width + height - 2, 1)
    speckle = ((xs[np.newaxis, :] * 73856093) ^ (ys[:, np.newaxis] * 19349663)) % 17
    return np.clip(rgb.astype(np.int32) + speckle[:, :, np.newaxis], 0, 255).astype(np.uint8)


def object_rect(spec: SynthSpec, t: int) -> Optional[tuple]:
    """Object bounds (x0, y0, x1, y1) at frame t, or None when absent.

    The rectangle enters at entry_frame with its left edge at x = 4 and
    slides right at speed px/frame; it is gone once fully off-raster.
    """
    if spec.scenario in ("static", "illumination_ramp"):
        return None
    if t < spec.entry_frame:
        return None
    x0 = 4 + spec.speed * (t - spec.entry_frame)
    if x0 >= spec.width:
        return None
    x1 = min(x0 + spec.object_w, spec.width)
    y0 = max((spec.height - spec.object_h) // 2, 0)
    y1 = min(y0 + spec.object_h, spec.height)
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1, y1)


def rgb_at(spec: SynthSpec, t: int) -> np.ndarray:
    bg = background_rgb(spec.width, spec.height)
    rect = object_rect(spec, t)
    if spec.scenario == "illumination_ramp":
        gain = 1.0 + spec.ramp_slope * max(t - spec.entry_frame, 0)
        return np.clip(bg.astype(np.float64) * gain, 0, 255).astype(np.uint8)
    if spec.scenario == "colour_camouflage" or rect is None:
        # Camouflage: the object copies the background texture, so the RGB
        # stream is identical to the empty scene.
        return bg
    out = bg.copy()
    x0, y0, x1, y1 = rect
    if spec.scenario == "depth_camouflage":
        region = out[y0:y1, x0:x1].astype(np.int32) + spec.colour_offset
        out[y0:y1, x0:x1] = np.clip(region, 0, 255).astype(np.uint8)
    elif spec.scenario == "shadow":
        region = out[y0:y1, x0:x1].astype(np.int32) + spec.colour_offset
        out[y0:y1, x0:x1] = np.clip(region, 0, 255).astype(np.uint8)
        sx0, sx1 = x1, min(x1 + spec.object_w, spec.width)
        shadow = out[y0:y1, sx0:sx1].astype(np.float64) * spec.shadow_strength
        out[y0:y1, sx0:sx1] = shadow.astype(np.uint8)
    return out


def depth16_at(spec: SynthSpec, t: int, width: Optional[int] = None,
               height: Optional[int] = None) -> np.ndarray:
    """Depth plane at frame t, optionally rendered at a different resolution
    (the engine upscales mixed-resolution pairs; the benchmark uses this)."""
    w = width or spec.width
    h = height or spec.height
    depth = np.full((h, w), BG_DEPTH16, dtype=np.uint16)
    rect = object_rect(spec, t)
    if rect is None or spec.scenario == "depth_camouflage":
        return depth
    x0, y0, x1, y1 = rect
    # Scale object bounds when rendering at non-native resolution.
    sx = w / spec.width
    sy = h / spec.height
    x0, x1 = int(x0 * sx), max(int(x1 * sx), int(x0 * sx) + 1)
    y0, y1 = int(y0 * sy), max(int(y1 * sy), int(y0 * sy) + 1)
    depth[y0:y1, x0:x1] = BG_DEPTH16 - spec.depth_offset * DEPTH8_UNIT
    return depth


def gt_at(spec: SynthSpec, t: int) -> np.ndarray:
    """Ground-truth raster (0 background / 255 foreground) at frame t."""
    gt = np.zeros((spec.height, spec.width), dtype=np.uint8)
    rect = object_rect(spec, t)
    if rect is not None:
        x0, y0, x1, y1 = rect
        gt[y0:y1, x0:x1] = 255
    return gt


def frame_at(spec: SynthSpec, t: int):
    """(rgb, depth16, gt) for frame t."""
    return rgb_at(spec, t), depth16_at(spec, t), gt_at(spec, t)


def iter_frames(spec: SynthSpec):
    spec.validate()
    for t in range(spec.frames):
        yield frame_at(spec, t)


def write_sequence(spec: SynthSpec, out_dir, depth_format: str = "png") -> dict:
    """Render the scenario to `<out>/rgb`, `<out>/depth`, `<out>/gt`.

    Returns the created directory paths keyed by role.
    """
    spec.validate()
    if depth_format not in ("png", "pgm"):
        raise ConfigError(f"depth_format must be png or pgm, got {depth_format!r}")
    out = Path(out_dir)
    rgb_dir = out / "rgb"
    depth_dir = out / "depth"
    gt_dir = out / "gt"
    for d in (rgb_dir, depth_dir, gt_dir):
        d.mkdir(parents=True, exist_ok=True)
    for t in range(spec.frames):
        rgb, depth16, gt = frame_at(spec, t)
        stem = f"{t:06d}"
        frame_io.write_rgb_png(rgb_dir / f"{stem}.png", rgb)
        if depth_format == "png":
            frame_io.write_depth_png(depth_dir / f"{stem}.png", depth16)
        else:
            frame_io.write_depth_pgm(depth_dir / f"{stem}.pgm", depth16)
        frame_io.write_mask_png(gt_dir / f"{stem}.png", gt)
    return {"rgb": rgb_dir, "depth": depth_dir, "gt": gt_dir, "frames": spec.frames}
