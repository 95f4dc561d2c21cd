"""Sequence-processing engine: model-grid allocation, the frame loop and a
deterministic data-parallel pixel backend.

Frames are processed strictly in temporal order (the background models are
sequential state). Within a frame, rows are partitioned into contiguous
bands handed to a thread pool; the kernels release the GIL, so bands run
truly in parallel, and because every pixel's result is a pure function of
(its own state, the frame, the counter-based RNG) the output is
bit-identical for any worker count. The PBAS neighbour-intent pass, the one
cross-pixel interaction, is applied sequentially in row-major order after
all bands finish.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import frames as frame_io
from .config import PipelineConfig
from .engine_rng import pixel_rng, rng_stream  # noqa: F401  (public surface)
from .errors import DimensionError, SequenceError
from .gmm import GmmState
from .pbas import PbasState


@dataclass
class RunStats:
    """Segment-stage timing for a run; disk I/O is excluded."""

    frames_processed: int = 0
    seconds: float = 0.0
    per_frame_seconds: list = field(default_factory=list)

    @property
    def fps(self) -> float:
        return self.frames_processed / self.seconds if self.seconds > 0 else float("inf")

    @property
    def seconds_per_frame(self) -> float:
        return self.seconds / self.frames_processed if self.frames_processed else 0.0


def _band_bounds(height: int, workers: int) -> list:
    edges = np.linspace(0, height, workers + 1).astype(np.int64)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(workers)]


class SegmentationEngine:
    """Per-sequence segmentation state machine.

    Allocates the model grid once, then turns packed RGBD frames into
    foreground masks one frame at a time via process_frame.
    """

    def __init__(self, config: PipelineConfig, width: int, height: int):
        config.validate()
        if width <= 0 or height <= 0:
            raise DimensionError("frame dimensions must be positive")
        self.config = config
        self.width = width
        self.height = height
        self.frame_idx = 0
        self.use_depth = config.mode == "rgbd"
        self._bands = _band_bounds(height, config.workers)
        if config.algorithm == "gmm":
            self.state = GmmState(width, height, config.gmm)
        else:
            self.state = PbasState(width, height, config.pbas)
            # One reusable intent buffer per band; a band can emit at most
            # one intent per pixel.
            self._intents = [
                np.empty(((y1 - y0) * width, 3), dtype=np.int64) for y0, y1 in self._bands
            ]
        self._pool = None
        if config.workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            self._pool = ThreadPoolExecutor(max_workers=config.workers)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def state_arrays(self) -> dict:
        return self.state.arrays()

    def process_frame(self, frame: np.ndarray) -> np.ndarray:
        """Segment one packed (H, W, 4) uint8 frame; returns the 0/255 mask."""
        if frame.shape != (self.height, self.width, 4):
            raise DimensionError(
                f"frame shape {frame.shape} does not match engine "
                f"({self.height}, {self.width}, 4)"
            )
        mask = np.empty((self.height, self.width), dtype=np.uint8)
        if self.config.algorithm == "gmm":
            self._run_bands_gmm(frame, mask)
        else:
            self._run_bands_pbas(frame, mask)
        self.frame_idx += 1
        return mask

    def _run_bands_gmm(self, frame, mask) -> None:
        if self._pool is None:
            y0, y1 = 0, self.height
            self.state.segment_rows(frame, y0, y1, self.use_depth, mask)
            return
        futures = [
            self._pool.submit(self.state.segment_rows, frame, y0, y1, self.use_depth, mask)
            for y0, y1 in self._bands
        ]
        for f in futures:
            f.result()

    def _run_bands_pbas(self, frame, mask) -> None:
        seed = np.uint64(self.config.seed)
        idx = self.frame_idx
        if self._pool is None:
            count = self.state.segment_rows(frame, idx, 0, self.height,
                                            self.use_depth, seed, mask, self._intents[0])
            self.state.apply_intents(frame, self._intents[0], count, self.use_depth)
            return
        futures = [
            self._pool.submit(self.state.segment_rows, frame, idx, y0, y1,
                              self.use_depth, seed, mask, buf)
            for (y0, y1), buf in zip(self._bands, self._intents)
        ]
        counts = [f.result() for f in futures]
        # Bands are concatenated in band order, so intents land in global
        # row-major emission order regardless of scheduling.
        for buf, count in zip(self._intents, counts):
            self.state.apply_intents(frame, buf, count, self.use_depth)


def process_sequence(
    source: frame_io.SequenceSource,
    config: PipelineConfig,
    on_mask: Optional[Callable] = None,
) -> RunStats:
    """Run a whole directory sequence through the engine.

    Depth maps are resampled to the RGB resolution when they differ; the
    reported timing covers resample + pack + segment (disk I/O excluded).
    Masks are written to config.out_dir when config.emit_masks is set, named
    after the RGB frame stems; on_mask, when given, receives
    (frame_id, mask) for every frame.
    """
    if len(source) == 0:
        raise SequenceError("sequence is empty")
    use_depth = config.mode == "rgbd"
    if use_depth and source.depth_paths is None:
        raise SequenceError("rgbd mode needs a depth directory")

    out_dir = None
    if config.emit_masks:
        if config.out_dir is None:
            raise SequenceError("emit_masks is set but no out_dir configured")
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    stats = RunStats()
    engine = None
    try:
        for i in range(len(source)):
            try:
                rgb = frame_io.load_rgb(source.rgb_paths[i])
                depth16 = None
                if use_depth:
                    depth16 = frame_io.load_depth(source.depth_paths[i])
            except Exception as exc:
                raise SequenceError(f"frame {i} ({source.frame_id(i)}): {exc}") from exc

            if engine is None:
                engine = SegmentationEngine(config, rgb.shape[1], rgb.shape[0])
            elif (rgb.shape[0], rgb.shape[1]) != (engine.height, engine.width):
                raise SequenceError(
                    f"frame {i} ({source.frame_id(i)}): dimensions "
                    f"{rgb.shape[1]}x{rgb.shape[0]} differ from sequence "
                    f"{engine.width}x{engine.height}"
                )

            t0 = time.perf_counter()
            if use_depth:
                if depth16.shape != rgb.shape[:2]:
                    depth16 = frame_io.resample_depth(depth16, rgb.shape[1], rgb.shape[0])
                frame = frame_io.pack_frame(rgb, depth16)
            else:
                frame = np.zeros(rgb.shape[:2] + (4,), dtype=np.uint8)
                frame[:, :, :3] = rgb
            mask = engine.process_frame(frame)
            dt = time.perf_counter() - t0

            stats.frames_processed += 1
            stats.seconds += dt
            stats.per_frame_seconds.append(dt)
            if out_dir is not None:
                frame_io.write_mask_png(out_dir / f"{source.frame_id(i)}.png", mask)
            if on_mask is not None:
                on_mask(source.frame_id(i), mask)
    finally:
        if engine is not None:
            engine.close()
    return stats
