"""Throughput benchmark over synthetic sequences.

Measures frames per second for (resolution pair, algorithm, mode, workers)
combinations. A resolution pair such as `720p/480p` names the RGB and depth
resolutions; mismatched pairs exercise the nearest-neighbour depth
upscaling inside the timed region, mirroring how mixed-resolution capture
costs show up in practice. Frame synthesis is excluded from the timing, as
is all disk I/O (the benchmark never touches disk).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import frames as frame_io
from .config import PipelineConfig
from .engine import SegmentationEngine
from .errors import ConfigError
from .gmm import GmmParams
from .pbas import PbasParams
from .synth import SynthSpec, depth16_at, rgb_at

RESOLUTIONS = {
    "480p": (640, 480),
    "720p": (1280, 720),
    "1080p": (1920, 1080),
}
DEFAULT_SIZES = ("480p/480p", "720p/480p", "720p/720p", "1080p/720p")


def parse_size_pair(pair: str):
    """'720p/480p' -> ((1280, 720), (640, 480)) for (rgb, depth)."""
    parts = pair.split("/")
    if len(parts) != 2 or parts[0] not in RESOLUTIONS or parts[1] not in RESOLUTIONS:
        raise ConfigError(
            f"bad size pair {pair!r}; expected <rgb>/<depth> with names "
            + ", ".join(RESOLUTIONS)
        )
    return RESOLUTIONS[parts[0]], RESOLUTIONS[parts[1]]


@dataclass
class BenchResult:
    size: str
    algorithm: str
    mode: str
    workers: int
    frames: int
    seconds: float

    @property
    def fps(self) -> float:
        return self.frames / self.seconds if self.seconds > 0 else float("inf")


def _bench_spec(width: int, height: int, frames: int) -> SynthSpec:
    return SynthSpec(
        scenario="colour_camouflage",
        width=width,
        height=height,
        frames=frames,
        entry_frame=min(25, frames // 4),
        object_w=max(width // 4, 8),
        object_h=max(height // 4, 8),
        speed=max(width // 80, 1),
    )


def run_one(size: str, algorithm: str, mode: str, workers: int, frames: int,
            seed: int = 0, gmm: GmmParams | None = None,
            pbas: PbasParams | None = None) -> BenchResult:
    """Benchmark one combination; returns the timing row."""
    (rw, rh), (dw, dh) = parse_size_pair(size)
    spec = _bench_spec(rw, rh, frames)
    config = PipelineConfig(
        algorithm=algorithm, mode=mode,
        gmm=gmm or GmmParams(), pbas=pbas or PbasParams(),
        seed=seed, workers=workers,
    )
    total = 0.0
    with SegmentationEngine(config, rw, rh) as engine:
        for t in range(frames):
            rgb = rgb_at(spec, t)
            use_depth = mode == "rgbd"
            depth16 = depth16_at(spec, t, dw, dh) if use_depth else None

            t0 = time.perf_counter()
            if use_depth:
                if depth16.shape != (rh, rw):
                    depth16 = frame_io.resample_depth(depth16, rw, rh)
                frame = frame_io.pack_frame(rgb, depth16)
            else:
                frame = np.zeros((rh, rw, 4), dtype=np.uint8)
                frame[:, :, :3] = rgb
            engine.process_frame(frame)
            total += time.perf_counter() - t0
    return BenchResult(size, algorithm, mode, workers, frames, total)


def run_benchmark(sizes, algorithms, modes, workers_list, frames: int,
                  seed: int = 0) -> list:
    """Run the full grid; one BenchResult per combination."""
    results = []
    for size in sizes:
        parse_size_pair(size)  # validate early, before any long run
    for size in sizes:
        for algorithm in algorithms:
            for mode in modes:
                for workers in workers_list:
                    results.append(
                        run_one(size, algorithm, mode, workers, frames, seed)
                    )
    return results


def format_bench_table(results: list) -> str:
    """fps table: one row per (algorithm, mode, workers), one size column."""
    sizes = list(dict.fromkeys(r.size for r in results))
    combos = list(dict.fromkeys((r.algorithm, r.mode, r.workers) for r in results))
    by_key = {(r.algorithm, r.mode, r.workers, r.size): r for r in results}
    header = ["algorithm", "mode", "workers"] + sizes
    rows = [header]
    for algorithm, mode, workers in combos:
        cells = [algorithm, mode, str(workers)]
        for size in sizes:
            r = by_key.get((algorithm, mode, workers, size))
            cells.append(f"{r.fps:.2f}fps" if r is not None else "-")
        rows.append(cells)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for i, r in enumerate(rows):
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
