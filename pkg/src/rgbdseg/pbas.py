"""Pixel-Based Adaptive Segmenter over RGB-D input.

Each pixel keeps a ring buffer of N recent RGBD samples plus adaptive
per-pixel state: decision thresholds R_rgb / R_d and an update-rate
parameter T. Classification compares the pixel against the buffer one
component group at a time (RGB distance = max of per-channel absolute
differences; depth distance = absolute difference over samples with a valid
stored depth) and ORs the group verdicts: foreground iff any evaluated group
says foreground. A pixel whose own depth reading is invalid, or whose buffer
holds fewer than min_matches valid depths, is judged by RGB alone.

Background-labelled pixels stochastically refresh their own buffer and may
ask one 8-neighbour to absorb that neighbour's current value; foreground
pixels never touch their model. All randomness comes from the engine's
counter-based generator, so results do not depend on scheduling.

As in the GMM module, the scalar functions define the semantics and the
numba band kernel reproduces them bit-for-bit over the grid state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .engine_rng import pixel_rng_nb

# Fixed row-major scan order of the 8-neighbourhood; border pixels keep only
# the in-bounds entries, preserving this order.
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass
class PbasParams:
    """Sample-buffer size plus the adaptation constants.

    Only the buffer size n is specific to the RGB-D variant; the remaining
    defaults are the classic PBAS operating point.
    """

    n: int = 20
    min_matches: int = 2
    r_init: float = 18.0
    r_lower: float = 18.0
    r_scale: float = 5.0
    r_inc_dec: float = 0.05
    t_init: float = 18.0
    t_lower: float = 2.0
    t_upper: float = 200.0
    t_inc: float = 1.0
    t_dec: float = 0.05

    def validate(self) -> None:
        if self.n < 1 or self.min_matches < 1 or self.n < self.min_matches:
            raise ValueError("need n >= min_matches >= 1")
        if self.t_lower > self.t_upper or not (self.t_lower <= self.t_init <= self.t_upper):
            raise ValueError("T bounds must be ordered with t_init inside")
        if self.r_lower <= 0 or self.r_init < self.r_lower:
            raise ValueError("need r_init >= r_lower > 0")


def pbas_distance(x: int, s: int) -> int:
    """Per-component distance: absolute difference of two channel values."""
    return abs(int(x) - int(s))


def rgb_group_distance(x_rgb, s_rgb) -> int:
    """RGB group distance: max of the three per-channel absolute differences."""
    return max(
        pbas_distance(x_rgb[0], s_rgb[0]),
        pbas_distance(x_rgb[1], s_rgb[1]),
        pbas_distance(x_rgb[2], s_rgb[2]),
    )


@dataclass
class PbasPixelModel:
    """One pixel's buffer and adaptive state (scalar reference form)."""

    samples: np.ndarray          # uint8, (n, 4)
    r_rgb: float
    r_d: float
    t: float
    dmin_rgb: np.ndarray         # uint8 ring buffer, (n,)
    dmin_d: np.ndarray           # uint8 ring buffer, (n,)
    len_rgb: int = 0
    pos_rgb: int = 0
    len_d: int = 0
    pos_d: int = 0


def make_pixel_model(params: PbasParams) -> PbasPixelModel:
    return PbasPixelModel(
        samples=np.zeros((params.n, 4), dtype=np.uint8),
        r_rgb=params.r_init,
        r_d=params.r_init,
        t=params.t_init,
        dmin_rgb=np.zeros(params.n, dtype=np.uint8),
        dmin_d=np.zeros(params.n, dtype=np.uint8),
    )


@dataclass
class PbasDecision:
    foreground: bool
    bg_rgb: bool
    depth_evaluated: bool
    bg_depth: bool
    dmin_rgb: int
    dmin_depth: Optional[int]


def classify_pixel_pbas(x, model: PbasPixelModel, params: PbasParams) -> PbasDecision:
    """Classify one pixel against a warm model (all n samples present).

    x is an (r, g, b, d) quadruple with d == 0 meaning invalid depth. The
    fused label is foreground iff any evaluated group votes foreground; the
    recorded dmin values are brute-force minima over the whole buffer.
    """
    n = params.n
    cnt_rgb = 0
    dmin_rgb = 255
    for i in range(n):
        dist = rgb_group_distance(x, model.samples[i])
        if dist < model.r_rgb:
            cnt_rgb += 1
        if dist < dmin_rgb:
            dmin_rgb = dist
    bg_rgb = cnt_rgb >= params.min_matches

    depth_evaluated = False
    bg_depth = True
    dmin_depth: Optional[int] = None
    if int(x[3]) > 0:
        valid = 0
        cnt_d = 0
        dmin_d = 255
        for i in range(n):
            sd = int(model.samples[i, 3])
            if sd == 0:
                continue
            valid += 1
            dist = pbas_distance(x[3], sd)
            if dist < model.r_d:
                cnt_d += 1
            if dist < dmin_d:
                dmin_d = dist
        if valid >= params.min_matches:
            depth_evaluated = True
            bg_depth = cnt_d >= params.min_matches
            dmin_depth = dmin_d

    foreground = (not bg_rgb) or (depth_evaluated and not bg_depth)
    return PbasDecision(foreground, bg_rgb, depth_evaluated, bg_depth, dmin_rgb, dmin_depth)


def push_dmin(model: PbasPixelModel, group: str, value: int) -> None:
    """Record a minimal distance in the group's ring buffer."""
    if group == "rgb":
        model.dmin_rgb[model.pos_rgb] = value
        model.pos_rgb = (model.pos_rgb + 1) % len(model.dmin_rgb)
        model.len_rgb = min(model.len_rgb + 1, len(model.dmin_rgb))
    else:
        model.dmin_d[model.pos_d] = value
        model.pos_d = (model.pos_d + 1) % len(model.dmin_d)
        model.len_d = min(model.len_d + 1, len(model.dmin_d))


def dmin_average(values: np.ndarray, length: int) -> float:
    """Average of the filled portion of a dmin ring buffer (exact int sum)."""
    total = 0
    for i in range(length):
        total += int(values[i])
    return total / length


def adapt_R(model: PbasPixelModel, dmin_avg_rgb: Optional[float],
            dmin_avg_d: Optional[float], params: PbasParams) -> None:
    """Adapt the decision thresholds from the dmin averages.

    Per group: shrink by r_inc_dec while R exceeds r_scale times the average
    minimal distance, grow otherwise; clamp at r_lower. A group with no
    average this frame (no new dmin evidence) is left alone.
    """
    if dmin_avg_rgb is not None:
        if model.r_rgb > dmin_avg_rgb * params.r_scale:
            model.r_rgb = model.r_rgb * (1.0 - params.r_inc_dec)
        else:
            model.r_rgb = model.r_rgb * (1.0 + params.r_inc_dec)
        model.r_rgb = max(model.r_rgb, params.r_lower)
    if dmin_avg_d is not None:
        if model.r_d > dmin_avg_d * params.r_scale:
            model.r_d = model.r_d * (1.0 - params.r_inc_dec)
        else:
            model.r_d = model.r_d * (1.0 + params.r_inc_dec)
        model.r_d = max(model.r_d, params.r_lower)


def adapt_T(model: PbasPixelModel, foreground: bool, dmin_avg: float,
            params: PbasParams) -> None:
    """Adapt the update-rate parameter from the fused label.

    Foreground raises T (slower absorption), background lowers it; both
    steps are scaled by 1/max(dmin_avg, 1) and the result is clamped to
    [t_lower, t_upper].
    """
    guard = dmin_avg if dmin_avg > 1.0 else 1.0
    if foreground:
        model.t = model.t + params.t_inc / guard
    else:
        model.t = model.t - params.t_dec / guard
    if model.t < params.t_lower:
        model.t = params.t_lower
    elif model.t > params.t_upper:
        model.t = params.t_upper


def update_model_pbas(x, model: PbasPixelModel, foreground: bool, draws,
                      params: PbasParams, neighbors=()):
    """Stochastic model refresh for one background-labelled pixel.

    draws is the pixel's (u0, u1, u2) triple from the counter-based
    generator. u0 decides the self-replacement (probability 1/T) and, when
    it fires, u0/p re-stretched picks the slot; u1 likewise decides and
    picks among the in-bounds neighbours; u2 picks the slot the neighbour
    should overwrite. Returns (ny, nx, slot) when a neighbour update is
    requested, else None; foreground pixels change nothing.
    """
    if foreground:
        return None
    u0, u1, u2 = draws
    p = 1.0 / model.t
    n = params.n
    if u0 < p:
        slot = int((u0 / p) * n)
        if slot >= n:
            slot = n - 1
        for c in range(4):
            model.samples[slot, c] = x[c]
    if u1 < p and len(neighbors) > 0:
        j = int((u1 / p) * len(neighbors))
        if j >= len(neighbors):
            j = len(neighbors) - 1
        slot = int(u2 * n)
        if slot >= n:
            slot = n - 1
        ny, nx = neighbors[j]
        return (ny, nx, slot)
    return None


def in_bounds_neighbors(x: int, y: int, width: int, height: int):
    """The pixel's 8-neighbourhood candidates in fixed scan order."""
    out = []
    for dy, dx in NEIGHBOR_OFFSETS:
        ny, nx = y + dy, x + dx
        if 0 <= ny < height and 0 <= nx < width:
            out.append((ny, nx))
    return out


# ---------------------------------------------------------------------------
# Grid state + band kernel
# ---------------------------------------------------------------------------


class PbasState:
    """Structure-of-arrays PBAS grid.

    The first n frames only fill the sample buffers (warm-up); every pixel is
    labelled background during that phase and no adaptation or stochastic
    update runs.
    """

    def __init__(self, width: int, height: int, params: PbasParams):
        params.validate()
        self.width = width
        self.height = height
        self.params = params
        n = params.n
        self.samples = np.zeros((height, width, n, 4), dtype=np.uint8)
        self.dmin_rgb = np.zeros((height, width, n), dtype=np.uint8)
        self.dmin_d = np.zeros((height, width, n), dtype=np.uint8)
        self.len_rgb = np.zeros((height, width), dtype=np.uint8)
        self.pos_rgb = np.zeros((height, width), dtype=np.uint8)
        self.len_d = np.zeros((height, width), dtype=np.uint8)
        self.pos_d = np.zeros((height, width), dtype=np.uint8)
        self.r_rgb = np.full((height, width), params.r_init)
        self.r_d = np.full((height, width), params.r_init)
        self.t = np.full((height, width), params.t_init)

    def arrays(self) -> dict:
        return {
            "samples": self.samples,
            "dmin_rgb": self.dmin_rgb, "dmin_d": self.dmin_d,
            "len_rgb": self.len_rgb, "pos_rgb": self.pos_rgb,
            "len_d": self.len_d, "pos_d": self.pos_d,
            "r_rgb": self.r_rgb, "r_d": self.r_d, "t": self.t,
        }

    def pixel_model(self, x: int, y: int) -> PbasPixelModel:
        """Copy one pixel's state out as a scalar model (debug/test aid)."""
        return PbasPixelModel(
            samples=self.samples[y, x].copy(),
            r_rgb=float(self.r_rgb[y, x]),
            r_d=float(self.r_d[y, x]),
            t=float(self.t[y, x]),
            dmin_rgb=self.dmin_rgb[y, x].copy(),
            dmin_d=self.dmin_d[y, x].copy(),
            len_rgb=int(self.len_rgb[y, x]),
            pos_rgb=int(self.pos_rgb[y, x]),
            len_d=int(self.len_d[y, x]),
            pos_d=int(self.pos_d[y, x]),
        )

    def segment_rows(self, frame: np.ndarray, frame_idx: int, y0: int, y1: int,
                     use_depth: bool, seed: int, mask: np.ndarray,
                     intents: np.ndarray) -> int:
        p = self.params
        return _pbas_band(
            frame, frame_idx, y0, y1,
            self.samples, self.dmin_rgb, self.dmin_d,
            self.len_rgb, self.pos_rgb, self.len_d, self.pos_d,
            self.r_rgb, self.r_d, self.t,
            seed, p.n, p.min_matches,
            p.r_lower, p.r_scale, p.r_inc_dec,
            p.t_lower, p.t_upper, p.t_inc, p.t_dec,
            use_depth, mask, intents,
        )

    def apply_intents(self, frame: np.ndarray, intents: np.ndarray, count: int,
                      use_depth: bool) -> None:
        _apply_intents(self.samples, frame, intents, count, use_depth)


_NBR_DY = np.array([dy for dy, _ in NEIGHBOR_OFFSETS], dtype=np.int64)
_NBR_DX = np.array([dx for _, dx in NEIGHBOR_OFFSETS], dtype=np.int64)


@njit(cache=True, nogil=True)
def _pbas_band(frame, frame_idx, y0, y1, samples, dmin_rgb, dmin_d,
               len_rgb, pos_rgb, len_d, pos_d, r_rgb, r_d, t,
               seed, n, min_matches, r_lower, r_scale, r_inc_dec,
               t_lower, t_upper, t_inc, t_dec, use_depth, mask, intents):
    """Classify + adapt + self-update one row band; collect neighbour intents.

    Every pixel touches only its own state, so fusing the read-only
    classification with the per-pixel adaptation is observationally
    equivalent to running them as separate passes. Neighbour intents are the
    only cross-pixel effect; they are collected here in row-major order and
    applied later by _apply_intents. Returns the number of intents written.
    """
    width = frame.shape[1]
    height = frame.shape[0]
    n_intents = 0
    for y in range(y0, y1):
        for x in range(width):
            r = frame[y, x, 0]
            g = frame[y, x, 1]
            b = frame[y, x, 2]
            # The observation the model sees: depth is gated off entirely in
            # rgb_only mode, including what gets stored in the buffer.
            d = frame[y, x, 3] if use_depth else np.uint8(0)

            if frame_idx < n:
                # Warm-up: fill the buffer, call it background.
                samples[y, x, frame_idx, 0] = r
                samples[y, x, frame_idx, 1] = g
                samples[y, x, frame_idx, 2] = b
                samples[y, x, frame_idx, 3] = d
                mask[y, x] = 0
                continue

            # RGB group: distance = max over channels. Values widen to int64
            # before subtracting; uint8 arithmetic would wrap negative diffs.
            cnt = 0
            dminr = 255
            rr = r_rgb[y, x]
            for i in range(n):
                dr = abs(np.int64(r) - np.int64(samples[y, x, i, 0]))
                dg = abs(np.int64(g) - np.int64(samples[y, x, i, 1]))
                db = abs(np.int64(b) - np.int64(samples[y, x, i, 2]))
                dist = dr
                if dg > dist:
                    dist = dg
                if db > dist:
                    dist = db
                if dist < rr:
                    cnt += 1
                if dist < dminr:
                    dminr = dist
            bg_rgb = cnt >= min_matches

            # Depth group: valid stored samples only; abstains without
            # min_matches of them or without a valid pixel reading.
            depth_eval = False
            bg_depth = True
            dmind = 255
            if d > 0:
                valid = 0
                cntd = 0
                rd = r_d[y, x]
                for i in range(n):
                    sd = samples[y, x, i, 3]
                    if sd == 0:
                        continue
                    valid += 1
                    dist = abs(np.int64(d) - np.int64(sd))
                    if dist < rd:
                        cntd += 1
                    if dist < dmind:
                        dmind = dist
                if valid >= min_matches:
                    depth_eval = True
                    bg_depth = cntd >= min_matches

            fg = (not bg_rgb) or (depth_eval and not bg_depth)
            mask[y, x] = 255 if fg else 0

            # Record dmin evidence and adapt R per group.
            dmin_rgb[y, x, pos_rgb[y, x]] = dminr
            pos_rgb[y, x] = (pos_rgb[y, x] + 1) % n
            if len_rgb[y, x] < n:
                len_rgb[y, x] += 1
            total = 0
            for i in range(len_rgb[y, x]):
                total += dmin_rgb[y, x, i]
            avg_rgb = total / len_rgb[y, x]
            if r_rgb[y, x] > avg_rgb * r_scale:
                r_rgb[y, x] = r_rgb[y, x] * (1.0 - r_inc_dec)
            else:
                r_rgb[y, x] = r_rgb[y, x] * (1.0 + r_inc_dec)
            if r_rgb[y, x] < r_lower:
                r_rgb[y, x] = r_lower

            if depth_eval:
                dmin_d[y, x, pos_d[y, x]] = dmind
                pos_d[y, x] = (pos_d[y, x] + 1) % n
                if len_d[y, x] < n:
                    len_d[y, x] += 1
                total = 0
                for i in range(len_d[y, x]):
                    total += dmin_d[y, x, i]
                avg_d = total / len_d[y, x]
                if r_d[y, x] > avg_d * r_scale:
                    r_d[y, x] = r_d[y, x] * (1.0 - r_inc_dec)
                else:
                    r_d[y, x] = r_d[y, x] * (1.0 + r_inc_dec)
                if r_d[y, x] < r_lower:
                    r_d[y, x] = r_lower

            # Adapt T from the fused label and the RGB dmin average.
            guard = avg_rgb if avg_rgb > 1.0 else 1.0
            if fg:
                t[y, x] = t[y, x] + t_inc / guard
            else:
                t[y, x] = t[y, x] - t_dec / guard
            if t[y, x] < t_lower:
                t[y, x] = t_lower
            elif t[y, x] > t_upper:
                t[y, x] = t_upper

            # Stochastic refresh for background pixels only.
            if not fg:
                prob = 1.0 / t[y, x]
                u0 = pixel_rng_nb(seed, x, y, frame_idx, 0)
                if u0 < prob:
                    slot = int((u0 / prob) * n)
                    if slot >= n:
                        slot = n - 1
                    samples[y, x, slot, 0] = r
                    samples[y, x, slot, 1] = g
                    samples[y, x, slot, 2] = b
                    samples[y, x, slot, 3] = d
                u1 = pixel_rng_nb(seed, x, y, frame_idx, 1)
                if u1 < prob:
                    # Count in-bounds neighbours, then resolve the drawn
                    # index in the fixed scan order.
                    m = 0
                    for j in range(8):
                        ny = y + _NBR_DY[j]
                        nx = x + _NBR_DX[j]
                        if 0 <= ny < height and 0 <= nx < width:
                            m += 1
                    pick = int((u1 / prob) * m)
                    if pick >= m:
                        pick = m - 1
                    u2 = pixel_rng_nb(seed, x, y, frame_idx, 2)
                    slot = int(u2 * n)
                    if slot >= n:
                        slot = n - 1
                    seen = 0
                    for j in range(8):
                        ny = y + _NBR_DY[j]
                        nx = x + _NBR_DX[j]
                        if 0 <= ny < height and 0 <= nx < width:
                            if seen == pick:
                                intents[n_intents, 0] = ny
                                intents[n_intents, 1] = nx
                                intents[n_intents, 2] = slot
                                n_intents += 1
                                break
                            seen += 1
    return n_intents


@njit(cache=True, nogil=True)
def _apply_intents(samples, frame, intents, count, use_depth):
    """Sequentially apply neighbour intents: the target pixel absorbs its
    own current (depth-gated) value at the requested slot."""
    for i in range(count):
        y = intents[i, 0]
        x = intents[i, 1]
        slot = intents[i, 2]
        samples[y, x, slot, 0] = frame[y, x, 0]
        samples[y, x, slot, 1] = frame[y, x, 1]
        samples[y, x, slot, 2] = frame[y, x, 2]
        samples[y, x, slot, 3] = frame[y, x, 3] if use_depth else np.uint8(0)
