"""Per-pixel Gaussian-mixture background model over RGB-D input.

Each pixel carries two independent mixtures: one over the RGB vector and one
over the 8-bit depth value. Classification scores a pixel against each
mixture with a scaled Gaussian density, multiplies the two scores when the
depth reading is valid, and thresholds the product. When depth is invalid
(0) or the depth mixture has never seen a valid reading, the RGB score alone
decides.

Two implementations live here and are kept bit-for-bit identical:

  - scalar functions (`density`, `match_component`, `classify_pixel`,
    `update_pixel`, `gmm_pixel_step`) operating on one `GmmPixelModel`;
    these define the semantics and serve as the oracle in tests;
  - a numba band kernel (`segment_rows`) running the same arithmetic over a
    structure-of-arrays grid (`GmmState`), used by the engine. Identical
    expression trees matter: reordering a multiply changes the last ulp and
    breaks the equivalence tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .errors import DimensionError

# Variance floor applied after every update; keeps densities finite on
# perfectly static synthetic input.
VAR_FLOOR = 1.0


@dataclass
class GmmParams:
    """Mixture sizes and update constants.

    k_rgb/k_d are the per-pixel component counts for the RGB and depth
    mixtures; alpha the learning rate; s the density scale; tau the
    background threshold on the fused score; match_lambda the match gate in
    standard deviations; var_init/w_init the parameters of newly created
    components.
    """

    k_rgb: int = 7
    k_d: int = 3
    alpha: float = 0.001
    s: float = 10000.0
    tau: float = 1.0
    match_lambda: float = 2.5
    var_init: float = 225.0
    w_init: float = 0.05

    def validate(self) -> None:
        if self.k_rgb < 1 or self.k_d < 1:
            raise ValueError("component counts must be >= 1")
        for name in ("alpha", "s", "tau", "match_lambda", "var_init", "w_init"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class GaussianComponent:
    weight: float
    mean: np.ndarray  # float64, shape (channels,)
    variance: float


@dataclass
class GmmPixelModel:
    """One pixel's state: RGB components plus depth components.

    Unseeded slots carry weight 0 and are skipped by both scoring and
    matching; a sub-model is considered seeded once component 0 has positive
    weight (component 0 is always the first slot filled).
    """

    rgb: list = field(default_factory=list)
    depth: list = field(default_factory=list)


def make_pixel_model(params: GmmParams) -> GmmPixelModel:
    """Allocate an unseeded pixel model (all weights zero)."""
    rgb = [GaussianComponent(0.0, np.zeros(3), params.var_init) for _ in range(params.k_rgb)]
    d = [GaussianComponent(0.0, np.zeros(1), params.var_init) for _ in range(params.k_d)]
    return GmmPixelModel(rgb=rgb, depth=d)


def density(x, comp: GaussianComponent, s: float) -> float:
    """Scaled Gaussian density: s / (2 pi v) * exp(-d^2 / (2 v)).

    d is the Euclidean distance of the observation from the component mean
    over however many channels the component carries; v is the variance
    (one scalar shared across channels).
    """
    v = comp.variance
    d2 = 0.0
    for c in range(len(comp.mean)):
        dd = float(x[c]) - comp.mean[c]
        d2 += dd * dd
    return (s / (2.0 * math.pi * v)) * math.exp(-(d2 / (2.0 * v)))


def match_component(x, comps: list, match_lambda: float) -> Optional[int]:
    """Index of the heaviest component within the match gate, or None.

    A component matches when d^2 < lambda^2 * v; unseeded (zero-weight)
    slots never match. Ties on weight go to the lower index.
    """
    lam2 = match_lambda * match_lambda
    best = None
    best_w = -1.0
    for k, comp in enumerate(comps):
        if comp.weight <= 0.0:
            continue
        d2 = 0.0
        for c in range(len(comp.mean)):
            dd = float(x[c]) - comp.mean[c]
            d2 += dd * dd
        if d2 < lam2 * comp.variance and comp.weight > best_w:
            best = k
            best_w = comp.weight
    return best


def _mixture_score(x, comps: list, s: float) -> float:
    p = 0.0
    for comp in comps:
        if comp.weight > 0.0:
            p += comp.weight * density(x, comp, s)
    return p


def classify_pixel(x_rgb, x_d: int, model: GmmPixelModel, params: GmmParams):
    """Score a pixel against the model; background iff score >= tau.

    Returns (foreground, fused score). The depth mixture participates only
    when the reading is valid (x_d > 0) and the mixture has been seeded;
    otherwise the RGB score alone is the fused score.
    """
    p = _mixture_score(x_rgb, model.rgb, params.s)
    if x_d > 0 and model.depth[0].weight > 0.0:
        p = p * _mixture_score((x_d,), model.depth, params.s)
    return p < params.tau, p


def _update_submodel(x, comps: list, params: GmmParams) -> None:
    alpha = params.alpha
    m = match_component(x, comps, params.match_lambda)
    if m is not None:
        matched = comps[m]
        d2 = 0.0
        for c in range(len(matched.mean)):
            dd = float(x[c]) - matched.mean[c]
            d2 += dd * dd
        for k, comp in enumerate(comps):
            wn = (1.0 - alpha) * comp.weight
            if k == m:
                wn += alpha
            comp.weight = wn
        for c in range(len(matched.mean)):
            matched.mean[c] = (1.0 - alpha) * matched.mean[c] + alpha * float(x[c])
        matched.variance = (1.0 - alpha) * matched.variance + alpha * d2
    else:
        # Replace the least-fit component (lowest w / sqrt(v); unseeded
        # slots rank lowest automatically, ties go to the lower index).
        r = 0
        best = math.inf
        for k, comp in enumerate(comps):
            f = comp.weight / math.sqrt(comp.variance)
            if f < best:
                best = f
                r = k
        comps[r].weight = params.w_init
        comps[r].mean = np.array([float(v) for v in x], dtype=np.float64)
        comps[r].variance = params.var_init
    total = 0.0
    for comp in comps:
        total += comp.weight
    for comp in comps:
        comp.weight = comp.weight / total
    for comp in comps:
        if comp.variance < VAR_FLOOR:
            comp.variance = VAR_FLOOR


def update_pixel(x_rgb, x_d: int, model: GmmPixelModel, params: GmmParams) -> None:
    """Stauffer-Grimson-style update, in place.

    The RGB mixture always absorbs the observation; the depth mixture only
    when the reading is valid. Matched component: blended mean/variance with
    rate alpha; no match: least-fit component replaced by (w_init, x,
    var_init). Weights are renormalised and variances floored afterwards.
    """
    _update_submodel(x_rgb, model.rgb, params)
    if x_d > 0:
        _update_submodel((x_d,), model.depth, params)


def _seed_submodel(comps: list, x, var_init: float) -> None:
    comps[0].weight = 1.0
    comps[0].mean = np.array([float(v) for v in x], dtype=np.float64)
    comps[0].variance = var_init


def gmm_pixel_step(x_rgb, x_d: int, model: GmmPixelModel, params: GmmParams):
    """One frame step for one pixel: seed if fresh, classify, then update.

    This is the exact per-pixel contract the frame kernel implements. A
    never-seen pixel seeds component 0 of each applicable sub-model from the
    observation first, so the first frame classifies as background.
    """
    if model.rgb[0].weight == 0.0:
        _seed_submodel(model.rgb, x_rgb, params.var_init)
    if x_d > 0 and model.depth[0].weight == 0.0:
        _seed_submodel(model.depth, (x_d,), params.var_init)
    fg, score = classify_pixel(x_rgb, x_d, model, params)
    update_pixel(x_rgb, x_d, model, params)
    return fg, score


# ---------------------------------------------------------------------------
# Grid state + band kernel
# ---------------------------------------------------------------------------


class GmmState:
    """Structure-of-arrays mixture grid for a whole frame.

    Weight/mean/variance arrays are float64 (the classification product spans
    a huge dynamic range). A sub-model is seeded iff its component-0 weight
    is positive.
    """

    def __init__(self, width: int, height: int, params: GmmParams):
        params.validate()
        self.width = width
        self.height = height
        self.params = params
        k, kd = params.k_rgb, params.k_d
        self.rgb_w = np.zeros((height, width, k))
        self.rgb_mu = np.zeros((height, width, k, 3))
        self.rgb_var = np.full((height, width, k), params.var_init)
        self.d_w = np.zeros((height, width, kd))
        self.d_mu = np.zeros((height, width, kd, 1))
        self.d_var = np.full((height, width, kd), params.var_init)

    def arrays(self) -> dict:
        return {
            "rgb_w": self.rgb_w, "rgb_mu": self.rgb_mu, "rgb_var": self.rgb_var,
            "d_w": self.d_w, "d_mu": self.d_mu, "d_var": self.d_var,
        }

    def pixel_model(self, x: int, y: int) -> GmmPixelModel:
        """Copy one pixel's state out as a scalar model (debug/test aid)."""
        model = make_pixel_model(self.params)
        for k in range(self.params.k_rgb):
            model.rgb[k] = GaussianComponent(
                float(self.rgb_w[y, x, k]), self.rgb_mu[y, x, k].copy(),
                float(self.rgb_var[y, x, k]),
            )
        for k in range(self.params.k_d):
            model.depth[k] = GaussianComponent(
                float(self.d_w[y, x, k]), self.d_mu[y, x, k].copy(),
                float(self.d_var[y, x, k]),
            )
        return model

    def segment_rows(self, frame: np.ndarray, y0: int, y1: int,
                     use_depth: bool, mask: np.ndarray) -> None:
        p = self.params
        _gmm_band(frame, y0, y1,
                  self.rgb_w, self.rgb_mu, self.rgb_var,
                  self.d_w, self.d_mu, self.d_var,
                  p.alpha, p.s, p.tau,
                  p.match_lambda * p.match_lambda,
                  p.var_init, p.w_init, use_depth, mask)


@njit(cache=True, nogil=True)
def _gmm_sub_step(xv, w, mu, var, alpha, s, lam2, var_init, w_init):
    """Seed/score/update one sub-model in place; returns the mixture score.

    Mirrors gmm_pixel_step's scalar arithmetic expression-for-expression.
    """
    nk = w.shape[0]
    nc = xv.shape[0]
    if w[0] == 0.0:
        w[0] = 1.0
        for c in range(nc):
            mu[0, c] = xv[c]
        var[0] = var_init

    # Score (pre-update state) and the matched component in one scan.
    p = 0.0
    m = -1
    best_w = -1.0
    d2m = 0.0
    for k in range(nk):
        wk = w[k]
        if wk <= 0.0:
            continue
        d2 = 0.0
        for c in range(nc):
            dd = xv[c] - mu[k, c]
            d2 += dd * dd
        v = var[k]
        p += wk * ((s / (2.0 * math.pi * v)) * math.exp(-(d2 / (2.0 * v))))
        if d2 < lam2 * v and wk > best_w:
            m = k
            best_w = wk
            d2m = d2

    if m >= 0:
        for k in range(nk):
            wn = (1.0 - alpha) * w[k]
            if k == m:
                wn += alpha
            w[k] = wn
        for c in range(nc):
            mu[m, c] = (1.0 - alpha) * mu[m, c] + alpha * xv[c]
        var[m] = (1.0 - alpha) * var[m] + alpha * d2m
    else:
        r = 0
        best = np.inf
        for k in range(nk):
            f = w[k] / math.sqrt(var[k])
            if f < best:
                best = f
                r = k
        w[r] = w_init
        for c in range(nc):
            mu[r, c] = xv[c]
        var[r] = var_init

    total = 0.0
    for k in range(nk):
        total += w[k]
    for k in range(nk):
        w[k] = w[k] / total
    for k in range(nk):
        if var[k] < VAR_FLOOR:
            var[k] = VAR_FLOOR
    return p


@njit(cache=True, nogil=True)
def _gmm_band(frame, y0, y1, rgb_w, rgb_mu, rgb_var, d_w, d_mu, d_var,
              alpha, s, tau, lam2, var_init, w_init, use_depth, mask):
    width = frame.shape[1]
    xrgb = np.empty(3)
    xd = np.empty(1)
    for y in range(y0, y1):
        for x in range(width):
            xrgb[0] = frame[y, x, 0]
            xrgb[1] = frame[y, x, 1]
            xrgb[2] = frame[y, x, 2]
            p = _gmm_sub_step(xrgb, rgb_w[y, x], rgb_mu[y, x], rgb_var[y, x],
                              alpha, s, lam2, var_init, w_init)
            if use_depth and frame[y, x, 3] > 0:
                xd[0] = frame[y, x, 3]
                pd = _gmm_sub_step(xd, d_w[y, x], d_mu[y, x], d_var[y, x],
                                   alpha, s, lam2, var_init, w_init)
                p = p * pd
            mask[y, x] = 0 if p >= tau else 255
