"""Counter-based per-pixel random number generator.

The PBAS update path needs randomness that is a pure function of
(run seed, pixel x, pixel y, frame index, draw index): any worker may
evaluate any pixel and always obtain the same draw, which is what makes the
multi-threaded engine bit-reproducible. The generator chains a SplitMix64
finalizer over the five key fields; each absorption step is a full
avalanche, so consecutive coordinates produce statistically independent
streams.
"""

import numpy as np
from numba import njit

_SALT = np.uint64(0x5851F42D4C957F2D)
_K_X = np.uint64(0x9E3779B97F4A7C15)
_K_Y = np.uint64(0xC2B2AE3D27D4EB4F)
_K_F = np.uint64(0x165667B19E3779F9)
_K_D = np.uint64(0xD6E8FEB86659FD93)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def pixel_rng_nb(seed, x, y, frame_idx, draw_idx):
    """Kernel-side draw; callers pass non-negative 64-bit values."""
    h = np.uint64(seed) ^ _SALT
    h = _mix64(h ^ (np.uint64(x) * _K_X))
    h = _mix64(h ^ (np.uint64(y) * _K_Y))
    h = _mix64(h ^ (np.uint64(frame_idx) * _K_F))
    h = _mix64(h ^ (np.uint64(draw_idx) * _K_D))
    return (h >> _S11) * _INV53


@njit(cache=True, nogil=True)
def _rng_stream_nb(seed, x, y, frame_idx, count):
    out = np.empty(count)
    for i in range(count):
        out[i] = pixel_rng_nb(seed, x, y, frame_idx, i)
    return out


def pixel_rng(seed, x, y, frame_idx, draw_idx):
    """Uniform draw in [0, 1), a pure function of its five arguments."""
    return pixel_rng_nb(np.uint64(seed), np.uint64(x), np.uint64(y),
                        np.uint64(frame_idx), np.uint64(draw_idx))


def rng_stream(seed, x, y, frame_idx, count):
    """count consecutive draws at one pixel (statistical-test helper)."""
    return _rng_stream_nb(np.uint64(seed), np.uint64(x), np.uint64(y),
                          np.uint64(frame_idx), count)
