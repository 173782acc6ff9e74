"""Counter-based 64-bit generator ("ctr-splitmix64", version 1).

Output word i of stream s under seed k is::

    key  = mix64(k ^ (s * 0xD1B54A32D192ED03))
    word = mix64(key + (i + 1) * 0x9E3779B97F4A7C15)          (mod 2**64)

    mix64(z): z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
              return z ^ (z >> 31)

i.e. the SplitMix64 finalizer applied to a Weyl counter. Any element of any
stream can be computed independently, and only wrapping uint64 arithmetic is
involved, so the words are identical on every platform.
"""

from __future__ import annotations

import numpy as np

from .detmath import det_ndtri

VERSION = 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
STREAM_MULT = 0xD1B54A32D192ED03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1

# named streams
MU, SIGMA, NOISE, DRIFT_INDEX, DRIFT_MU, DRIFT_SIGN, AUX = range(7)


def mix64_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, stream: int) -> int:
    return mix64_int((seed & _MASK) ^ ((stream * STREAM_MULT) & _MASK))


def words(seed: int, stream: int, n: int, offset: int = 0) -> np.ndarray:
    key = np.uint64(stream_key(seed, stream))
    ctr = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(key + ctr * np.uint64(GOLDEN_GAMMA))


def uniform(seed: int, stream: int, n: int, offset: int = 0) -> np.ndarray:
    """Doubles on the open interval (0, 1): (top 53 bits + 0.5) / 2**53."""
    w = words(seed, stream, n, offset) >> np.uint64(11)
    return (w.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def normal(seed: int, stream: int, n: int, offset: int = 0) -> np.ndarray:
    return det_ndtri(uniform(seed, stream, n, offset))
