"""Log-domain discretization of the scale parameter into L levels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detmath import det_exp, det_log, round_half_away


def _f32(x: float) -> float:
    return float(np.float32(x))


@dataclass(frozen=True)
class SigmaGrid:
    """Scale grid ``theta_k = exp(ln sigma_min + k * sigma_step)``, k in [0, L-1].

    ``sigma_min`` and ``sigma_max`` are rounded to binary32 on construction
    because that is how they travel in the frame header; encoder and decoder
    therefore always derive the same ``sigma_step`` bit pattern.
    """

    sigma_min: float = 0.01
    sigma_max: float = 64.0
    levels: int = 32
    log_sigma_min: float = field(init=False, repr=False)
    sigma_step: float = field(init=False)
    _lut: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        smin, smax = _f32(self.sigma_min), _f32(self.sigma_max)
        if not (math.isfinite(smin) and math.isfinite(smax)) or smin <= 0:
            raise ValueError(f"sigma bounds must be positive and finite, got {self.sigma_min}, {self.sigma_max}")
        if smin >= smax:
            raise ValueError(f"sigma_min ({smin}) must be < sigma_max ({smax})")
        if not 2 <= int(self.levels) <= 255:
            raise ValueError(f"levels must be in [2, 255], got {self.levels}")
        object.__setattr__(self, "sigma_min", smin)
        object.__setattr__(self, "sigma_max", smax)
        object.__setattr__(self, "levels", int(self.levels))
        log_min = float(det_log(smin))
        object.__setattr__(self, "log_sigma_min", log_min)
        object.__setattr__(self, "sigma_step", compute_step(smin, smax, self.levels))
        # sigma_min * exp(k * step) == exp(ln sigma_min + k * step); this
        # ordering makes LUT(0) exact. The top entry would otherwise land a
        # few ulps under sigma_max, so it is pinned.
        lut = smin * det_exp(self.sigma_step * np.arange(self.levels, dtype=np.float64))
        lut[-1] = smax
        lut.setflags(write=False)
        object.__setattr__(self, "_lut", lut)

    @property
    def max_index(self) -> int:
        return self.levels - 1

    @property
    def lut(self) -> np.ndarray:
        """Read-only array of all L reconstruction scales."""
        return self._lut

    def raw_index(self, sigma):
        """Unclamped continuous index (ln sigma - ln sigma_min) / sigma_step."""
        sigma = np.asarray(sigma, dtype=np.float64)
        if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
            raise ValueError("sigma must be positive and finite")
        return (det_log(sigma) - self.log_sigma_min) / self.sigma_step

    def index_of(self, sigma):
        """Continuous index I in [0, L-1]."""
        return self.clamp(self.raw_index(sigma))

    def clamp(self, i):
        return np.clip(np.asarray(i, dtype=np.float64), 0.0, float(self.max_index))

    def lut_theta(self, idx):
        idx = np.asarray(idx)
        if np.any(idx < 0) or np.any(idx > self.max_index):
            raise IndexError(f"level index outside [0, {self.max_index}]")
        return self._lut[idx.astype(np.int64)]


def compute_step(sigma_min: float, sigma_max: float, levels: int) -> float:
    return float((det_log(sigma_max) - det_log(sigma_min)) / (levels - 1))


def index_of(sigma, grid: SigmaGrid):
    return grid.index_of(sigma)


def quantize_floor(i):
    """Truncating quantizer used for every element outside the calibration set."""
    return np.floor(np.asarray(i, dtype=np.float64)).astype(np.int64)


def quantize_round(i, grid: SigmaGrid | None = None):
    """Nearest-integer quantizer (ties away from zero), clamped to [0, L-1]."""
    q = round_half_away(i).astype(np.int64)
    hi = grid.max_index if grid is not None else None
    return np.clip(q, 0, hi)


def lut_theta(idx, grid: SigmaGrid):
    return grid.lut_theta(idx)
