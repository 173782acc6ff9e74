"""Skip arithmetic coding for elements the model is nearly certain about."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sigma_grid import SigmaGrid


class SkipDesyncError(ValueError):
    pass


@dataclass(frozen=True)
class SkipConfig:
    """Elements whose reconstruction scale LUT(level) is below the threshold are not coded.

    On the wire the threshold becomes a level bound: the smallest level that is
    still coded. That keeps the decoder free of float comparisons.
    """

    theta_threshold: float = 0.0

    def __post_init__(self):
        if not self.theta_threshold >= 0:
            raise ValueError("theta_threshold must be >= 0")

    def level_bound(self, grid: SigmaGrid) -> int:
        return int(np.count_nonzero(grid.lut < self.theta_threshold))

    @classmethod
    def from_level_bound(cls, bound: int, grid: SigmaGrid) -> "SkipConfig":
        if not 0 <= bound <= grid.levels:
            raise ValueError(f"skip level bound must be in [0, {grid.levels}]")
        if bound == 0:
            return cls(0.0)
        if bound == grid.levels:
            return cls(float(np.nextafter(grid.sigma_max, np.inf)))
        return cls(float(grid.lut[bound]))


def skip_mask(levels, grid: SigmaGrid, cfg: SkipConfig):
    return mask_from_bound(levels, cfg.level_bound(grid))


def mask_from_bound(levels, bound: int):
    """True where the element is skipped."""
    return np.asarray(levels) < bound


def apply_skip_encode(residuals, skipped):
    r = np.asarray(residuals)
    m = np.asarray(skipped, dtype=bool)
    if r.shape != m.shape:
        raise ValueError("residual and mask shapes differ")
    return r[~m]


def apply_skip_decode(decoded, skipped):
    """Scatter decoded residuals back; skipped positions get residual 0.

    Residuals are round(y - mu), so a zero residual reconstructs a skipped
    element to the model's mean.
    """
    m = np.asarray(skipped, dtype=bool)
    d = np.asarray(decoded, dtype=np.int64).ravel()
    if d.size != int(np.count_nonzero(~m)):
        raise SkipDesyncError(f"{d.size} decoded values for {int(np.count_nonzero(~m))} coded positions")
    out = np.zeros(m.shape, dtype=np.int64)
    out[~m] = d
    return out


def skip_ratio(skipped) -> float:
    m = np.asarray(skipped, dtype=bool)
    return float(m.mean()) if m.size else 0.0
