"""Piecewise Gaussian constraint on the continuous index field.

The per-element penalty is zero at interval centres (k + 0.5) and largest at
integers, so descending it moves indices away from the truncation
boundaries and shrinks the calibration set. This module evaluates the loss
with its analytic gradient and runs plain gradient descent directly on an
index field (there is no network to finetune here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import prng

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class PgcConfig:
    delta: float = 1.0
    eta: float = 0.3
    beta: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if not 0 < self.eta < 0.5:
            raise ValueError("eta must be in (0, 0.5)")
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")


def _center_offset(x):
    """Signed distance to the centre of the unit interval containing x."""
    return x - (np.ceil(x) - 0.5)


def g_kernel(x, delta: float = 1.0):
    x = np.asarray(x, dtype=np.float64)
    u = (np.abs(_center_offset(x)) - 0.5) / delta
    return INV_SQRT_2PI / delta * np.exp(-0.5 * u * u)


def mask(x, eta: float = 0.3):
    """1 where the constraint is active, 0 near zero or near interval centres."""
    x = np.asarray(x, dtype=np.float64)
    off = (x < eta) | (np.abs(_center_offset(x)) < eta)
    return (~off).astype(np.float64)


def element_loss(x, cfg: PgcConfig = PgcConfig()):
    x = np.asarray(x, dtype=np.float64)
    d = g_kernel(0.5, cfg.delta) - g_kernel(x, cfg.delta)
    return mask(x, cfg.eta) * d * d


def element_grad(x, cfg: PgcConfig = PgcConfig()):
    """d element_loss / dx; 0 where masked and at integers / interval centres."""
    x = np.asarray(x, dtype=np.float64)
    f = _center_offset(x)
    u = np.abs(f) - 0.5
    g = INV_SQRT_2PI / cfg.delta * np.exp(-0.5 * (u / cfg.delta) ** 2)
    dg = g * (-u / cfg.delta**2) * np.sign(f)  # sign(0) = 0 at centres
    d = g_kernel(0.5, cfg.delta) - g
    grad = -2.0 * d * dg
    grad = np.where(x == np.floor(x), 0.0, grad)
    return mask(x, cfg.eta) * grad


def _pairwise_sum(v: np.ndarray) -> float:
    # fixed-order pairwise reduction, independent of numpy's blocking
    v = v.ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


def pgc_loss(index, cfg: PgcConfig = PgcConfig()):
    """Return (loss, gradient field) for the unweighted constraint."""
    i = np.asarray(index, dtype=np.float64)
    return _pairwise_sum(element_loss(i, cfg)), element_grad(i, cfg)


def rectify(index, cfg: PgcConfig = PgcConfig(), steps: int = 200, lr: float = 0.05,
            max_index: float | None = None, history: list | None = None):
    """Gradient descent on beta * loss, re-clamping to [0, max_index] each step."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if not lr > 0:
        raise ValueError("lr must be > 0")
    i = np.array(index, dtype=np.float64)
    hi = np.inf if max_index is None else float(max_index)
    flat = i.reshape(-1)
    # masked elements have zero gradient and never move, so only the active
    # subset is iterated; elements leaving the mask stay put from then on
    active = np.flatnonzero(mask(flat, cfg.eta))
    sub = flat[active]
    for _ in range(steps):
        if history is not None:
            history.append(_pairwise_sum(element_loss(sub, cfg)))
        sub = np.clip(sub - lr * cfg.beta * element_grad(sub, cfg), 0.0, hi)
    if history is not None:
        history.append(_pairwise_sum(element_loss(sub, cfg)))
    flat[active] = sub
    return i


def smooth_points(n: int, seed: int = 0, low: float = 0.0, high: float = 31.0,
                  cfg: PgcConfig = PgcConfig(), margin: float = 1e-4) -> np.ndarray:
    """Random points away from every non-smooth locus of the per-element loss.

    Excluded neighbourhoods: integers, interval centres, and the mask
    switching points (|offset| = eta, x = eta).
    """
    out = np.empty(0)
    batch = 0
    while out.size < n:
        x = low + (high - low) * prng.uniform(seed, prng.AUX, 2 * n, offset=batch * 2 * n)
        f = np.abs(_center_offset(x))
        ok = ((0.5 - f) > margin) & (f > margin) & (np.abs(f - cfg.eta) > margin) \
            & (np.abs(x - cfg.eta) > margin)
        out = np.concatenate([out, x[ok]])
        batch += 1
    return out[:n]


def gradient_check(x, cfg: PgcConfig = PgcConfig(), step: float = 1e-6):
    """Relative error between analytic and central-difference gradients."""
    x = np.asarray(x, dtype=np.float64)
    analytic = element_grad(x, cfg)
    numeric = (element_loss(x + step, cfg) - element_loss(x - step, cfg)) / (2 * step)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return np.where(scale > 0, np.abs(analytic - numeric) / np.where(scale > 0, scale, 1.0), 0.0)
