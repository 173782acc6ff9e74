"""Synthetic entropy parameters and latents, plus the LTNT tensor file format.

Stands in for the entropy model: sigma is drawn log-uniform over the grid
range (which makes the continuous index uniform, with uniform fractional
parts), mu is Gaussian, and y = mu + N(0, sigma). All fields are binary32 so
a generated frame and the same frame read back from disk are identical.

LTNT layout (little-endian)::

    b"LTNT" | u8 version | u32 C | u32 H | u32 W | f32[C*H*W] mu | sigma | y
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import prng
from .detmath import det_exp, det_log, round_half_away

LTNT_MAGIC = b"LTNT"
LTNT_VERSION = 1
_HEAD = struct.Struct("<4sBIII")
MAX_ELEMENTS = 1 << 31


class TensorFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    name: str
    mu_scale: float = 2.0
    sigma_low: float = 0.01
    sigma_high: float = 64.0  # equal to sigma_low means a constant field


PROFILES = {
    "uniform": Profile("uniform"),
    "fixed-min": Profile("fixed-min", sigma_low=0.01, sigma_high=0.01),
    "fixed-mid": Profile("fixed-mid", sigma_low=0.8, sigma_high=0.8),
    "low-scale": Profile("low-scale", sigma_low=0.01, sigma_high=1.0),
}


def get_profile(profile) -> Profile:
    if isinstance(profile, Profile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}") from None


@dataclass(frozen=True)
class LatentFrame:
    mu: np.ndarray
    sigma: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        fields = {}
        for name in ("mu", "sigma", "y"):
            # copy so that freezing the field never touches the caller's array
            a = np.array(getattr(self, name), dtype=np.float32, order="C")
            if a.ndim != 3:
                raise ValueError(f"{name} must have shape (C, H, W)")
            fields[name] = a
        if not fields["mu"].shape == fields["sigma"].shape == fields["y"].shape:
            raise ValueError("mu, sigma and y must share dims")
        for name, a in fields.items():
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if np.any(fields["sigma"] <= 0):
            raise ValueError("sigma must be positive everywhere")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.mu.shape)

    @property
    def size(self) -> int:
        return int(self.mu.size)

    def residuals(self):
        """Integer plane actually transmitted: round(y - mu), ties away from zero."""
        return round_half_away(self.y.astype(np.float64) - self.mu.astype(np.float64)).astype(np.int64)


def parse_dims(text) -> tuple[int, int, int]:
    """Accepts "CxHxW" or a 3-sequence."""
    if isinstance(text, str):
        parts = text.lower().split("x")
    else:
        parts = list(text)
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise ValueError(f"bad dims {text!r}; expected CxHxW") from None
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {text!r}")
    if int(np.prod(dims)) >= MAX_ELEMENTS:
        raise ValueError("latent too large")
    return dims


def generate(seed: int, dims, profile="uniform") -> LatentFrame:
    dims = parse_dims(dims)
    prof = get_profile(profile)
    n = int(np.prod(dims))
    mu = (prof.mu_scale * prng.normal(seed, prng.MU, n)).astype(np.float32)
    if prof.sigma_low == prof.sigma_high:
        sigma = np.full(n, prof.sigma_low, dtype=np.float32)
    else:
        lo, hi = float(np.float32(prof.sigma_low)), float(np.float32(prof.sigma_high))
        ln_lo, ln_hi = float(det_log(lo)), float(det_log(hi))
        u = prng.uniform(seed, prng.SIGMA, n)
        sigma = det_exp(ln_lo + u * (ln_hi - ln_lo)).astype(np.float32)
        sigma = np.clip(sigma, np.float32(lo), np.float32(hi))
    noise = prng.normal(seed, prng.NOISE, n) * sigma.astype(np.float64)
    y = (mu.astype(np.float64) + noise).astype(np.float32)
    shape = dims
    return LatentFrame(mu.reshape(shape), sigma.reshape(shape), y.reshape(shape))


def save_tensor(frame: LatentFrame, path) -> None:
    c, h, w = frame.dims
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(LTNT_MAGIC, LTNT_VERSION, c, h, w))
        for plane in (frame.mu, frame.sigma, frame.y):
            fh.write(plane.astype("<f4").tobytes())


def load_tensor(path) -> LatentFrame:
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise TensorFormatError("file too short for an LTNT header")
    magic, version, c, h, w = _HEAD.unpack_from(data)
    if magic != LTNT_MAGIC:
        raise TensorFormatError("bad magic; not an LTNT file")
    if version != LTNT_VERSION:
        raise TensorFormatError(f"unsupported LTNT version {version}")
    if min(c, h, w) < 1:
        raise TensorFormatError("zero dimension in LTNT header")
    n = c * h * w
    if n >= MAX_ELEMENTS:
        raise TensorFormatError("dims overflow")
    expected = _HEAD.size + 3 * 4 * n
    if len(data) != expected:
        raise TensorFormatError(f"payload is {len(data)} bytes, expected {expected}")
    planes = np.frombuffer(data, dtype="<f4", offset=_HEAD.size).reshape(3, c, h, w)
    try:
        return LatentFrame(planes[0], planes[1], planes[2])
    except ValueError as exc:
        raise TensorFormatError(f"invalid tensor contents: {exc}") from exc


def frame_digest(frame: LatentFrame) -> str:
    """sha256 of the LTNT serialization, for golden comparisons."""
    c, h, w = frame.dims
    hsh = hashlib.sha256(_HEAD.pack(LTNT_MAGIC, LTNT_VERSION, c, h, w))
    for plane in (frame.mu, frame.sigma, frame.y):
        hsh.update(plane.astype("<f4").tobytes())
    return hsh.hexdigest()
