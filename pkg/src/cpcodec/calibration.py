"""Calibration information: boundary detection, dual quantization and the
relative-position-coded coordinate block."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .sigma_grid import quantize_floor, quantize_round

EPS_MAX = 0.1
EPS_MAX_F32 = float(np.float32(EPS_MAX))
ABSOLUTE_FIXED_BITS = 16


class MalformedBitstreamError(ValueError):
    pass


def _check_eps(epsilon: float) -> float:
    epsilon = float(epsilon)
    # the header carries epsilon as binary32, which rounds 0.1 up by 1.5e-9
    if not (0.0 < epsilon <= EPS_MAX_F32):
        raise ValueError(f"calibration precision must be in (0, {EPS_MAX}], got {epsilon}")
    return epsilon


@dataclass(frozen=True)
class CalibrationSet:
    """Sorted flattened coordinates (x*H*W + y*W + z) needing round instead of floor."""

    coords: np.ndarray
    epsilon: float
    dims: tuple[int, int, int]

    def __post_init__(self):
        c = np.ascontiguousarray(self.coords, dtype=np.int64).ravel()
        n = int(np.prod(self.dims))
        if c.size:
            if np.any(np.diff(c) <= 0):
                raise ValueError("calibration coordinates must be strictly increasing")
            if c[0] < 0 or c[-1] >= n:
                raise ValueError("calibration coordinate outside the latent")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    def __len__(self):
        return int(self.coords.size)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def unflatten(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Back to (x, y, z) triples."""
        return np.unravel_index(self.coords, self.dims)


def detect_boundary(index, epsilon: float, max_index: int) -> CalibrationSet:
    """Coordinates whose truncated quantization could flip under +-epsilon drift.

    ``index`` is the clamped continuous index field of shape (C, H, W). The
    probes are clamped to [0, max_index] as well, so values saturated at 0
    never register. Values at max_index do, because the lower probe still
    floors to max_index - 1.
    """
    epsilon = _check_eps(epsilon)
    i = np.asarray(index, dtype=np.float64)
    if i.ndim != 3:
        raise ValueError("index field must have shape (C, H, W)")
    up = np.floor(np.clip(i + epsilon, 0.0, max_index))
    down = np.floor(np.clip(i - epsilon, 0.0, max_index))
    coords = np.flatnonzero((up != down).ravel())
    return CalibrationSet(coords, epsilon, i.shape)


def determinate_index(index, cset: CalibrationSet | None, max_index: int) -> np.ndarray:
    """Quantized levels: round inside the calibration set, floor elsewhere."""
    i = np.asarray(index, dtype=np.float64)
    q = quantize_floor(i)
    if cset is not None and len(cset):
        if tuple(i.shape) != cset.dims:
            raise ValueError(f"index shape {i.shape} does not match calibration dims {cset.dims}")
        flat = q.reshape(-1)
        flat[cset.coords] = np.clip(quantize_round(i.reshape(-1)[cset.coords]), 0, max_index)
    return np.clip(q, 0, max_index)


@dataclass(frozen=True)
class CalibrationBlock:
    count: int
    bit_width: int
    payload: bytes

    HEADER_BITS = 40

    @property
    def bit_cost(self) -> int:
        """Unpadded size: 40 header bits plus count * bit_width."""
        return self.HEADER_BITS + self.count * self.bit_width

    def to_bytes(self) -> bytes:
        return struct.pack(">IB", self.count, self.bit_width) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["CalibrationBlock", int]:
        """Parse one block; returns it with the offset just past it."""
        if len(data) - offset < 5:
            raise MalformedBitstreamError("truncated calibration block header")
        count, width = struct.unpack_from(">IB", data, offset)
        if width < 1 or width > 63:
            raise MalformedBitstreamError(f"invalid calibration bit width {width}")
        nbytes = (count * width + 7) // 8
        start = offset + 5
        if len(data) - start < nbytes:
            raise MalformedBitstreamError("truncated calibration block payload")
        return cls(count, width, bytes(data[start:start + nbytes])), start + nbytes


def relative_positions(coords) -> np.ndarray:
    c = np.asarray(coords, dtype=np.int64)
    if c.size == 0:
        return c
    return np.diff(c, prepend=0)


def pack_bits(values, width: int) -> bytes:
    """Fixed-width big-endian bit packing, zero-padded to a byte boundary."""
    v = np.asarray(values, dtype=np.uint64)
    if v.size == 0:
        return b""
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((v[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def unpack_bits(payload: bytes, count: int, width: int) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[: count * width]
    bits = bits.reshape(count, width).astype(np.uint64)
    weights = np.uint64(1) << np.arange(width - 1, -1, -1, dtype=np.uint64)
    return (bits * weights).sum(axis=1).astype(np.int64)


def encode_block(cset: CalibrationSet) -> CalibrationBlock:
    rel = relative_positions(cset.coords)
    width = max(1, int(rel.max()).bit_length()) if rel.size else 1
    return CalibrationBlock(len(cset), width, pack_bits(rel, width))


def decode_block(block: CalibrationBlock, dims, epsilon: float = EPS_MAX) -> CalibrationSet:
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims))
    rel = unpack_bits(block.payload, block.count, block.bit_width)
    if rel.size > 1 and np.any(rel[1:] == 0):
        raise MalformedBitstreamError("repeated calibration coordinate")
    coords = np.cumsum(rel)
    if coords.size and coords[-1] >= n:
        raise MalformedBitstreamError(f"calibration coordinate {coords[-1]} overflows {n} elements")
    return CalibrationSet(coords, epsilon, dims)


def absolute_bits(n_elements: int) -> int:
    """Bits per coordinate when flattened indices are sent as-is."""
    return max(1, math.ceil(math.log2(n_elements)))


def estimated_rpc_bits(n_elements: int, count: float) -> int:
    """Per-coordinate RPC width assuming evenly spread coordinates: ceil(log2(N / count))."""
    if count <= 0:
        return 0
    return max(1, math.ceil(math.log2(n_elements / count)))


def coordinate_bits(cset: CalibrationSet, mode: str = "rpc") -> int:
    """Total bits spent on coordinates (block header excluded) under a wire mode.

    ``rpc`` is the default wire format; ``absolute`` sends ceil(log2 N) bits
    each; ``fixed16`` is the flat 16 bits per coordinate comparison mode.
    """
    if mode == "rpc":
        return len(cset) * encode_block(cset).bit_width
    if mode == "absolute":
        return len(cset) * absolute_bits(cset.size)
    if mode == "fixed16":
        return len(cset) * ABSOLUTE_FIXED_BITS
    raise ValueError(f"unknown coordinate coding mode {mode!r}")
