"""Quantized discretized-Gaussian frequency tables and rate estimation.

Symbols are zero-mean residuals r in [-A, A] plus one escape slot for
|r| > A. Every level k of the scale grid gets its own table built from
theta_k = LUT(k); both ends rebuild the tables from the grid parameters, so
the construction is carried out in plain Python floats with the
deterministic erf from :mod:`cpcodec.detmath`.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detmath import INV_SQRT2, det_erf
from .sigma_grid import SigmaGrid

PRECISION_BITS = 16
TOTAL_FREQ = 1 << PRECISION_BITS
DEFAULT_HALF_WIDTH = 32
RAW_BITS = 16

CDFT_MAGIC = b"CDFT"
CDFT_VERSION = 1


class ConfigurationError(ValueError):
    pass


class TableFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SymbolAlphabet:
    half_width: int = DEFAULT_HALF_WIDTH

    def __post_init__(self):
        if self.half_width < 1:
            raise ConfigurationError("alphabet half-width must be >= 1")
        if self.size > TOTAL_FREQ:
            raise ConfigurationError(
                f"alphabet of {self.size} symbols does not fit a {PRECISION_BITS}-bit total")

    @property
    def size(self) -> int:
        return 2 * self.half_width + 2

    @property
    def escape(self) -> int:
        return 2 * self.half_width + 1

    def symbol_of(self, residual):
        """Map residuals to symbol indices; out-of-range values become the escape."""
        r = np.asarray(residual, dtype=np.int64)
        a = self.half_width
        return np.where(np.abs(r) > a, self.escape, r + a)


def _level_masses(theta: float, half_width: int) -> list[float]:
    """Unquantized masses for symbols [-A..A, escape] at scale theta."""
    scale = INV_SQRT2 / theta
    # erf at the half-integer edges 0.5, 1.5, ..., A + 0.5
    edges = [float(det_erf((j + 0.5) * scale)) for j in range(half_width + 1)]
    half = [edges[0]]  # r = 0: erf(0.5 / (theta sqrt 2))
    for j in range(1, half_width + 1):
        half.append(0.5 * (edges[j] - edges[j - 1]))
    tail = 1.0 - edges[half_width]
    half = [max(m, 0.0) for m in half]
    masses = half[:0:-1] + half + [max(tail, 0.0)]
    return masses


def _apportion(masses: list[float], half_width: int) -> list[int]:
    """Largest-remainder quantization to TOTAL_FREQ with a floor of 1.

    Mirror pairs (r, -r) have identical masses and are apportioned as a
    unit, which keeps every table exactly symmetric.
    """
    n = len(masses)
    a = half_width
    freqs = [1] * n
    spare = TOTAL_FREQ - n
    total = sum(masses)
    # units: (members, weight); index order defines tie-breaking
    units = [((a,), masses[a])]
    units += [((a - j, a + j), masses[a + j]) for j in range(1, a + 1)]
    units.append(((n - 1,), masses[n - 1]))

    remainders = []
    used = 0
    for pos, (members, m) in enumerate(units):
        share = m / total * spare
        whole = int(share)  # share >= 0
        for s in members:
            freqs[s] += whole
        used += whole * len(members)
        remainders.append((share - whole, pos))
    left = spare - used

    order = sorted(remainders, key=lambda t: (-t[0], t[1]))
    for _, pos in order:
        members = units[pos][0]
        if left >= len(members):
            for s in members:
                freqs[s] += 1
            left -= len(members)
        if left == 0:
            break
    # an odd unit may remain after all pairs; the centre symbol takes it
    freqs[a] += left
    return freqs


@dataclass(frozen=True)
class CdfTable:
    """Per-level frequency tables with a shared 2**16 total."""

    grid: SigmaGrid
    alphabet: SymbolAlphabet
    freqs: np.ndarray  # (L, S) int64
    cum: np.ndarray = field(init=False, repr=False)  # (L, S + 1) int64
    checksum: int = field(init=False)

    def __post_init__(self):
        f = np.ascontiguousarray(self.freqs, dtype=np.int64)
        if f.shape != (self.grid.levels, self.alphabet.size):
            raise TableFormatError(f"frequency array shape {f.shape} does not match grid/alphabet")
        if np.any(f < 1) or np.any(f.sum(axis=1) != TOTAL_FREQ):
            raise TableFormatError("every level must have freq >= 1 and sum to 2**16")
        cum = np.zeros((f.shape[0], f.shape[1] + 1), dtype=np.int64)
        np.cumsum(f, axis=1, out=cum[:, 1:])
        f.setflags(write=False)
        cum.setflags(write=False)
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "cum", cum)
        object.__setattr__(self, "checksum", zlib.crc32(self.freq_bytes()))

    def freq_bytes(self) -> bytes:
        return self.freqs.astype("<u2").tobytes()

    def symbol_freq(self, symbols, levels):
        return self.freqs[np.asarray(levels, dtype=np.int64), np.asarray(symbols, dtype=np.int64)]


def build_tables(grid: SigmaGrid, alphabet: SymbolAlphabet | None = None) -> CdfTable:
    alphabet = alphabet or SymbolAlphabet()
    rows = []
    for theta in grid.lut.tolist():
        masses = _level_masses(theta, alphabet.half_width)
        rows.append(_apportion(masses, alphabet.half_width))
    return CdfTable(grid, alphabet, np.array(rows, dtype=np.int64))


def level_masses(grid: SigmaGrid, level: int, alphabet: SymbolAlphabet | None = None) -> np.ndarray:
    """Unquantized masses of one level, in symbol order (useful for diagnostics)."""
    alphabet = alphabet or SymbolAlphabet()
    return np.array(_level_masses(float(grid.lut[level]), alphabet.half_width))


def estimate_rate(residuals, levels, tables: CdfTable, coded=None) -> float:
    """Ideal code length in bits: sum of -log2(freq / 2**16) over coded elements.

    Escaped residuals pay for the escape symbol plus the raw bypass field.
    ``coded`` is an optional boolean mask; ``False`` entries are skipped.
    """
    r = np.asarray(residuals, dtype=np.int64).ravel()
    lv = np.asarray(levels, dtype=np.int64).ravel()
    if r.shape != lv.shape:
        raise ValueError("residuals and levels must have the same length")
    if coded is not None:
        keep = np.asarray(coded, dtype=bool).ravel()
        r, lv = r[keep], lv[keep]
    if r.size == 0:
        return 0.0
    if np.any(np.abs(r) >= 1 << (RAW_BITS - 1)):
        raise ValueError("residual magnitude exceeds the escape raw field")
    sym = tables.alphabet.symbol_of(r)
    f = tables.symbol_freq(sym, lv).astype(np.float64)
    bits = float(np.sum(PRECISION_BITS - np.log2(f)))
    return bits + RAW_BITS * int(np.count_nonzero(sym == tables.alphabet.escape))


def dump_tables(tables: CdfTable, path) -> None:
    """Write the versioned CDFT file: magic, version, L, A, little-endian u16 frequencies."""
    head = CDFT_MAGIC + struct.pack("<BHH", CDFT_VERSION, tables.grid.levels, tables.alphabet.half_width)
    Path(path).write_bytes(head + tables.freq_bytes())


def load_table_freqs(path) -> tuple[int, int, np.ndarray]:
    """Read a CDFT file back as (levels, half_width, freqs)."""
    data = Path(path).read_bytes()
    if len(data) < 9 or data[:4] != CDFT_MAGIC:
        raise TableFormatError("not a CDFT file")
    version, levels, half_width = struct.unpack_from("<BHH", data, 4)
    if version != CDFT_VERSION:
        raise TableFormatError(f"unsupported CDFT version {version}")
    size = 2 * half_width + 2
    body = data[9:]
    if len(body) != 2 * levels * size:
        raise TableFormatError("CDFT payload length mismatch")
    freqs = np.frombuffer(body, dtype="<u2").astype(np.int64).reshape(levels, size)
    return levels, half_width, freqs
