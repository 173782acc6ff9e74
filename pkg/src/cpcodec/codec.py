"""Frame encode/decode and the CPNC container.

Encoding: sigma -> continuous index -> boundary detection -> determinate
levels -> skip mask -> residuals round(y - mu) of the coded elements ->
symbols (escape + 16-bit sign/magnitude raw for |r| > A) -> range coder.

The decoder repeats the index and level derivation with its *own* entropy
parameters; the calibration block is what keeps its levels equal to the
encoder's. A CRC32 of the full residual field (zeros at skipped positions)
turns any remaining disagreement into a detected failure.

CPNC header, big-endian, 44 bytes::

    4s  magic "CPNC"         u8  version
    u32 C, H, W              u32 sigma_min, sigma_max (binary32 bits)
    u8  L                    u8  alphabet half-width A
    u32 epsilon (binary32 bits; 0 means no calibration)
    u8  skip level bound     u32 CDF table CRC32
    u32 payload byte count   u32 latent CRC32

followed by the calibration block and the range-coded payload.
"""

from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .calibration import (
    CalibrationBlock,
    CalibrationSet,
    MalformedBitstreamError,
    decode_block,
    detect_boundary,
    determinate_index,
    encode_block,
)
from .entropy_tables import RAW_BITS, CdfTable, SymbolAlphabet, build_tables, estimate_rate
from .latent_source import LatentFrame
from .range_coder import decode_sequence, encode_sequence
from .sigma_grid import SigmaGrid
from .skip_policy import SkipConfig, SkipDesyncError, apply_skip_decode, mask_from_bound

MAGIC = b"CPNC"
VERSION = 1
HEADER = struct.Struct(">4sBIIIIIBBIBIII")
SIGN_BIT = 1 << (RAW_BITS - 1)


class Status(str, enum.Enum):
    OK = "ok"
    CHECKSUM_MISMATCH = "checksum-mismatch"
    DESYNC = "desync"
    MALFORMED = "malformed"


def f32_bits(x: float) -> int:
    return int(np.array(x, dtype=np.float32).view(np.uint32))


def bits_f32(b: int) -> float:
    return float(np.array(b, dtype=np.uint32).view(np.float32))


@lru_cache(maxsize=16)
def tables_for(grid: SigmaGrid, half_width: int) -> CdfTable:
    return build_tables(grid, SymbolAlphabet(half_width))


def residual_checksum(residuals) -> int:
    return zlib.crc32(np.ascontiguousarray(residuals, dtype="<i4").tobytes())


@dataclass(frozen=True)
class EntropyParams:
    """One side's view of the entropy parameters.

    ``index`` overrides the index derived from ``sigma``; the drift harness
    uses it to inject perturbations directly on the continuous index.
    """

    mu: np.ndarray
    sigma: np.ndarray
    index: np.ndarray | None = None

    @classmethod
    def from_frame(cls, frame: LatentFrame, index=None) -> "EntropyParams":
        return cls(frame.mu, frame.sigma, index)

    @property
    def dims(self):
        return tuple(np.shape(self.mu))

    def continuous_index(self, grid: SigmaGrid) -> np.ndarray:
        if self.index is not None:
            return grid.clamp(self.index)
        return grid.index_of(self.sigma)


@dataclass(frozen=True)
class CodedFrame:
    dims: tuple[int, int, int]
    sigma_min_bits: int
    sigma_max_bits: int
    levels: int
    half_width: int
    eps_bits: int
    skip_bound: int
    cdf_checksum: int
    latent_checksum: int
    calibration: CalibrationBlock
    payload: bytes
    version: int = VERSION
    info: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def epsilon(self) -> float:
        return bits_f32(self.eps_bits)

    @property
    def grid(self) -> SigmaGrid:
        return SigmaGrid(bits_f32(self.sigma_min_bits), bits_f32(self.sigma_max_bits), self.levels)

    @property
    def header_bits(self) -> int:
        return 8 * HEADER.size

    @property
    def calibration_bits(self) -> int:
        return self.calibration.bit_cost

    @property
    def payload_bits(self) -> int:
        return 8 * len(self.payload)

    @property
    def total_bits(self) -> int:
        return self.header_bits + self.calibration_bits + self.payload_bits

    def to_bytes(self) -> bytes:
        c, h, w = self.dims
        head = HEADER.pack(MAGIC, self.version, c, h, w, self.sigma_min_bits, self.sigma_max_bits,
                           self.levels, self.half_width, self.eps_bits, self.skip_bound,
                           self.cdf_checksum, len(self.payload), self.latent_checksum)
        return head + self.calibration.to_bytes() + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodedFrame":
        if len(data) < HEADER.size:
            raise MalformedBitstreamError("truncated CPNC header")
        (magic, version, c, h, w, smin, smax, levels, half_width, eps_bits, skip_bound,
         cdf_crc, n_payload, latent_crc) = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise MalformedBitstreamError("bad magic; not a CPNC stream")
        if version != VERSION:
            raise MalformedBitstreamError(f"unsupported CPNC version {version}")
        if min(c, h, w) < 1:
            raise MalformedBitstreamError("zero dimension in header")
        if levels < 2 or skip_bound > levels or half_width < 1:
            raise MalformedBitstreamError("inconsistent grid / skip fields in header")
        block, end = CalibrationBlock.from_bytes(data, HEADER.size)
        if len(data) - end != n_payload:
            raise MalformedBitstreamError(
                f"payload length {len(data) - end} does not match header ({n_payload})")
        return cls((c, h, w), smin, smax, levels, half_width, eps_bits, skip_bound, cdf_crc,
                   latent_crc, block, bytes(data[end:]), version)

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path) -> "CodedFrame":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass(frozen=True)
class DecodeResult:
    residuals: np.ndarray | None
    status: Status
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.OK

    def latent(self, mu) -> np.ndarray:
        """Reconstructed latent residual + mu (mu taken from the decoder's side)."""
        return self.residuals + np.asarray(mu, dtype=np.float64)


def _to_symbols(residuals, alphabet: SymbolAlphabet):
    r = np.asarray(residuals, dtype=np.int64)
    if r.size and np.max(np.abs(r)) >= SIGN_BIT:
        raise ValueError(f"residual magnitude {int(np.max(np.abs(r)))} exceeds the {RAW_BITS}-bit escape field")
    sym = alphabet.symbol_of(r)
    esc = r[sym == alphabet.escape]
    raws = np.where(esc < 0, SIGN_BIT | -esc, esc)
    return sym, raws


def _from_symbols(sym, raws, alphabet: SymbolAlphabet):
    r = sym - alphabet.half_width
    is_esc = sym == alphabet.escape
    mag = raws & (SIGN_BIT - 1)
    r[is_esc] = np.where(raws & SIGN_BIT, -mag, mag)
    return r


def encode_frame(frame: LatentFrame, grid: SigmaGrid | None = None, eps: float | None = 1e-4,
                 skip: SkipConfig | None = None, tables: CdfTable | None = None,
                 index=None) -> CodedFrame:
    """Encode one frame. ``eps=None`` disables calibration (empty block, epsilon 0).

    ``index`` replaces the index derived from ``frame.sigma`` (e.g. a
    rectified field).
    """
    grid = grid or SigmaGrid()
    tables = tables or tables_for(grid, SymbolAlphabet().half_width)
    if tables.grid != grid:
        raise ValueError("tables were built for a different grid")
    skip = skip or SkipConfig()
    dims = frame.dims
    cont = EntropyParams.from_frame(frame, index).continuous_index(grid)

    if eps is None:
        eps_bits = 0
        cset = CalibrationSet(np.zeros(0, dtype=np.int64), 0.1, dims)
    else:
        eps_bits = f32_bits(eps)
        cset = detect_boundary(cont, bits_f32(eps_bits), grid.max_index)
    levels = determinate_index(cont, cset, grid.max_index)
    bound = skip.level_bound(grid)
    skipped = mask_from_bound(levels, bound)

    residuals = frame.residuals()
    residuals[skipped] = 0
    coded = residuals[~skipped]
    coded_levels = levels[~skipped]
    sym, raws = _to_symbols(coded, tables.alphabet)
    payload = encode_sequence(sym, coded_levels, tables, raws)

    info = {
        "elements": frame.size,
        "coded": int(coded.size),
        "skipped": int(np.count_nonzero(skipped)),
        "escapes": int(raws.size),
        "calibration_count": len(cset),
        "estimated_bits": estimate_rate(coded, coded_levels, tables),
    }
    return CodedFrame(
        dims=dims,
        sigma_min_bits=f32_bits(grid.sigma_min),
        sigma_max_bits=f32_bits(grid.sigma_max),
        levels=grid.levels,
        half_width=tables.alphabet.half_width,
        eps_bits=eps_bits,
        skip_bound=bound,
        cdf_checksum=tables.checksum,
        latent_checksum=residual_checksum(residuals),
        calibration=encode_block(cset),
        payload=payload,
        info=info,
    )


def strip_calibration(coded: CodedFrame) -> CodedFrame:
    """The same frame with an empty calibration block (as if sent without CIT)."""
    empty = encode_block(CalibrationSet(np.zeros(0, dtype=np.int64), 0.1, coded.dims))
    return CodedFrame(coded.dims, coded.sigma_min_bits, coded.sigma_max_bits, coded.levels,
                      coded.half_width, 0, coded.skip_bound, coded.cdf_checksum,
                      coded.latent_checksum, empty, coded.payload, coded.version, dict(coded.info))


def decode_frame(coded: CodedFrame | bytes, params: EntropyParams,
                 tables: CdfTable | None = None) -> DecodeResult:
    """Decode with the decoder's locally computed entropy parameters."""
    try:
        if isinstance(coded, (bytes, bytearray)):
            coded = CodedFrame.from_bytes(coded)
        grid = coded.grid
        if tables is None or tables.grid != grid or tables.alphabet.half_width != coded.half_width:
            tables = tables_for(grid, coded.half_width)
        if tables.checksum != coded.cdf_checksum:
            return DecodeResult(None, Status.MALFORMED, "CDF table checksum mismatch; refusing to decode")
        if params.dims != coded.dims:
            return DecodeResult(None, Status.MALFORMED,
                                f"parameter dims {params.dims} do not match stream dims {coded.dims}")
        cset = decode_block(coded.calibration, coded.dims, coded.epsilon or 0.1)
    except (MalformedBitstreamError, ValueError) as exc:
        return DecodeResult(None, Status.MALFORMED, str(exc))

    cont = params.continuous_index(grid)
    levels = determinate_index(cont, cset, grid.max_index)
    skipped = mask_from_bound(levels, coded.skip_bound)
    coded_levels = levels[~skipped]
    sym, raws, exhausted = decode_sequence(coded.payload, coded_levels.size, coded_levels, tables,
                                           strict=False)
    if exhausted:
        return DecodeResult(None, Status.DESYNC, "range decoder ran past the end of the payload")
    try:
        residuals = apply_skip_decode(_from_symbols(sym, raws, tables.alphabet), skipped)
    except SkipDesyncError as exc:
        return DecodeResult(None, Status.DESYNC, str(exc))
    if residual_checksum(residuals) != coded.latent_checksum:
        return DecodeResult(residuals, Status.CHECKSUM_MISMATCH, "latent checksum mismatch")
    return DecodeResult(residuals, Status.OK)
