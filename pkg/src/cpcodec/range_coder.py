"""32-bit integer range coder over 16-bit frequency tables.

Byte-oriented renormalization with delayed carry propagation (a cached
output byte plus a count of pending 0xFF bytes), in the Schindler/LZMA
family. Every state transition is integer arithmetic, so a stream is a pure
function of (symbols, levels, tables) on any host.

Escaped symbols are followed by a 16-bit raw value coded through the bypass
path (a uniform 1/2**16 slot on the same coder).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .entropy_tables import PRECISION_BITS, CdfTable

TOP = 1 << 24
MASK32 = 0xFFFFFFFF
FLUSH_BYTES = 5


class DesyncError(RuntimeError):
    """The decoder ran past the end of the stream."""


@njit(cache=True)
def _shift_low(low, cache, cache_size, out, pos):
    if low < 0xFF000000 or low > MASK32:
        carry = low >> 32
        temp = cache
        while True:
            out[pos] = (temp + carry) & 0xFF
            pos += 1
            temp = 0xFF
            cache_size -= 1
            if cache_size == 0:
                break
        cache = (low >> 24) & 0xFF
    cache_size += 1
    low = (low & 0x00FFFFFF) << 8
    return low, cache, cache_size, pos


@njit(cache=True)
def _encode(symbols, levels, cum, escape, raws, out):
    low = 0
    rng = MASK32
    cache = 0
    cache_size = 1
    pos = 0
    ri = 0
    for i in range(symbols.shape[0]):
        s = symbols[i]
        row = levels[i]
        start = cum[row, s]
        r = rng >> PRECISION_BITS
        low += r * start
        rng = r * (cum[row, s + 1] - start)
        while rng < TOP:
            rng <<= 8
            low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
        if s == escape:
            r = rng >> PRECISION_BITS
            low += r * raws[ri]
            rng = r
            ri += 1
            while rng < TOP:
                rng <<= 8
                low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
    for _ in range(FLUSH_BYTES):
        low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
    return pos


@njit(cache=True)
def _decode(data, count, levels, cum, escape, symbols, raws):
    """Returns (bytes consumed, raw count, exhausted flag)."""
    n = data.shape[0]
    pos = 0
    exhausted = False
    code = 0
    for _ in range(FLUSH_BYTES):
        b = 0
        if pos < n:
            b = data[pos]
        else:
            exhausted = True
        pos += 1
        code = ((code << 8) | b) & MASK32
    rng = MASK32
    ri = 0
    nsym = cum.shape[1] - 1
    for i in range(count):
        row = levels[i]
        r = rng >> PRECISION_BITS
        v = code // r
        if v > 0xFFFF:
            v = 0xFFFF
        lo = 0
        hi = nsym
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if cum[row, mid] > v:
                hi = mid
            else:
                lo = mid
        s = lo
        symbols[i] = s
        start = cum[row, s]
        code -= r * start
        rng = r * (cum[row, s + 1] - start)
        while rng < TOP:
            b = 0
            if pos < n:
                b = data[pos]
            else:
                exhausted = True
            pos += 1
            code = ((code << 8) | b) & MASK32
            rng <<= 8
        if s == escape:
            r = rng >> PRECISION_BITS
            v = code // r
            if v > 0xFFFF:
                v = 0xFFFF
            raws[ri] = v
            ri += 1
            code -= r * v
            rng = r
            while rng < TOP:
                b = 0
                if pos < n:
                    b = data[pos]
                else:
                    exhausted = True
                pos += 1
                code = ((code << 8) | b) & MASK32
                rng <<= 8
    return pos, ri, exhausted


def _check_levels(levels, tables: CdfTable, n: int) -> np.ndarray:
    lv = np.ascontiguousarray(levels, dtype=np.int64).ravel()
    if lv.shape[0] != n:
        raise ValueError(f"expected {n} levels, got {lv.shape[0]}")
    if n and (lv.min() < 0 or lv.max() >= tables.grid.levels):
        raise ValueError("level index outside the table range")
    return lv


def encode_sequence(symbols, levels, tables: CdfTable, raw=None) -> bytes:
    """Range-code alphabet indices; one ``raw`` 16-bit value per escape symbol."""
    sym = np.ascontiguousarray(symbols, dtype=np.int64).ravel()
    n = sym.shape[0]
    lv = _check_levels(levels, tables, n)
    if n and (sym.min() < 0 or sym.max() >= tables.alphabet.size):
        raise ValueError("symbol outside the alphabet")
    escape = tables.alphabet.escape
    raws = np.ascontiguousarray(raw if raw is not None else [], dtype=np.int64).ravel()
    n_esc = int(np.count_nonzero(sym == escape))
    if raws.shape[0] != n_esc:
        raise ValueError(f"{n_esc} escape symbols but {raws.shape[0]} raw values")
    if n_esc and (raws.min() < 0 or raws.max() > 0xFFFF):
        raise ValueError("raw values must fit in 16 bits")
    out = np.empty(3 * n + 3 * n_esc + 16, dtype=np.int64)
    used = _encode(sym, lv, tables.cum, escape, raws, out)
    return out[:used].astype(np.uint8).tobytes()


def decode_sequence(stream: bytes, count: int, levels, tables: CdfTable, *, strict: bool = True):
    """Decode ``count`` symbols. Returns (symbols, raws).

    With ``strict`` a read past the end of ``stream`` raises :class:`DesyncError`;
    otherwise the caller gets ``(symbols, raws, exhausted)``.
    """
    lv = _check_levels(levels, tables, count)
    if count == 0:
        # nothing to decode, so not even the initial code bytes are needed
        empty = np.empty(0, dtype=np.int64)
        return (empty, empty.copy()) if strict else (empty, empty.copy(), False)
    data = np.frombuffer(bytes(stream), dtype=np.uint8).astype(np.int64)
    symbols = np.empty(count, dtype=np.int64)
    raws = np.empty(count, dtype=np.int64)
    _, nraw, exhausted = _decode(data, count, lv, tables.cum, tables.alphabet.escape, symbols, raws)
    if strict:
        if exhausted:
            raise DesyncError("range decoder read past the end of the stream")
        return symbols, raws[:nraw]
    return symbols, raws[:nraw], bool(exhausted)


def consumed_bytes(stream: bytes, count: int, levels, tables: CdfTable) -> int:
    """Number of bytes the decoder reads to recover ``count`` symbols."""
    lv = _check_levels(levels, tables, count)
    data = np.frombuffer(bytes(stream), dtype=np.uint8).astype(np.int64)
    pos, _, _ = _decode(data, count, lv, tables.cum, tables.alphabet.escape,
                        np.empty(count, dtype=np.int64), np.empty(count, dtype=np.int64))
    return int(pos)
