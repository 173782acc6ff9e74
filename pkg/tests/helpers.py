"""Shared test fixtures that are plain functions rather than pytest fixtures."""

import numpy as np

from cpcodec import prng
from cpcodec.entropy_tables import TOTAL_FREQ


def sample_sequence(tables, n, seed, escape_raws=True):
    """Symbols drawn from the tables themselves at random levels, plus raw values for escapes."""
    levels = (prng.words(seed, prng.AUX, n) % np.uint64(tables.grid.levels)).astype(np.int64)
    u = (prng.words(seed, prng.NOISE, n) % np.uint64(TOTAL_FREQ)).astype(np.int64)
    cum = tables.cum[levels]
    symbols = (cum[:, 1:] <= u[:, None]).sum(axis=1)
    esc = symbols == tables.alphabet.escape
    raws = (prng.words(seed, prng.MU, int(esc.sum())) >> np.uint64(48)).astype(np.int64)
    return symbols, levels, raws if escape_raws else raws[:0]
