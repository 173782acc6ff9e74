import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpcodec.entropy_tables import (
    TOTAL_FREQ,
    CdfTable,
    ConfigurationError,
    SymbolAlphabet,
    TableFormatError,
    build_tables,
    dump_tables,
    estimate_rate,
    level_masses,
    load_table_freqs,
)
from cpcodec.sigma_grid import SigmaGrid

from conftest import GOLDEN

DEFAULT_CHECKSUM = 0xA48D65AF


def half_table(levels=2, half_width=1):
    """Every level puts exactly half the total on r = 0."""
    a = SymbolAlphabet(half_width)
    row = np.ones(a.size, dtype=np.int64)
    row[half_width] = TOTAL_FREQ // 2
    row[0] = TOTAL_FREQ - row.sum() + 1
    return CdfTable(SigmaGrid(levels=levels), a, np.tile(row, (levels, 1)))


def test_alphabet_shape():
    a = SymbolAlphabet()
    assert a.half_width == 32 and a.size == 66 and a.escape == 65
    assert a.symbol_of([-32, 0, 32, 33, -40]).tolist() == [0, 32, 64, 65, 65]


@pytest.mark.parametrize("hw", [0, -3, 32768])
def test_alphabet_validation(hw):
    with pytest.raises(ConfigurationError):
        SymbolAlphabet(hw)


def test_level_zero_all_mass_on_zero(tables):
    row = tables.freqs[0]
    assert row[32] == TOTAL_FREQ - 65
    assert np.all(np.delete(row, 32) == 1)


def test_normalization_and_floor(tables):
    assert np.all(tables.freqs.sum(axis=1) == TOTAL_FREQ)
    assert tables.freqs.min() >= 1
    assert np.all(np.diff(tables.cum, axis=1) > 0)
    assert np.all(tables.cum[:, -1] == TOTAL_FREQ)


def test_symmetry(tables):
    body = tables.freqs[:, :65]
    assert np.array_equal(body, body[:, ::-1])


def test_unquantized_masses_match_oracle(grid, oracle):
    # the fixed erf approximation has absolute error < 1.5e-7, so masses
    # (differences of two erf values, halved) agree to that order
    for k in range(grid.levels):
        ref = np.array([float(mp.mpf(v)) for v in oracle["level_masses"][k]])
        got = level_masses(grid, k)
        assert np.max(np.abs(got - ref)) < 2e-7, k


def test_top_level_p0(grid, oracle):
    p0 = level_masses(grid, 31)[32]
    assert p0 == pytest.approx(0.006233, abs=5e-7)
    assert p0 == pytest.approx(float(mp.mpf(oracle["p0_level31_unquantized"])), abs=1.5e-7)


def test_quantized_close_to_masses(grid, tables):
    for k in range(grid.levels):
        m = level_masses(grid, k)
        q = tables.freqs[k] / TOTAL_FREQ
        assert np.max(np.abs(q - m)) <= 70 / TOTAL_FREQ


def test_checksum_is_deterministic(grid, tables):
    assert tables.checksum == DEFAULT_CHECKSUM
    assert build_tables(SigmaGrid()).checksum == tables.checksum


def test_golden_cdft_file(tables, tmp_path):
    golden = GOLDEN / "default.cdft"
    out = tmp_path / "t.cdft"
    dump_tables(tables, out)
    assert out.read_bytes() == golden.read_bytes()
    levels, hw, freqs = load_table_freqs(golden)
    assert (levels, hw) == (32, 32)
    assert np.array_equal(freqs, tables.freqs)


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.cdft"
    p.write_bytes(b"XXXX" + bytes(20))
    with pytest.raises(TableFormatError):
        load_table_freqs(p)
    p.write_bytes((GOLDEN / "default.cdft").read_bytes()[:-2])
    with pytest.raises(TableFormatError):
        load_table_freqs(p)


def test_table_validation():
    g = SigmaGrid(levels=2)
    a = SymbolAlphabet(1)
    with pytest.raises(TableFormatError):
        CdfTable(g, a, np.zeros((2, 4), dtype=np.int64))
    with pytest.raises(TableFormatError):
        CdfTable(g, a, np.full((3, 4), TOTAL_FREQ // 4))


def test_rate_examples(tables, oracle):
    assert estimate_rate([], [], tables) == 0.0
    ref = float(mp.mpf(oracle["bits_r0_level0"]))
    assert estimate_rate([0], [0], tables) == pytest.approx(ref, rel=1e-12)
    t = half_table()
    assert estimate_rate(np.zeros(1000, dtype=int), np.zeros(1000, dtype=int), t) == 1000.0


def test_rate_escape_pays_raw_field(tables):
    r = estimate_rate([100], [5], tables)
    esc = 16 - np.log2(tables.freqs[5, 65])
    assert r == pytest.approx(esc + 16)


def test_rate_respects_coded_mask(tables):
    r = np.array([0, 1, -1, 3])
    lv = np.array([0, 10, 20, 31])
    full = estimate_rate(r, lv, tables)
    part = estimate_rate(r, lv, tables, coded=[True, False, True, False])
    assert part == pytest.approx(estimate_rate(r[[0, 2]], lv[[0, 2]], tables))
    assert part < full


def test_rate_length_mismatch(tables):
    with pytest.raises(ValueError):
        estimate_rate([0, 1], [0], tables)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=1e-3, max_value=0.5), st.floats(min_value=2.0, max_value=1e3),
       st.integers(min_value=2, max_value=64), st.integers(min_value=1, max_value=40))
def test_any_grid_gives_valid_symmetric_tables(lo, ratio, levels, hw):
    t = build_tables(SigmaGrid(lo, lo * ratio, levels), SymbolAlphabet(hw))
    assert np.all(t.freqs.sum(axis=1) == TOTAL_FREQ)
    assert t.freqs.min() >= 1
    body = t.freqs[:, : 2 * hw + 1]
    assert np.array_equal(body, body[:, ::-1])
