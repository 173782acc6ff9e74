"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a one-line verdict in ``RESULTS``; the conftest hook
prints them as a block at the end of the pytest run. Running this file
directly (``python3 tests/test_acceptance.py``) executes all nine and prints
the same lines.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pytest

from cpcodec import prng
from cpcodec.calibration import (
    CalibrationSet,
    absolute_bits,
    detect_boundary,
    determinate_index,
    encode_block,
    estimated_rpc_bits,
)
from cpcodec.codec import EntropyParams, encode_frame, tables_for
from cpcodec.drift import DriftModel, frame_seed, run_experiment
from cpcodec.entropy_tables import build_tables, estimate_rate
from cpcodec.latent_source import generate
from cpcodec.pgc import PgcConfig, gradient_check, rectify, smooth_points
from cpcodec.range_coder import decode_sequence, encode_sequence
from cpcodec.sigma_grid import SigmaGrid
from cpcodec.skip_policy import SkipConfig, mask_from_bound

GOLDEN = Path(__file__).parent / "golden"
DIMS = (192, 48, 80)
N = 737_280
RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, text: str) -> None:
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


@pytest.fixture(scope="module")
def grid():
    return SigmaGrid()


# 1 -------------------------------------------------------------------------
def test_criterion_1_cross_platform_recovery(grid):
    t0 = time.perf_counter()
    drift = DriftModel(5e-5, seed=1)
    cells = {None: run_experiment(96, DIMS, grid, None, drift)}
    for eps in (1e-4, 1e-3, 1e-2):
        cells[eps] = run_experiment(96, DIMS, grid, eps, drift)
    elapsed = time.perf_counter() - t0
    no_cit = cells.pop(None).failure_rate
    with_cit = {e: r.failure_rate for e, r in cells.items()}
    ok = no_cit >= 0.9 and all(v == 0.0 for v in with_cit.values()) and elapsed < 300
    cit_text = ", ".join(f"eps={e:g}: {100 * v:.1f}%" for e, v in with_cit.items())
    record(1, ok, f"96 frames, noise 5e-5: without CIT {100 * no_cit:.1f}% failures (need >= 90%); "
                  f"with CIT {cit_text} (need 0%); {elapsed:.0f} s (need < 300 s)")


# 2 -------------------------------------------------------------------------
def test_criterion_2_agreement_theorem():
    max_index = 31
    counterexamples = 0
    pairs = 0
    per_eps = 250_000
    for k, eps in enumerate((1e-4, 1e-3, 1e-2, float(np.float32(0.1)))):
        raw = -0.5 + 32.0 * prng.uniform(100 + k, prng.AUX, per_eps)
        near = prng.uniform(100 + k, prng.SIGMA, per_eps) < 0.5
        raw = np.where(near, np.round(raw) + (2 * prng.uniform(100 + k, prng.MU, per_eps) - 1) * 2 * eps, raw)
        # even positions: uniform drift in [-eps, eps]; odd: adversarial, exactly +-eps
        u = prng.uniform(100 + k, prng.NOISE, per_eps)
        sign = np.where(prng.uniform(100 + k, prng.DRIFT_SIGN, per_eps) < 0.5, -1.0, 1.0)
        delta = np.where(np.arange(per_eps) % 2 == 0, (2 * u - 1) * eps, sign * eps)
        i_e = np.clip(raw, 0, max_index).reshape(1, 1, -1)
        i_d = np.clip(raw + delta, 0, max_index).reshape(1, 1, -1)
        cset = detect_boundary(i_e, eps, max_index)
        counterexamples += int(np.count_nonzero(
            determinate_index(i_e, cset, max_index) != determinate_index(i_d, cset, max_index)))
        pairs += per_eps
    record(2, pairs == 10**6 and counterexamples == 0,
           f"{pairs} pairs (half adversarial at exactly +-eps), {counterexamples} counterexamples (need 0)")


# 3 -------------------------------------------------------------------------
def test_criterion_3_count_scaling(grid):
    frames = 8
    counts = {1e-4: 0, 1e-3: 0, 1e-2: 0}
    for k in range(frames):
        index = grid.index_of(generate(frame_seed(0, k), DIMS).sigma)
        for eps in counts:
            counts[eps] += len(detect_boundary(index, eps, grid.max_index))
    mean = {e: c / frames for e, c in counts.items()}
    r1, r2 = mean[1e-3] / mean[1e-4], mean[1e-2] / mean[1e-3]
    ratios_ok = all(8.0 <= r <= 12.0 for r in (r1, r2))
    density_ok = all(abs(mean[e] / (2 * e * N) - 1) <= 0.2 for e in mean)
    record(3, ratios_ok and density_ok,
           f"mean |C_b| {mean[1e-4]:.1f} / {mean[1e-3]:.1f} / {mean[1e-2]:.1f} "
           f"(2 eps N = 147.5 / 1474.6 / 14745.6); decade ratios {r1:.2f}, {r2:.2f} (need 10 +- 20%)")


# 4 -------------------------------------------------------------------------
def test_criterion_4_pgc_rectification(grid):
    frames = 4
    before = after = 0
    for k in range(frames):
        index = grid.index_of(generate(frame_seed(0, k), DIMS).sigma)
        before += len(detect_boundary(index, 1e-3, grid.max_index))
        fixed = rectify(index, PgcConfig(), steps=200, lr=0.05, max_index=grid.max_index)
        after += len(detect_boundary(fixed, 1e-3, grid.max_index))
    reduction = 1 - after / before
    record(4, 0.25 <= reduction <= 0.377,
           f"eps=1e-3, 200 steps lr 0.05: |C_b| {before / frames:.1f} -> {after / frames:.1f}, "
           f"reduction {100 * reduction:.1f}% (need >= 25% and within 10 points of 27.7%)")


# 5 -------------------------------------------------------------------------
def test_criterion_5_rpc_bit_widths():
    targets = {115: 13, 1142: 10, 11415: 7}
    sets_per_size = 20
    lines, ok = [], True
    for size, want in targets.items():
        widths = []
        for s in range(sets_per_size):
            # random subset of the positions: rank by a keyed hash, take the first `size`
            keys = prng.words(size * 1000 + s, prng.AUX, N)
            coords = np.sort(np.argpartition(keys, size)[:size])
            widths.append(encode_block(CalibrationSet(coords, 1e-4, DIMS)).bit_width)
        med = float(np.median(widths))
        ok &= abs(med - want) <= 1
        lines.append(f"{size}: measured {min(widths)}-{max(widths)} (median {med:g}), "
                     f"estimator {estimated_rpc_bits(N, size)}, want {want}")
    base = absolute_bits(N)
    ok &= base == 20
    record(5, ok, "; ".join(lines) + f"; absolute baseline {base} bits (need 20)")


# 6 -------------------------------------------------------------------------
def test_criterion_6_gradient_check():
    x = smooth_points(10_000, seed=6, low=0.0, high=31.0)
    err = gradient_check(x, PgcConfig(), step=1e-6)
    record(6, x.size == 10_000 and err.max() < 1e-5,
           f"10^4 points, max relative error {err.max():.2e} (need < 1e-5)")


# 7 -------------------------------------------------------------------------
def test_criterion_7_coder_fidelity(grid):
    tables = build_tables(grid)
    worst_slack = -np.inf
    ok = True
    for seed in range(5):
        n = 100_000
        levels = (prng.words(seed, prng.AUX, n) % np.uint64(32)).astype(np.int64)
        u = (prng.words(seed, prng.NOISE, n) % np.uint64(1 << 16)).astype(np.int64)
        sym = (tables.cum[levels][:, 1:] <= u[:, None]).sum(axis=1)
        if seed == 4:
            sym = (prng.words(seed, prng.MU, n) % np.uint64(66)).astype(np.int64)  # adversarial: uniform symbols
        esc = sym == tables.alphabet.escape
        raws = (prng.words(seed, prng.DRIFT_MU, int(esc.sum())) >> np.uint64(48)).astype(np.int64)
        data = encode_sequence(sym, levels, tables, raws)
        got, got_raws = decode_sequence(data, n, levels, tables)
        ok &= np.array_equal(got, sym) and np.array_equal(got_raws, raws)
        resid = np.where(esc, 1000, sym - 32)
        est = estimate_rate(resid, levels, tables)
        bits = 8 * len(data)
        ok &= bits <= est * 1.01 + 64
        worst_slack = max(worst_slack, (bits - est) / est)
    record(7, ok, f"5 x 10^5-symbol sequences round-trip exactly; worst overhead "
                  f"{100 * worst_slack:.3f}% of estimate (need <= 1% + 64 bits)")


# 8 -------------------------------------------------------------------------
def test_criterion_8_golden_files(grid):
    manifest = json.loads((GOLDEN / "cpnc_manifest.json").read_text())
    tables = tables_for(grid, 32)
    ok = tables.checksum == 0xA48D65AF
    for name, spec in manifest.items():
        f = generate(spec["seed"], spec["dims"], spec["profile"])
        coded = encode_frame(f, grid, spec["epsilon"], SkipConfig.from_level_bound(spec["skip_level"], grid), tables)
        ok &= coded.to_bytes() == (GOLDEN / name).read_bytes()
        ok &= coded.cdf_checksum == spec["cdf_checksum"]
    record(8, ok, f"{len(manifest)} committed CPNC files and CDF checksum {tables.checksum:#010x} reproduce "
                  f"byte-exactly on this host; the second OS/arch runner is the CI matrix job")


# 9 -------------------------------------------------------------------------
def test_criterion_9_skip_monotonicity(grid):
    tables = tables_for(grid, 32)
    violations = 0
    mask_mismatch = 0
    for k in range(1000):
        dims = (4, 16, 16)
        f = generate(9_000 + k, dims)
        sizes = []
        for bound in range(grid.levels + 1):
            coded = encode_frame(f, grid, 1e-4, SkipConfig.from_level_bound(bound, grid), tables)
            sizes.append(len(coded.payload))
        violations += int(np.any(np.diff(sizes) > 0))
        # masks under eps-bounded drift, at a mid-range bound
        bound = 1 + k % 20
        params = EntropyParams.from_frame(f)
        enc_idx = params.continuous_index(grid)
        cset = detect_boundary(enc_idx, 1e-4, grid.max_index)
        dec = DriftModel(1e-4, seed=k, adversarial=k % 2 == 0).perturb(params, grid)
        m_e = mask_from_bound(determinate_index(enc_idx, cset, grid.max_index), bound)
        m_d = mask_from_bound(determinate_index(dec.index, cset, grid.max_index), bound)
        mask_mismatch += int(not np.array_equal(m_e, m_d))
    record(9, violations == 0 and mask_mismatch == 0,
           f"1000 frames x 33 skip bounds: {violations} frames with a payload increase (need 0); "
           f"{mask_mismatch} encoder/decoder mask mismatches under eps-bounded drift (need 0)")


if __name__ == "__main__":
    g = SigmaGrid()
    checks = [
        (test_criterion_1_cross_platform_recovery, (g,)),
        (test_criterion_2_agreement_theorem, ()),
        (test_criterion_3_count_scaling, (g,)),
        (test_criterion_4_pgc_rectification, (g,)),
        (test_criterion_5_rpc_bit_widths, ()),
        (test_criterion_6_gradient_check, ()),
        (test_criterion_7_coder_fidelity, (g,)),
        (test_criterion_8_golden_files, (g,)),
        (test_criterion_9_skip_monotonicity, (g,)),
    ]
    for fn, args in checks:
        try:
            fn(*args)
        except AssertionError:
            pass
