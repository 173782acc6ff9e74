"""Command-line entry point: ``cpcodec <command> [flags]``.

Commands: gen, encode, decode, drift, calib-stats, pgc-check. Sweep-style
commands write CSV to stdout; encode/decode print a human-readable stats
line to stderr, or JSON to stdout with ``--json``. ``--figures DIR`` on the
report commands renders PNG figures alongside.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .calibration import EPS_MAX, MalformedBitstreamError, detect_boundary
from .codec import CodedFrame, EntropyParams, decode_frame, encode_frame
from .drift import REPORT_COLUMNS, SWEEP_COLUMNS, DriftModel, run_experiment, sweep_epsilon, to_csv
from .entropy_tables import TableFormatError
from .latent_source import PROFILES, LatentFrame, TensorFormatError, generate, load_tensor, parse_dims, save_tensor
from .pgc import PgcConfig, gradient_check, rectify, smooth_points
from .sigma_grid import SigmaGrid
from .skip_policy import SkipConfig

EXIT_OK = 0
EXIT_DECODE_FAILED = 1
EXIT_ERROR = 2


class CliError(Exception):
    pass


def _epsilon(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < v <= EPS_MAX:
        raise argparse.ArgumentTypeError(f"epsilon must be in (0, {EPS_MAX}], got {v}")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _dims(text: str):
    try:
        return parse_dims(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid_args(p):
    p.add_argument("--sigma-min", type=float, default=0.01)
    p.add_argument("--sigma-max", type=float, default=64.0)
    p.add_argument("--levels", type=int, default=32)


def _source_args(p, dims_required=False):
    p.add_argument("--seed", type=int, default=None, help="generate the latent from this seed")
    p.add_argument("--dims", type=_dims, default=None, help="CxHxW (with --seed)")
    p.add_argument("--profile", choices=sorted(PROFILES), default="uniform")


def _grid(ns) -> SigmaGrid:
    return SigmaGrid(ns.sigma_min, ns.sigma_max, ns.levels)


def _emit(stats: dict, as_json: bool, text: str) -> None:
    if as_json:
        print(json.dumps(stats, sort_keys=True))
    else:
        print(text, file=sys.stderr)


def cmd_gen(ns) -> int:
    frame = generate(ns.seed, ns.dims, ns.profile)
    save_tensor(frame, ns.out)
    _emit({"out": str(ns.out), "dims": list(frame.dims), "seed": ns.seed}, ns.json,
          f"wrote {ns.out} dims={'x'.join(map(str, frame.dims))}")
    return EXIT_OK


def _input_frame(ns) -> LatentFrame:
    if ns.input is not None:
        return load_tensor(ns.input)
    if ns.seed is None or ns.dims is None:
        raise CliError("give --input FILE or both --seed and --dims")
    return generate(ns.seed, ns.dims, ns.profile)


def cmd_encode(ns) -> int:
    frame = _input_frame(ns)
    grid = _grid(ns)
    eps = None if ns.no_cit else ns.epsilon
    if ns.skip_level is not None:
        skip = SkipConfig.from_level_bound(ns.skip_level, grid)
    else:
        skip = SkipConfig(ns.skip_threshold)
    coded = encode_frame(frame, grid, eps, skip)
    coded.write(ns.out)
    info = coded.info
    stats = {
        "out": str(ns.out),
        "elements": info["elements"],
        "payload_bits": coded.payload_bits,
        "calibration_count": coded.calibration.count,
        "calibration_bit_width": coded.calibration.bit_width,
        "calibration_bits": coded.calibration_bits,
        "header_bits": coded.header_bits,
        "total_bits": coded.total_bits,
        "skip_level_bound": coded.skip_bound,
        "skip_ratio": info["skipped"] / info["elements"],
        "escapes": info["escapes"],
        "estimated_bits": info["estimated_bits"],
        "epsilon": eps,
    }
    _emit(stats, ns.json,
          f"payload={coded.payload_bits} bits calibration={coded.calibration.count} coords "
          f"({coded.calibration_bits} bits) skip_ratio={stats['skip_ratio']:.4f}")
    return EXIT_OK


def cmd_decode(ns) -> int:
    coded = CodedFrame.read(ns.input)
    if ns.params is not None:
        frame = load_tensor(ns.params)
    elif ns.seed is not None:
        frame = generate(ns.seed, ns.dims or coded.dims, ns.profile)
    else:
        raise CliError("give --params FILE or --seed")
    grid = coded.grid
    params = EntropyParams.from_frame(frame)
    if ns.noise > 0 or ns.mu_noise > 0:
        drift = DriftModel(ns.noise, ns.mu_noise, ns.noise_seed, ns.adversarial)
        params = drift.perturb(params, grid)
    result = decode_frame(coded, params)
    if ns.out is not None and result.residuals is not None:
        res = result.residuals.astype(np.float32)
        save_tensor(LatentFrame(frame.mu, frame.sigma, res), ns.out)
    status = "ok" if result.ok else "fail"
    stats = {"status": status, "detail": result.status.value, "message": result.detail}
    if ns.json:
        print(json.dumps(stats, sort_keys=True))
    else:
        print(f"{status} ({result.status.value})")
    return EXIT_OK if result.ok else EXIT_DECODE_FAILED


def cmd_drift(ns) -> int:
    grid = _grid(ns)
    drift = DriftModel(ns.noise, ns.mu_noise, ns.noise_seed, ns.adversarial)
    skip = SkipConfig.from_level_bound(ns.skip_level, grid) if ns.skip_level else None
    pgc = PgcConfig() if ns.rectify else None
    eps_values = [None] if ns.no_cit else ns.epsilon
    rows = []
    for eps in eps_values:
        rep = run_experiment(ns.frames, ns.dims, grid, eps, drift, skip, ns.profile, ns.seed, pgc)
        rows.append(rep.row())
    sys.stdout.write(to_csv(rows, REPORT_COLUMNS))
    if ns.figures:
        plotting.failure_rates(rows, Path(ns.figures) / "drift_failure_rates.png")
    return EXIT_OK


def cmd_calib_stats(ns) -> int:
    grid = _grid(ns)
    pgc = PgcConfig() if ns.rectify else None
    rows = sweep_epsilon(ns.epsilon, ns.frames, ns.dims, grid, ns.profile, ns.seed, pgc)
    sys.stdout.write(to_csv(rows, SWEEP_COLUMNS))
    if ns.figures:
        plotting.calibration_sweep(rows, Path(ns.figures) / "calibration_sweep.png")
    return EXIT_OK


def cmd_pgc_check(ns) -> int:
    cfg = PgcConfig(ns.delta, ns.eta, ns.beta)
    grid = _grid(ns)
    x = smooth_points(ns.points, ns.seed, 0.0, float(grid.max_index), cfg)
    err = gradient_check(x, cfg)
    passed = bool(err.max() < ns.tolerance)
    print(f"gradient check: points={x.size} max_rel_err={err.max():.3e} "
          f"tol={ns.tolerance:g} {'PASS' if passed else 'FAIL'}", file=sys.stderr)

    frame = generate(ns.seed, ns.dims, "uniform")
    before = grid.index_of(frame.sigma)
    after = rectify(before, cfg, ns.steps, ns.lr, max_index=grid.max_index)
    rows = []
    for eps in ns.epsilon:
        a = len(detect_boundary(before, eps, grid.max_index))
        b = len(detect_boundary(after, eps, grid.max_index))
        rows.append({"epsilon": eps, "count_before": a, "count_after": b,
                     "reduction": (1 - b / a) if a else 0.0})
    sys.stdout.write(to_csv(rows, ["epsilon", "count_before", "count_after", "reduction"]))
    if ns.figures:
        plotting.fractional_histogram(before, after, Path(ns.figures) / "pgc_fractional_parts.png")
    return EXIT_OK if passed else EXIT_DECODE_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpcodec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic LTNT latent")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--profile", choices=sorted(PROFILES), default="uniform")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("encode", help="encode an LTNT latent (or a generated one) to CPNC")
    p.add_argument("--input", type=Path)
    _source_args(p)
    _grid_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--epsilon", type=_epsilon, default=1e-4)
    g.add_argument("--no-cit", action="store_true", help="send no calibration information")
    s = p.add_mutually_exclusive_group()
    s.add_argument("--skip-level", type=int, default=None, help="smallest level still coded")
    s.add_argument("--skip-threshold", type=_nonneg, default=0.0, help="skip levels with theta below this")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a CPNC stream with (optionally perturbed) parameters")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--params", type=Path, help="decoder-side LTNT parameters")
    _source_args(p)
    p.add_argument("--noise", type=_nonneg, default=0.0, help="uniform index drift bound")
    p.add_argument("--mu-noise", type=_nonneg, default=0.0)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--adversarial", action="store_true")
    p.add_argument("--out", type=Path, help="write residuals as an LTNT file (y plane)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("drift", help="simulated cross-platform failure rates (CSV)")
    p.add_argument("--frames", type=int, default=96)
    p.add_argument("--dims", type=_dims, default=(192, 48, 80))
    p.add_argument("--noise", type=_nonneg, default=5e-5)
    p.add_argument("--mu-noise", type=_nonneg, default=0.0)
    p.add_argument("--epsilon", type=_epsilon, nargs="+", default=[1e-4])
    p.add_argument("--no-cit", action="store_true")
    p.add_argument("--adversarial", action="store_true")
    p.add_argument("--rectify", action="store_true")
    p.add_argument("--skip-level", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-seed", type=int, default=1)
    p.add_argument("--profile", choices=sorted(PROFILES), default="uniform")
    p.add_argument("--figures", type=Path)
    _grid_args(p)
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("calib-stats", help="calibration-set size and coordinate bits per epsilon (CSV)")
    p.add_argument("--epsilon", type=_epsilon, nargs="+", default=[1e-4, 1e-3, 1e-2])
    p.add_argument("--rectify", action="store_true")
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--dims", type=_dims, default=(192, 48, 80))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=sorted(PROFILES), default="uniform")
    p.add_argument("--figures", type=Path)
    _grid_args(p)
    p.set_defaults(func=cmd_calib_stats)

    p = sub.add_parser("pgc-check", help="gradient check and rectification effect (CSV)")
    p.add_argument("--points", type=int, default=10_000)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.3)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epsilon", type=_epsilon, nargs="+", default=[1e-4, 1e-3, 1e-2])
    p.add_argument("--dims", type=_dims, default=(16, 48, 80))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--figures", type=Path)
    _grid_args(p)
    p.set_defaults(func=cmd_pgc_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except (CliError, ValueError, OSError, TensorFormatError, MalformedBitstreamError,
            TableFormatError) as exc:
        print(f"cpcodec {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
