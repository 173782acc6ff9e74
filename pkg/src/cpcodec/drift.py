"""Simulated cross-platform decoding.

Each trial encodes a synthetic frame, then decodes it with entropy
parameters perturbed the way a different platform would compute them:
bounded noise on the continuous index (and optionally on mu). The noise is
drawn from the counter-based generator, so every trial is reproducible.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import prng
from .calibration import absolute_bits, detect_boundary, encode_block, estimated_rpc_bits
from .codec import EntropyParams, Status, decode_frame, encode_frame, tables_for
from .entropy_tables import SymbolAlphabet
from .latent_source import generate, parse_dims
from .pgc import PgcConfig, rectify
from .sigma_grid import SigmaGrid
from .skip_policy import SkipConfig


@dataclass(frozen=True)
class DriftModel:
    index_noise_bound: float = 0.0
    mu_noise_bound: float = 0.0
    seed: int = 0
    adversarial: bool = False  # every element moved by exactly +-bound

    def __post_init__(self):
        for name in ("index_noise_bound", "mu_noise_bound"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")

    def _noise(self, stream: int, bound: float, n: int, trial: int) -> np.ndarray:
        if bound == 0:
            return np.zeros(n)
        offset = trial * n
        if self.adversarial:
            signs = (prng.words(self.seed, prng.DRIFT_SIGN, n, offset) >> np.uint64(63)).astype(np.float64)
            return (2.0 * signs - 1.0) * bound
        u = prng.uniform(self.seed, stream, n, offset)
        return (2.0 * u - 1.0) * bound  # |.| <= bound exactly: |2u - 1| <= 1

    def perturb(self, params: EntropyParams, grid: SigmaGrid, trial: int = 0) -> EntropyParams:
        """Decoder-side parameters for one trial."""
        index = params.continuous_index(grid)
        n = index.size
        d_index = self._noise(prng.DRIFT_INDEX, self.index_noise_bound, n, trial).reshape(index.shape)
        d_mu = self._noise(prng.DRIFT_MU, self.mu_noise_bound, n, trial).reshape(index.shape)
        mu = (np.asarray(params.mu, dtype=np.float64) + d_mu)
        return EntropyParams(mu, params.sigma, grid.clamp(index + d_index))


@dataclass
class DriftReport:
    label: str
    epsilon: float | None
    index_noise_bound: float
    mu_noise_bound: float
    adversarial: bool
    rectified: bool
    trials: int = 0
    failures: int = 0
    mean_calibration_count: float = 0.0
    mean_calibration_bits: float = 0.0
    mean_payload_bits: float = 0.0
    statuses: dict = field(default_factory=dict)

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    def row(self) -> dict:
        d = asdict(self)
        d.pop("statuses")
        d["cit"] = self.epsilon is not None
        d["epsilon"] = "" if self.epsilon is None else self.epsilon
        d["failure_rate"] = self.failure_rate
        return d


REPORT_COLUMNS = ["label", "cit", "epsilon", "index_noise_bound", "mu_noise_bound", "adversarial",
                  "rectified", "trials", "failures", "failure_rate", "mean_calibration_count",
                  "mean_calibration_bits", "mean_payload_bits"]


def frame_seed(seed: int, frame: int) -> int:
    return prng.mix64_int(prng.stream_key(seed, prng.AUX) + frame)


def run_experiment(frames: int, dims, grid: SigmaGrid | None = None, eps: float | None = 1e-4,
                   drift: DriftModel = DriftModel(), skip: SkipConfig | None = None,
                   profile="uniform", seed: int = 0, pgc: PgcConfig | None = None,
                   rectify_steps: int = 200, rectify_lr: float = 0.05,
                   label: str = "encoder->decoder") -> DriftReport:
    """Encode/perturb/decode ``frames`` synthetic frames and aggregate the outcome.

    ``eps=None`` encodes without calibration. ``pgc`` rectifies the encoder's
    index field before encoding.
    """
    grid = grid or SigmaGrid()
    dims = parse_dims(dims)
    tables = tables_for(grid, SymbolAlphabet().half_width)
    report = DriftReport(label, eps, drift.index_noise_bound, drift.mu_noise_bound,
                         drift.adversarial, pgc is not None)
    cal_count = cal_bits = payload_bits = 0
    for k in range(frames):
        frame = generate(frame_seed(seed, k), dims, profile)
        index = grid.index_of(frame.sigma)
        if pgc is not None:
            index = rectify(index, pgc, rectify_steps, rectify_lr, max_index=grid.max_index)
        coded = encode_frame(frame, grid, eps, skip, tables, index=index)
        dec_params = drift.perturb(EntropyParams.from_frame(frame, index), grid, trial=k)
        result = decode_frame(coded, dec_params, tables)
        report.trials += 1
        report.failures += result.status is not Status.OK
        report.statuses[result.status.value] = report.statuses.get(result.status.value, 0) + 1
        cal_count += coded.calibration.count
        cal_bits += coded.calibration_bits
        payload_bits += coded.payload_bits
    if frames:
        report.mean_calibration_count = cal_count / frames
        report.mean_calibration_bits = cal_bits / frames
        report.mean_payload_bits = payload_bits / frames
    return report


SWEEP_COLUMNS = ["epsilon", "rectified", "frames", "elements", "mean_count", "reduction",
                 "rpc_bit_width", "rpc_bits_estimate", "absolute_bits", "fixed_bits",
                 "mean_rpc_block_bits", "mean_absolute_block_bits"]


def sweep_epsilon(eps_list, frames: int = 4, dims=(192, 48, 80), grid: SigmaGrid | None = None,
                  profile="uniform", seed: int = 0, pgc: PgcConfig | None = PgcConfig(),
                  rectify_steps: int = 200, rectify_lr: float = 0.05) -> list[dict]:
    """Calibration-set statistics per epsilon, without and (if ``pgc``) with rectification.

    Per-coordinate bit columns: ``rpc_bit_width`` is the mean measured block
    width; ``rpc_bits_estimate`` is ceil(log2(N / mean count)), the width an
    evenly spread set would need; ``absolute_bits`` is ceil(log2 N).
    """
    grid = grid or SigmaGrid()
    dims = parse_dims(dims)
    eps_list = [float(e) for e in eps_list]
    n = int(np.prod(dims))
    variants = [False] + ([True] if pgc is not None else [])
    acc = {(e, v): {"count": 0, "width": 0, "rpc": 0} for e in eps_list for v in variants}
    for k in range(frames):
        frame = generate(frame_seed(seed, k), dims, profile)
        base = grid.index_of(frame.sigma)
        fields = {False: base}
        if pgc is not None:
            fields[True] = rectify(base, pgc, rectify_steps, rectify_lr, max_index=grid.max_index)
        for v, index in fields.items():
            for e in eps_list:
                cset = detect_boundary(index, e, grid.max_index)
                block = encode_block(cset)
                a = acc[(e, v)]
                a["count"] += len(cset)
                a["width"] += block.bit_width
                a["rpc"] += block.bit_cost
    rows = []
    for e in eps_list:
        plain = acc[(e, False)]["count"] / max(frames, 1)
        for v in variants:
            a = acc[(e, v)]
            mean = a["count"] / max(frames, 1)
            rows.append({
                "epsilon": e,
                "rectified": v,
                "frames": frames,
                "elements": n,
                "mean_count": mean,
                "reduction": (1.0 - mean / plain) if plain else 0.0,
                "rpc_bit_width": a["width"] / max(frames, 1),
                "rpc_bits_estimate": estimated_rpc_bits(n, mean),
                "absolute_bits": absolute_bits(n),
                "fixed_bits": 16,
                "mean_rpc_block_bits": a["rpc"] / max(frames, 1),
                "mean_absolute_block_bits": 40 + mean * absolute_bits(n),
            })
    return rows


def to_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()
