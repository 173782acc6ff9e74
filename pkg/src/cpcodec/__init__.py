"""Deterministic entropy coding with calibration information for cross-platform decoding."""

from .calibration import CalibrationBlock, CalibrationSet, decode_block, detect_boundary, determinate_index, encode_block
from .codec import CodedFrame, DecodeResult, EntropyParams, Status, decode_frame, encode_frame
from .drift import DriftModel, DriftReport, run_experiment, sweep_epsilon
from .entropy_tables import CdfTable, SymbolAlphabet, build_tables, estimate_rate
from .latent_source import LatentFrame, generate, load_tensor, save_tensor
from .pgc import PgcConfig, pgc_loss, rectify
from .range_coder import decode_sequence, encode_sequence
from .sigma_grid import SigmaGrid, index_of, lut_theta, quantize_floor, quantize_round
from .skip_policy import SkipConfig, skip_mask

__version__ = "0.1.0"
