"""Exact analysis and simulation of polar codes under a mismatched decoding metric."""

from .channel import (ChannelError, ChannelPair, LrSpectrum, SymmetricChannel,
                      counterexample_pair, make_bec, make_bsc, make_symmetric, pair)
from .construction import CodeSpec, bound_block_error, build_info_set, export_spec, import_spec
from .evolution import EvolutionLimits, SupportOverflow, TransformPath, synthesize
from .metrics import bhattacharyya, pe, tie_split
from .robustness import Variant, check_conditions, sweep_preservation, track_tie_process
from .simulator import SimConfig, encode, run_monte_carlo, scd_decode

__version__ = "0.1.0"

__all__ = [
    "ChannelError", "ChannelPair", "LrSpectrum", "SymmetricChannel", "counterexample_pair",
    "make_bec", "make_bsc", "make_symmetric", "pair", "CodeSpec", "bound_block_error",
    "build_info_set", "export_spec", "import_spec", "EvolutionLimits", "SupportOverflow",
    "TransformPath", "synthesize", "bhattacharyya", "pe", "tie_split", "Variant",
    "check_conditions", "sweep_preservation", "track_tie_process", "SimConfig", "encode",
    "run_monte_carlo", "scd_decode", "__version__",
]
