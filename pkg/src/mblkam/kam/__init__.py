"""Multi-scale quasi-local diagonalization of the disordered Ising chain."""

from .blocks import ResonantBlock, block_rotation, flip_sites, form_blocks, greedy_match, resonant_cores, sector_rotation
from .engine import KamConfig, KamResult, StepRecord, active_blocks, diagonalize_kam
from .generator import GeneratorMatrix, build_generator, effective_orders, offdiagonal_band
from .linalg import expm_antisymmetric, hamming_matrix, max_offdiag, rotate
from .schedule import PAPER_GROWTH, Band, ScaleSchedule, scale_bands

__all__ = [
    "Band",
    "GeneratorMatrix",
    "KamConfig",
    "KamResult",
    "PAPER_GROWTH",
    "ResonantBlock",
    "ScaleSchedule",
    "StepRecord",
    "active_blocks",
    "block_rotation",
    "build_generator",
    "diagonalize_kam",
    "effective_orders",
    "expm_antisymmetric",
    "flip_sites",
    "form_blocks",
    "greedy_match",
    "hamming_matrix",
    "max_offdiag",
    "offdiagonal_band",
    "resonant_cores",
    "rotate",
    "scale_bands",
    "sector_rotation",
]
