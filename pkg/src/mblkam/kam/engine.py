"""Multi-scale diagonalization driver.

Each step ``k`` removes, by one exponential rotation, every non-resonant
off-diagonal term of order below ``L_{k+1}``; resonant terms are collected
into blocks that are diagonalized exactly once the scale has caught up with
their diameter.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from ..exceptions import ConfigError, ConvergenceWarning, NumericalError
from ..model import PAPER_EPS_EXPONENT, ChainGeometry
from .blocks import ResonantBlock, fatten, flip_sites, resonant_cores, sector_rotation, unite_overlapping
from .generator import build_generator, effective_orders
from .linalg import max_offdiag, rotate
from .schedule import PAPER_GROWTH, ScaleSchedule, scale_bands

__all__ = ["KamConfig", "StepRecord", "KamResult", "diagonalize_kam", "active_blocks"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KamConfig:
    gamma: float
    eps_exponent: float = PAPER_EPS_EXPONENT
    rho: float | None = None
    growth: float = PAPER_GROWTH
    tol_offdiag: float = 1e-12
    k_max: int = 40
    block_constant: float = 1.0
    floor: float | None = None
    expm_tol: float = 1e-15
    max_terms: int = 200

    def __post_init__(self):
        if self.gamma is None or not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ConfigError(f"gamma must be finite and >= 0, got {self.gamma}")
        if self.eps_exponent < 0:
            raise ConfigError("eps_exponent must be >= 0")
        if self.rho is not None and not self.rho > 0:
            raise ConfigError("rho must be > 0")
        if not self.growth > 1:
            raise ConfigError("growth must exceed 1")
        if not self.tol_offdiag > 0:
            raise ConfigError("tol_offdiag must be > 0")
        if self.k_max < 0:
            raise ConfigError("k_max must be >= 0")
        if self.block_constant < 0:
            raise ConfigError("block_constant must be >= 0")

    @property
    def eps(self) -> float:
        return self.gamma**self.eps_exponent

    @property
    def cutoff_ratio(self) -> float:
        """``rho``, defaulting to ``gamma / eps``."""
        if self.rho is not None:
            return self.rho
        if self.gamma == 0:
            return 0.0
        return self.gamma / self.eps

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cutoff_ratio"] = self.cutoff_ratio
        return d


@dataclass
class StepRecord:
    k: int
    band: tuple[float, float]
    kind: str = "perturbative"
    n_candidates: int = 0
    n_resonant: int = 0
    n_absorbed: int = 0
    n_dropped: int = 0
    offdiag_before: float = 0.0
    offdiag_after_rotation: float = 0.0
    offdiag_after: float = 0.0
    generator_norm: float = 0.0
    expm: dict = field(default_factory=dict)
    blocks: list[dict] = field(default_factory=list)
    blocks_applied: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["band"] = list(self.band)
        return d


@dataclass(eq=False)
class KamResult:
    """Columns of ``U`` are the constructed eigenvectors: ``U^T H U`` is diagonal
    with entries ``final_diagonal`` (indexed by spin / metaspin label)."""

    U: np.ndarray
    final_diagonal: np.ndarray
    steps: list[StepRecord]
    fully_resonant_flag: bool
    converged: bool
    max_offdiag: float
    blocks: list[ResonantBlock] = field(default_factory=list)
    resonant_sets: list[frozenset[int]] = field(default_factory=list)
    config: KamConfig | None = None

    @property
    def energies(self) -> np.ndarray:
        return np.sort(self.final_diagonal)

    def summary(self) -> dict[str, Any]:
        return {
            "converged": self.converged,
            "fully_resonant": self.fully_resonant_flag,
            "n_steps": len(self.steps),
            "max_offdiag": self.max_offdiag,
            "blocks": [b.to_dict() for b in self.blocks],
        }


def active_blocks(
    cores: list[frozenset[int]],
    schedule: ScaleSchedule,
    k: int,
    geometry: ChainGeometry,
) -> list[ResonantBlock]:
    """Blocks whose diameter the current scale has reached.

    A core of diameter ``d`` is activated at the first step ``j`` with
    ``L_j >= d`` and fattened by ``floor(L_j)``; overlapping fattened blocks
    are then united.
    """
    blocks = []
    for core in cores:
        d = max(core) - min(core) + 1
        j = schedule.activation_step(d)
        if j <= k:
            radius = int(math.floor(schedule.length(j)))
            blocks.append(ResonantBlock(core, fatten(core, radius, geometry), j))
    return unite_overlapping(blocks)


def _exact_finish(H, U, geometry):
    rot = sector_rotation(H, geometry.sites, geometry)
    U = rot.right_multiply(U)
    diagonal = rot.energies[0].copy()
    return np.diag(diagonal), U, diagonal


def diagonalize_kam(H, config: KamConfig, geometry: ChainGeometry | None = None) -> KamResult:
    """Run the multi-scale rotation scheme on a symmetric ``H`` of size ``2**n``."""
    H = np.array(H, dtype=float, copy=True)
    N = H.shape[0]
    n = N.bit_length() - 1
    if H.shape != (N, N) or N != 1 << n:
        raise ValueError(f"H must be square with power-of-two size, got {H.shape}")
    geometry = geometry or ChainGeometry.from_n(n)
    if geometry.n != n:
        raise ValueError(f"geometry has {geometry.n} sites but H has dimension {N}")

    schedule = scale_bands(config.growth, config.k_max)
    rho = config.cutoff_ratio
    tol = config.tol_offdiag
    floor = tol / N if config.floor is None else config.floor
    all_sites = frozenset(geometry.sites)

    U = np.eye(N)
    fresh = True  # U is still the identity
    steps: list[StepRecord] = []
    history: set[frozenset[int]] = set()
    blocks: list[ResonantBlock] = []
    fully_resonant = False
    off = max_offdiag(H)

    for k in range(config.k_max + 1):
        if off <= tol:
            break
        rec = StepRecord(k, (schedule.length(k), schedule.length(k + 1)), offdiag_before=off)

        orders = effective_orders(H, config.gamma)
        gen = build_generator(
            H, schedule.below(k), rho, orders=orders, floor=floor, resonance_floor=tol
        )
        rec.n_candidates = gen.n_candidates
        rec.n_dropped = gen.n_dropped
        rec.n_resonant = len(gen.resonant_pairs)
        if gen.nnz:
            H, R, info = rotate(H, gen.A, tol=config.expm_tol, max_terms=config.max_terms, return_rotation=True)
            U = R.T.copy() if fresh else U @ R.T
            fresh = False
            rec.generator_norm = info.norm
            rec.expm = info.as_dict()
        rec.offdiag_after_rotation = max_offdiag(H)

        fattened = [b.fattened_sites for b in blocks]
        for pair in gen.resonant_pairs:
            sites = flip_sites(pair[0], pair[1], geometry)
            if any(sites <= f for f in fattened):
                rec.n_absorbed += 1
            else:
                history.add(sites)

        blocks = active_blocks(resonant_cores(history, config.block_constant), schedule, k, geometry)
        rec.blocks = [b.to_dict() for b in blocks]

        if any(b.fattened_sites == all_sites for b in blocks):
            fully_resonant = True
            rec.kind = "exact"
            H, U, _ = _exact_finish(H, U, geometry)
            off = 0.0
            rec.offdiag_after = off
            rec.blocks_applied = 1
            steps.append(rec)
            logger.debug("step %d: block covers the chain, finished exactly", k)
            break

        for b in blocks:
            rot = sector_rotation(H, b.fattened_sites, geometry)
            H = rot.conjugate(H)
            U = rot.right_multiply(U)
            fresh = False
            rec.blocks_applied += 1

        off = max_offdiag(H)
        rec.offdiag_after = off
        steps.append(rec)
        logger.debug(
            "step %d: %d candidates, %d resonant, offdiag %.3e -> %.3e",
            k, rec.n_candidates, rec.n_resonant, rec.offdiag_before, off,
        )

    converged = off <= tol
    if not converged:
        warnings.warn(
            f"KAM iteration stopped at k_max={config.k_max} with max off-diagonal {off:.3e} > {tol:.1e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    if not np.all(np.isfinite(H)):
        raise NumericalError("non-finite entries in the rotated Hamiltonian", steps=len(steps))

    return KamResult(
        U=U,
        final_diagonal=np.diag(H).copy(),
        steps=steps,
        fully_resonant_flag=fully_resonant,
        converged=converged,
        max_offdiag=off,
        blocks=blocks,
        resonant_sets=sorted(history, key=lambda s: (min(s), sorted(s))),
        config=config,
    )
