"""Dense exact diagonalization: the ground truth for every engine check."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable

import numpy as np

from .exceptions import DimensionError, NumericalError
from .model import ChainGeometry, max_sites

__all__ = [
    "IDENTITY",
    "SX",
    "SY",
    "SZ",
    "PAULI",
    "Spectrum",
    "check_symmetric",
    "diagonalize",
    "min_level_spacing",
    "eigenstate_expectation",
    "kron_operator",
    "sz_diagonal",
]

IDENTITY = np.eye(2)
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
PAULI = {"I": IDENTITY, "X": SX, "Y": SY, "Z": SZ}


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues; column ``a`` of ``eigenvectors`` pairs with ``eigenvalues[a]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def check_symmetric(H, rtol: float = 1e-12) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise NumericalError("matrix has non-finite entries")
    scale = max(np.abs(H).max(initial=0.0), 1.0)
    asym = np.abs(H - H.T).max(initial=0.0)
    if asym > rtol * scale:
        raise ValueError(f"matrix is not symmetric (max |H - H^T| = {asym:.3e})")
    return H


def diagonalize(H) -> Spectrum:
    H = check_symmetric(H)
    if H.shape[0] > (1 << max_sites()):
        raise DimensionError(f"dimension {H.shape[0]} exceeds 2**{max_sites()}")
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    return Spectrum(w, V)


def min_level_spacing(spectrum) -> float:
    """Smallest gap between adjacent sorted levels."""
    levels = spectrum.eigenvalues if isinstance(spectrum, Spectrum) else np.asarray(spectrum, dtype=float)
    if levels.size < 2:
        raise ValueError("need at least two levels for a spacing")
    return float(np.diff(np.sort(levels)).min())


def eigenstate_expectation(op, spectrum: Spectrum, alpha: int) -> float:
    op = np.asarray(op)
    if op.shape != (spectrum.dim, spectrum.dim):
        raise DimensionError(f"operator shape {op.shape} does not match dimension {spectrum.dim}")
    if not 0 <= alpha < spectrum.dim:
        raise IndexError(f"eigenstate index {alpha} out of range")
    v = spectrum.eigenvectors[:, alpha]
    return float(np.real(v @ op @ v))


def kron_operator(site_ops: Iterable[tuple[int, np.ndarray]], geometry: ChainGeometry) -> np.ndarray:
    """Tensor product of single-site matrices, identity on unlisted sites.

    Sites are chain labels (``-K .. K'``); the leftmost site is the leftmost
    Kronecker factor, matching the basis-label bit order.
    """
    factors = [IDENTITY] * geometry.n
    seen = set()
    for site, mat in site_ops:
        if site in seen:
            raise ValueError(f"site {site} listed twice")
        seen.add(site)
        mat = np.asarray(mat)
        if mat.shape != (2, 2):
            raise DimensionError("single-site operators must be 2x2")
        factors[geometry.position(site)] = mat
    out = reduce(np.kron, factors, np.ones((1, 1)))
    if np.iscomplexobj(out) and not np.any(out.imag):
        out = out.real
    return out


def sz_diagonal(geometry: ChainGeometry, site: int) -> np.ndarray:
    """Diagonal of ``S^z_site`` in the computational basis."""
    bit = geometry.bit(site)
    return 1.0 - 2.0 * ((np.arange(geometry.dim) >> bit) & 1)
