"""Input validation shared by the estimators and the command line."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionError
from .model import ChainGeometry, max_sites
from .oracle import check_symmetric

__all__ = ["check_hamiltonian", "check_operator", "check_orthogonal", "check_gaps", "geometry_for"]


def check_hamiltonian(H, geometry: ChainGeometry | None = None) -> np.ndarray:
    """Finite, symmetric, ``2**n`` square, and within the dimension cap."""
    H = check_array(H, dtype=np.float64, ensure_2d=True, ensure_min_samples=1, ensure_min_features=1)
    H = check_symmetric(H)
    geometry_for(H.shape[0], geometry)
    return H


def geometry_for(dim: int, geometry: ChainGeometry | None = None) -> ChainGeometry:
    n = int(dim).bit_length() - 1
    if dim != 1 << n:
        raise DimensionError(f"dimension {dim} is not a power of two")
    if n > max_sites():
        raise DimensionError(f"n={n} exceeds the dense cap of {max_sites()} sites")
    if geometry is None:
        return ChainGeometry.from_n(n)
    if geometry.n != n:
        raise DimensionError(f"geometry has {geometry.n} sites but the matrix has dimension {dim}")
    return geometry


def check_operator(op, dim: int) -> np.ndarray:
    """Square operator of size ``dim``, or the diagonal of one."""
    op = np.asarray(op)
    if op.ndim == 1 and op.shape[0] == dim:
        return op
    if op.shape != (dim, dim):
        raise DimensionError(f"operator shape {op.shape} does not match dimension {dim}")
    if not np.all(np.isfinite(op)):
        raise ValueError("operator has non-finite entries")
    return op


def check_orthogonal(U, atol: float = 1e-8) -> np.ndarray:
    U = check_array(U, dtype=np.float64)
    if U.shape[0] != U.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {U.shape}")
    err = np.abs(U.T @ U - np.eye(U.shape[0])).max()
    if err > atol:
        raise ValueError(f"matrix is not orthogonal (max |U^T U - I| = {err:.2e})")
    return U


def check_gaps(X) -> np.ndarray:
    """Minimum-gap samples as a flat nonnegative array (a single column is accepted)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    X = check_array(X, ensure_2d=False)
    if X.ndim != 1:
        raise ValueError("expected a one-dimensional array of gaps")
    if np.any(X < 0):
        raise ValueError("gaps must be nonnegative")
    return X
