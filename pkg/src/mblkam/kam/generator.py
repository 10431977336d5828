"""Selection of off-diagonal terms and the antisymmetric generator that removes
them to first order."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..exceptions import NumericalError
from .linalg import hamming_matrix

__all__ = [
    "GeneratorMatrix",
    "effective_orders",
    "offdiagonal_band",
    "build_generator",
]


@dataclass(eq=False)
class GeneratorMatrix:
    A: np.ndarray
    resonant_pairs: list[tuple[int, int]] = field(default_factory=list)
    n_candidates: int = 0
    n_dropped: int = 0

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.A))


def _n_from_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"matrix dimension {dim} is not a power of two")
    return n


def effective_orders(Hk: np.ndarray, gamma: float) -> np.ndarray:
    """Order ``m`` of each entry: ``max(Hamming distance, floor(log|H| / log gamma))``.

    An entry of size ``gamma**m`` counts as order ``m`` even when it connects
    configurations fewer than ``m`` flips apart, which is how re-generated
    low-distance terms of high order are recognised.  For ``gamma`` outside
    ``(0, 1)`` the Hamming distance alone is used.
    """
    ham = hamming_matrix(_n_from_dim(Hk.shape[0])).astype(np.int64)
    if not 0.0 < gamma < 1.0:
        return ham
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.floor(np.log(np.abs(Hk)) / np.log(gamma))
    mag = np.nan_to_num(mag, nan=0.0, posinf=np.iinfo(np.int32).max, neginf=0.0)
    return np.maximum(ham, mag.astype(np.int64))


def _band_mask(orders: np.ndarray, band: Iterable[int]) -> np.ndarray:
    if isinstance(band, range) and band.step == 1:
        return (orders >= band.start) & (orders < band.stop)
    members = np.fromiter(sorted(set(band)), dtype=np.int64)
    if members.size == 0:
        return np.zeros(orders.shape, dtype=bool)
    lo, hi = members[0], members[-1]
    if members.size == hi - lo + 1:
        return (orders >= lo) & (orders <= hi)
    return np.isin(orders, members)


def _select(Hk, band, floor, orders):
    dim = Hk.shape[0]
    if orders is None:
        orders = hamming_matrix(_n_from_dim(dim))
    mask = np.triu(np.abs(Hk) > floor, 1) & _band_mask(orders, band)
    return np.nonzero(mask), orders


def offdiagonal_band(Hk: np.ndarray, band: Iterable[int], floor: float = 0.0, orders: np.ndarray | None = None):
    """Unordered pairs ``(sigma, tau)``, ``sigma < tau``, whose order lies in ``band``
    and whose entry exceeds ``floor`` in magnitude; row-major order.

    The order of a pair is its Hamming distance unless ``orders`` is given.
    """
    if floor < 0:
        raise ValueError("floor must be >= 0")
    (rows, cols), _ = _select(np.asarray(Hk), band, floor, orders)
    return list(zip(rows.tolist(), cols.tolist()))


def build_generator(
    Hk: np.ndarray,
    band: Iterable[int],
    rho: float,
    *,
    orders: np.ndarray | None = None,
    floor: float = 0.0,
    resonance_floor: float = 0.0,
) -> GeneratorMatrix:
    """Generator ``A[s, t] = H[s, t] / (E_s - E_t)`` over the selected pairs.

    A pair of order ``m`` is resonant when the ratio exceeds ``rho**m`` in
    magnitude or the denominator vanishes; resonant pairs stay out of ``A``.
    Pairs whose entry is at most ``resonance_floor`` are too small to matter
    and are dropped instead of being flagged resonant.
    """
    Hk = np.asarray(Hk, dtype=float)
    (rows, cols), orders = _select(Hk, band, floor, orders)
    A = np.zeros_like(Hk)
    if rows.size == 0:
        return GeneratorMatrix(A)

    diag = np.diag(Hk)
    x = Hk[rows, cols]
    denom = diag[rows] - diag[cols]
    bad = ~(np.isfinite(denom) & np.isfinite(x))
    if bad.any():
        i = int(np.argmax(bad))
        raise NumericalError(
            f"non-finite energy denominator for pair ({rows[i]}, {cols[i]})",
            pair=(int(rows[i]), int(cols[i])),
            numerator=float(x[i]),
            denominator=float(denom[i]),
        )

    zero = denom == 0.0
    ratio = np.divide(x, denom, out=np.zeros_like(x), where=~zero)
    m = np.asarray(orders[rows, cols], dtype=float)
    with np.errstate(under="ignore"):
        threshold = float(rho) ** m
    resonant = zero | (np.abs(ratio) > threshold)
    negligible = resonant & (np.abs(x) <= resonance_floor)
    resonant &= ~negligible
    keep = ~(resonant | negligible)

    A[rows[keep], cols[keep]] = ratio[keep]
    A[cols[keep], rows[keep]] = -ratio[keep]
    pairs = list(zip(rows[resonant].tolist(), cols[resonant].tolist()))
    return GeneratorMatrix(A, pairs, int(rows.size), int(negligible.sum()))
