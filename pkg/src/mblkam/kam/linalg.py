"""Matrix helpers for the rotation steps: Hamming distances, the exponential of
an antisymmetric generator, and the similarity transform it induces."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from ..exceptions import NumericalError

__all__ = [
    "hamming_matrix",
    "max_offdiag",
    "ExpmInfo",
    "expm_antisymmetric",
    "rotate",
]

# generators sparser than this go through sparse-times-dense Taylor terms
SPARSE_FILL = 0.05
SPARSE_MIN_DIM = 256


@lru_cache(maxsize=4)
def hamming_matrix(n: int) -> np.ndarray:
    """``(2**n, 2**n)`` array of Hamming distances between basis labels."""
    idx = np.arange(1 << n, dtype=np.uint32)
    out = np.bitwise_count(idx[:, None] ^ idx[None, :]).astype(np.uint8)
    out.setflags(write=False)
    return out


def max_offdiag(H: np.ndarray) -> float:
    if H.shape[0] < 2:
        return 0.0
    absH = np.abs(H)
    np.fill_diagonal(absH, 0.0)
    return float(absH.max())


class ExpmInfo:
    __slots__ = ("terms", "squarings", "norm", "sparse")

    def __init__(self, terms, squarings, norm, sparse):
        self.terms = terms
        self.squarings = squarings
        self.norm = norm
        self.sparse = sparse

    def as_dict(self) -> dict:
        return {"terms": self.terms, "squarings": self.squarings, "norm": self.norm, "sparse": self.sparse}


def _taylor(apply, dim, x, tol, max_terms):
    """Sum ``sum_j X^j / j!`` until the tail bound drops below ``tol``.

    ``apply(M)`` returns ``X @ M``; ``x`` bounds ``||X||_1``.  The tail after
    ``K`` terms is at most ``x^(K+1)/(K+1)! / (1 - x/(K+2))``.
    """
    term = np.eye(dim)
    total = term.copy()
    for j in range(1, max_terms + 1):
        term = apply(term) / j
        total += term
        if x < j + 2:
            tail = x ** (j + 1) / math.factorial(j + 1) / (1.0 - x / (j + 2))
            if tail <= tol:
                return total, j
    raise NumericalError(
        f"exponential series did not reach tol={tol:g} within {max_terms} terms",
        norm=x,
        max_terms=max_terms,
    )


def expm_antisymmetric(A, tol: float = 1e-15, max_terms: int = 200, return_info: bool = False):
    """``exp(A)`` for antisymmetric ``A`` by scaled Taylor series.

    Dense generators are scaled to 1-norm at most 1/2 and squared back; sparse
    ones (few nonzeros relative to ``dim**2``) are summed unscaled with
    sparse-times-dense products, which avoids dense cubic work.
    """
    dim = A.shape[0]
    if sp.issparse(A):
        As = A.tocsr()
        nnz = As.nnz
    else:
        A = np.asarray(A, dtype=float)
        nnz = int(np.count_nonzero(A))
        As = None
    if nnz == 0:
        out = np.eye(dim)
        return (out, ExpmInfo(0, 0, 0.0, False)) if return_info else out

    use_sparse = dim >= SPARSE_MIN_DIM and nnz <= SPARSE_FILL * dim * dim
    if use_sparse:
        if As is None:
            As = sp.csr_matrix(A)
        x = float(abs(As).sum(axis=0).max())
        out, terms = _taylor(lambda M: As @ M, dim, x, tol, max_terms)
        info = ExpmInfo(terms, 0, x, True)
    else:
        Ad = As.toarray() if As is not None else A
        x = float(np.abs(Ad).sum(axis=0).max())
        s = max(0, math.ceil(math.log2(x / 0.5))) if x > 0.5 else 0
        X = Ad / (1 << s)
        out, terms = _taylor(lambda M: X @ M, dim, x / (1 << s), tol / (1 << s), max_terms)
        for _ in range(s):
            out = out @ out
        info = ExpmInfo(terms, s, x, False)
    return (out, info) if return_info else out


def rotate(Hk: np.ndarray, A, tol: float = 1e-15, max_terms: int = 200, return_rotation: bool = False):
    """Similarity transform ``exp(A) @ Hk @ exp(-A)``.

    With ``return_rotation`` the tuple ``(H_next, R, info)`` is returned, where
    ``R = exp(A)`` so that ``H_next = R Hk R^T``.
    """
    gen = getattr(A, "A", A)
    R, info = expm_antisymmetric(gen, tol=tol, max_terms=max_terms, return_info=True)
    if info.terms == 0:
        H_next = np.array(Hk, dtype=float, copy=True)
    else:
        H_next = R @ Hk @ R.T
        H_next = 0.5 * (H_next + H_next.T)
    if return_rotation:
        return H_next, R, info
    return H_next
