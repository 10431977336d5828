"""Eigenstate diagnostics: magnetizations, connected correlations, l-bits and
their Pauli-string locality."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .exceptions import ConfigError, DimensionError
from .model import ChainGeometry
from .oracle import PAULI, SX, SZ, kron_operator, sz_diagonal
from .validation import check_orthogonal

__all__ = [
    "PAULI_LABELS",
    "PAULI_MAX_N",
    "PauliDecomposition",
    "WeightProfile",
    "Gibbs",
    "pauli_decompose",
    "liom",
    "locality_profile",
    "fit_decay_ratio",
    "eigenstate_expectation_all",
    "truncated_correlation",
    "truncated_correlation_diag",
    "state_average",
    "abs_magnetization",
    "local_operators",
    "weights_from_config",
]

PAULI_LABELS = "IXYZ"
PAULI_MAX_N = 8
_PAULI_STACK = np.stack([PAULI[c] for c in PAULI_LABELS])  # (4, 2, 2)


@dataclass(frozen=True, eq=False)
class PauliDecomposition:
    """Coefficients ``c_P = Tr(P op) / 2**n`` stored as an array of shape ``(4,)*n``
    indexed by I, X, Y, Z per site (leftmost site first)."""

    coefficients: np.ndarray
    geometry: ChainGeometry

    def __getitem__(self, label: str):
        if len(label) != self.geometry.n:
            raise KeyError(label)
        return self.coefficients[tuple(PAULI_LABELS.index(c) for c in label)]

    def items(self, threshold: float = 0.0) -> Iterator[tuple[str, complex]]:
        for idx in zip(*np.nonzero(np.abs(self.coefficients) > threshold)):
            yield "".join(PAULI_LABELS[i] for i in idx), self.coefficients[idx]

    def as_dict(self, threshold: float = 1e-14) -> dict[str, complex]:
        return dict(self.items(threshold))

    @property
    def total_weight(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def reconstruct(self) -> np.ndarray:
        n = self.geometry.n
        operands = []
        for p in range(n):
            operands += [_PAULI_STACK, [p, n + p, 2 * n + p]]
        operands += [self.coefficients, list(range(n))]
        out = np.einsum(*operands, list(range(n, 3 * n)), optimize=True)
        out = out.reshape(self.geometry.dim, self.geometry.dim)
        return out.real if not np.any(np.abs(out.imag) > 0) else out


def pauli_decompose(op, geometry: ChainGeometry, max_n: int = PAULI_MAX_N) -> PauliDecomposition:
    n = geometry.n
    if n > max_n:
        raise DimensionError(f"Pauli decomposition is capped at n={max_n}, got n={n}")
    op = np.asarray(op)
    if op.shape != (geometry.dim, geometry.dim):
        raise DimensionError(f"operator shape {op.shape} does not match dimension {geometry.dim}")
    # c[q] = sum_{a,b} prod_p P^{q_p}[b_p, a_p] op[a, b] / 2^n
    operands = []
    for p in range(n):
        operands += [_PAULI_STACK, [2 * n + p, n + p, p]]
    operands += [op.reshape((2,) * (2 * n)), list(range(2 * n))]
    coeffs = np.einsum(*operands, list(range(2 * n, 3 * n)), optimize=True) / geometry.dim
    if np.iscomplexobj(coeffs) and np.max(np.abs(coeffs.imag), initial=0.0) <= 1e-15 * max(1.0, np.abs(coeffs).max()):
        coeffs = coeffs.real.copy()
    return PauliDecomposition(coeffs, geometry)


@dataclass(frozen=True, eq=False)
class WeightProfile:
    """``weights[r]``: squared Pauli weight on strings reaching beyond ``[center - r, center + r]``."""

    center: int
    weights: np.ndarray

    def to_dict(self) -> dict:
        return {"center": self.center, "weights": self.weights.tolist()}


def locality_profile(op, center: int, geometry: ChainGeometry) -> WeightProfile:
    decomp = op if isinstance(op, PauliDecomposition) else pauli_decompose(op, geometry)
    w2 = np.abs(decomp.coefficients) ** 2
    c = geometry.position(center)
    n = geometry.n
    # reach[q] = largest |p - c| over sites carrying a non-identity factor
    reach = np.full(w2.shape, -1)
    for p in range(n):
        shape = [1] * n
        shape[p] = 4
        site_reach = np.where(np.arange(4) > 0, abs(p - c), -1).reshape(shape)
        reach = np.maximum(reach, site_reach)
    weights = np.array([w2[reach > r].sum() for r in range(n + 1)])
    return WeightProfile(center, weights)


def fit_decay_ratio(profile: WeightProfile, floor: float = 1e-24) -> float:
    """Per-site decay ratio ``q`` from a least-squares fit ``w(r) ~ A q**r``.

    Only radii with ``w(r) > floor`` enter the fit; an operator with no weight
    beyond the first retained radius has ``q = 0``.
    """
    w = profile.weights
    r = np.nonzero(w > floor)[0]
    if r.size == 0:
        return 0.0
    if r.size == 1:
        return 0.0 if r[0] + 1 < w.size else 1.0
    slope = np.polyfit(r.astype(float), np.log(w[r]), 1)[0]
    return float(np.exp(slope))


def liom(U, site: int, geometry: ChainGeometry) -> np.ndarray:
    """l-bit ``tau^z_site = U S^z_site U^T``; commutes with ``H`` when ``U^T H U`` is diagonal."""
    U = check_orthogonal(U)
    if U.shape[0] != geometry.dim:
        raise DimensionError("unitary does not match the chain dimension")
    tau = (U * sz_diagonal(geometry, site)) @ U.T
    return 0.5 * (tau + tau.T)


def eigenstate_expectation_all(U, op) -> np.ndarray:
    """``diag(U^T op U)``; ``op`` may be a matrix or the diagonal of a diagonal one."""
    U = np.asarray(U)
    op = np.asarray(op)
    if op.ndim == 1:
        if op.shape[0] != U.shape[0]:
            raise DimensionError("operator diagonal does not match U")
        return (U * U).T @ op
    if op.shape != (U.shape[0], U.shape[0]):
        raise DimensionError(f"operator shape {op.shape} does not match U")
    return np.real(np.sum(U.conj() * (op @ U), axis=0))


def truncated_correlation(U, op_i, op_j, alpha: int) -> float:
    """``<O_i O_j>_alpha - <O_i>_alpha <O_j>_alpha`` in column ``alpha`` of ``U``."""
    U = np.asarray(U)
    v = U[:, alpha]
    a = np.asarray(op_i)
    b = np.asarray(op_j)
    av = a * v if a.ndim == 1 else a @ v
    bv = b * v if b.ndim == 1 else b @ v
    joint = float(np.real(np.vdot(v, a * bv if a.ndim == 1 else a @ bv)))
    return joint - float(np.real(np.vdot(v, av))) * float(np.real(np.vdot(v, bv)))


def truncated_correlation_diag(U, zi: np.ndarray, zj: np.ndarray) -> np.ndarray:
    """Connected correlator of two diagonal operators in every column of ``U``.

    Evaluated as a covariance under ``p_alpha(sigma) = U[sigma, alpha]**2``
    about the means, so values far below 1 do not drown in cancellation.
    """
    P = np.asarray(U) ** 2
    mi = zi @ P
    mj = zj @ P
    return np.einsum("sa,sa,sa->a", P, zi[:, None] - mi[None, :], zj[:, None] - mj[None, :])


@dataclass(frozen=True)
class Gibbs:
    beta: float
    energies: np.ndarray


def _weights(spec, size: int) -> np.ndarray:
    if spec is None or (isinstance(spec, str) and spec == "uniform"):
        return np.full(size, 1.0 / size)
    if isinstance(spec, Gibbs):
        E = np.asarray(spec.energies, dtype=float)
        if E.shape != (size,):
            raise DimensionError("Gibbs energies must match the number of states")
        if math.isinf(spec.beta):
            w = np.zeros(size)
            w[np.argmin(E) if spec.beta > 0 else np.argmax(E)] = 1.0
            return w
        x = -spec.beta * E
        w = np.exp(x - x.max())
        return w / w.sum()
    w = np.asarray(spec, dtype=float)
    if w.shape != (size,) or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("explicit weights must be nonnegative with a positive sum")
    return w / w.sum()


def state_average(values, weights="uniform") -> float:
    """Normalised average over eigenstates: ``"uniform"``, :class:`Gibbs`, or explicit weights."""
    values = np.asarray(values, dtype=float)
    return float(_weights(weights, values.size) @ values)


def abs_magnetization(U, geometry: ChainGeometry, site: int = 0, weights="uniform") -> float:
    """``Av_alpha |<S^z_site>_alpha|``."""
    m = eigenstate_expectation_all(U, sz_diagonal(geometry, site))
    return state_average(np.abs(m), weights)


def local_operators(site: int, geometry: ChainGeometry, radius: int = 1) -> Iterator[tuple[str, np.ndarray]]:
    """Every non-identity product of ``S^x`` / ``S^z`` on sites within ``radius``."""
    lo = max(-geometry.left_end, site - radius)
    hi = min(geometry.right_end, site + radius)
    sites = list(range(lo, hi + 1))
    single = {"I": None, "X": SX, "Z": SZ}
    for labels in itertools.product("IXZ", repeat=len(sites)):
        if set(labels) == {"I"}:
            continue
        ops = [(s, single[c]) for s, c in zip(sites, labels) if c != "I"]
        yield "".join(labels), kron_operator(ops, geometry)


def weights_from_config(spec: Mapping | str | None, energies=None):
    """Parse a config weights entry (``"uniform"`` or ``{"gibbs": beta}``)."""
    if spec is None or spec == "uniform":
        return "uniform"
    if isinstance(spec, Mapping) and "gibbs" in spec:
        if energies is None:
            raise ValueError("Gibbs weights need energies")
        try:
            beta = float(spec["gibbs"])
        except (TypeError, ValueError):
            raise ConfigError(f"Gibbs beta must be a number, got {spec['gibbs']!r}") from None
        return Gibbs(beta, energies)
    raise ConfigError(f"unknown weights spec {spec!r}")
