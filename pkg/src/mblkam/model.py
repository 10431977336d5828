"""Random-field, random transverse-field, random-exchange Ising chain.

The chain lives on sites ``-K .. K'``; spins just outside the interval are
frozen to +1.  Basis states are labelled by integers whose most significant
bit is site ``-K``; a 0 bit is spin up (+1) and a 1 bit is spin down (-1).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .exceptions import ConfigError, DimensionError

__all__ = [
    "DEFAULT_MAX_N",
    "PAPER_EPS_EXPONENT",
    "ChainGeometry",
    "Distribution",
    "DistributionSpec",
    "DisorderRealization",
    "all_spins",
    "spins_from_index",
    "index_from_spins",
    "max_sites",
    "sample_disorder",
    "classical_energy",
    "classical_energies",
    "single_flip_delta",
    "flip_delta",
    "resonance_threshold",
    "resonant_mask",
    "is_resonant_site",
    "build_hamiltonian",
]

DEFAULT_MAX_N = 14
PAPER_EPS_EXPONENT = 1.0 / 20.0


def max_sites() -> int:
    """Dense-representation cap on the chain length (env ``MBLKAM_MAX_N``)."""
    raw = os.environ.get("MBLKAM_MAX_N")
    if raw is None:
        return DEFAULT_MAX_N
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"MBLKAM_MAX_N must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError("MBLKAM_MAX_N must be >= 1")
    return value


@dataclass(frozen=True)
class ChainGeometry:
    """Interval ``[-left_end, right_end]`` of the integer lattice."""

    left_end: int = 0
    right_end: int = 0

    def __post_init__(self):
        if int(self.left_end) != self.left_end or int(self.right_end) != self.right_end:
            raise ConfigError("chain ends must be integers")
        if self.left_end < 0 or self.right_end < 0:
            raise ConfigError("chain ends must be >= 0")

    @classmethod
    def from_n(cls, n: int) -> "ChainGeometry":
        """Chain of ``n`` sites with the origin at (or just left of) the middle."""
        if n < 1:
            raise ConfigError("a chain needs at least one site")
        left = (n - 1) // 2
        return cls(left, n - 1 - left)

    @property
    def n(self) -> int:
        return self.left_end + self.right_end + 1

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def sites(self) -> range:
        return range(-self.left_end, self.right_end + 1)

    def position(self, site: int) -> int:
        """Array position (0 = leftmost) of a site label."""
        if not -self.left_end <= site <= self.right_end:
            raise IndexError(f"site {site} outside [{-self.left_end}, {self.right_end}]")
        return site + self.left_end

    def site(self, position: int) -> int:
        if not 0 <= position < self.n:
            raise IndexError(f"position {position} outside chain of {self.n} sites")
        return position - self.left_end

    def bit(self, site: int) -> int:
        """Bit index of ``site`` inside a basis label."""
        return self.n - 1 - self.position(site)


def all_spins(n: int) -> np.ndarray:
    """All ``2**n`` configurations as a ``(2**n, n)`` array of +-1."""
    idx = np.arange(1 << n)[:, None]
    shifts = np.arange(n - 1, -1, -1)[None, :]
    return 1 - 2 * ((idx >> shifts) & 1).astype(np.int8)


def spins_from_index(index: int, n: int) -> np.ndarray:
    if not 0 <= index < (1 << n):
        raise IndexError(f"basis index {index} out of range for n={n}")
    return np.array([1 - 2 * ((index >> (n - 1 - p)) & 1) for p in range(n)], dtype=np.int8)


def index_from_spins(spins: Sequence[int]) -> int:
    index = 0
    for s in spins:
        if s not in (1, -1):
            raise ValueError(f"spin values must be +1 or -1, got {s}")
        index = (index << 1) | (1 if s == -1 else 0)
    return index


@dataclass(frozen=True)
class Distribution:
    """Bounded distribution of a single coupling family.

    ``kind`` is ``"uniform"`` (on ``[low, high]``, ``low < high``) or
    ``"constant"`` (point mass at ``low``).
    """

    kind: str = "uniform"
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "constant"):
            raise ConfigError(f"unknown distribution kind {self.kind!r}")
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ConfigError("distribution bounds must be finite")
        if self.kind == "uniform" and not self.low < self.high:
            raise ConfigError(f"uniform distribution needs low < high, got [{self.low}, {self.high}]")

    @classmethod
    def constant(cls, value: float) -> "Distribution":
        return cls("constant", float(value), float(value))

    @classmethod
    def parse(cls, obj: Any) -> "Distribution":
        """Build from a config value: a number, a ``[low, high]`` pair, or a mapping."""
        if isinstance(obj, Distribution):
            return obj
        if isinstance(obj, (int, float)) and not isinstance(obj, bool):
            return cls.constant(obj)
        if isinstance(obj, (list, tuple)) and len(obj) == 2:
            return cls("uniform", float(obj[0]), float(obj[1]))
        if isinstance(obj, Mapping):
            kind = obj.get("kind", "uniform")
            if kind == "constant":
                return cls.constant(obj["value"])
            return cls(kind, float(obj.get("low", -1.0)), float(obj.get("high", 1.0)))
        raise ConfigError(f"cannot interpret {obj!r} as a distribution")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(size, self.low)
        return rng.uniform(self.low, self.high, size)

    @property
    def density_bound(self) -> float:
        return math.inf if self.kind == "constant" else 1.0 / (self.high - self.low)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.low}
        return {"kind": self.kind, "low": self.low, "high": self.high}


@dataclass(frozen=True)
class DistributionSpec:
    h: Distribution = field(default_factory=Distribution)
    Gamma: Distribution = field(default_factory=Distribution)
    J: Distribution = field(default_factory=Distribution)
    gamma: float = 0.01

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ConfigError(f"gamma must be finite and >= 0, got {self.gamma}")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DistributionSpec":
        unknown = set(d) - {"h", "Gamma", "J", "gamma"}
        if unknown:
            raise ConfigError(f"unknown distribution keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {k: Distribution.parse(d[k]) for k in ("h", "Gamma", "J") if k in d}
        if "gamma" in d:
            kwargs["gamma"] = float(d["gamma"])
        return cls(**kwargs)

    def with_gamma(self, gamma: float) -> "DistributionSpec":
        return DistributionSpec(self.h, self.Gamma, self.J, float(gamma))

    def to_dict(self) -> dict:
        return {
            "h": self.h.to_dict(),
            "Gamma": self.Gamma.to_dict(),
            "J": self.J.to_dict(),
            "gamma": self.gamma,
        }


def _frozen(values, size, name) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise DimensionError(f"{name} must have {size} entries, got {arr.shape[0]}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    """One disorder sample: fields ``h``, transverse amplitudes ``Gamma``,
    exchanges ``J`` on bonds ``-K-1 .. K'`` (``n + 1`` entries), and ``gamma``."""

    h: np.ndarray
    Gamma: np.ndarray
    J: np.ndarray
    gamma: float
    geometry: ChainGeometry | None = None

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).reshape(-1)
        geometry = self.geometry or ChainGeometry.from_n(h.size)
        n = geometry.n
        object.__setattr__(self, "geometry", geometry)
        object.__setattr__(self, "h", _frozen(h, n, "h"))
        object.__setattr__(self, "Gamma", _frozen(self.Gamma, n, "Gamma"))
        object.__setattr__(self, "J", _frozen(self.J, n + 1, "J"))
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")

    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def transverse(self) -> np.ndarray:
        """Transverse couplings ``gamma * Gamma_i``."""
        return self.gamma * self.Gamma

    def to_dict(self) -> dict:
        return {
            "left_end": self.geometry.left_end,
            "right_end": self.geometry.right_end,
            "h": self.h.tolist(),
            "Gamma": self.Gamma.tolist(),
            "J": self.J.tolist(),
            "gamma": self.gamma,
        }


def sample_disorder(dist: DistributionSpec, geometry: ChainGeometry, seed: int) -> DisorderRealization:
    """Draw ``h``, ``Gamma`` then ``J`` from a generator seeded by ``seed``."""
    if not isinstance(dist, DistributionSpec):
        raise ConfigError("dist must be a DistributionSpec")
    rng = np.random.default_rng(seed)
    n = geometry.n
    h = dist.h.sample(rng, n)
    gam = dist.Gamma.sample(rng, n)
    J = dist.J.sample(rng, n + 1)
    return DisorderRealization(h, gam, J, dist.gamma, geometry)


def _as_spins(sigma, n: int) -> np.ndarray:
    if isinstance(sigma, (int, np.integer)):
        return spins_from_index(int(sigma), n)
    spins = np.asarray(sigma)
    if spins.shape != (n,):
        raise DimensionError(f"spin configuration must have {n} entries, got shape {spins.shape}")
    if not np.all(np.abs(spins) == 1):
        raise ValueError("spin values must be +1 or -1")
    return spins


def classical_energies(real: DisorderRealization, spins: np.ndarray | None = None) -> np.ndarray:
    """Diagonal energies for a stack of configurations (all of them by default)."""
    if spins is None:
        spins = all_spins(real.n)
    spins = np.atleast_2d(spins).astype(float)
    ones = np.ones((spins.shape[0], 1))
    padded = np.hstack([ones, spins, ones])
    bonds = padded[:, :-1] * padded[:, 1:]
    return spins @ real.h + bonds @ real.J


def classical_energy(real: DisorderRealization, sigma) -> float:
    """Energy of one configuration (``+-1`` array or basis index)."""
    spins = _as_spins(sigma, real.n)
    return float(classical_energies(real, spins[None, :])[0])


def flip_delta(h, j_right, j_left, s, s_right, s_left):
    """``2 s (h + J_i s_{i+1} + J_{i-1} s_{i-1})``, broadcasting over arrays."""
    return 2.0 * s * (h + j_right * s_right + j_left * s_left)


def single_flip_delta(real: DisorderRealization, sigma, site: int) -> float:
    """Energy change ``E(sigma) - E(sigma with site flipped)``."""
    geometry = real.geometry
    p = geometry.position(site)
    spins = _as_spins(sigma, real.n)
    padded = np.concatenate([[1], spins, [1]])
    # bond array index b couples positions b-1 and b
    return float(flip_delta(real.h[p], real.J[p + 1], real.J[p], padded[p + 1], padded[p + 2], padded[p]))


def resonance_threshold(gamma: float, exponent: float = PAPER_EPS_EXPONENT) -> float:
    """``eps = gamma ** exponent``."""
    if gamma < 0:
        raise ConfigError("gamma must be >= 0")
    return float(gamma) ** exponent


def resonant_mask(h, j_right, j_left, eps: float) -> np.ndarray:
    """Vectorised resonance test over the four neighbour configurations."""
    h, j_right, j_left = np.broadcast_arrays(*map(np.asarray, (h, j_right, j_left)))
    out = np.zeros(h.shape, dtype=bool)
    for s_left in (-1.0, 1.0):
        for s_right in (-1.0, 1.0):
            out |= np.abs(flip_delta(h, j_right, j_left, 1.0, s_right, s_left)) < eps
    return out


def is_resonant_site(
    real: DisorderRealization,
    site: int,
    eps: float | None = None,
    exponent: float = PAPER_EPS_EXPONENT,
) -> bool:
    """True when some neighbour configuration puts the single-flip energy below ``eps``."""
    if eps is None:
        eps = resonance_threshold(real.gamma, exponent)
    p = real.geometry.position(site)
    return bool(resonant_mask(real.h[p], real.J[p + 1], real.J[p], eps))


def build_hamiltonian(
    real: DisorderRealization,
    geometry: ChainGeometry | None = None,
    max_n: int | None = None,
) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of the chain Hamiltonian."""
    geometry = geometry or real.geometry
    if geometry.n != real.n:
        raise DimensionError(f"geometry has {geometry.n} sites, realization has {real.n}")
    cap = max_sites() if max_n is None else max_n
    if geometry.n > cap:
        raise DimensionError(f"n={geometry.n} exceeds the dense cap n={cap} (set MBLKAM_MAX_N to raise it)")
    dim = geometry.dim
    H = np.diag(classical_energies(real))
    idx = np.arange(dim)
    for p, coupling in enumerate(real.transverse):
        H[idx, idx ^ (1 << (geometry.n - 1 - p))] = coupling
    return H
