"""Geometric length-scale schedule ``L_k = growth**k`` and its integer bands."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ..exceptions import ConfigError

__all__ = ["PAPER_GROWTH", "Band", "ScaleSchedule", "scale_bands"]

PAPER_GROWTH = 15 / 8


@dataclass(frozen=True)
class Band:
    k: int
    lower: float
    upper: float
    members: range

    def __contains__(self, m) -> bool:
        return m in self.members


@dataclass(frozen=True)
class ScaleSchedule:
    """Bands ``k = 0..k_max``; band ``k`` holds the integers in ``[L_k, L_{k+1})``.

    Powers are evaluated exactly on the rational value of ``growth`` so band
    edges never depend on floating-point rounding.
    """

    growth: float
    bands: tuple[Band, ...]

    def _ratio(self) -> Fraction:
        return Fraction(self.growth)

    def length(self, k: int) -> float:
        return float(self._ratio() ** k)

    def band_of(self, m: int) -> int:
        if m < 1:
            raise ValueError("band membership is defined for integers m >= 1")
        g = self._ratio()
        k = 0
        while g ** (k + 1) <= m:
            k += 1
        return k

    def below(self, k: int) -> range:
        """All integers ``1 <= m < L_{k+1}``: the union of bands ``0..k``."""
        return range(1, math.ceil(self._ratio() ** (k + 1)))

    def activation_step(self, diameter: int) -> int:
        """First step ``k`` with ``L_k >= diameter``."""
        g = self._ratio()
        k = 0
        while g**k < diameter:
            k += 1
        return k


def _band(g: Fraction, k: int) -> Band:
    lo, hi = g**k, g ** (k + 1)
    return Band(k, float(lo), float(hi), range(math.ceil(lo), math.ceil(hi)))


def scale_bands(growth: float = PAPER_GROWTH, k_max: int = 40) -> ScaleSchedule:
    if not growth > 1:
        raise ConfigError(f"growth must exceed 1, got {growth}")
    if k_max < 0:
        raise ConfigError("k_max must be >= 0")
    g = Fraction(growth)
    return ScaleSchedule(float(growth), tuple(_band(g, k) for k in range(k_max + 1)))
