"""Run configuration: TOML file, command-line overrides, and a full echo for replay."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import tomli

from .ensemble import STATISTICS, EnsembleConfig
from .exceptions import ConfigError
from .kam import KamConfig
from .kam.schedule import PAPER_GROWTH
from .model import PAPER_EPS_EXPONENT, ChainGeometry, DistributionSpec
from .observables import weights_from_config

__all__ = ["RunConfig", "load_config"]

DEFAULT_N = 8


def _gammas(value) -> tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        out = tuple(float(v) for v in value)
    else:
        out = (float(value),)
    if not out:
        raise ConfigError("gamma list is empty")
    for g in out:
        if not (math.isfinite(g) and g >= 0):
            raise ConfigError(f"gamma must be finite and >= 0, got {g}")
    return out


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run.  ``gamma`` may hold several couplings for sweeps;
    single-realization commands use the first."""

    n: int | None = None
    left_end: int | None = None
    right_end: int | None = None
    gamma: tuple[float, ...] = (0.01,)
    distribution: DistributionSpec = field(default_factory=DistributionSpec)
    eps_exponent: float = PAPER_EPS_EXPONENT
    growth: float = PAPER_GROWTH
    rho: float | None = None
    tol_offdiag: float = 1e-12
    k_max: int = 40
    block_constant: float = 1.0
    realizations: int = 100
    seed: int = 0
    workers: int = 1
    weights: Any = "uniform"
    method: str = "both"
    distances: tuple[int, ...] = ()
    site: int = 0
    radius: int = 1
    statistics: tuple[str, ...] = STATISTICS
    resonance_eps: tuple[float, ...] = ()
    fractional_s: float | None = None
    mc_samples: int = 10**6

    def __post_init__(self):
        object.__setattr__(self, "gamma", _gammas(self.gamma))
        object.__setattr__(self, "distances", tuple(int(d) for d in self.distances))
        object.__setattr__(self, "statistics", tuple(self.statistics))
        object.__setattr__(self, "resonance_eps", tuple(float(e) for e in self.resonance_eps))
        if not isinstance(self.distribution, DistributionSpec):
            object.__setattr__(self, "distribution", DistributionSpec.from_dict(self.distribution))
        for name in ("realizations", "workers", "mc_samples"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.radius < 0:
            raise ConfigError("radius must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.fractional_s is not None and not 0 <= self.fractional_s < 1:
            raise ConfigError("fractional_s must lie in [0, 1)")
        for e in self.resonance_eps:
            if not 0 < e < 1:
                raise ConfigError(f"resonance eps must lie in (0, 1), got {e}")
        geometry = self.geometry
        if self.site not in geometry.sites:
            raise ConfigError(f"site {self.site} is outside the chain")
        weights_from_config(self.weights, energies=[0.0])
        self.kam_config()

    @property
    def geometry(self) -> ChainGeometry:
        ends = (self.left_end, self.right_end)
        if ends == (None, None):
            return ChainGeometry.from_n(DEFAULT_N if self.n is None else self.n)
        if None in ends:
            raise ConfigError("left_end and right_end must be given together")
        geometry = ChainGeometry(self.left_end, self.right_end)
        if self.n is not None and self.n != geometry.n:
            raise ConfigError(f"n={self.n} disagrees with the chain ends ({geometry.n} sites)")
        return geometry

    def kam_config(self, gamma: float | None = None) -> KamConfig:
        return KamConfig(
            gamma=self.gamma[0] if gamma is None else gamma,
            eps_exponent=self.eps_exponent,
            rho=self.rho,
            growth=self.growth,
            tol_offdiag=self.tol_offdiag,
            k_max=self.k_max,
            block_constant=self.block_constant,
        )

    def ensemble_config(self, **changes) -> EnsembleConfig:
        geometry = self.geometry
        kw = dict(
            n=geometry.n,
            left_end=geometry.left_end,
            distribution=self.distribution,
            gammas=self.gamma,
            eps_exponent=self.eps_exponent,
            realizations=self.realizations,
            master_seed=self.seed,
            workers=self.workers,
            statistics=self.statistics,
            weights=self.weights,
            distances=self.distances,
            method=self.method,
            magnetization_site=self.site,
            kam={
                "rho": self.rho,
                "growth": self.growth,
                "tol_offdiag": self.tol_offdiag,
                "k_max": self.k_max,
                "block_constant": self.block_constant,
            },
        )
        kw.update(changes)
        return EnsembleConfig(**kw)

    def override(self, **values) -> "RunConfig":
        """Replace the fields given with non-``None`` values (command-line flags)."""
        changes = {k: v for k, v in values.items() if v is not None}
        if "n" in changes:
            changes.setdefault("left_end", None)
            changes.setdefault("right_end", None)
        return replace(self, **changes)

    @classmethod
    def from_mapping(cls, d: Mapping[str, Any]) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kw = dict(d)
        if "distribution" in kw:
            kw["distribution"] = DistributionSpec.from_dict(kw["distribution"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        geometry = self.geometry
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out.update(
            n=geometry.n,
            left_end=geometry.left_end,
            right_end=geometry.right_end,
            gamma=list(self.gamma),
            distribution=self.distribution.to_dict(),
            distances=list(self.distances),
            statistics=list(self.statistics),
            resonance_eps=list(self.resonance_eps),
        )
        return out


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return RunConfig.from_mapping(data)
