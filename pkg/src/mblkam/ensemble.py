"""Disorder-ensemble Monte Carlo with deterministic parallel execution.

Each realization is driven by a seed derived from ``(master_seed, index)``
alone, so results do not depend on the worker count or on how many other
realizations are run.  The same seeds are reused for every ``gamma`` in a
sweep, which makes differences between couplings paired comparisons.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .exceptions import ConfigError, ConvergenceWarning, MblkamError
from .kam import KamConfig, diagonalize_kam
from .model import (
    PAPER_EPS_EXPONENT,
    ChainGeometry,
    DisorderRealization,
    DistributionSpec,
    build_hamiltonian,
    flip_delta,
    resonance_threshold,
    resonant_mask,
    sample_disorder,
)
from .observables import abs_magnetization, truncated_correlation_diag, weights_from_config
from .oracle import diagonalize, sz_diagonal

__all__ = [
    "STATISTICS",
    "EnsembleConfig",
    "EnsembleResults",
    "LlaFit",
    "realization_seed",
    "process_realization",
    "run_ensemble",
    "lla_fit",
    "resonance_density",
    "fractional_moment",
    "correlation_decay_profile",
    "block_connectivity",
    "centered_pair",
    "paired_difference",
]

logger = logging.getLogger(__name__)

STATISTICS = ("min_gap", "resonant_sites", "magnetization", "correlations", "blocks")
_METHODS = ("kam", "oracle", "both")
_KAM_KEYS = ("rho", "growth", "tol_offdiag", "k_max", "block_constant", "floor", "expm_tol", "max_terms")


def realization_seed(master_seed: int, index: int) -> int:
    """64-bit seed for realization ``index``; independent of every other index."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def centered_pair(d: int, geometry: ChainGeometry) -> tuple[int, int]:
    """Sites ``(i, i + d)`` placed as symmetrically about site 0 as the chain allows."""
    if d < 0 or d >= geometry.n:
        raise ConfigError(f"distance {d} does not fit in a chain of {geometry.n} sites")
    i = -(d // 2)
    i = max(i, -geometry.left_end)
    i = min(i, geometry.right_end - d)
    return i, i + d


@dataclass(frozen=True)
class EnsembleConfig:
    n: int
    distribution: DistributionSpec = field(default_factory=DistributionSpec)
    gammas: tuple[float, ...] = (0.01,)
    eps_exponent: float = PAPER_EPS_EXPONENT
    realizations: int = 100
    master_seed: int = 0
    workers: int = 1
    statistics: tuple[str, ...] = STATISTICS
    weights: Any = "uniform"
    distances: tuple[int, ...] = ()
    method: str = "both"
    magnetization_site: int = 0
    kam: Mapping[str, Any] = field(default_factory=dict)
    left_end: int | None = None

    def __post_init__(self):
        gammas = self.gammas
        if isinstance(gammas, (int, float)):
            gammas = (gammas,)
        object.__setattr__(self, "gammas", tuple(float(g) for g in gammas))
        object.__setattr__(self, "statistics", tuple(self.statistics))
        object.__setattr__(self, "kam", dict(self.kam))
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.left_end is not None and not 0 <= self.left_end < self.n:
            raise ConfigError(f"left_end must lie in [0, n), got {self.left_end}")
        if not self.gammas:
            raise ConfigError("at least one gamma is required")
        for g in self.gammas:
            if not (math.isfinite(g) and g >= 0):
                raise ConfigError(f"gamma must be finite and >= 0, got {g}")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.eps_exponent < 0:
            raise ConfigError("eps_exponent must be >= 0")
        if self.method not in _METHODS:
            raise ConfigError(f"method must be one of {_METHODS}, got {self.method!r}")
        unknown = set(self.statistics) - set(STATISTICS)
        if unknown:
            raise ConfigError(f"unknown statistics: {sorted(unknown)}")
        unknown = set(self.kam) - set(_KAM_KEYS)
        if unknown:
            raise ConfigError(f"unknown KAM options: {sorted(unknown)}")
        if self.method == "oracle" and "blocks" in self.statistics:
            raise ConfigError("block statistics need the KAM method")
        geometry = self.geometry
        if self.magnetization_site not in geometry.sites:
            raise ConfigError(f"site {self.magnetization_site} is outside the chain")
        distances = tuple(int(d) for d in self.distances) or tuple(range(1, geometry.n))
        for d in distances:
            if d < 1:
                raise ConfigError("correlation distances must be >= 1")
            centered_pair(d, geometry)
        object.__setattr__(self, "distances", distances)
        weights_from_config(self.weights, energies=np.zeros(1))
        self.kam_config(self.gammas[0])

    @property
    def geometry(self) -> ChainGeometry:
        if self.left_end is None:
            return ChainGeometry.from_n(self.n)
        return ChainGeometry(self.left_end, self.n - 1 - self.left_end)

    def kam_config(self, gamma: float) -> KamConfig:
        return KamConfig(gamma=gamma, eps_exponent=self.eps_exponent, **self.kam)

    def replace(self, **changes) -> "EnsembleConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return EnsembleConfig(**d)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "distribution": self.distribution.to_dict(),
            "gammas": list(self.gammas),
            "eps_exponent": self.eps_exponent,
            "realizations": self.realizations,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "statistics": list(self.statistics),
            "weights": self.weights,
            "distances": list(self.distances),
            "method": self.method,
            "magnetization_site": self.magnetization_site,
            "kam": dict(self.kam),
            "left_end": self.geometry.left_end,
            "right_end": self.geometry.right_end,
        }


def _spectral_norm(eigenvalues) -> float:
    return float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0


def process_realization(real: DisorderRealization, config: EnsembleConfig) -> dict:
    """Single-realization pipeline: build, diagonalize, and measure."""
    geometry = real.geometry
    stats = set(config.statistics)
    H = build_hamiltonian(real)
    rec: dict[str, Any] = {}

    spectrum = None
    if config.method in ("oracle", "both"):
        spectrum = diagonalize(H)

    kam = None
    if config.method in ("kam", "both"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            kam = diagonalize_kam(H, config.kam_config(real.gamma), geometry)
        diag = {
            "converged": kam.converged,
            "fully_resonant": kam.fully_resonant_flag,
            "n_steps": len(kam.steps),
            "max_offdiag": kam.max_offdiag,
        }
        if spectrum is not None:
            norm = _spectral_norm(spectrum.eigenvalues)
            err = float(np.max(np.abs(kam.energies - spectrum.eigenvalues)))
            diag["energy_error"] = err
            diag["relative_energy_error"] = err / norm if norm > 0 else err
            diag["orthogonality_error"] = float(np.max(np.abs(kam.U.T @ kam.U - np.eye(geometry.dim))))
        rec["kam"] = diag

    if kam is not None:
        U, energies = kam.U, kam.final_diagonal
    else:
        U, energies = spectrum.eigenvectors, spectrum.eigenvalues
    levels = np.sort(energies) if spectrum is None else spectrum.eigenvalues

    if "min_gap" in stats:
        rec["min_gap"] = float(np.min(np.diff(levels))) if levels.size > 1 else None
    if "resonant_sites" in stats:
        eps = resonance_threshold(real.gamma, config.eps_exponent)
        rec["resonant_sites"] = int(resonant_mask(real.h, real.J[1:], real.J[:-1], eps).sum())
    if "magnetization" in stats:
        weights = weights_from_config(config.weights, energies)
        rec["magnetization"] = abs_magnetization(U, geometry, config.magnetization_site, weights)
    if "correlations" in stats:
        corr = {}
        for d in config.distances:
            i, j = centered_pair(d, geometry)
            c = truncated_correlation_diag(U, sz_diagonal(geometry, i), sz_diagonal(geometry, j))
            corr[str(d)] = float(np.max(np.abs(c)))
        rec["correlations"] = corr
    if "blocks" in stats and kam is not None:
        rec["blocks"] = [
            {"core": sorted(b.core_sites), "fattened": sorted(b.fattened_sites)} for b in kam.blocks
        ]
    return rec


def _run_task(task) -> dict:
    config, index, gamma = task
    seed = realization_seed(config.master_seed, index)
    rec: dict[str, Any] = {"index": index, "gamma": gamma, "seed": seed}
    try:
        with threadpool_limits(1):
            real = sample_disorder(config.distribution.with_gamma(gamma), config.geometry, seed)
            rec.update(process_realization(real, config))
        rec["status"] = "ok"
    except (MblkamError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        rec["status"] = "error"
        rec["error"] = f"{type(exc).__name__}: {exc}"
        details = getattr(exc, "details", None)
        if details:
            rec["error_details"] = json.loads(json.dumps(details, default=str))
    return rec


def _tasks(config: EnsembleConfig):
    return [(config, i, g) for i in range(config.realizations) for g in config.gammas]


def _limit_threads():
    threadpool_limits(1)


@dataclass
class EnsembleResults:
    """Per-realization records ordered by ``(index, gamma position)``."""

    config: EnsembleConfig
    records: list[dict]

    def ok(self, gamma: float | None = None) -> list[dict]:
        return [
            r for r in self.records
            if r.get("status") == "ok" and (gamma is None or r["gamma"] == gamma)
        ]

    def values(self, key: str, gamma: float | None = None) -> np.ndarray:
        return np.array([r[key] for r in self.ok(gamma) if r.get(key) is not None], dtype=float)

    def jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def summary(self) -> dict:
        per_gamma = []
        for g in self.config.gammas:
            ok = self.ok(g)
            entry: dict[str, Any] = {
                "gamma": g,
                "n_ok": len(ok),
                "n_failed": sum(1 for r in self.records if r["gamma"] == g and r.get("status") != "ok"),
            }
            for key in ("magnetization", "resonant_sites", "min_gap"):
                v = self.values(key, g)
                if v.size:
                    entry[key] = _mean_se(v)
            kam = [r["kam"] for r in ok if "kam" in r]
            if kam:
                entry["kam"] = {
                    "converged": sum(bool(k["converged"]) for k in kam),
                    "fully_resonant": sum(bool(k["fully_resonant"]) for k in kam),
                    "max_relative_energy_error": max(
                        (k.get("relative_energy_error", 0.0) for k in kam), default=0.0
                    ),
                }
            per_gamma.append(entry)
        return {"config": self.config.to_dict(), "per_gamma": per_gamma}


def _mean_se(v: np.ndarray) -> dict:
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return {"mean": float(np.mean(v)), "stderr": se, "count": int(v.size)}


def run_ensemble(config: EnsembleConfig) -> EnsembleResults:
    """Run every ``(realization, gamma)`` task; failures are recorded, not raised."""
    tasks = _tasks(config)
    if config.workers == 1 or len(tasks) == 1:
        records = [_run_task(t) for t in tasks]
    else:
        workers = min(config.workers, len(tasks))
        chunk = max(1, len(tasks) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers, initializer=_limit_threads) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=chunk))
    failed = sum(r["status"] != "ok" for r in records)
    if failed:
        logger.warning("%d of %d realizations failed", failed, len(records))
    return EnsembleResults(config, records)


def paired_difference(results: EnsembleResults, key: str, gamma_a: float, gamma_b: float) -> dict:
    """Mean and standard error of ``value(gamma_b) - value(gamma_a)`` over realizations
    that succeeded at both couplings."""
    a = {r["index"]: r[key] for r in results.ok(gamma_a) if r.get(key) is not None}
    b = {r["index"]: r[key] for r in results.ok(gamma_b) if r.get(key) is not None}
    common = sorted(set(a) & set(b))
    if len(common) < 2:
        raise ValueError("need at least two paired realizations")
    diff = np.array([b[i] - a[i] for i in common])
    return _mean_se(diff)


@dataclass
class LlaFit:
    nu: float | None
    C_n: float | None
    delta_grid: np.ndarray
    P: np.ndarray
    stderr: np.ndarray
    n_samples: int
    fitted: bool
    reason: str = ""
    fit_mask: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "C_n": self.C_n,
            "fitted": self.fitted,
            "reason": self.reason,
            "n_samples": self.n_samples,
            "n_fit_points": int(self.fit_mask.sum()) if self.fit_mask is not None else 0,
        }

    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.delta_grid.tolist(), self.P.tolist(), self.stderr.tolist()))


def lla_fit(samples, n: int, delta_grid=None, n_grid: int = 25, min_count: int = 10) -> LlaFit:
    """Empirical ``P(min gap < delta)`` and a power-law fit ``P ~ delta**nu * C**n``.

    The default grid is log-spaced from the gap quantile at ``min_count / R``
    up to the median, which keeps the fit inside the small-gap regime while
    every point has at least ``min_count`` events.  Grid points with fewer
    events or with ``P > 1/2`` are excluded from the least-squares fit.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise ValueError(f"need at least 100 samples, got {x.size}")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("min-gap samples must be finite and nonnegative")
    if np.all(x == x[0]):
        raise ValueError("all samples are equal")
    x = np.sort(x)
    R = x.size

    if delta_grid is None:
        lo = np.quantile(x, min(1.0, min_count / R))
        hi = np.median(x)
        if not (lo > 0 and hi > lo):
            raise ValueError("samples do not span a usable range for the default grid")
        delta_grid = np.geomspace(lo, hi, n_grid)
    grid = np.asarray(delta_grid, dtype=float).ravel()
    if grid.size < 2 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0) or not np.all(np.isfinite(grid)):
        raise ValueError("delta grid must be positive, finite and strictly increasing with >= 2 points")

    counts = np.searchsorted(x, grid, side="left")
    P = counts / R
    se = np.sqrt(P * (1 - P) / R)
    if not counts.any():
        return LlaFit(None, None, grid, P, se, R, False, "no gap below the largest delta", np.zeros(grid.size, bool))

    mask = (counts >= min_count) & (P <= 0.5)
    if mask.sum() < 2:
        return LlaFit(None, None, grid, P, se, R, False, "fewer than two usable grid points", mask)
    slope, intercept = np.polyfit(np.log(grid[mask]), np.log(P[mask]), 1)
    return LlaFit(float(slope), float(math.exp(intercept / n)), grid, P, se, R, True, "", mask)


def _dist_and_seed(config, seed):
    if isinstance(config, EnsembleConfig):
        return config.distribution, config.master_seed if seed is None else seed
    if isinstance(config, DistributionSpec):
        return config, 0 if seed is None else seed
    raise ConfigError("expected an EnsembleConfig or DistributionSpec")


def _local_couplings(dist: DistributionSpec, rng, size):
    h = dist.h.sample(rng, size)
    jr = dist.J.sample(rng, size)
    jl = dist.J.sample(rng, size)
    return h, jr, jl


def resonance_density(config, eps_list: Sequence[float], samples: int = 10**6, seed: int | None = None) -> list[dict]:
    """Monte Carlo probability that a site is resonant at each ``eps``.

    Independent ``(h_i, J_i, J_{i-1})`` triples are drawn once and reused for
    every ``eps``.
    """
    dist, seed = _dist_and_seed(config, seed)
    eps_list = [float(e) for e in eps_list]
    for e in eps_list:
        if not 0 < e < 1:
            raise ConfigError(f"eps must lie in (0, 1), got {e}")
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1,)))
    h, jr, jl = _local_couplings(dist, rng, samples)
    out = []
    for e in eps_list:
        p = float(resonant_mask(h, jr, jl, e).mean())
        out.append({"eps": e, "P": p, "stderr": math.sqrt(p * (1 - p) / samples), "ratio": p / e, "samples": samples})
    return out


def fractional_moment(config, s: float, samples: int = 10**6, seed: int | None = None) -> dict:
    """Estimate ``E |Delta E|**(-s)`` for a single spin flip with random neighbours."""
    dist, seed = _dist_and_seed(config, seed)
    if not 0 <= s < 1:
        raise ConfigError(f"s must lie in [0, 1), got {s}")
    if samples < 10:
        raise ConfigError("samples must be >= 10")
    if s == 0:
        return {"s": 0.0, "mean": 1.0, "stderr": 0.0, "drift": 0.0, "samples": samples}
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(2,)))
    h, jr, jl = _local_couplings(dist, rng, samples)
    spins = rng.choice(np.array([-1.0, 1.0]), size=(3, samples))
    delta = np.abs(flip_delta(h, jr, jl, spins[0], spins[1], spins[2]))
    with np.errstate(divide="ignore"):
        v = delta ** (-s)
    if not np.all(np.isfinite(v)):
        raise ArithmeticError("zero energy difference sampled")
    mean = float(v.mean())
    head = float(v[: samples // 10].mean())
    return {
        "s": float(s),
        "mean": mean,
        "stderr": float(v.std(ddof=1) / math.sqrt(samples)),
        "drift": abs(mean - head) / mean,
        "samples": samples,
    }


def _fit_log_median(d: np.ndarray, med: np.ndarray) -> dict:
    pos = med > 0
    fit: dict[str, Any] = {
        "monotone": bool(np.all(np.diff(med) <= 0)),
        "slope": None,
        "intercept": None,
        "r2": None,
    }
    if pos.sum() >= 2:
        y = np.log(med[pos])
        slope, intercept = np.polyfit(d[pos], y, 1)
        resid = y - (slope * d[pos] + intercept)
        ss = float(np.sum((y - y.mean()) ** 2))
        fit.update(slope=float(slope), intercept=float(intercept), r2=1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0)
    return fit


def correlation_decay_profile(
    results: EnsembleResults, distances: Iterable[int] | None = None, gamma: float | None = None
) -> dict:
    """Per-distance statistics of ``max_alpha |<S^z_i; S^z_j>_alpha|`` and a fit of
    ``log median`` against distance."""
    gamma = results.config.gammas[0] if gamma is None else float(gamma)
    distances = [int(d) for d in (distances or results.config.distances)]
    if any(d == 0 for d in distances):
        raise ValueError("distance 0 is excluded")
    recs = [r for r in results.ok(gamma) if "correlations" in r]
    if not recs:
        raise ValueError("results contain no correlation records")
    rows = []
    for d in distances:
        missing = [r["index"] for r in recs if str(d) not in r["correlations"]]
        if missing:
            raise ValueError(f"no correlation record at distance {d}")
        v = np.array([r["correlations"][str(d)] for r in recs])
        bound = gamma ** (d / 3)
        q = np.quantile(v, [0.1, 0.25, 0.5, 0.75, 0.9])
        rows.append({
            "distance": d,
            "count": int(v.size),
            "median": float(q[2]),
            "q10": float(q[0]),
            "q25": float(q[1]),
            "q75": float(q[3]),
            "q90": float(q[4]),
            "bound": bound,
            "fraction_below_bound": float(np.mean(v <= bound)),
        })
    d = np.array([r["distance"] for r in rows], dtype=float)
    med = np.array([r["median"] for r in rows])
    return {"gamma": gamma, "rows": rows, "fit": _fit_log_median(d, med)}


def block_connectivity(
    results: EnsembleResults, distances: Iterable[int] | None = None, gamma: float | None = None
) -> dict:
    """Probability that sites ``i`` and ``i + d`` lie in one fattened block.

    Distance 0 gives the probability that the central site is covered by a block.
    """
    gamma = results.config.gammas[0] if gamma is None else float(gamma)
    geometry = results.config.geometry
    distances = [int(d) for d in (distances if distances is not None else [0, *results.config.distances])]
    recs = [r for r in results.ok(gamma) if "blocks" in r]
    if not recs:
        raise ValueError("results contain no block records")
    rows = []
    for d in distances:
        i, j = centered_pair(d, geometry)
        hits = sum(
            any(i in b["fattened"] and j in b["fattened"] for b in r["blocks"]) for r in recs
        )
        p = hits / len(recs)
        rows.append({
            "distance": d,
            "count": len(recs),
            "P": p,
            "stderr": math.sqrt(p * (1 - p) / len(recs)),
        })
    P = np.array([r["P"] for r in rows])
    return {"gamma": gamma, "rows": rows, "nonincreasing": bool(np.all(np.diff(P) <= 0))}
