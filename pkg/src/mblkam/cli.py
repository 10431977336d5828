"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import io, plots
from .config import RunConfig, load_config
from .ensemble import (
    EnsembleResults,
    block_connectivity,
    centered_pair,
    correlation_decay_profile,
    fractional_moment,
    lla_fit,
    paired_difference,
    realization_seed,
    resonance_density,
    run_ensemble,
)
from .exceptions import ConfigError, ConvergenceWarning, DimensionError, NumericalError
from .kam import diagonalize_kam
from .model import build_hamiltonian, sample_disorder
from .observables import (
    PAULI_MAX_N,
    abs_magnetization,
    eigenstate_expectation_all,
    fit_decay_ratio,
    liom,
    local_operators,
    locality_profile,
    truncated_correlation_diag,
    weights_from_config,
)
from .oracle import diagonalize, sz_diagonal

__all__ = ["main", "run_command", "build_parser"]

logger = logging.getLogger("mblkam")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mblkam", description="Quasi-local diagonalization of a disordered Ising chain.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--realizations", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--gamma", type=float, nargs="+")
        p.add_argument("--n", type=int)
        p.add_argument("--force", action="store_true", help="write into a non-empty output directory")

    common(sub.add_parser("diagonalize", help="one realization: KAM rotation with an exact cross-check"))
    common(sub.add_parser("ensemble", help="disorder ensemble of observables and diagnostics"))
    common(sub.add_parser("lla", help="minimum level-gap statistics and power-law fit"))
    common(sub.add_parser("observables", help="eigenstate observables and l-bits of one realization"))
    rep = sub.add_parser("report", help="re-render figures from a results directory")
    rep.add_argument("--in", dest="input", required=True, help="results directory")
    rep.add_argument("--out", help="figure directory (default: <in>/plots)")
    rep.add_argument("--svg", action="store_true", help="write SVG figures")
    rep.add_argument("--force", action="store_true")
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.override(
        seed=args.seed,
        realizations=args.realizations,
        workers=args.workers,
        gamma=tuple(args.gamma) if args.gamma else None,
        n=args.n,
    )


def _out_dir(args) -> Path:
    if not args.out:
        raise ConfigError("--out is required")
    return io.prepare_output_dir(args.out, args.force)


def _single_realization(cfg: RunConfig):
    geometry = cfg.geometry
    seed = realization_seed(cfg.seed, 0)
    real = sample_disorder(cfg.distribution.with_gamma(cfg.gamma[0]), geometry, seed)
    return real, seed


def _run_kam(H, cfg, geometry):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return diagonalize_kam(H, cfg.kam_config(), geometry)


def _failure(out: Path, command: str, cfg: RunConfig, exc: NumericalError, **extra):
    io.write_json(
        out / "summary.json",
        {
            "command": command,
            "status": "error",
            "error": str(exc),
            "details": {k: repr(v) if not isinstance(v, (int, float, str)) else v for k, v in exc.details.items()},
            "config": cfg.to_dict(),
            **extra,
        },
    )


def cmd_diagonalize(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    real, seed = _single_realization(cfg)
    geometry = real.geometry
    H = build_hamiltonian(real)
    try:
        spectrum = diagonalize(H)
        kam = _run_kam(H, cfg, geometry)
    except NumericalError as exc:
        _failure(out, "diagonalize", cfg, exc, seed=seed, realization=real.to_dict())
        raise
    order = np.argsort(kam.final_diagonal, kind="stable")
    energies = kam.final_diagonal[order]
    err = np.abs(energies - spectrum.eigenvalues)
    norm = float(np.max(np.abs(spectrum.eigenvalues)))
    check = {
        "max_abs_error": float(err.max()),
        "relative_error": float(err.max() / norm) if norm > 0 else float(err.max()),
        "orthogonality_error": float(np.max(np.abs(kam.U.T @ kam.U - np.eye(geometry.dim)))),
        "spectral_norm": norm,
    }
    weights = weights_from_config(cfg.weights, kam.final_diagonal)
    summary = {
        "command": "diagonalize",
        "status": "ok" if kam.converged else "not_converged",
        "config": cfg.to_dict(),
        "seed": seed,
        "realization": real.to_dict(),
        "kam": {**kam.summary(), "config": kam.config.to_dict()},
        "oracle_check": check,
        "magnetization": abs_magnetization(kam.U, geometry, cfg.site, weights),
        "min_gap": float(np.min(np.diff(spectrum.eigenvalues))) if geometry.dim > 1 else None,
    }
    io.write_jsonl(out / "steps.jsonl", (s.to_dict() for s in kam.steps))
    io.write_csv(
        out / "spectrum.csv",
        ["rank", "label", "energy_kam", "energy_oracle", "abs_error"],
        ((r, int(order[r]), float(energies[r]), float(spectrum.eigenvalues[r]), float(err[r])) for r in range(geometry.dim)),
    )
    io.write_json(out / "summary.json", summary)
    if not kam.converged:
        logger.warning("KAM iteration did not reach tol_offdiag; see summary.json")
        return EXIT_NUMERICAL
    return EXIT_OK


def _ensemble_profiles(results: EnsembleResults, cfg: RunConfig) -> tuple[dict, list]:
    ec = results.config
    profiles: dict = {"correlations": [], "block_connectivity": [], "magnetization_differences": []}
    rows = []
    for entry in results.summary()["per_gamma"]:
        if "magnetization" in entry:
            m = entry["magnetization"]
            rows.append(("magnetization", entry["gamma"], entry["gamma"], m["mean"], m["stderr"], m["count"]))
    for g in ec.gammas:
        if "correlations" in ec.statistics and results.ok(g):
            prof = correlation_decay_profile(results, gamma=g)
            profiles["correlations"].append(prof)
            for r in prof["rows"]:
                for key in ("median", "q25", "q75", "fraction_below_bound"):
                    rows.append((f"correlation_{key}", g, r["distance"], r[key], None, r["count"]))
        if "blocks" in ec.statistics and results.ok(g):
            conn = block_connectivity(results, gamma=g)
            profiles["block_connectivity"].append(conn)
            for r in conn["rows"]:
                rows.append(("block_connectivity", g, r["distance"], r["P"], r["stderr"], r["count"]))
    if "magnetization" in ec.statistics:
        for a, b in zip(ec.gammas, ec.gammas[1:]):
            try:
                diff = paired_difference(results, "magnetization", a, b)
            except ValueError:
                continue
            profiles["magnetization_differences"].append({"gamma_a": a, "gamma_b": b, **diff})
    if cfg.resonance_eps:
        dens = resonance_density(cfg.distribution, cfg.resonance_eps, cfg.mc_samples, cfg.seed)
        profiles["resonance_density"] = dens
        rows += [("resonance_density", None, d["eps"], d["P"], d["stderr"], d["samples"]) for d in dens]
    if cfg.fractional_s is not None:
        profiles["fractional_moment"] = fractional_moment(cfg.distribution, cfg.fractional_s, cfg.mc_samples, cfg.seed)
    return profiles, rows


def cmd_ensemble(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    results = run_ensemble(cfg.ensemble_config())
    profiles, rows = _ensemble_profiles(results, cfg)
    summary = {"command": "ensemble", **results.summary(), "run_config": cfg.to_dict(), "profiles": profiles}
    io.atomic_write(out / "records.jsonl", results.jsonl())
    io.write_csv(out / "profiles.csv", ["table", "gamma", "x", "value", "stderr", "count"], rows)
    io.write_json(out / "summary.json", summary)
    failed = sum(r["status"] != "ok" for r in results.records)
    if failed:
        logger.warning("%d realizations failed; see records.jsonl", failed)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_lla(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    n = cfg.geometry.n
    results = run_ensemble(cfg.ensemble_config(method="oracle", statistics=("min_gap",)))
    fits, rows = [], []
    for g in cfg.gamma:
        gaps = results.values("min_gap", g)
        try:
            fit = lla_fit(gaps, n)
        except ValueError as exc:
            raise ConfigError(f"gamma={g}: {exc}") from None
        table = [{"delta": d, "P": p, "stderr": s} for d, p, s in fit.rows()]
        fits.append({"gamma": g, **fit.to_dict(), "rows": table})
        rows += [(g, d, p, s) for d, p, s in fit.rows()]
    summary = {"command": "lla", **results.summary(), "run_config": cfg.to_dict(), "fits": fits}
    io.atomic_write(out / "records.jsonl", results.jsonl())
    io.write_csv(out / "profiles.csv", ["gamma", "delta", "P", "stderr"], rows)
    io.write_json(out / "summary.json", summary)
    return EXIT_OK


def _local_correlations(U, geometry, i, j, radius):
    """``max_alpha |<O_i; O_j>_alpha|`` for every pair of local products near ``i`` and ``j``."""
    ops_i = list(local_operators(i, geometry, radius))
    ops_j = list(local_operators(j, geometry, radius))
    rotated_j = [(name, op @ U) for name, op in ops_j]
    mean_j = {name: np.sum(U * OU, axis=0) for name, OU in rotated_j}
    out = []
    for name_i, op_i in ops_i:
        OU_i = op_i @ U
        mean_i = np.sum(U * OU_i, axis=0)
        for name_j, OU_j in rotated_j:
            # both factors are real symmetric, so <O_i O_j> = (O_i u) . (O_j u)
            joint = np.sum(OU_i * OU_j, axis=0)
            out.append((name_i, name_j, float(np.max(np.abs(joint - mean_i * mean_j[name_j])))))
    return out


def cmd_observables(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    real, seed = _single_realization(cfg)
    geometry = real.geometry
    H = build_hamiltonian(real)
    try:
        if cfg.method == "oracle":
            spec = diagonalize(H)
            U, energies = spec.eigenvectors, spec.eigenvalues
        else:
            kam = _run_kam(H, cfg, geometry)
            U, energies = kam.U, kam.final_diagonal
    except NumericalError as exc:
        _failure(out, "observables", cfg, exc, seed=seed)
        raise
    weights = weights_from_config(cfg.weights, energies)
    obs_rows = []
    magnetization = {}
    for s in geometry.sites:
        m = abs_magnetization(U, geometry, s, weights)
        magnetization[str(s)] = m
        obs_rows.append((seed, "average", f"abs_sz[{s}]", m))
    correlations = {}
    for d in cfg.distances or range(1, geometry.n):
        i, j = centered_pair(d, geometry)
        c = truncated_correlation_diag(U, sz_diagonal(geometry, i), sz_diagonal(geometry, j))
        correlations[str(d)] = float(np.max(np.abs(c)))
        obs_rows.append((seed, "max", f"zz_connected[{i},{j}]", correlations[str(d)]))

    d_far = max(cfg.distances or [geometry.n - 1])
    i, j = centered_pair(d_far, geometry)
    local = _local_correlations(U, geometry, i, j, cfg.radius)
    obs_rows += [(seed, "max", f"connected[{a}@{i},{b}@{j}]", v) for a, b, v in local]

    norm = float(np.max(np.abs(energies)))
    lbits, profile_rows = [], []
    taus = [liom(U, s, geometry) for s in geometry.sites]
    for s, tau in zip(geometry.sites, taus):
        entry = {
            "center": s,
            "commutator": float(np.max(np.abs(tau @ H - H @ tau))) / norm if norm > 0 else 0.0,
            "involution_error": float(np.max(np.abs(tau @ tau - np.eye(geometry.dim)))),
        }
        if geometry.n <= PAULI_MAX_N:
            prof = locality_profile(tau, s, geometry)
            entry["weights"] = prof.weights.tolist()
            entry["decay_ratio"] = fit_decay_ratio(prof)
            profile_rows += [(s, r, float(w)) for r, w in enumerate(prof.weights)]
        lbits.append(entry)
        obs_rows.append((seed, "max", f"lbit_commutator[{s}]", entry["commutator"]))
    pair_comm = max(
        (float(np.max(np.abs(a @ b - b @ a))) for k, a in enumerate(taus) for b in taus[k + 1 :]), default=0.0
    )

    summary = {
        "command": "observables",
        "config": cfg.to_dict(),
        "seed": seed,
        "realization": real.to_dict(),
        "magnetization": magnetization,
        "sz_expectations_site": eigenstate_expectation_all(U, sz_diagonal(geometry, cfg.site)).tolist(),
        "correlations": correlations,
        "local_correlation_max": max((v for _, _, v in local), default=0.0),
        "lbits": lbits,
        "lbit_pair_commutator": pair_comm,
    }
    io.write_csv(out / "observables.csv", ["seed", "aggregation", "observable", "value"], obs_rows)
    if profile_rows:
        io.write_csv(out / "profiles.csv", ["site", "r", "weight"], profile_rows)
    io.write_json(out / "summary.json", summary)
    return EXIT_OK


def _figures(summary: dict) -> dict[str, object]:
    figs = {}
    command = summary.get("command")
    if command == "ensemble":
        figs["magnetization.svg"] = plots.plot_magnetization(summary["per_gamma"])
        for prof in summary["profiles"].get("correlations", []):
            figs[f"correlation_decay_gamma{prof['gamma']:g}.svg"] = plots.plot_correlation_decay(prof)
        for conn in summary["profiles"].get("block_connectivity", []):
            figs[f"block_connectivity_gamma{conn['gamma']:g}.svg"] = plots.plot_block_connectivity(conn)
    elif command == "lla":
        n = summary["config"]["n"]
        for fit in summary["fits"]:
            figs[f"lla_cdf_gamma{fit['gamma']:g}.svg"] = plots.plot_lla_cdf(fit["rows"], fit, n)
    elif command == "observables":
        profiles = [p for p in summary["lbits"] if "weights" in p]
        if profiles:
            figs["lbit_profile.svg"] = plots.plot_lbit_profile(profiles)
    return figs


def cmd_report(args) -> int:
    src = Path(args.input)
    try:
        summary = io.read_json(src / "summary.json")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {src / 'summary.json'}: {exc}") from None
    figs = _figures(summary)
    if not args.svg:
        print(f"{summary.get('command')} results in {src}; figures available: {', '.join(sorted(figs)) or 'none'}")
        return EXIT_OK
    out = io.prepare_output_dir(args.out or src / "plots", args.force)
    for name, fig in sorted(figs.items()):
        io.atomic_write(out / name, plots.render_svg(fig))
    print(f"wrote {len(figs)} figure(s) to {out}")
    return EXIT_OK


_COMMANDS = {
    "diagonalize": cmd_diagonalize,
    "ensemble": cmd_ensemble,
    "lla": cmd_lla,
    "observables": cmd_observables,
    "report": cmd_report,
}


def run_command(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
        with threadpool_limits(1):
            return _COMMANDS[args.command](args)
    except (ConfigError, DimensionError) as exc:
        print(f"mblkam: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"mblkam: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run_command())
