"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion k: PASS|FAIL - ...`` line; the lines are
also collected in the pytest terminal summary.
"""

import time
import warnings

import numpy as np
import pytest

from mblkam import cli
from mblkam.ensemble import (
    centered_pair,
    EnsembleConfig,
    correlation_decay_profile,
    fractional_moment,
    lla_fit,
    paired_difference,
    realization_seed,
    resonance_density,
    run_ensemble,
)
from mblkam.exceptions import ConvergenceWarning
from mblkam.kam import KamConfig, build_generator, diagonalize_kam, rotate
from mblkam.model import ChainGeometry, Distribution, DistributionSpec, build_hamiltonian, sample_disorder
from mblkam.observables import (
    abs_magnetization,
    fit_decay_ratio,
    liom,
    locality_profile,
    truncated_correlation_diag,
)
from mblkam.oracle import diagonalize, sz_diagonal

ZERO_J = DistributionSpec(J=Distribution.constant(0.0))
MASTER = 0  # package default seed


def _kam(H, gamma, geometry, a=0.5):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return diagonalize_kam(H, KamConfig(gamma=gamma, eps_exponent=a), geometry)


def test_criterion_01_oracle_equivalence(report_criterion):
    t0 = time.perf_counter()
    worst_e, worst_o, count = 0.0, 0.0, 0
    for n in (4, 6, 8):
        g = ChainGeometry.from_n(n)
        for gamma in (0.005, 0.01, 0.05):
            for idx in range(50):
                real = sample_disorder(DistributionSpec(gamma=gamma), g, realization_seed(MASTER, idx))
                H = build_hamiltonian(real)
                w = diagonalize(H).eigenvalues
                res = _kam(H, gamma, g)
                worst_e = max(worst_e, np.abs(res.energies - w).max() / np.abs(w).max())
                worst_o = max(worst_o, np.abs(res.U.T @ res.U - np.eye(g.dim)).max())
                count += 1
    elapsed = time.perf_counter() - t0
    ok = worst_e <= 1e-8 and worst_o <= 1e-10 and elapsed <= 300
    report_criterion(1, ok, f"{count} runs, max |dE|/||H|| = {worst_e:.2e}, max |U^T U - I| = {worst_o:.2e}, {elapsed:.0f} s")
    assert ok


def test_criterion_02_first_order_cancellation(report_criterion):
    worst, points = 0.0, 0
    for J in np.geomspace(1e-4, 0.05, 10):
        for ratio in (-0.1, -0.05, -0.01, -0.003, -0.001, 0.001, 0.003, 0.01, 0.05, 0.1):
            dE = J / ratio
            H = np.array([[dE / 2, J], [J, -dE / 2]])
            Hn = rotate(H, build_generator(H, [1], rho=1.0))
            worst = max(worst, abs(Hn[0, 1]) / (2 * J * abs(ratio)))
            points += 1
    ok = points == 100 and worst <= 1.0
    report_criterion(2, ok, f"{points} grid points, max |H'_01| / (2|J||J/dE|) = {worst:.3f}")
    assert ok


def test_criterion_03_magnetization(report_criterion):
    t0 = time.perf_counter()
    gammas = (0.005, 0.01, 0.02)
    cfg = EnsembleConfig(
        n=8, gammas=gammas, eps_exponent=0.5, realizations=500, master_seed=MASTER,
        statistics=("magnetization",), method="oracle",
    )
    res = run_ensemble(cfg)
    means = {g: res.values("magnetization", g).mean() for g in gammas}
    diffs = [paired_difference(res, "magnetization", a, b) for a, b in zip(gammas, gammas[1:])]
    # nonincreasing: no step up that is significant at two standard errors
    monotone = all(d["mean"] <= 2 * d["stderr"] for d in diffs)
    elapsed = time.perf_counter() - t0
    ok = means[0.01] >= 0.99 and monotone and elapsed <= 900
    detail = ", ".join(f"gamma={g}: {m:.5f}" for g, m in means.items())
    steps = ", ".join(f"{d['mean']:+.2e}+-{d['stderr']:.1e}" for d in diffs)
    report_criterion(3, ok, f"{detail}; paired steps {steps}; {elapsed:.0f} s")
    assert ok


def test_criterion_04_correlation_decay(report_criterion):
    cfg = EnsembleConfig(
        n=10, gammas=(0.01,), eps_exponent=0.5, realizations=200, master_seed=MASTER,
        statistics=("correlations",), method="kam", distances=tuple(range(1, 8)),
    )
    res = run_ensemble(cfg)
    prof = correlation_decay_profile(res, distances=range(2, 8))
    rows = {r["distance"]: r for r in prof["rows"]}
    frac6 = float(np.mean([r["correlations"]["6"] <= 1e-4 for r in res.ok()]))
    log_med = np.log10([rows[d]["median"] for d in range(2, 8)])
    steps = np.diff(log_med)
    slope = np.polyfit(np.arange(2, 8), log_med, 1)[0]
    # linear decay: every per-site decrement within a factor 2 of the fitted rate
    linear = slope < 0 and bool(np.all((steps <= slope / 2) & (steps >= 2 * slope)))
    ok = frac6 >= 0.8 and linear
    report_criterion(
        4, ok,
        f"fraction(d=6) <= 1e-4: {frac6:.3f}; log10 median d=2..7: {np.round(log_med, 2).tolist()}; "
        f"per-site steps {np.round(steps, 2).tolist()} vs fitted slope {slope:.2f}",
    )
    assert ok


def test_criterion_05_lla_calibration(report_criterion):
    rng = np.random.default_rng(MASTER)
    recovered = {}
    for nu in (0.5, 1.0):
        recovered[nu] = lla_fit(rng.uniform(size=10**4) ** (1 / nu), n=6).nu
    cfg = EnsembleConfig(
        n=6, gammas=(0.05,), realizations=2000, master_seed=MASTER, statistics=("min_gap",), method="oracle",
    )
    fit = lla_fit(run_ensemble(cfg).values("min_gap"), 6)
    ok = (
        all(abs(recovered[nu] - nu) <= 0.15 for nu in recovered)
        and fit.fitted and fit.nu > 0.5 and bool(np.all(np.diff(fit.P) >= 0))
    )
    report_criterion(
        5, ok,
        f"synthetic nu 0.5 -> {recovered[0.5]:.3f}, 1.0 -> {recovered[1.0]:.3f}; model n=6 nu = {fit.nu:.3f}, C = {fit.C_n:.3f}",
    )
    assert ok


def test_criterion_06_fractional_moment(report_criterion):
    est = fractional_moment(ZERO_J, 2 / 7, samples=10**6, seed=MASTER)
    exact = 2 ** (-2 / 7) * 7 / 5
    z = abs(est["mean"] - exact) / est["stderr"]
    ok = z <= 3
    report_criterion(6, ok, f"estimate {est['mean']:.5f} +- {est['stderr']:.1e} vs {exact:.5f} ({z:.2f} sigma)")
    assert ok


def test_criterion_07_resonance_density(report_criterion):
    eps = (0.02, 0.05, 0.1)
    free = resonance_density(ZERO_J, eps, samples=10**6, seed=MASTER)
    z = max(abs(r["P"] - r["eps"] / 2) / r["stderr"] for r in free)
    full = resonance_density(DistributionSpec(), eps, samples=10**6, seed=MASTER)
    ratios = [r["ratio"] for r in full]
    spread = max(ratios) / min(ratios)
    ok = z <= 3 and spread <= 2
    report_criterion(7, ok, f"J=0 max deviation {z:.2f} sigma; full model P/eps = {np.round(ratios, 3).tolist()} (spread x{spread:.2f})")
    assert ok


def test_criterion_08_lbit_locality(report_criterion):
    g = ChainGeometry.from_n(6)
    qs, comm, pair = [], 0.0, 0.0
    for idx in range(50):
        real = sample_disorder(DistributionSpec(gamma=0.01), g, realization_seed(MASTER, idx))
        H = build_hamiltonian(real)
        res = _kam(H, 0.01, g)
        norm = np.abs(res.energies).max()
        taus = [liom(res.U, s, g) for s in g.sites]
        comm = max(comm, max(np.abs(t @ H - H @ t).max() / norm for t in taus))
        pair = max(pair, max(np.abs(a @ b - b @ a).max() for a in taus for b in taus))
        qs.append(fit_decay_ratio(locality_profile(taus[g.position(0)], 0, g)))
    q = float(np.median(qs))
    ok = q <= 0.2 and comm <= 1e-8 and pair <= 1e-8
    report_criterion(8, ok, f"median q = {q:.2e}; max ||[tau, H]||/||H|| = {comm:.1e}; max ||[tau_i, tau_j]|| = {pair:.1e}")
    assert ok


def test_criterion_09_determinism(report_criterion, tmp_path):
    cfg = tmp_path / "det.toml"
    cfg.write_text("n = 6\ngamma = [0.01, 0.05]\neps_exponent = 0.5\nrealizations = 12\nseed = 5\n")
    blobs = []
    for w in (1, 4, 16):
        out = tmp_path / f"w{w}"
        assert cli.run_command(["ensemble", "--config", str(cfg), "--workers", str(w), "--out", str(out)]) == 0
        blobs.append((out / "records.jsonl").read_bytes())
    same_records = blobs[0] == blobs[1] == blobs[2]
    svgs = []
    for k in range(2):
        dest = tmp_path / f"plots{k}"
        assert cli.run_command(["report", "--in", str(tmp_path / "w1"), "--svg", "--out", str(dest)]) == 0
        svgs.append({p.name: p.read_bytes() for p in sorted(dest.iterdir())})
    same_svg = bool(svgs[0]) and svgs[0] == svgs[1]
    ok = same_records and same_svg
    report_criterion(9, ok, f"records identical for workers 1/4/16: {same_records}; {len(svgs[0])} SVGs identical: {same_svg}")
    assert ok


def test_criterion_10_performance(report_criterion, tmp_path):
    g = ChainGeometry.from_n(10)
    t0 = time.perf_counter()
    real = sample_disorder(DistributionSpec(gamma=0.01), g, realization_seed(MASTER, 0))
    H = build_hamiltonian(real)
    res = _kam(H, 0.01, g)
    abs_magnetization(res.U, g, 0)
    for d in range(1, 8):
        i, j = centered_pair(d, g)
        truncated_correlation_diag(res.U, sz_diagonal(g, i), sz_diagonal(g, j))
    liom(res.U, 0, g)
    t10 = time.perf_counter() - t0

    t0 = time.perf_counter()
    code = cli.run_command(["diagonalize", "--n", "12", "--gamma", "0.01", "--seed", "1", "--out", str(tmp_path / "n12")])
    t12 = time.perf_counter() - t0
    ok = t10 <= 10 and code == 0 and t12 <= 120
    report_criterion(10, ok, f"n=10 end-to-end {t10:.1f} s; n=12 diagonalize {t12:.1f} s (exit {code})")
    assert ok
