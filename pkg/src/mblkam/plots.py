"""Static SVG figures rendered from persisted results.

Rendering is byte-reproducible: no timestamp in the metadata and a fixed
salt for the element ids.
"""

from __future__ import annotations

import io
from typing import Mapping, Sequence

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

__all__ = [
    "render_svg",
    "plot_magnetization",
    "plot_correlation_decay",
    "plot_lla_cdf",
    "plot_block_connectivity",
    "plot_lbit_profile",
]

_RC = {"svg.hashsalt": "mblkam", "svg.fonttype": "path", "path.simplify": False}


def _figure():
    fig = Figure(figsize=(5.0, 3.6))
    FigureCanvasSVG(fig)
    return fig, fig.add_subplot(1, 1, 1)


def render_svg(fig: Figure) -> bytes:
    buf = io.BytesIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def plot_magnetization(per_gamma: Sequence[Mapping]) -> Figure:
    """Disorder mean of ``Av_alpha |<S^z_0>_alpha|`` against gamma."""
    pts = [(p["gamma"], p["magnetization"]["mean"], p["magnetization"]["stderr"]) for p in per_gamma if "magnetization" in p]
    fig, ax = _figure()
    if pts:
        g, m, se = map(np.array, zip(*sorted(pts)))
        ax.errorbar(g, m, yerr=se, marker="o", capsize=3)
        if np.all(g > 0) and g.size > 1:
            ax.set_xscale("log")
    ax.set_xlabel(r"$\gamma$")
    ax.set_ylabel(r"$\mathbb{E}\,\mathrm{Av}_\alpha |\langle S^z_0\rangle_\alpha|$")
    fig.tight_layout()
    return fig


def plot_correlation_decay(profile: Mapping) -> Figure:
    """Median and quartiles of ``max_alpha |<S^z_i; S^z_j>_alpha|`` against distance."""
    rows = profile["rows"]
    d = np.array([r["distance"] for r in rows], dtype=float)
    fig, ax = _figure()
    ax.fill_between(d, [r["q25"] for r in rows], [r["q75"] for r in rows], alpha=0.3, label="quartiles")
    ax.plot(d, [r["median"] for r in rows], marker="o", label="median")
    ax.plot(d, [r["bound"] for r in rows], linestyle="--", color="gray", label=r"$\gamma^{d/3}$")
    ax.set_yscale("log", nonpositive="mask")
    ax.set_xlabel("distance $d$")
    ax.set_ylabel(r"$\max_\alpha |\langle S^z_i; S^z_j\rangle_\alpha|$")
    ax.set_title(rf"$\gamma = {profile['gamma']:g}$")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return fig


def plot_lla_cdf(rows: Sequence[Mapping], fit: Mapping, n: int) -> Figure:
    """Empirical ``P(min gap < delta)`` on log-log axes with the fitted power law."""
    delta = np.array([r["delta"] for r in rows], dtype=float)
    P = np.array([r["P"] for r in rows], dtype=float)
    se = np.array([r["stderr"] for r in rows], dtype=float)
    fig, ax = _figure()
    pos = P > 0
    ax.errorbar(delta[pos], P[pos], yerr=se[pos], marker="o", linestyle="none", capsize=2, label="empirical")
    if fit.get("fitted"):
        ax.plot(delta, fit["C_n"] ** n * delta ** fit["nu"], label=rf"fit $\nu = {fit['nu']:.3f}$")
    ax.set_xscale("log")
    ax.set_yscale("log", nonpositive="mask")
    ax.set_xlabel(r"$\delta$")
    ax.set_ylabel(r"$P(\min\ \mathrm{gap} < \delta)$")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return fig


def plot_block_connectivity(connectivity: Mapping) -> Figure:
    rows = connectivity["rows"]
    fig, ax = _figure()
    ax.errorbar(
        [r["distance"] for r in rows], [r["P"] for r in rows], yerr=[r["stderr"] for r in rows], marker="o", capsize=3
    )
    ax.set_xlabel(r"$|i - j|$")
    ax.set_ylabel("P(same resonant block)")
    ax.set_title(rf"$\gamma = {connectivity['gamma']:g}$")
    fig.tight_layout()
    return fig


def plot_lbit_profile(profiles: Sequence[Mapping]) -> Figure:
    """Squared Pauli weight of each l-bit beyond radius ``r`` of its site."""
    fig, ax = _figure()
    for p in profiles:
        w = np.asarray(p["weights"], dtype=float)
        ax.plot(np.arange(w.size), w, marker="o", label=f"site {p['center']}")
    ax.set_yscale("log", nonpositive="mask")
    ax.set_xlabel("radius $r$")
    ax.set_ylabel("$w(r)$")
    ax.legend(fontsize="x-small", ncol=2)
    fig.tight_layout()
    return fig
