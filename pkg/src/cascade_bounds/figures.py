"""Render experiment results to figure files alongside the delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bounds import er_giant_fraction, solve_gamma1, solve_gamma2
from .experiments import ExperimentResult

__all__ = ["render_result"]

_MARKERS = "osD^v<>Ph*"


def _by_family(rows):
    grouped: dict[str, list] = {}
    for row in rows:
        grouped.setdefault(row[0], []).append(row[1:])
    return grouped


def _bound_curve(rho_values, n, n0, uniform: bool):
    lo = min(rho_values)
    hi = max(rho_values)
    grid = np.linspace(max(lo, 0.0), max(hi, lo + 1e-9), 120)
    solver = solve_gamma2 if uniform else solve_gamma1
    ys = [n0 + solver(r, n, n0) * (n - n0) for r in grid]
    return grid, ys


def _render_influence_sweep(result: ExperimentResult, ax):
    uniform = result.name == "fig2"
    cfg = result.meta.get("config", {})
    networks = cfg.get("networks", [])
    n = None
    for spec in networks:
        n = spec.get("params", {}).get("n") or spec.get("params", {}).get("rows", 0) * spec.get(
            "params", {}
        ).get("cols", 1)
        if n:
            break
    grouped = _by_family(result.rows)
    n0 = cfg.get("n0", 1)
    if not uniform and result.rows:
        # fixed sets may differ from the config n0; take it from a bound row
        sets = cfg.get("influencer_sets") or [[0]]
        n0 = len(sets[0])
    rhos = []
    for mark, (family, rows) in zip(_MARKERS * 3, sorted(grouped.items())):
        xs = [r[0] for r in rows]
        ys = [r[1] for r in rows]
        es = [3.0 * r[2] for r in rows]
        ax.errorbar(xs, ys, yerr=es, fmt=mark, ms=4, lw=0.8, capsize=2, label=family)
        rhos.extend(xs)
    if rhos and n:
        grid, ys = _bound_curve(rhos, int(n), int(n0), uniform)
        ax.plot(grid, ys, "k-", lw=1.4, label="bound")
    ax.set_xlabel("spectral radius of the masked symmetrized hazard matrix"
                  if not uniform else "spectral radius of the symmetrized hazard matrix")
    ax.set_ylabel("influence")
    ax.legend(fontsize=7)


def _render_scaling(result: ExperimentResult, ax):
    grouped = _by_family(result.rows)
    for mark, (family, rows) in zip(_MARKERS * 3, sorted(grouped.items())):
        xs = [r[0] for r in rows]
        ys = [r[1] for r in rows]
        bs = [r[3] for r in rows]
        ax.loglog(xs, ys, mark + "-", ms=4, lw=0.8, label=f"{family} empirical")
        ax.loglog(xs, bs, "--", lw=1.0, label=f"{family} bound")
    ax.set_xlabel("network size")
    ax.set_ylabel("influence")
    target = result.meta.get("rho_target")
    if target is not None:
        ax.set_title(f"radius pinned at {target}", fontsize=9)
    ax.legend(fontsize=7)


def _render_percolation(result: ExperimentResult, ax):
    xs = [r[0] for r in result.rows]
    ys = [r[1] for r in result.rows]
    bounds = [r[3] / result.meta["config"]["n"] for r in result.rows]
    ax.plot(xs, ys, "o", ms=4, label="mean largest component / n")
    grid = np.linspace(min(xs), max(xs), 200)
    ax.plot(grid, [er_giant_fraction(c) for c in grid], "k-", lw=1.2, label="giant fraction")
    ax.plot(xs, bounds, "r--", lw=1.0, label="component bound / n")
    ax.set_xlabel("mean degree")
    ax.set_ylabel("fraction of nodes")
    ax.legend(fontsize=7)


def render_result(result: ExperimentResult, path) -> None:
    """Write a PNG summary figure for an experiment result."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=150)
    try:
        if result.name in ("fig1", "fig2"):
            _render_influence_sweep(result, ax)
        elif result.name.startswith("fig3"):
            _render_scaling(result, ax)
        elif result.name == "percolation_er":
            _render_percolation(result, ax)
        else:
            raise ValueError(f"no figure renderer for experiment {result.name!r}")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(path)
    finally:
        plt.close(fig)
