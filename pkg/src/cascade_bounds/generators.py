"""Seeded random-network generators and uniform-probability calibration.

Every family emits an undirected topology as symmetric directed edge pairs
with equal transmission probability; generation is a pure function of the
spec, including its seed.  ``edge_probability`` is the uniform transmission
probability applied to the generated topology; ``totally_connected`` and
``chung_lu`` define their own per-edge probabilities and ignore it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import (
    InfluencerSet,
    ProbGraph,
    build_graph_arrays,
    hazard_from_prob,
    mask_columns,
    with_uniform_p,
)
from .spectral import DEFAULT_TOL, SparseMatrix, symmetrized_spectral_radius

__all__ = [
    "GeneratorError",
    "CalibrationError",
    "GeneratorSpec",
    "FAMILIES",
    "generate",
    "complete_uniform",
    "calibrate_uniform_p",
    "chung_lu_ratio",
]

FAMILIES = (
    "erdos_renyi",
    "erdos_renyi_mean",
    "preferential_attachment",
    "small_world",
    "random_geometric",
    "grid_2d",
    "star",
    "totally_connected",
    "chung_lu",
)


class GeneratorError(ValueError):
    """Infeasible generator parameters."""


class CalibrationError(ValueError):
    """No uniform probability can reach the requested spectral radius."""


@dataclass
class GeneratorSpec:
    """A network family, its parameters, a transmission probability, a seed."""

    family: str
    params: dict = field(default_factory=dict)
    edge_probability: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GeneratorError(f"unknown network family {self.family!r}")

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "params": dict(self.params),
            "edge_probability": self.edge_probability,
            "seed": self.seed,
        }


def _need(params: dict, family: str, *names):
    out = []
    for name in names:
        if name not in params:
            raise GeneratorError(f"{family} requires parameter {name!r}")
        out.append(params[name])
    return out


def _int_param(family: str, name: str, value, minimum: int) -> int:
    v = int(value)
    if v < minimum:
        raise GeneratorError(f"{family}: {name} must be >= {minimum}, got {value!r}")
    return v


def _pairs_to_graph(n: int, iu, ju, p) -> ProbGraph:
    """Symmetric directed graph from undirected pair arrays."""
    iu = np.asarray(iu, dtype=np.int64)
    ju = np.asarray(ju, dtype=np.int64)
    p = np.broadcast_to(np.asarray(p, dtype=np.float64), iu.shape)
    src = np.concatenate([iu, ju])
    dst = np.concatenate([ju, iu])
    return build_graph_arrays(n, src, dst, np.concatenate([p, p]))


def _er_pairs(n: int, density: float, rng) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < density
    return iu[keep], ju[keep]


def _pa_pairs(n: int, m: int, rng) -> tuple[np.ndarray, np.ndarray]:
    # degree-proportional attachment without duplicates, seeded by an m-clique
    if m < 1 or m >= n:
        raise GeneratorError(f"preferential_attachment: need 1 <= m < n, got m={m}, n={n}")
    pairs: list[tuple[int, int]] = [(i, j) for i in range(m) for j in range(i + 1, m)]
    targets: list[int] = []
    for i, j in pairs:
        targets.extend((i, j))
    if not targets:
        targets = [0]  # m = 1: attach everything to the first node initially
    for v in range(m, n):
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(targets[rng.integers(len(targets))])
        for w in chosen:
            pairs.append((w, v))
            targets.extend((w, v))
    arr = np.asarray(pairs, dtype=np.int64)
    return np.minimum(arr[:, 0], arr[:, 1]), np.maximum(arr[:, 0], arr[:, 1])


def _sw_pairs(n: int, k: int, rewire: float, rng) -> tuple[np.ndarray, np.ndarray]:
    # ring of k nearest neighbors with independent rewiring of the far end
    if k < 2 or k % 2 != 0 or k >= n:
        raise GeneratorError(f"small_world: need even 2 <= k < n, got k={k}, n={n}")
    if not 0.0 <= rewire <= 1.0:
        raise GeneratorError(f"small_world: rewire_prob must lie in [0, 1], got {rewire}")
    existing: set[tuple[int, int]] = set()
    for d in range(1, k // 2 + 1):
        for i in range(n):
            j = (i + d) % n
            existing.add((min(i, j), max(i, j)))
    edges = sorted(existing)
    for idx, (i, j) in enumerate(edges):
        if rng.random() >= rewire:
            continue
        for _ in range(64):  # full neighborhoods can make rewiring impossible
            w = int(rng.integers(n))
            cand = (min(i, w), max(i, w))
            if w != i and cand not in existing:
                existing.remove((i, j))
                existing.add(cand)
                edges[idx] = cand
                break
    arr = np.asarray(sorted(existing), dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def _geometric_pairs(n: int, radius: float, rng) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < radius <= math.sqrt(2.0):
        raise GeneratorError(f"random_geometric: radius must lie in (0, sqrt(2)], got {radius}")
    pts = rng.random((n, 2))
    r2 = radius * radius
    srcs: list[np.ndarray] = []
    dsts: list[np.ndarray] = []
    block = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        d2 = ((pts[lo:hi, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        bi, bj = np.nonzero(d2 <= r2)
        bi = bi + lo
        keep = bi < bj  # upper triangle only
        srcs.append(bi[keep])
        dsts.append(bj[keep])
    return np.concatenate(srcs), np.concatenate(dsts)


def _grid_pairs(rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise GeneratorError(f"grid_2d: need at least 2 nodes, got {rows}x{cols}")
    idx = np.arange(rows * cols).reshape(rows, cols)
    right = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    down = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    arr = np.concatenate([right, down])
    return arr[:, 0], arr[:, 1]


def generate(spec: GeneratorSpec) -> ProbGraph:
    """Build the network described by ``spec``; deterministic given its seed."""
    rng = np.random.default_rng(spec.seed)
    fam = spec.family
    params = spec.params
    p_uniform = 0.5 if spec.edge_probability is None else float(spec.edge_probability)
    if not 0.0 < p_uniform < 1.0:
        raise GeneratorError(
            f"edge_probability must lie in (0, 1), got {spec.edge_probability!r}"
        )

    if fam == "erdos_renyi":
        n, density = _need(params, fam, "n", "p")
        n = _int_param(fam, "n", n, 2)
        if not 0.0 <= density <= 1.0:
            raise GeneratorError(f"erdos_renyi: p must lie in [0, 1], got {density}")
        iu, ju = _er_pairs(n, float(density), rng)
    elif fam == "erdos_renyi_mean":
        n, c = _need(params, fam, "n", "c")
        n = _int_param(fam, "n", n, 2)
        if c < 0 or c > n:
            raise GeneratorError(f"erdos_renyi_mean: need 0 <= c <= n, got c={c}")
        iu, ju = _er_pairs(n, float(c) / n, rng)
    elif fam == "preferential_attachment":
        n, m = _need(params, fam, "n", "m")
        n = _int_param(fam, "n", n, 2)
        iu, ju = _pa_pairs(n, int(m), rng)
    elif fam == "small_world":
        n, k, rewire = _need(params, fam, "n", "k", "rewire_prob")
        n = _int_param(fam, "n", n, 3)
        iu, ju = _sw_pairs(n, int(k), float(rewire), rng)
    elif fam == "random_geometric":
        n, radius = _need(params, fam, "n", "radius")
        n = _int_param(fam, "n", n, 2)
        iu, ju = _geometric_pairs(n, float(radius), rng)
    elif fam == "grid_2d":
        rows, cols = _need(params, fam, "rows", "cols")
        iu, ju = _grid_pairs(int(rows), int(cols))
        n = int(rows) * int(cols)
    elif fam == "star":
        (n,) = _need(params, fam, "n")
        n = _int_param(fam, "n", n, 2)
        iu = np.zeros(n - 1, dtype=np.int64)
        ju = np.arange(1, n, dtype=np.int64)
    elif fam == "totally_connected":
        n, a, b = _need(params, fam, "n", "a", "b")
        n = _int_param(fam, "n", n, 2)
        influencer = int(params.get("influencer", 0))
        if not 0 <= influencer < n:
            raise GeneratorError(f"totally_connected: influencer {influencer} out of range")
        for name, v in (("a", a), ("b", b)):
            if not 0.0 <= float(v) < 1.0:
                raise GeneratorError(f"totally_connected: {name} must lie in [0, 1), got {v}")
        iu, ju = np.triu_indices(n, k=1)
        p = np.where((iu == influencer) | (ju == influencer), float(a), float(b))
        return _pairs_to_graph(n, iu, ju, p)
    elif fam == "chung_lu":
        (weights,) = _need(params, fam, "weights")
        w = np.asarray(weights, dtype=np.float64)
        n = w.size
        if n < 2 or np.any(w <= 0):
            raise GeneratorError("chung_lu: need at least 2 strictly positive weights")
        total = float(w.sum())
        order = np.argsort(w)[::-1]
        i, j = sorted((int(order[0]), int(order[1])))
        top = float(w[i] * w[j])
        if top >= total:
            raise GeneratorError(
                f"chung_lu: pair ({i}, {j}) has probability {top / total} >= 1"
            )
        # every pair carries its own transmission probability q_ij; the
        # subgraph draw itself happens in the percolation / RN dynamics
        iu, ju = np.triu_indices(n, k=1)
        return _pairs_to_graph(n, iu, ju, w[iu] * w[ju] / total)
    else:  # pragma: no cover - guarded by GeneratorSpec
        raise GeneratorError(f"unknown network family {fam!r}")

    return _pairs_to_graph(n, iu, ju, p_uniform)


def complete_uniform(n: int, p: float) -> ProbGraph:
    """Complete undirected topology with one uniform probability everywhere."""
    n = _int_param("complete_uniform", "n", n, 2)
    if not 0.0 < p < 1.0:
        raise GeneratorError(f"complete_uniform: p must lie in (0, 1), got {p}")
    iu, ju = np.triu_indices(n, k=1)
    return _pairs_to_graph(n, iu, ju, p)


def calibrate_uniform_p(
    topology: ProbGraph,
    a: InfluencerSet | None,
    target_rho: float,
    tol: float = DEFAULT_TOL,
) -> float:
    """Uniform probability whose (masked) hazard radius equals ``target_rho``.

    For uniform p the masked hazard matrix is ``-ln(1-p)`` times the masked
    adjacency, so the calibration inverts in closed form:
    ``p = 1 - exp(-target / rho_sym)`` with ``rho_sym`` the symmetrized radius
    of the masked adjacency.  The result is verified by recomputation.
    """
    if target_rho <= 0:
        raise CalibrationError(f"target spectral radius must be positive, got {target_rho}")
    adjacency = SparseMatrix.adjacency(topology)
    if a is not None:
        a.validate_for(topology.n)
        keep = ~np.isin(adjacency.cols, a.as_array())
        adjacency = SparseMatrix(
            topology.n, adjacency.rows[keep], adjacency.cols[keep], adjacency.vals[keep]
        )
    rho_sym = symmetrized_spectral_radius(adjacency, tol=tol).value
    if rho_sym <= 0.0:
        raise CalibrationError(
            "uncalibratable: the masked adjacency has spectral radius 0"
        )
    p = float(-np.expm1(-target_rho / rho_sym))
    if not 0.0 < p < 1.0:
        raise CalibrationError(f"calibrated probability {p} leaves (0, 1)")
    h = hazard_from_prob(with_uniform_p(topology, p))
    if a is not None:
        h = mask_columns(h, a)
    achieved = symmetrized_spectral_radius(h, tol=tol).value
    if abs(achieved - target_rho) > 1e-8 * max(1.0, target_rho):
        raise CalibrationError(
            f"calibration verification failed: achieved {achieved}, target {target_rho}"
        )
    return p


def chung_lu_ratio(weights) -> float:
    """The ratio sum(w^2) / sum(w) that controls the giant-component criterion."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0 or np.any(w <= 0):
        raise GeneratorError("chung_lu_ratio: need strictly positive weights")
    return float(np.sum(w * w) / np.sum(w))
