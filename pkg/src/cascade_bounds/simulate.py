"""Monte Carlo cascade simulators, percolation trials, and the exact oracle.

Three equivalent dynamics are implemented as genuinely distinct samplers:

* discrete-time layers with one Bernoulli draw per live attempt,
* a retained-subgraph draw followed by reachability (one coin per undirected
  edge on symmetric graphs, per directed edge otherwise),
* a continuous-time event queue over sampled transmission delays.

Every trial runs on its own counter-based substream keyed by
``(master_seed, trial_index)``, so estimates are reproducible bit-for-bit
regardless of execution order or worker count.  Trial statistics accumulate
as exact integers; mean and standard error are computed once at the end.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import PercolationBoundReport, percolation_bounds
from .graph import GraphError, InfluencerSet, ProbGraph, hazard_from_prob

__all__ = [
    "DynamicsSpec",
    "InfluenceEstimate",
    "PercolationReport",
    "OracleLimitError",
    "trial_rng",
    "TrialStreams",
    "simulate_dtic",
    "simulate_rn",
    "simulate_ctic",
    "simulate_sir_coupled",
    "estimate_influence",
    "estimate_influence_uniform",
    "infection_frequencies",
    "exact_influence_bruteforce",
    "percolation_trial",
    "estimate_percolation",
]

_M64 = (1 << 64) - 1
ORACLE_EDGE_LIMIT = 24


class OracleLimitError(ValueError):
    """Brute-force enumeration refused: too many edge variables."""


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent substream for one trial: Philox keyed by (seed, trial)."""
    key = np.array([master_seed & _M64, trial_index & _M64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class TrialStreams:
    """Reusable per-trial substreams, bit-identical to :func:`trial_rng`.

    Swapping the Philox key in place avoids reconstructing a Generator every
    trial; draws for trial ``i`` match ``trial_rng(master_seed, i)`` exactly.
    """

    def __init__(self, master_seed: int):
        self._bg = np.random.Philox(key=np.array([master_seed & _M64, 0], dtype=np.uint64))
        self._template = self._bg.state
        self._gen = np.random.Generator(self._bg)

    def trial(self, index: int) -> np.random.Generator:
        st = self._template
        st["state"]["counter"][:] = 0
        st["state"]["key"][1] = index & _M64
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen


@dataclass(frozen=True)
class DynamicsSpec:
    """Which infection dynamics to simulate, with rate parameters where needed.

    ``kind`` is one of ``dtic``, ``rn``, ``ctic``, ``sir``.  For ``ctic`` the
    per-edge delay family is either ``fixed_total`` (total hazard taken from
    the graph, matching the hazard matrix) or ``exponential`` (rate
    ``beta * exp(-delta * t)`` on every edge, total hazard ``beta/delta``).
    """

    kind: str
    hazard_family: str = "fixed_total"
    beta: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.kind not in ("dtic", "rn", "ctic", "sir"):
            raise ValueError(f"unknown dynamics kind {self.kind!r}")
        if self.kind == "ctic" and self.hazard_family not in ("fixed_total", "exponential"):
            raise ValueError(f"unknown hazard family {self.hazard_family!r}")
        needs_rates = self.kind == "sir" or (
            self.kind == "ctic" and self.hazard_family == "exponential"
        )
        if needs_rates:
            if self.beta is None or self.delta is None:
                raise ValueError(f"{self.kind} dynamics require beta and delta")
            if self.beta <= 0 or self.delta <= 0:
                raise ValueError("rates must be positive")

    @staticmethod
    def dtic() -> "DynamicsSpec":
        return DynamicsSpec("dtic")

    @staticmethod
    def rn() -> "DynamicsSpec":
        return DynamicsSpec("rn")

    @staticmethod
    def ctic_fixed_total() -> "DynamicsSpec":
        return DynamicsSpec("ctic", "fixed_total")

    @staticmethod
    def ctic_exponential(beta: float, delta: float) -> "DynamicsSpec":
        return DynamicsSpec("ctic", "exponential", beta, delta)

    @staticmethod
    def sir_coupled(beta: float, delta: float) -> "DynamicsSpec":
        return DynamicsSpec("sir", beta=beta, delta=delta)

    def label(self) -> str:
        if self.kind == "ctic":
            return f"ctic:{self.hazard_family}"
        return self.kind

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hazard_family": self.hazard_family if self.kind == "ctic" else None,
            "beta": self.beta,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class InfluenceEstimate:
    """Monte Carlo influence estimate with exact-integer provenance."""

    mean: float
    std_error: float
    trials: int
    master_seed: int
    dynamics: DynamicsSpec

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "dynamics": self.dynamics.to_json_dict(),
        }


@dataclass(frozen=True)
class PercolationReport:
    """Largest-component statistics over retained-subgraph draws."""

    mean_c1: float
    se_c1: float
    connect_freq: float
    trials: int
    master_seed: int
    bounds: PercolationBoundReport

    def to_json_dict(self) -> dict:
        return {
            "mean_C1": self.mean_c1,
            "se_C1": self.se_c1,
            "connect_freq": self.connect_freq,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "bounds": self.bounds.to_json_dict(),
        }


# ---------------------------------------------------------------------------
# single-trial simulators

def _seed_masks(n: int, seeds: np.ndarray):
    infected = np.zeros(n, dtype=bool)
    infected[seeds] = True
    return infected


# A layer can enumerate frontier out-edges two ways: scanning a frontier mask
# over the whole edge array (O(E), lean constants) or gathering CSR ranges
# (O(frontier degree sum), a few extra calls).  Sorted frontier ids make both
# produce the same edges in the same ascending order, so the choice never
# changes which uniform lands on which edge.  Small graphs scan; large graphs
# gather, which is what keeps dense topologies with small cascades cheap.
_SCAN_EDGE_LIMIT = 4096


def _gather_edges(out_ptr, fids):
    counts = out_ptr[fids + 1] - out_ptr[fids]
    total = int(counts.sum())
    if total == 0:
        return None
    cum = np.cumsum(counts)
    return np.arange(total) + np.repeat(out_ptr[fids] - (cum - counts), counts)


def _dtic_mask(g: ProbGraph, seeds: np.ndarray, rng) -> np.ndarray:
    # Layered spread.  At most one direction of any undirected edge is ever
    # attempted (the target of the other direction is already infected), so
    # per-attempt draws realize one Bernoulli per undirected edge as well.
    src, dst, p = g.src, g.dst, g.p
    scan = g.edge_count < _SCAN_EDGE_LIMIT
    infected = _seed_masks(g.n, seeds)
    fmask = _seed_masks(g.n, seeds)
    while True:
        if scan:
            sel = fmask[src]
            if not sel.any():
                return infected
        else:
            sel = _gather_edges(g.out_ptr, np.flatnonzero(fmask))
            if sel is None:
                return infected
        cand = dst[sel]
        hit = cand[rng.random(cand.size) < p[sel]]
        fmask = np.zeros(g.n, dtype=bool)
        fmask[hit] = True
        fmask &= ~infected
        if not fmask.any():
            return infected
        infected |= fmask


def _reach_mask(g: ProbGraph, seeds: np.ndarray, keep_edge: np.ndarray) -> np.ndarray:
    src, dst = g.src, g.dst
    scan = g.edge_count < _SCAN_EDGE_LIMIT
    infected = _seed_masks(g.n, seeds)
    fmask = _seed_masks(g.n, seeds)
    while True:
        if scan:
            live = fmask[src] & keep_edge
        else:
            sel = _gather_edges(g.out_ptr, np.flatnonzero(fmask))
            if sel is None:
                return infected
            live = sel[keep_edge[sel]]
        fmask = np.zeros(g.n, dtype=bool)
        fmask[dst[live]] = True
        fmask &= ~infected
        if not fmask.any():
            return infected
        infected |= fmask


def _rn_mask(g: ProbGraph, seeds: np.ndarray, rng) -> np.ndarray:
    if g.is_symmetric():
        _, _, u_p, und_of_edge = g.undirected_view()
        keep = (rng.random(u_p.size) < u_p)[und_of_edge]
    else:
        keep = rng.random(g.edge_count) < g.p
    return _reach_mask(g, seeds, keep)


def _ctic_delays(g: ProbGraph, spec: DynamicsSpec, rng) -> np.ndarray:
    """Per-edge transmission delay; inf where the edge never transmits."""
    m = g.edge_count
    u = rng.random(m)
    if spec.hazard_family == "exponential":
        total = np.full(m, spec.beta / spec.delta)
        decay = spec.delta
    else:
        total = -np.log1p(-g.p)
        decay = 1.0
    delays = np.full(m, np.inf)
    finite = u < -np.expm1(-total)
    idx = np.flatnonzero(finite)
    if idx.size:
        delays[idx] = -np.log1p(np.log1p(-u[idx]) / total[idx]) / decay
    return delays


def _ctic_mask(g: ProbGraph, seeds: np.ndarray, spec: DynamicsSpec, rng) -> np.ndarray:
    infected = _seed_masks(g.n, seeds)
    if int(infected.sum()) == g.n:
        return infected
    delays = _ctic_delays(g, spec, rng).tolist()
    out_ptr = g.out_ptr.tolist()
    dst = g.dst.tolist()
    n = g.n
    times = [math.inf] * n
    heap = []
    for v in seeds.tolist():
        times[v] = 0.0
        heap.append((0.0, v, -1))
    heapq.heapify(heap)
    settled = [False] * n
    while heap:
        # ties break on (time, target, source); continuous delays make exact
        # ties a measure-zero event
        t, v, _ = heapq.heappop(heap)
        if settled[v]:
            continue
        settled[v] = True
        infected[v] = True
        for e in range(out_ptr[v], out_ptr[v + 1]):
            nt = t + delays[e]
            w = dst[e]
            if nt < times[w]:
                times[w] = nt
                heapq.heappush(heap, (nt, w, v))
    return infected


def _sir_mask(g: ProbGraph, seeds: np.ndarray, beta: float, delta: float, rng) -> np.ndarray:
    # One removal clock per node, shared by its out-edges; an edge transmits
    # iff its first attempt lands before the source is removed.  Infection is
    # permanent, so the final set is reachability over transmitting edges.
    removal = rng.exponential(1.0 / delta, g.n)
    attempt = rng.exponential(1.0 / beta, g.edge_count)
    keep = attempt < removal[g.src]
    return _reach_mask(g, seeds, keep)


def simulate_dtic(g: ProbGraph, a: InfluencerSet, rng) -> np.ndarray:
    """One discrete-time cascade; returns the sorted infected node ids."""
    a.validate_for(g.n)
    return np.flatnonzero(_dtic_mask(g, a.as_array(), rng))


def simulate_rn(g: ProbGraph, a: InfluencerSet, rng) -> np.ndarray:
    """One retained-subgraph draw; returns nodes reachable from ``a``."""
    a.validate_for(g.n)
    return np.flatnonzero(_rn_mask(g, a.as_array(), rng))


def simulate_ctic(g: ProbGraph, a: InfluencerSet, spec: DynamicsSpec, rng) -> np.ndarray:
    """One continuous-time cascade at infinite horizon via an event queue."""
    if spec.kind != "ctic":
        raise ValueError(f"expected a ctic dynamics spec, got {spec.kind!r}")
    a.validate_for(g.n)
    return np.flatnonzero(_ctic_mask(g, a.as_array(), spec, rng))


def simulate_sir_coupled(
    g: ProbGraph, a: InfluencerSet, beta: float, delta: float, rng
) -> np.ndarray:
    """One SIR epidemic with per-node removal clocks shared across out-edges.

    Provided for empirical comparison: the shared clock couples a node's
    out-edges, which the other dynamics do not.
    """
    if beta <= 0 or delta <= 0:
        raise ValueError("rates must be positive")
    a.validate_for(g.n)
    return np.flatnonzero(_sir_mask(g, a.as_array(), beta, delta, rng))


def _run_trial_mask(g, seeds, spec, rng) -> np.ndarray:
    if spec.kind == "dtic":
        return _dtic_mask(g, seeds, rng)
    if spec.kind == "rn":
        return _rn_mask(g, seeds, rng)
    if spec.kind == "ctic":
        return _ctic_mask(g, seeds, spec, rng)
    return _sir_mask(g, seeds, spec.beta, spec.delta, rng)


# ---------------------------------------------------------------------------
# estimators

def _mean_se(s1: int, s2: int, trials: int) -> tuple[float, float]:
    mean = s1 / trials
    if trials < 2:
        return mean, 0.0
    num = trials * s2 - s1 * s1
    if num < 0:  # exact-integer arithmetic; negative only via degenerate rounding
        num = 0
    return mean, math.sqrt(num / (trials - 1)) / trials


def _influence_chunk(args) -> tuple[int, int]:
    g, a_members, n0_uniform, spec, master_seed, lo, hi = args
    streams = TrialStreams(master_seed)
    s1 = s2 = 0
    if n0_uniform is None:
        seeds = np.asarray(a_members, dtype=np.int64)
        for t in range(lo, hi):
            size = int(np.count_nonzero(_run_trial_mask(g, seeds, spec, streams.trial(t))))
            s1 += size
            s2 += size * size
    else:
        for t in range(lo, hi):
            rng = streams.trial(t)
            seeds = rng.choice(g.n, size=n0_uniform, replace=False).astype(np.int64)
            size = int(np.count_nonzero(_run_trial_mask(g, seeds, spec, rng)))
            s1 += size
            s2 += size * size
    return s1, s2


def _chunk_ranges(trials: int, workers: int):
    step = (trials + workers - 1) // workers
    return [(lo, min(lo + step, trials)) for lo in range(0, trials, step)]


def _estimate(
    g, a_members, n0_uniform, spec, trials, master_seed, workers, trial_log
) -> InfluenceEstimate:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if workers > 1 and trial_log is not None:
        raise ValueError("trial logging requires workers=1")
    if workers > 1:
        chunks = [
            (g, a_members, n0_uniform, spec, master_seed, lo, hi)
            for lo, hi in _chunk_ranges(trials, workers)
        ]
        s1 = s2 = 0
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for c1, c2 in pool.map(_influence_chunk, chunks):
                s1 += c1
                s2 += c2
    elif trial_log is None:
        s1, s2 = _influence_chunk((g, a_members, n0_uniform, spec, master_seed, 0, trials))
    else:
        streams = TrialStreams(master_seed)
        s1 = s2 = 0
        seeds = None if n0_uniform is not None else np.asarray(a_members, dtype=np.int64)
        for t in range(trials):
            rng = streams.trial(t)
            if n0_uniform is not None:
                seeds = rng.choice(g.n, size=n0_uniform, replace=False).astype(np.int64)
            size = int(np.count_nonzero(_run_trial_mask(g, seeds, spec, rng)))
            s1 += size
            s2 += size * size
            trial_log.write(f"{t} {size}\n")
    mean, se = _mean_se(s1, s2, trials)
    return InfluenceEstimate(mean, se, trials, master_seed, spec)


def estimate_influence(
    g: ProbGraph,
    a: InfluencerSet,
    spec: DynamicsSpec,
    trials: int,
    master_seed: int,
    workers: int = 1,
    trial_log=None,
) -> InfluenceEstimate:
    """Mean and standard error of the infected-set size for a fixed set."""
    a.validate_for(g.n)
    return _estimate(g, a.members, None, spec, trials, master_seed, workers, trial_log)


def estimate_influence_uniform(
    g: ProbGraph,
    n0: int,
    spec: DynamicsSpec,
    trials: int,
    master_seed: int,
    workers: int = 1,
    trial_log=None,
) -> InfluenceEstimate:
    """As :func:`estimate_influence` with a fresh uniform ``n0``-set per trial."""
    if not 1 <= n0 <= g.n:
        raise GraphError(f"need 1 <= n0 <= n, got n0={n0}, n={g.n}")
    return _estimate(g, None, n0, spec, trials, master_seed, workers, trial_log)


def infection_frequencies(
    g: ProbGraph,
    a: InfluencerSet,
    spec: DynamicsSpec,
    trials: int,
    master_seed: int,
) -> np.ndarray:
    """Per-node infection frequency across trials (length-n array)."""
    a.validate_for(g.n)
    seeds = a.as_array()
    counts = np.zeros(g.n, dtype=np.int64)
    streams = TrialStreams(master_seed)
    for t in range(trials):
        counts += _run_trial_mask(g, seeds, spec, streams.trial(t))
    return counts / trials


# ---------------------------------------------------------------------------
# exact small-graph oracle

def exact_influence_bruteforce(g: ProbGraph, a: InfluencerSet) -> float:
    """Exact influence by enumerating every edge-variable subset.

    Symmetric graphs enumerate one variable per undirected edge (each coin
    feeds both directions), halving the exponent; directed graphs enumerate
    per directed edge.  Refuses more than 24 variables.
    """
    a.validate_for(g.n)
    if g.is_symmetric():
        u_src, u_dst, u_p, _ = g.undirected_view()
        arcs = [((int(s), int(d)), (int(d), int(s))) for s, d in zip(u_src, u_dst)]
        probs = [float(x) for x in u_p]
    else:
        arcs = [((int(s), int(d)),) for s, d in zip(g.src, g.dst)]
        probs = [float(x) for x in g.p]
    m = len(probs)
    if m > ORACLE_EDGE_LIMIT:
        raise OracleLimitError(
            f"oracle limit: {m} edge variables exceed the {ORACLE_EDGE_LIMIT}-variable cap"
        )
    seeds = list(a.members)
    total = 0.0
    for mask in range(1 << m):
        prob = 1.0
        adj: dict[int, list[int]] = {}
        for k in range(m):
            if mask >> k & 1:
                prob *= probs[k]
                for s, d in arcs[k]:
                    adj.setdefault(s, []).append(d)
            else:
                prob *= 1.0 - probs[k]
        seen = set(seeds)
        stack = list(seeds)
        while stack:
            v = stack.pop()
            for w in adj.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        total += prob * len(seen)
    return total


# ---------------------------------------------------------------------------
# bond percolation

def percolation_trial(g: ProbGraph, rng) -> np.ndarray:
    """One retained-subgraph draw; returns component sizes, largest first."""
    if not g.is_symmetric():
        raise GraphError("percolation requires a symmetric (undirected) graph")
    u_src, u_dst, u_p, _ = g.undirected_view()
    keep = rng.random(u_p.size) < u_p
    n = g.n
    parent = list(range(n))
    size = [1] * n
    for s, d in zip(u_src[keep].tolist(), u_dst[keep].tolist()):
        while parent[s] != s:
            parent[s] = parent[parent[s]]
            s = parent[s]
        while parent[d] != d:
            parent[d] = parent[parent[d]]
            d = parent[d]
        if s != d:
            if size[s] < size[d]:
                s, d = d, s
            parent[d] = s
            size[s] += size[d]
    sizes = [size[v] for v in range(n) if parent[v] == v]
    return np.sort(np.asarray(sizes, dtype=np.int64))[::-1]


def estimate_percolation(
    g: ProbGraph, trials: int, master_seed: int
) -> PercolationReport:
    """Mean largest-component size, its SE, and the connectivity frequency."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not g.is_symmetric():
        raise GraphError("percolation requires a symmetric (undirected) graph")
    streams = TrialStreams(master_seed)
    s1 = s2 = connected = 0
    for t in range(trials):
        sizes = percolation_trial(g, streams.trial(t))
        c1 = int(sizes[0])
        s1 += c1
        s2 += c1 * c1
        if c1 == g.n:
            connected += 1
    mean, se = _mean_se(s1, s2, trials)
    return PercolationReport(
        mean_c1=mean,
        se_c1=se,
        connect_freq=connected / trials,
        trials=trials,
        master_seed=master_seed,
        bounds=percolation_bounds(hazard_from_prob(g)),
    )
