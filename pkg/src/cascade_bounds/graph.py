"""Directed probability graphs, hazard matrices, and edge-list file I/O.

A :class:`ProbGraph` stores a directed graph whose edges carry a transmission
probability ``p`` in ``[0, 1)``.  The associated :class:`HazardMatrix` holds
``-ln(1 - p)`` per edge and supports zeroing the columns of an influencer set.
All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GraphError",
    "ProbGraph",
    "HazardMatrix",
    "InfluencerSet",
    "build_graph",
    "build_graph_arrays",
    "with_uniform_p",
    "hazard_from_prob",
    "mask_columns",
    "read_edge_list",
    "write_edge_list",
]


class GraphError(ValueError):
    """Invalid graph construction, masking, or edge-list input."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _entries_symmetric(n: int, rows, cols, vals) -> bool:
    """True when entry (j, i) exists with exactly the value of every (i, j)."""
    if rows.size == 0:
        return True
    keys = rows * np.int64(n) + cols
    order = np.argsort(keys)
    skeys = keys[order]
    svals = vals[order]
    rev = cols * np.int64(n) + rows
    pos = np.searchsorted(skeys, rev)
    inb = pos < skeys.size
    if not inb.all():
        return False
    return bool(np.all((skeys[pos] == rev) & (svals[pos] == vals)))


class InfluencerSet:
    """Initially contagious nodes: a sorted, deduplicated, nonempty id set."""

    __slots__ = ("members", "n0")

    def __init__(self, members: Iterable[int]):
        ids = sorted({int(v) for v in members})
        if not ids:
            raise GraphError("influencer set must contain at least one node")
        if ids[0] < 0:
            raise GraphError(f"negative node id {ids[0]} in influencer set")
        self.members: tuple[int, ...] = tuple(ids)
        self.n0: int = len(ids)

    def validate_for(self, n: int) -> None:
        if self.members[-1] >= n:
            raise GraphError(
                f"influencer id {self.members[-1]} out of range for {n} nodes"
            )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.members, dtype=np.int64)

    def __len__(self) -> int:
        return self.n0

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, v) -> bool:
        return v in self.members

    def __eq__(self, other) -> bool:
        return isinstance(other, InfluencerSet) and self.members == other.members

    def __hash__(self) -> int:
        return hash(self.members)

    def __repr__(self) -> str:
        return f"InfluencerSet({list(self.members)})"


class ProbGraph:
    """Directed sparse graph with per-edge transmission probabilities.

    Edges are stored in canonical ``(src, dst)`` order together with CSR-style
    indexes over both directions, so out- and in-neighborhoods can be walked in
    O(degree).  Use :func:`build_graph` to construct validated instances.
    """

    __slots__ = (
        "n", "src", "dst", "p", "out_ptr", "in_ptr", "in_order",
        "_symmetric", "_und",
    )

    def __init__(self, n, src, dst, p, out_ptr, in_ptr, in_order):
        self.n = int(n)
        self.src = _readonly(src)
        self.dst = _readonly(dst)
        self.p = _readonly(p)
        self.out_ptr = _readonly(out_ptr)
        self.in_ptr = _readonly(in_ptr)
        self.in_order = _readonly(in_order)
        self._symmetric: bool | None = None
        self._und: tuple | None = None

    @property
    def edge_count(self) -> int:
        return self.src.size

    def out_edges(self, v: int) -> np.ndarray:
        """Edge ids leaving ``v`` (contiguous range in canonical order)."""
        return np.arange(self.out_ptr[v], self.out_ptr[v + 1])

    def in_edges(self, v: int) -> np.ndarray:
        """Edge ids entering ``v``."""
        return self.in_order[self.in_ptr[v]:self.in_ptr[v + 1]]

    def edge_keys(self) -> np.ndarray:
        """``src * n + dst`` per edge; ascending in canonical order."""
        return self.src * np.int64(self.n) + self.dst

    def is_symmetric(self) -> bool:
        """True when every edge has a reverse edge with exactly equal p."""
        if self._symmetric is None:
            self._symmetric = _entries_symmetric(self.n, self.src, self.dst, self.p)
        return self._symmetric

    def undirected_view(self):
        """Undirected edges of a symmetric graph.

        Returns ``(u_src, u_dst, u_p, und_of_edge)`` where the first three list
        each undirected pair once (``u_src < u_dst``) and ``und_of_edge`` maps
        every directed edge id to its pair index.
        """
        if not self.is_symmetric():
            raise GraphError("undirected view requires a symmetric graph")
        if self._und is None:
            lo = np.minimum(self.src, self.dst)
            hi = np.maximum(self.src, self.dst)
            first = self.src < self.dst
            u_src = _readonly(lo[first].copy())
            u_dst = _readonly(hi[first].copy())
            u_p = _readonly(self.p[first].copy())
            ckey = lo * np.int64(self.n) + hi
            ukey = u_src * np.int64(self.n) + u_dst  # ascending
            und_of_edge = _readonly(np.searchsorted(ukey, ckey))
            self._und = (u_src, u_dst, u_p, und_of_edge)
        return self._und

    def __repr__(self) -> str:
        return f"ProbGraph(n={self.n}, edges={self.edge_count})"


def build_graph_arrays(n: int, src, dst, p) -> ProbGraph:
    """Validated graph construction from parallel edge arrays.

    Zero-probability edges are dropped; the rest are checked against the graph
    invariants (p in [0,1), no self-loops, no duplicates, ids in range).
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n <= 0:
        raise GraphError(f"node count must be a positive integer, got {n!r}")
    n = int(n)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    p = np.asarray(p, dtype=np.float64)
    if not (src.shape == dst.shape == p.shape) or src.ndim != 1:
        raise GraphError("edge arrays must be one-dimensional and equal length")

    bad = np.flatnonzero(p == 1.0)
    if bad.size:
        i = bad[0]
        raise GraphError(
            f"edge ({src[i]}, {dst[i]}): probability 1 not allowed "
            "(its hazard -ln(1-p) is infinite)"
        )
    bad = np.flatnonzero(~np.isfinite(p) | (p < 0.0) | (p > 1.0))
    if bad.size:
        i = bad[0]
        raise GraphError(f"edge ({src[i]}, {dst[i]}): probability {p[i]!r} outside [0, 1)")
    bad = np.flatnonzero((src < 0) | (src >= n) | (dst < 0) | (dst >= n))
    if bad.size:
        i = bad[0]
        raise GraphError(f"edge ({src[i]}, {dst[i]}): node id out of range [0, {n})")
    bad = np.flatnonzero(src == dst)
    if bad.size:
        raise GraphError(f"self-loop ({src[bad[0]]}, {src[bad[0]]}) not allowed")

    # duplicates are detected before zero-p edges are dropped
    keys = src * np.int64(n) + dst
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    dup = np.flatnonzero(keys[1:] == keys[:-1]) if keys.size else np.empty(0, np.int64)
    if dup.size:
        i = order[dup[0]]
        raise GraphError(f"duplicate edge ({src[i]}, {dst[i]})")

    src, dst, p = src[order], dst[order], p[order]
    nz = p > 0.0  # zero-probability edges are indistinguishable from absent ones
    src, dst, p = src[nz].copy(), dst[nz].copy(), p[nz].copy()

    out_counts = np.bincount(src, minlength=n)
    out_ptr = np.concatenate([[0], np.cumsum(out_counts)]).astype(np.int64)
    in_order = np.lexsort((src, dst)).astype(np.int64)
    in_counts = np.bincount(dst, minlength=n)
    in_ptr = np.concatenate([[0], np.cumsum(in_counts)]).astype(np.int64)
    return ProbGraph(n, src, dst, p, out_ptr, in_ptr, in_order)


def build_graph(n: int, edges: Sequence[tuple]) -> ProbGraph:
    """Build a :class:`ProbGraph` from ``(src, dst, p)`` triples."""
    m = len(edges)
    src = np.empty(m, dtype=np.int64)
    dst = np.empty(m, dtype=np.int64)
    p = np.empty(m, dtype=np.float64)
    for i, e in enumerate(edges):
        if len(e) != 3:
            raise GraphError(f"edge #{i}: expected (src, dst, p), got {e!r}")
        src[i], dst[i], p[i] = int(e[0]), int(e[1]), float(e[2])
    return build_graph_arrays(n, src, dst, p)


def with_uniform_p(g: ProbGraph, p: float) -> ProbGraph:
    """Same topology as ``g`` with every transmission probability set to ``p``."""
    if not (0.0 < p < 1.0):
        raise GraphError(f"uniform probability must lie in (0, 1), got {p!r}")
    return build_graph_arrays(g.n, g.src.copy(), g.dst.copy(), np.full(g.edge_count, p))


class HazardMatrix:
    """Sparse nonnegative matrix with entries ``-ln(1 - p_ij)`` per edge.

    ``masked_set`` records the influencer set whose columns were forced to
    zero, or ``None`` for the unmasked matrix.
    """

    __slots__ = ("n", "rows", "cols", "vals", "masked_set")

    def __init__(self, n, rows, cols, vals, masked_set=None):
        self.n = int(n)
        self.rows = _readonly(rows)
        self.cols = _readonly(cols)
        self.vals = _readonly(vals)
        self.masked_set: InfluencerSet | None = masked_set

    @property
    def entry_count(self) -> int:
        return self.vals.size

    def probabilities(self) -> np.ndarray:
        """Per-entry ``p = 1 - exp(-h)``, the inverse of the hazard map."""
        return -np.expm1(-self.vals)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.rows, self.cols] = self.vals
        return out

    def is_symmetric(self) -> bool:
        return _entries_symmetric(self.n, self.rows, self.cols, self.vals)

    def __repr__(self) -> str:
        m = f", masked={list(self.masked_set)}" if self.masked_set else ""
        return f"HazardMatrix(n={self.n}, entries={self.entry_count}{m})"


def hazard_from_prob(g: ProbGraph) -> HazardMatrix:
    """Hazard matrix of a graph: one entry ``-ln(1 - p)`` per stored edge."""
    vals = -np.log1p(-g.p)
    return HazardMatrix(g.n, g.src.copy(), g.dst.copy(), vals)


def mask_columns(h: HazardMatrix, a: InfluencerSet) -> HazardMatrix:
    """Drop every entry whose column lies in ``a``; records the mask.

    Masking an already-masked matrix is rejected: the composition of two masks
    is ambiguous with respect to which set the result describes.
    """
    if h.masked_set is not None:
        raise GraphError("hazard matrix is already masked; mask the unmasked matrix")
    a.validate_for(h.n)
    keep = ~np.isin(h.cols, a.as_array())
    return HazardMatrix(
        h.n, h.rows[keep].copy(), h.cols[keep].copy(), h.vals[keep].copy(), masked_set=a
    )


# Edge-list text format: first data line is the node count, then one
# "src dst p" line per edge.  '#' starts a comment; blank lines are ignored.
# Canonical write order is sorted by (src, dst) with 17-significant-digit p.

def read_edge_list(path) -> ProbGraph:
    """Parse an edge-list file; malformed lines are reported with line numbers."""
    n = None
    src: list[int] = []
    dst: list[int] = []
    p: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if n is None:
                if len(fields) != 1:
                    raise GraphError(
                        f"{path}:{lineno}: expected the node count alone, got {line!r}"
                    )
                try:
                    n = int(fields[0])
                except ValueError:
                    raise GraphError(
                        f"{path}:{lineno}: unparsable node count {fields[0]!r}"
                    ) from None
                continue
            if len(fields) != 3:
                raise GraphError(
                    f"{path}:{lineno}: expected 'src dst p' (3 fields), got {len(fields)}"
                )
            try:
                s, d = int(fields[0]), int(fields[1])
                prob = float(fields[2])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: unparsable number in {line!r}") from None
            if not math.isfinite(prob) or prob < 0.0 or prob >= 1.0:
                raise GraphError(
                    f"{path}:{lineno}: probability {fields[2]} outside [0, 1)"
                )
            src.append(s)
            dst.append(d)
            p.append(prob)
    if n is None:
        raise GraphError(f"{path}: empty edge-list file")
    try:
        return build_graph_arrays(
            n,
            np.asarray(src, dtype=np.int64),
            np.asarray(dst, dtype=np.int64),
            np.asarray(p, dtype=np.float64),
        )
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from None


def write_edge_list(g: ProbGraph, path) -> None:
    """Write ``g`` in the canonical sorted order; round-trips bit-faithfully."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{g.n}\n")
        for s, d, prob in zip(g.src.tolist(), g.dst.tolist(), g.p.tolist()):
            fh.write(f"{s} {d} {format(prob, '.17g')}\n")
