"""Spectral-radius estimation for sparse nonnegative matrices.

The production path is shifted power iteration on the symmetrized operator
``(M + M^T) / 2``, applied through the sparse entries without materializing
the symmetrized matrix.  A dense eigensolver serves as the fallback for
non-converged cases at small dimension and as the independent test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import GraphError, HazardMatrix, InfluencerSet, ProbGraph, mask_columns

__all__ = [
    "SpectralError",
    "SpectralResult",
    "SparseMatrix",
    "symmetrized_spectral_radius",
    "rho_c_of_set",
    "nonnegative_spectral_radius",
    "sandwich_check",
    "dense_symmetrized_radius",
    "dense_spectral_radius",
]

DEFAULT_TOL = 1e-10
DENSE_FALLBACK_LIMIT = 2000
# stall: relative residual improvement below this for 50 consecutive iterations
_STALL_REL = 1e-14
_STALL_RUN = 50


class SpectralError(RuntimeError):
    """Power iteration failed to converge and no dense fallback applies."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SpectralResult:
    """Spectral-radius estimate with convergence diagnostics.

    ``residual`` is ``||Mx - lambda*x||_2 / ||x||_2`` at termination; it is at
    most the requested tolerance when ``method == "power-iteration"`` and 0 for
    the dense oracle.
    """

    value: float
    iterations: int
    residual: float
    method: str  # "power-iteration" | "dense-oracle"


class SparseMatrix:
    """Nonnegative matrix in coordinate form, for radius computations."""

    __slots__ = ("n", "rows", "cols", "vals")

    def __init__(self, n, rows, cols, vals):
        self.n = int(n)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=np.float64)
        if self.vals.size and self.vals.min() < 0:
            raise ValueError("matrix entries must be nonnegative")

    @classmethod
    def from_probabilities(cls, g: ProbGraph) -> "SparseMatrix":
        return cls(g.n, g.src, g.dst, g.p)

    @classmethod
    def adjacency(cls, g: ProbGraph) -> "SparseMatrix":
        return cls(g.n, g.src, g.dst, np.ones(g.edge_count))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.rows, self.cols] = self.vals
        return out


def _matvec(rows, cols, vals, x, n):
    # bincount sums in index order: deterministic for fixed inputs
    return np.bincount(rows, weights=vals * x[cols], minlength=n)


def _power_iteration(apply_op, n, row_sum_max, tol, max_iter):
    """Shifted power iteration; returns (value, iterations, residual, converged).

    The additive shift ``c = row_sum_max * 1e-3`` breaks the sign oscillation
    of +/- dominant eigenvalue pairs; it is subtracted from the result.
    Convergence needs the residual under ``tol`` and a stabilized eigenvalue
    estimate: for defective matrices the Rayleigh residual alone can pass
    while the eigenvalue is still off by its square root.
    """
    c = row_sum_max * 1e-3
    x = np.full(n, 1.0 / np.sqrt(n))
    prev_resid = np.inf
    prev_lam = np.inf
    stall = 0
    lam = 0.0
    resid = np.inf
    for it in range(1, max_iter + 1):
        y = apply_op(x) + c * x
        lam_shifted = float(x @ y)
        resid = float(np.linalg.norm(y - lam_shifted * x))
        lam = lam_shifted - c
        if resid <= tol and abs(lam - prev_lam) <= tol * max(1.0, abs(lam)):
            return max(lam, 0.0), it, resid, True
        prev_lam = lam
        norm_y = float(np.linalg.norm(y))
        if norm_y == 0.0:
            # x lies in the kernel; with c > 0 this only happens for zero input
            return 0.0, it, 0.0, True
        x = y / norm_y
        if prev_resid - resid < _STALL_REL * prev_resid:
            stall += 1
            if stall >= _STALL_RUN:
                return max(lam, 0.0), it, resid, False
        else:
            stall = 0
        prev_resid = resid
    return max(lam, 0.0), max_iter, resid, False


def dense_symmetrized_radius(m) -> float:
    """Oracle: largest |eigenvalue| of ``(M + M^T)/2`` by dense eigensolver."""
    dense = m.to_dense()
    sym = 0.5 * (dense + dense.T)
    if sym.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(sym))))


def dense_spectral_radius(m) -> float:
    """Oracle: largest eigenvalue modulus of ``M`` by dense eigensolver."""
    dense = m.to_dense()
    if dense.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(dense))))


def _default_max_iter(n: int) -> int:
    return 100 * n + 1000


def symmetrized_spectral_radius(
    h, tol: float = DEFAULT_TOL, max_iter: int | None = None
) -> SpectralResult:
    """Spectral radius of ``(H + H^T) / 2`` for a sparse nonnegative ``H``.

    Accepts a :class:`HazardMatrix` or :class:`SparseMatrix`.  Matrix-vector
    products use the sparse entries of H and its transpose directly.  The
    all-zero matrix returns 0 immediately.  Non-convergence falls back to the
    dense oracle for n <= 2000 and raises :class:`SpectralError` otherwise.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    n, rows, cols, vals = h.n, h.rows, h.cols, h.vals
    if vals.size == 0 or float(vals.max()) == 0.0:
        return SpectralResult(0.0, 0, 0.0, "power-iteration")
    if max_iter is None:
        max_iter = _default_max_iter(n)

    def apply_op(x):
        fwd = _matvec(rows, cols, vals, x, n)
        bwd = _matvec(cols, rows, vals, x, n)
        return 0.5 * (fwd + bwd)

    row_sums = 0.5 * (
        np.bincount(rows, weights=vals, minlength=n)
        + np.bincount(cols, weights=vals, minlength=n)
    )
    value, iters, resid, ok = _power_iteration(
        apply_op, n, float(row_sums.max()), tol, max_iter
    )
    if ok:
        return SpectralResult(value, iters, resid, "power-iteration")
    if n <= DENSE_FALLBACK_LIMIT:
        return SpectralResult(dense_symmetrized_radius(h), iters, 0.0, "dense-oracle")
    raise SpectralError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last residual {resid:.3e}) and n={n} exceeds the dense fallback limit",
        residual=resid,
    )


def rho_c_of_set(
    h: HazardMatrix, a: InfluencerSet, tol: float = DEFAULT_TOL
) -> SpectralResult:
    """Symmetrized spectral radius of the column-masked hazard matrix."""
    if h.masked_set is not None:
        raise GraphError("expected an unmasked hazard matrix")
    return symmetrized_spectral_radius(mask_columns(h, a), tol=tol)


def nonnegative_spectral_radius(
    m, tol: float = DEFAULT_TOL, max_iter: int | None = None
) -> SpectralResult:
    """Spectral radius of a possibly nonsymmetric nonnegative sparse matrix.

    Power iteration with the same additive shift; reducible or periodic
    matrices that stall fall back to the dense oracle for n <= 2000.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    n, rows, cols, vals = m.n, m.rows, m.cols, m.vals
    if vals.size == 0 or float(vals.max()) == 0.0:
        return SpectralResult(0.0, 0, 0.0, "power-iteration")
    if max_iter is None:
        max_iter = _default_max_iter(n)

    def apply_op(x):
        return _matvec(rows, cols, vals, x, n)

    row_sums = np.bincount(rows, weights=vals, minlength=n)
    value, iters, resid, ok = _power_iteration(
        apply_op, n, float(row_sums.max()), tol, max_iter
    )
    if ok:
        return SpectralResult(value, iters, resid, "power-iteration")
    if n <= DENSE_FALLBACK_LIMIT:
        return SpectralResult(dense_spectral_radius(m), iters, 0.0, "dense-oracle")
    raise SpectralError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last residual {resid:.3e}) and n={n} exceeds the dense fallback limit",
        residual=resid,
    )


def sandwich_check(g: ProbGraph, tol: float = DEFAULT_TOL):
    """The two radii and the factor tying them: rho(P), rho(H), -ln(1-pmax)/pmax.

    For a nonempty graph ``rho(P) <= rho(H) <= factor * rho(P)`` up to solver
    tolerance; an empty edge set returns (0, 0, 1).
    """
    if g.edge_count == 0:
        return 0.0, 0.0, 1.0
    pmax = float(g.p.max())
    factor = float(-np.log1p(-pmax) / pmax)
    rho_p = nonnegative_spectral_radius(SparseMatrix.from_probabilities(g), tol=tol)
    hazards = SparseMatrix(g.n, g.src, g.dst, -np.log1p(-g.p))
    rho_h = nonnegative_spectral_radius(hazards, tol=tol)
    return rho_p.value, rho_h.value, factor
