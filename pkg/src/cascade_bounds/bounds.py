"""Implicit-equation solvers and the influence / percolation upper bounds.

Three scalar roots drive every bound:

* ``gamma1``: smallest root in [0, 1] of
  ``g - 1 + exp(-rho*g - rho*n0 / (g*(n - n0)))`` -- worst-case influencer set;
* ``gamma2``: unique root of ``g - 1 + exp(-rho*g - rho*n0 / (n - n0))`` --
  uniformly drawn influencer set;
* ``gamma3``: unique root of
  ``g - 1 + ((n-1)/n) * exp(-(n/(n-1)) * rho * g)`` -- largest percolation
  component.

``rho`` is the symmetrized spectral radius of the (masked) hazard matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import HazardMatrix, InfluencerSet
from .spectral import DEFAULT_TOL, rho_c_of_set, symmetrized_spectral_radius

__all__ = [
    "BoundsError",
    "BoundReport",
    "PercolationBoundReport",
    "SirParams",
    "solve_gamma1",
    "solve_gamma2",
    "solve_gamma3",
    "er_giant_fraction",
    "closed_form_any_set",
    "closed_form_uniform",
    "influence_bound_any_set",
    "influence_bound_uniform",
    "percolation_bounds",
    "sir_bound_draief",
    "compare_sir_bounds",
]

ROOT_TOL = 1e-12
MAX_BISECTIONS = 200
GRID_POINTS = 10_000


class BoundsError(ValueError):
    """Invalid solver input or precondition violation."""


def _bisect(f, lo: float, hi: float, tol: float, max_steps: int = MAX_BISECTIONS):
    """Bisection on a bracketed sign change; stops on |f| <= tol."""
    flo, fhi = f(lo), f(hi)
    if flo > 0.0 or fhi < 0.0:
        raise BoundsError(f"root not bracketed on [{lo}, {hi}]: f={flo}, {fhi}")
    if abs(flo) <= tol:
        return lo, abs(flo)
    if fhi == 0.0:
        return hi, 0.0
    mid, fmid = lo, flo
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= tol:
            return mid, abs(fmid)
        if fmid < 0.0:
            lo = mid
        else:
            hi = mid
    raise BoundsError(f"bisection stalled: |f({mid})| = {abs(fmid):.3e} > {tol}")


def _check_n_n0(n: int, n0: int) -> None:
    if n0 < 1:
        raise BoundsError(f"influencer count must be >= 1, got {n0}")
    if n0 >= n:
        raise BoundsError(f"requires n0 < n, got n0={n0}, n={n}")


def solve_gamma1(rho_cA: float, n: int, n0: int, tol: float = ROOT_TOL) -> float:
    """Smallest root of the worst-case bound equation.

    The equation may admit several roots; a uniform scan over (0, 1] locates
    the first sign change from negative (the limit at 0+ is -1 for rho > 0)
    and bisection refines it to ``|f| <= tol``.
    """
    _check_n_n0(n, n0)
    if rho_cA < 0:
        raise BoundsError(f"spectral radius must be nonnegative, got {rho_cA}")
    if rho_cA == 0.0:
        return 0.0
    c = rho_cA * n0 / (n - n0)

    def f(g: float) -> float:
        # exp underflows to 0 for tiny g; that is the intended limit
        return g - 1.0 + math.exp(-rho_cA * g - c / g)

    grid = np.arange(1, GRID_POINTS + 1) / GRID_POINTS
    vals = grid - 1.0 + np.exp(-rho_cA * grid - c / grid)
    first = int(np.argmax(vals >= 0.0))  # f(1) > 0 always, so this exists
    lo = 1e-300 if first == 0 else float(grid[first - 1])
    root, _ = _bisect(f, lo, float(grid[first]), tol)
    return min(max(root, 0.0), 1.0)


def solve_gamma2(rho_c: float, n: int, n0: int, tol: float = ROOT_TOL) -> float:
    """Unique root of the uniform-influencer bound equation."""
    _check_n_n0(n, n0)
    if rho_c < 0:
        raise BoundsError(f"spectral radius must be nonnegative, got {rho_c}")
    if rho_c == 0.0:
        return 0.0
    c = rho_c * n0 / (n - n0)

    def f(g: float) -> float:
        return g - 1.0 + math.exp(-rho_c * g - c)

    root, _ = _bisect(f, 0.0, 1.0, tol)
    return min(max(root, 0.0), 1.0)


def solve_gamma3(rho_H: float, n: int, tol: float = ROOT_TOL) -> float:
    """Unique root of the percolation component-size equation."""
    if n < 2:
        raise BoundsError(f"requires n >= 2, got {n}")
    if rho_H < 0:
        raise BoundsError(f"spectral radius must be nonnegative, got {rho_H}")
    frac = (n - 1) / n

    def f(g: float) -> float:
        return g - 1.0 + frac * math.exp(-rho_H * g / frac)

    root, _ = _bisect(f, 0.0, 1.0, tol)
    return min(max(root, 0.0), 1.0)


def er_giant_fraction(c: float, tol: float = ROOT_TOL) -> float:
    """Positive root of ``b - 1 + exp(-b*c) = 0``; 0 for c <= 1.

    The asymptotic giant-component fraction of a mean-degree-c random graph.
    """
    if c <= 1.0:
        return 0.0

    def f(b: float) -> float:
        return b - 1.0 + math.exp(-b * c)

    root, _ = _bisect(f, 1e-9, 1.0, tol)
    return root


def closed_form_any_set(rho_cA: float, n: int, n0: int) -> float:
    """Closed-form relaxation of the worst-case bound.

    Subcritical branch for rho < 1; the boundary rho = 1 takes the
    supercritical branch.
    """
    _check_n_n0(n, n0)
    if rho_cA < 1.0:
        return n0 + math.sqrt(rho_cA / (1.0 - rho_cA)) * math.sqrt(n0 * (n - n0))
    return n - (n - n0) * math.exp(
        -rho_cA - 2.0 * rho_cA / (math.sqrt(4.0 * n / n0 - 3.0) - 1.0)
    )


def closed_form_uniform(rho_c: float, n: int, n0: int) -> float:
    """Closed-form relaxation of the uniform-influencer bound."""
    _check_n_n0(n, n0)
    if rho_c < 1.0:
        return n0 / (1.0 - rho_c)
    return n - (n - n0) * math.exp(-rho_c / (1.0 - n0 / n))


@dataclass(frozen=True)
class BoundReport:
    """One solved influence bound with its inputs and solver diagnostics."""

    rho: float
    gamma: float
    bound_sigma: float
    regime: str  # "subcritical" | "supercritical"
    closed_form_bound: float | None
    n: int
    n0: int
    solver_residual: float

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho,
            "gamma": self.gamma,
            "bound_sigma": self.bound_sigma,
            "closed_form_bound": self.closed_form_bound,
            "regime": self.regime,
            "n": self.n,
            "n0": self.n0,
            "solver_residual": self.solver_residual,
        }


def _regime(rho: float) -> str:
    return "subcritical" if rho < 1.0 else "supercritical"


def influence_bound_any_set(
    h: HazardMatrix, a: InfluencerSet, tol: float = DEFAULT_TOL
) -> BoundReport:
    """Worst-case influence bound ``n0 + gamma1 * (n - n0)`` for a fixed set."""
    a.validate_for(h.n)
    n, n0 = h.n, a.n0
    _check_n_n0(n, n0)
    rho = rho_c_of_set(h, a, tol=tol).value
    gamma = solve_gamma1(rho, n, n0)
    if rho == 0.0:
        residual = 0.0
    else:
        c = rho * n0 / (n - n0)
        residual = abs(gamma - 1.0 + math.exp(-rho * gamma - c / gamma)) if gamma > 0 else 1.0
    return BoundReport(
        rho=rho,
        gamma=gamma,
        bound_sigma=n0 + gamma * (n - n0),
        regime=_regime(rho),
        closed_form_bound=closed_form_any_set(rho, n, n0),
        n=n,
        n0=n0,
        solver_residual=residual,
    )


def influence_bound_uniform(
    h: HazardMatrix, n0: int, tol: float = DEFAULT_TOL
) -> BoundReport:
    """Uniform-influencer bound ``n0 + gamma2 * (n - n0)``."""
    n = h.n
    _check_n_n0(n, n0)
    rho = symmetrized_spectral_radius(h, tol=tol).value
    gamma = solve_gamma2(rho, n, n0)
    residual = abs(gamma - 1.0 + math.exp(-rho * gamma - rho * n0 / (n - n0)))
    return BoundReport(
        rho=rho,
        gamma=gamma,
        bound_sigma=n0 + gamma * (n - n0),
        regime=_regime(rho),
        closed_form_bound=closed_form_uniform(rho, n, n0),
        n=n,
        n0=n0,
        solver_residual=residual,
    )


@dataclass(frozen=True)
class PercolationBoundReport:
    """Bounds on the largest retained component and on connectivity."""

    rho: float
    gamma3: float
    bound_c1: float       # n * sqrt(gamma3) >= E[largest component]
    bound_connect: float  # gamma3 >= P(retained graph is connected)
    closed_form: float | None  # sqrt(n / (1 - rho)) when rho < 1
    n: int
    solver_residual: float

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho,
            "gamma3": self.gamma3,
            "bound_c1": self.bound_c1,
            "bound_connect": self.bound_connect,
            "closed_form": self.closed_form,
            "n": self.n,
            "solver_residual": self.solver_residual,
        }


def percolation_bounds(h: HazardMatrix, tol: float = DEFAULT_TOL) -> PercolationBoundReport:
    """Component-size and connectivity bounds for an undirected graph."""
    if h.masked_set is not None:
        raise BoundsError("percolation bounds require the unmasked hazard matrix")
    if not h.is_symmetric():
        raise BoundsError("percolation bounds require symmetric probabilities")
    n = h.n
    if n < 2:
        raise BoundsError(f"requires n >= 2, got {n}")
    rho = symmetrized_spectral_radius(h, tol=tol).value
    gamma3 = solve_gamma3(rho, n)
    frac = (n - 1) / n
    residual = abs(gamma3 - 1.0 + frac * math.exp(-rho * gamma3 / frac))
    closed = math.sqrt(n / (1.0 - rho)) if rho < 1.0 else None
    return PercolationBoundReport(
        rho=rho,
        gamma3=gamma3,
        bound_c1=n * math.sqrt(gamma3),
        bound_connect=gamma3,
        closed_form=closed,
        n=n,
        solver_residual=residual,
    )


@dataclass(frozen=True)
class SirParams:
    """Susceptible-infected-removed rates and the adjacency spectral radius."""

    beta: float
    delta: float
    rho_adj: float

    def __post_init__(self):
        if self.beta <= 0 or self.delta <= 0:
            raise BoundsError("transmission and removal rates must be positive")
        if self.rho_adj < 0:
            raise BoundsError("adjacency spectral radius must be nonnegative")

    @property
    def ratio(self) -> float:
        return self.beta / self.delta


def sir_bound_draief(s: SirParams, n: int, n0: int) -> float:
    """The Draief-Ganesh-Massoulie bound ``sqrt(n*n0) / (1 - (beta/delta)*rho)``.

    Only defined below the epidemic threshold ``beta < delta / rho_adj``.
    """
    if n0 < 1 or n0 > n:
        raise BoundsError(f"need 1 <= n0 <= n, got n0={n0}, n={n}")
    level = s.ratio * s.rho_adj
    if level >= 1.0:
        raise BoundsError(
            f"supercritical parameters: (beta/delta)*rho_adj = {level} >= 1"
        )
    return math.sqrt(n * n0) / (1.0 - level)


def compare_sir_bounds(
    h: HazardMatrix, a: InfluencerSet, s: SirParams, tol: float = DEFAULT_TOL
):
    """Our closed-form subcritical bound against the classical SIR bound.

    ``h`` must be the SIR-mapped hazard matrix: symmetric with every entry
    equal to ``beta/delta``.  Returns ``(ours, theirs, dominance)`` where
    dominance asserts ours <= theirs up to 1e-8.
    """
    a.validate_for(h.n)
    ratio = s.ratio
    if h.entry_count == 0:
        raise BoundsError("SIR comparison requires a nonempty hazard matrix")
    if not h.is_symmetric():
        raise BoundsError("SIR comparison requires a symmetric hazard matrix")
    dev = float(np.max(np.abs(h.vals - ratio)))
    if dev > 1e-9 * ratio:
        raise BoundsError(
            "hazard matrix is not the SIR mapping: entries differ from beta/delta "
            f"by up to {dev:.3e}"
        )
    level = ratio * s.rho_adj
    if level >= 1.0:
        raise BoundsError(
            f"supercritical parameters: (beta/delta)*rho_adj = {level} >= 1"
        )
    n, n0 = h.n, a.n0
    _check_n_n0(n, n0)
    rho_ca = rho_c_of_set(h, a, tol=tol).value
    ours = closed_form_any_set(rho_ca, n, n0)
    theirs = sir_bound_draief(s, n, n0)
    return ours, theirs, bool(ours <= theirs + 1e-8)
