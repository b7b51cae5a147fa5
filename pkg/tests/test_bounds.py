import itertools
import math

import numpy as np
import pytest

from cascade_bounds import (
    BoundsError,
    InfluencerSet,
    SirParams,
    build_graph,
    closed_form_any_set,
    closed_form_uniform,
    compare_sir_bounds,
    er_giant_fraction,
    exact_influence_bruteforce,
    hazard_from_prob,
    influence_bound_any_set,
    influence_bound_uniform,
    percolation_bounds,
    rho_c_of_set,
    sir_bound_draief,
    solve_gamma1,
    solve_gamma2,
    solve_gamma3,
)

# Constants frozen from an independent bisection oracle (10^6-point scan,
# residual < 1e-15) run before the solvers were written.
GAMMA1_HALF_1001 = 0.03113175736714388     # rho=0.5, n=1001, n0=1
GAMMA2_ONE_1000_10 = 0.13548108948023252   # rho=1.0, n=1000, n0=10
GAMMA3_N2_RHO1 = 0.9207028302184805        # n=2, rho=1.0
BETA_C2 = 0.7968121300200199               # root of b - 1 + exp(-2b)
COR1_SUPER_15_1_101 = 81.94207924102983    # rho=1.5, n0=1, n=101


def f_gamma1(g, rho, n, n0):
    return g - 1.0 + math.exp(-rho * g - rho * n0 / (g * (n - n0)))


def f_gamma2(g, rho, n, n0):
    return g - 1.0 + math.exp(-rho * g - rho * n0 / (n - n0))


def f_gamma3(g, rho, n):
    return g - 1.0 + (n - 1) / n * math.exp(-n / (n - 1) * rho * g)


class TestGamma1:
    def test_zero_radius(self):
        assert solve_gamma1(0.0, 1001, 1) == 0.0

    def test_frozen_value(self):
        assert solve_gamma1(0.5, 1001, 1) == pytest.approx(GAMMA1_HALF_1001, abs=1e-9)

    def test_residual_at_root(self):
        for rho in (0.3, 0.9, 1.7):
            g = solve_gamma1(rho, 500, 5)
            assert abs(f_gamma1(g, rho, 500, 5)) <= 1e-12

    def test_star_tight_point(self):
        # at p = 1/sqrt(n-1) the solution is exactly 1/sqrt(n-1)
        n = 101
        p = 1.0 / math.sqrt(n - 1)
        rho = -math.log(1 - p) / 2.0 * math.sqrt(n - 1)
        assert solve_gamma1(rho, n, 1) == pytest.approx(0.1, abs=1e-11)

    def test_monotone_in_rho(self):
        grid = np.linspace(0.0, 3.0, 40)
        vals = [solve_gamma1(r, 300, 3) for r in grid]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_tiny_radius_small_root(self):
        g = solve_gamma1(1e-10, 1000, 1)
        assert 0.0 < g < 1e-4
        assert abs(f_gamma1(g, 1e-10, 1000, 1)) <= 1e-12

    def test_invalid_sizes(self):
        with pytest.raises(BoundsError):
            solve_gamma1(0.5, 10, 10)
        with pytest.raises(BoundsError):
            solve_gamma1(0.5, 10, 0)
        with pytest.raises(BoundsError):
            solve_gamma1(-0.1, 10, 1)


class TestGamma2:
    def test_zero_radius(self):
        assert solve_gamma2(0.0, 1000, 10) == 0.0

    def test_frozen_value(self):
        assert solve_gamma2(1.0, 1000, 10) == pytest.approx(GAMMA2_ONE_1000_10, abs=1e-9)

    def test_bracket_signs(self):
        assert f_gamma2(0.0, 1.0, 1000, 10) < 0
        assert f_gamma2(1.0, 1.0, 1000, 10) > 0

    def test_limit_matches_giant_fraction(self):
        # n0/(n - n0) -> 0 turns the equation into the giant-component one
        g = solve_gamma2(2.0, 10**9, 1)
        assert g == pytest.approx(er_giant_fraction(2.0), abs=1e-8)

    def test_monotone_in_rho(self):
        vals = [solve_gamma2(r, 200, 4) for r in np.linspace(0, 4, 30)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestGamma3:
    def test_zero_radius_gives_one_over_n(self):
        for n in (2, 7, 1000):
            assert solve_gamma3(0.0, n) == pytest.approx(1.0 / n, abs=1e-12)

    def test_frozen_small_case(self):
        assert solve_gamma3(1.0, 2) == pytest.approx(GAMMA3_N2_RHO1, abs=1e-9)

    def test_large_n_approaches_giant_fraction(self):
        g = solve_gamma3(2.0, 10**5)
        assert abs(g - BETA_C2) < 1e-3

    def test_residual(self):
        g = solve_gamma3(1.3, 50)
        assert abs(f_gamma3(g, 1.3, 50)) <= 1e-12

    def test_small_n_rejected(self):
        with pytest.raises(BoundsError):
            solve_gamma3(1.0, 1)

    def test_monotone_in_rho(self):
        vals = [solve_gamma3(r, 100) for r in np.linspace(0, 4, 30)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestGiantFraction:
    def test_at_and_below_one(self):
        assert er_giant_fraction(1.0) == 0.0
        assert er_giant_fraction(0.5) == 0.0

    def test_frozen_value(self):
        b = er_giant_fraction(2.0)
        assert b == pytest.approx(BETA_C2, abs=1e-10)
        assert abs(b - 1.0 + math.exp(-2.0 * b)) <= 1e-12

    def test_large_degree_limit(self):
        assert er_giant_fraction(1000.0) == pytest.approx(1.0, abs=1e-9)


class TestClosedForms:
    def test_subcritical_any_set(self):
        v = closed_form_any_set(0.5, 1001, 1)
        assert v == pytest.approx(1.0 + math.sqrt(1000.0), rel=1e-12)

    def test_zero_radius(self):
        assert closed_form_any_set(0.0, 100, 7) == 7.0

    def test_supercritical_frozen(self):
        assert closed_form_any_set(1.5, 101, 1) == pytest.approx(
            COR1_SUPER_15_1_101, rel=1e-12
        )

    def test_boundary_uses_supercritical_branch(self):
        v = closed_form_any_set(1.0, 101, 1)
        expect = 101 - 100 * math.exp(-1.0 - 2.0 / (math.sqrt(401.0) - 1.0))
        assert v == pytest.approx(expect, rel=1e-12)

    def test_relaxation_dominates_root_bound(self):
        # the closed form only loosens the solved bound below threshold
        for rho in (0.1, 0.4, 0.7, 0.95):
            for n, n0 in ((100, 1), (500, 10), (64, 8)):
                g1 = solve_gamma1(rho, n, n0)
                assert n0 + g1 * (n - n0) <= closed_form_any_set(rho, n, n0) + 1e-9

    def test_uniform_closed_form(self):
        assert closed_form_uniform(0.5, 1000, 10) == pytest.approx(20.0, rel=1e-12)
        assert closed_form_uniform(0.0, 1000, 10) == 10.0
        sup = closed_form_uniform(2.0, 100, 5)
        assert sup == pytest.approx(100 - 95 * math.exp(-2.0 / 0.95), rel=1e-12)


def star_graph(n, p):
    edges = [(0, j, p) for j in range(1, n)] + [(j, 0, p) for j in range(1, n)]
    return build_graph(n, edges)


class TestInfluenceBounds:
    def test_star_tightness(self):
        n = 1001
        p = 1.0 / math.sqrt(1000.0)
        rep = influence_bound_any_set(hazard_from_prob(star_graph(n, p)), InfluencerSet([0]))
        assert rep.bound_sigma == pytest.approx(1.0 + math.sqrt(1000.0), abs=1e-6)
        exact = 1.0 + 1000.0 * p
        assert exact <= rep.bound_sigma + 1e-6
        assert rep.solver_residual <= 1e-12

    def test_isolated_set_gives_n0(self):
        # all edges end inside the set, so the masked matrix is zero
        g = build_graph(3, [(1, 0, 0.5), (2, 0, 0.7)])
        rep = influence_bound_any_set(hazard_from_prob(g), InfluencerSet([0]))
        assert rep.rho == 0.0
        assert rep.bound_sigma == 1.0
        assert rep.regime == "subcritical"

    def test_bound_dominates_exact_complete_graph(self):
        g = build_graph(
            6, [(i, j, 0.05) for i in range(6) for j in range(6) if i != j]
        )
        a = InfluencerSet([0])
        rep = influence_bound_any_set(hazard_from_prob(g), a)
        exact = exact_influence_bruteforce(g, a)
        assert exact <= rep.bound_sigma + 1e-9

    def test_report_json_keys(self):
        g = star_graph(10, 0.3)
        rep = influence_bound_any_set(hazard_from_prob(g), InfluencerSet([0]))
        assert set(rep.to_json_dict()) == {
            "rho", "gamma", "bound_sigma", "closed_form_bound",
            "regime", "n", "n0", "solver_residual",
        }

    def test_uniform_bound_fields(self):
        g = star_graph(12, 0.2)
        rep = influence_bound_uniform(hazard_from_prob(g), 3)
        assert rep.n0 == 3
        assert 3.0 <= rep.bound_sigma <= 12.0
        assert rep.closed_form_bound is not None

    def test_bounds_dominate_exact_on_small_graphs(self):
        rng = np.random.default_rng(2024)
        for trial in range(12):
            n = int(rng.integers(4, 7))
            density = float(rng.uniform(0.3, 0.8))
            edges = []
            for i in range(n):
                for j in range(i + 1, n):
                    if rng.random() < density:
                        p = float(rng.uniform(0.05, 0.6))
                        edges.append((i, j, p))
                        edges.append((j, i, p))
            g = build_graph(n, edges)
            if len(edges) // 2 > 10 or n < 3:
                continue
            h = hazard_from_prob(g)
            n0 = int(rng.integers(1, min(3, n - 1) + 1))
            members = rng.choice(n, size=n0, replace=False)
            a = InfluencerSet(members)
            exact = exact_influence_bruteforce(g, a)
            rep = influence_bound_any_set(h, a)
            assert exact <= rep.bound_sigma + 1e-9
            # uniform bound dominates the exact average over all n0-subsets
            avg = float(
                np.mean(
                    [
                        exact_influence_bruteforce(g, InfluencerSet(combo))
                        for combo in itertools.combinations(range(n), n0)
                    ]
                )
            )
            rep_u = influence_bound_uniform(h, n0)
            assert avg <= rep_u.bound_sigma + 1e-9


def exact_largest_component_mean(g) -> float:
    """Independent oracle: enumerate undirected edge subsets, average max component."""
    u_src, u_dst, u_p, _ = g.undirected_view()
    m = u_p.size
    total = 0.0
    for mask in range(1 << m):
        prob = 1.0
        parent = list(range(g.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for k in range(m):
            if mask >> k & 1:
                prob *= float(u_p[k])
                a, b = find(int(u_src[k])), find(int(u_dst[k]))
                if a != b:
                    parent[a] = b
            else:
                prob *= 1.0 - float(u_p[k])
        sizes = {}
        for v in range(g.n):
            r = find(v)
            sizes[r] = sizes.get(r, 0) + 1
        total += prob * max(sizes.values())
    return total


class TestPercolationBounds:
    def test_empty_graph_coincides_with_sqrt_n(self):
        g = build_graph(9, [])
        rep = percolation_bounds(hazard_from_prob(g))
        assert rep.rho == 0.0
        assert rep.bound_c1 == pytest.approx(3.0, abs=1e-9)
        assert rep.closed_form == pytest.approx(3.0, abs=1e-12)

    def test_two_node_path(self):
        g = build_graph(2, [(0, 1, 0.5), (1, 0, 0.5)])
        rep = percolation_bounds(hazard_from_prob(g))
        exact = 0.5 * 2 + 0.5 * 1
        assert exact <= rep.bound_c1 + 1e-9
        assert rep.closed_form == pytest.approx(
            math.sqrt(2.0 / (1.0 - math.log(2))), rel=1e-9
        )

    def test_exact_dominance_small_graphs(self):
        rng = np.random.default_rng(77)
        for _ in range(6):
            n = int(rng.integers(3, 6))
            edges = []
            for i in range(n):
                for j in range(i + 1, n):
                    if rng.random() < 0.7:
                        p = float(rng.uniform(0.1, 0.7))
                        edges.append((i, j, p))
                        edges.append((j, i, p))
            g = build_graph(n, edges)
            rep = percolation_bounds(hazard_from_prob(g))
            assert exact_largest_component_mean(g) <= rep.bound_c1 + 1e-9
            assert 0.0 <= rep.bound_connect <= 1.0

    def test_asymmetric_rejected(self):
        g = build_graph(3, [(0, 1, 0.5), (1, 2, 0.5)])
        with pytest.raises(BoundsError, match="symmetric"):
            percolation_bounds(hazard_from_prob(g))

    def test_supercritical_closed_form_absent(self):
        g = build_graph(
            5, [(i, j, 0.8) for i in range(5) for j in range(5) if i != j]
        )
        rep = percolation_bounds(hazard_from_prob(g))
        assert rep.rho >= 1.0
        assert rep.closed_form is None


class TestSirBounds:
    def test_small_ratio_limit(self):
        s = SirParams(beta=1e-12, delta=1.0, rho_adj=2.0)
        assert sir_bound_draief(s, 100, 4) == pytest.approx(math.sqrt(400.0), rel=1e-9)

    def test_equal_sizes(self):
        s = SirParams(beta=0.2, delta=1.0, rho_adj=2.0)
        assert sir_bound_draief(s, 10, 10) == pytest.approx(10.0 / 0.6, rel=1e-12)

    def test_half_ratio(self):
        s = SirParams(beta=0.5, delta=1.0, rho_adj=1.0)
        assert sir_bound_draief(s, 50, 2) == pytest.approx(2 * math.sqrt(100.0), rel=1e-12)

    def test_supercritical_rejected(self):
        s = SirParams(beta=1.0, delta=1.0, rho_adj=2.0)
        with pytest.raises(BoundsError, match="supercritical"):
            sir_bound_draief(s, 10, 1)

    def test_invalid_rates(self):
        with pytest.raises(BoundsError):
            SirParams(beta=0.0, delta=1.0, rho_adj=1.0)


def sir_mapped_instance(n, density, ratio_target, seed):
    """Undirected graph plus the hazard matrix equal to (beta/delta) * adjacency."""
    rng = np.random.default_rng(seed)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                edges.add((i, j))
    if not edges:
        edges.add((0, 1))
    adj = np.zeros((n, n))
    for i, j in edges:
        adj[i, j] = adj[j, i] = 1.0
    rho_adj = float(np.max(np.abs(np.linalg.eigvalsh(adj))))
    ratio = ratio_target / rho_adj
    p = 1.0 - math.exp(-ratio)
    tuples = []
    for i, j in edges:
        tuples.append((i, j, p))
        tuples.append((j, i, p))
    g = build_graph(n, tuples)
    s = SirParams(beta=ratio, delta=1.0, rho_adj=rho_adj)
    return g, s


class TestSirComparison:
    @pytest.mark.parametrize("level", [0.2, 0.5, 0.8])
    def test_dominance(self, level):
        g, s = sir_mapped_instance(30, 0.15, level, seed=int(level * 10))
        h = hazard_from_prob(g)
        ours, theirs, dominated = compare_sir_bounds(h, InfluencerSet([0, 3]), s)
        assert dominated
        assert ours <= theirs + 1e-8

    def test_vanishing_rate_gap(self):
        g, s = sir_mapped_instance(20, 0.2, 1e-6, seed=4)
        ours, theirs, dominated = compare_sir_bounds(
            hazard_from_prob(g), InfluencerSet([0]), s
        )
        assert dominated
        assert ours == pytest.approx(1.0, abs=1e-2)
        assert theirs == pytest.approx(math.sqrt(20.0), rel=1e-3)

    def test_masked_radius_below_sir_level(self):
        g, s = sir_mapped_instance(25, 0.2, 0.8, seed=9)
        h = hazard_from_prob(g)
        rho_ca = rho_c_of_set(h, InfluencerSet([0])).value
        assert rho_ca <= s.ratio * s.rho_adj + 1e-8

    def test_wrong_mapping_rejected(self):
        g = build_graph(3, [(0, 1, 0.3), (1, 0, 0.3), (1, 2, 0.6), (2, 1, 0.6)])
        s = SirParams(beta=0.1, delta=1.0, rho_adj=1.5)
        with pytest.raises(BoundsError, match="SIR mapping"):
            compare_sir_bounds(hazard_from_prob(g), InfluencerSet([0]), s)

    def test_supercritical_rejected(self):
        g, s = sir_mapped_instance(20, 0.2, 1.5, seed=4)
        with pytest.raises(BoundsError, match="supercritical"):
            compare_sir_bounds(hazard_from_prob(g), InfluencerSet([0]), s)
