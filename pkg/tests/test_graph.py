import math

import numpy as np
import pytest

from cascade_bounds import (
    GraphError,
    InfluencerSet,
    build_graph,
    hazard_from_prob,
    mask_columns,
    read_edge_list,
    with_uniform_p,
    write_edge_list,
)


def complete_graph(n, p):
    return build_graph(
        n, [(i, j, p) for i in range(n) for j in range(n) if i != j]
    )


class TestBuildGraph:
    def test_single_edge(self):
        g = build_graph(2, [(0, 1, 0.5)])
        assert g.n == 2
        assert g.edge_count == 1
        assert g.out_edges(0).size == 1
        assert g.out_edges(1).size == 0

    def test_probability_one_rejected(self):
        with pytest.raises(GraphError, match="probability 1 not allowed"):
            build_graph(2, [(0, 1, 1.0)])

    def test_probability_out_of_range(self):
        with pytest.raises(GraphError, match="outside"):
            build_graph(2, [(0, 1, 1.5)])
        with pytest.raises(GraphError, match="outside"):
            build_graph(2, [(0, 1, -0.1)])

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError, match="self-loop"):
            build_graph(3, [(0, 0, 0.3)])

    def test_duplicate_rejected(self):
        with pytest.raises(GraphError, match="duplicate"):
            build_graph(3, [(0, 1, 0.3), (0, 1, 0.4)])

    def test_out_of_range_ids(self):
        with pytest.raises(GraphError, match="out of range"):
            build_graph(3, [(0, 3, 0.3)])
        with pytest.raises(GraphError, match="out of range"):
            build_graph(3, [(-1, 2, 0.3)])

    def test_zero_node_count(self):
        with pytest.raises(GraphError, match="positive integer"):
            build_graph(0, [])

    def test_zero_probability_edges_dropped(self):
        g = build_graph(3, [(0, 1, 0.0), (1, 2, 0.25)])
        assert g.edge_count == 1
        assert g.dst[0] == 2

    def test_adjacency_indexes_roundtrip(self):
        rng = np.random.default_rng(11)
        edges = []
        for i in range(8):
            for j in range(8):
                if i != j and rng.random() < 0.4:
                    edges.append((i, j, float(rng.uniform(0.05, 0.9))))
        g = build_graph(8, edges)
        out_pairs = set()
        for v in range(8):
            for e in g.out_edges(v):
                assert g.src[e] == v
                out_pairs.add((int(g.src[e]), int(g.dst[e])))
        in_pairs = set()
        for v in range(8):
            for e in g.in_edges(v):
                assert g.dst[e] == v
                in_pairs.add((int(g.src[e]), int(g.dst[e])))
        expected = {(s, d) for s, d, _ in edges}
        assert out_pairs == expected
        assert in_pairs == expected

    def test_antiparallel_edges_with_distinct_p_allowed(self):
        g = build_graph(2, [(0, 1, 0.3), (1, 0, 0.6)])
        assert g.edge_count == 2
        assert not g.is_symmetric()

    def test_symmetry_detection(self):
        g = build_graph(3, [(0, 1, 0.3), (1, 0, 0.3), (1, 2, 0.2), (2, 1, 0.2)])
        assert g.is_symmetric()
        u_src, u_dst, u_p, und_of_edge = g.undirected_view()
        assert list(u_src) == [0, 1]
        assert list(u_dst) == [1, 2]
        # both directions of a pair map to the same undirected index
        for e in range(g.edge_count):
            lo, hi = sorted((int(g.src[e]), int(g.dst[e])))
            k = int(und_of_edge[e])
            assert (int(u_src[k]), int(u_dst[k])) == (lo, hi)

    def test_immutability(self):
        g = build_graph(2, [(0, 1, 0.5)])
        with pytest.raises(ValueError):
            g.p[0] = 0.9


class TestHazard:
    def test_half_gives_ln2(self):
        g = build_graph(2, [(0, 1, 0.5)])
        h = hazard_from_prob(g)
        assert h.vals[0] == pytest.approx(math.log(2), abs=1e-15)

    def test_exactly_two(self):
        g = build_graph(2, [(0, 1, 1.0 - math.exp(-2.0))])
        h = hazard_from_prob(g)
        assert h.vals[0] == pytest.approx(2.0, abs=1e-14)

    def test_probability_recovery(self):
        rng = np.random.default_rng(3)
        probs = rng.uniform(1e-9, 1.0 - 1e-9, size=50)
        g = build_graph(
            51, [(0, i + 1, float(p)) for i, p in enumerate(probs)]
        )
        h = hazard_from_prob(g)
        rel = np.abs(h.probabilities() - g.p) / g.p
        assert rel.max() < 1e-12

    def test_entry_count_matches_edges(self):
        g = complete_graph(4, 0.2)
        assert hazard_from_prob(g).entry_count == g.edge_count


class TestMask:
    def test_star_center_mask_changes_nothing(self):
        g = build_graph(5, [(0, j, 0.5) for j in range(1, 5)])
        h = hazard_from_prob(g)
        masked = mask_columns(h, InfluencerSet([0]))
        assert masked.entry_count == h.entry_count
        assert masked.masked_set == InfluencerSet([0])

    def test_complete_graph_mask(self):
        # 6 off-diagonal entries; dropping column 2 removes (0,2) and (1,2)
        g = complete_graph(3, 0.4)
        h = hazard_from_prob(g)
        masked = mask_columns(h, InfluencerSet([2]))
        assert masked.entry_count == 4
        assert not np.any(masked.cols == 2)

    def test_mask_everything(self):
        g = complete_graph(3, 0.4)
        masked = mask_columns(hazard_from_prob(g), InfluencerSet([0, 1, 2]))
        assert masked.entry_count == 0

    def test_double_mask_rejected(self):
        h = mask_columns(hazard_from_prob(complete_graph(3, 0.4)), InfluencerSet([0]))
        with pytest.raises(GraphError, match="already masked"):
            mask_columns(h, InfluencerSet([1]))

    def test_masked_columns_sum_to_zero_and_rest_identical(self):
        rng = np.random.default_rng(5)
        edges = [
            (i, j, float(rng.uniform(0.1, 0.8)))
            for i in range(6)
            for j in range(6)
            if i != j and rng.random() < 0.6
        ]
        g = build_graph(6, edges)
        h = hazard_from_prob(g)
        a = InfluencerSet([1, 4])
        masked = mask_columns(h, a)
        dense, masked_dense = h.to_dense(), masked.to_dense()
        for j in range(6):
            if j in a:
                assert masked_dense[:, j].sum() == 0.0
            else:
                assert np.array_equal(masked_dense[:, j], dense[:, j])
        # coefficient-wise the masked matrix never exceeds the original
        assert np.all(masked_dense <= dense)

    def test_source_matrix_unchanged(self):
        h = hazard_from_prob(complete_graph(3, 0.4))
        before = h.entry_count
        mask_columns(h, InfluencerSet([0]))
        assert h.entry_count == before
        assert h.masked_set is None


class TestInfluencerSet:
    def test_sorted_dedup(self):
        a = InfluencerSet([3, 1, 3, 2])
        assert a.members == (1, 2, 3)
        assert a.n0 == 3

    def test_empty_rejected(self):
        with pytest.raises(GraphError):
            InfluencerSet([])

    def test_negative_rejected(self):
        with pytest.raises(GraphError):
            InfluencerSet([-1, 0])

    def test_range_validation(self):
        a = InfluencerSet([0, 4])
        a.validate_for(5)
        with pytest.raises(GraphError, match="out of range"):
            a.validate_for(4)


class TestEdgeListIO:
    def test_basic_parse(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("2\n0 1 0.5\n")
        g = read_edge_list(path)
        assert g.n == 2
        assert g.edge_count == 1
        assert g.p[0] == 0.5

    def test_comments_and_blanks(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("# header\n\n3\n0 1 0.25  # trailing\n1 2 0.75\n")
        g = read_edge_list(path)
        assert g.n == 3
        assert g.edge_count == 2

    def test_roundtrip_bit_faithful(self, tmp_path):
        rng = np.random.default_rng(17)
        edges = [
            (i, j, float(rng.uniform(1e-7, 1 - 1e-7)))
            for i in range(7)
            for j in range(7)
            if i != j and rng.random() < 0.5
        ]
        g = build_graph(7, edges)
        path = tmp_path / "g.txt"
        write_edge_list(g, path)
        g2 = read_edge_list(path)
        assert g2.n == g.n
        assert np.array_equal(g2.src, g.src)
        assert np.array_equal(g2.dst, g.dst)
        assert np.array_equal(g2.p, g.p)
        # a second write is byte-identical
        path2 = tmp_path / "g2.txt"
        write_edge_list(g2, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_probability_out_of_range_with_line_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2\n0 1 1.5\n")
        with pytest.raises(GraphError, match=r":2:"):
            read_edge_list(path)

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2\n0 1\n")
        with pytest.raises(GraphError, match=r":2:.*3 fields"):
            read_edge_list(path)

    def test_unparsable_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2\n0 x 0.5\n")
        with pytest.raises(GraphError, match=r":2:.*unparsable"):
            read_edge_list(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing\n")
        with pytest.raises(GraphError, match="empty"):
            read_edge_list(path)

    def test_malformed_node_count_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 extra\n0 1 0.5\n")
        with pytest.raises(GraphError, match=r":1:.*node count"):
            read_edge_list(path)

    def test_structural_errors_name_the_file(self, tmp_path):
        path = tmp_path / "dup.txt"
        path.write_text("3\n0 1 0.5\n0 1 0.5\n")
        with pytest.raises(GraphError, match="dup.txt.*duplicate"):
            read_edge_list(path)


def test_with_uniform_p_keeps_topology():
    g = build_graph(4, [(0, 1, 0.2), (1, 2, 0.4), (2, 3, 0.8)])
    g2 = with_uniform_p(g, 0.5)
    assert np.array_equal(g2.src, g.src)
    assert np.array_equal(g2.dst, g.dst)
    assert np.all(g2.p == 0.5)
    with pytest.raises(GraphError):
        with_uniform_p(g, 1.0)
