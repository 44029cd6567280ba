import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnnflow import graphs
from gnnflow.graphs import (CsrGraph, DegreeStats, EdgeList, GraphError,
                            build_csr, degree_stats, generate_powerlaw,
                            generate_regular, load_summary, parse_edge_list,
                            partition_contiguous, pseudo_coordinates,
                            sample_nodes, write_edge_list)

from conftest import make_graph


class TestParseEdgeList:
    def test_basic(self):
        el = parse_edge_list("3 2\n0 1\n1 2")
        assert el.num_nodes == 3
        assert el.edges == [(0, 1), (1, 2)]

    def test_empty_graph(self):
        el = parse_edge_list("1 0")
        assert el.num_nodes == 1
        assert el.edges == []

    def test_out_of_range(self):
        with pytest.raises(GraphError):
            parse_edge_list("2 1\n0 5")

    def test_comments_and_blanks(self):
        el = parse_edge_list("# header\n\n3 1\n# edge below\n2 0\n")
        assert el.edges == [(2, 0)]

    def test_malformed_line_reports_lineno(self):
        with pytest.raises(GraphError, match="line 2"):
            parse_edge_list("3 1\n0 1 2")
        with pytest.raises(GraphError, match="line 3"):
            parse_edge_list("3 2\n0 1\nx y")

    def test_edge_count_mismatch(self):
        with pytest.raises(GraphError, match="declares"):
            parse_edge_list("3 2\n0 1")

    def test_missing_header(self):
        with pytest.raises(GraphError, match="header"):
            parse_edge_list("# nothing\n")


class TestBuildCsr:
    def test_basic(self):
        g = build_csr(EdgeList(3, [(0, 1), (1, 2)]))
        assert g.row_offsets.tolist() == [0, 0, 1, 2]
        assert g.col_indices.tolist() == [0, 1]

    def test_duplicate_edges_kept(self):
        g = build_csr(EdgeList(2, [(0, 1), (0, 1)]))
        assert g.row_offsets.tolist() == [0, 0, 2]
        assert g.col_indices.tolist() == [0, 0]

    def test_against_dense_adjacency_oracle(self, rng):
        n = 10
        edges = [(int(rng.integers(n)), int(rng.integers(n))) for _ in range(40)]
        g = build_csr(EdgeList(n, edges))
        assert g.num_edges == 40
        for i in range(n):
            expect = sorted(src for src, dst in edges if dst == i)
            assert g.row(i).tolist() == expect

    def test_rows_sorted_and_degree_sum(self):
        g = make_graph("powerlaw", 50, 3, 9)
        assert int(g.degrees().sum()) == g.num_edges
        for i in range(g.num_nodes):
            r = g.row(i)
            assert np.all(np.diff(r) >= 0)

    def test_from_arrays_validation(self):
        with pytest.raises(GraphError):
            CsrGraph.from_arrays(2, [0, 1], [0])  # offsets too short
        with pytest.raises(GraphError, match="sorted"):
            CsrGraph.from_arrays(2, [0, 0, 2], [1, 0])


class TestDegreeStats:
    def test_shipped_mt_summary(self):
        from importlib import resources
        with resources.as_file(
                resources.files("gnnflow.data").joinpath("mt.json")) as p:
            s = load_summary(p)
        assert (s.n, s.m, s.max_degree) == (145459, 302190, 6)
        assert s.avg_degree == pytest.approx(2.1, abs=0.05)

    def test_shipped_pt_summary(self):
        from importlib import resources
        with resources.as_file(
                resources.files("gnnflow.data").joinpath("pt.json")) as p:
            s = load_summary(p)
        assert (s.n, s.m, s.max_degree) == (132534, 79122504, 7750)
        assert s.avg_degree == pytest.approx(597.0, abs=0.5)

    def test_star_graph(self):
        g = build_csr(EdgeList(5, [(1, 0), (2, 0), (3, 0), (4, 0)]))
        s = degree_stats(g)
        assert s.max_degree == 4
        assert s.avg_degree == pytest.approx(0.8)
        assert s.degrees.tolist() == [4, 0, 0, 0, 0]

    def test_max_at_least_avg(self):
        g = make_graph("regular", 30, 2, 3)
        s = degree_stats(g)
        assert s.max_degree >= s.avg_degree


class TestSampleNodes:
    def test_exhaustive_sample_is_permutation(self):
        g = make_graph("regular", 500, 1, 0)
        out = sample_nodes(g, 500, seed=99)
        assert sorted(out) == list(range(500))

    def test_deterministic(self):
        g = make_graph("regular", 10, 1, 0)
        assert sample_nodes(g, 3, 7) == sample_nodes(g, 3, 7)

    def test_no_duplicates(self):
        g = make_graph("regular", 64, 1, 0)
        for seed in range(20):
            out = sample_nodes(g, 17, seed)
            assert len(set(out)) == 17

    def test_count_exceeds_n(self):
        g = make_graph("regular", 4, 1, 0)
        with pytest.raises(GraphError):
            sample_nodes(g, 5, 0)

    def test_monte_carlo_uniformity(self):
        # 1000 seeded draws of 500 from 10**4 nodes. Exact per-seed size
        # makes the mean inclusion exactly 0.05; per-node frequencies are
        # binomial (sigma ~ 0.0069), checked within 5 percentage points.
        n, count, trials = 10_000, 500, 1000
        g = CsrGraph.from_arrays(n, np.zeros(n + 1, dtype=np.int64),
                                 np.zeros(0, dtype=np.int64))
        hits = np.zeros(n, dtype=np.int64)
        for seed in range(trials):
            idx = sample_nodes(g, count, seed)
            hits[idx] += 1
        freq = hits / trials
        assert freq.mean() == pytest.approx(count / n, abs=1e-12)
        assert np.all(np.abs(freq - 0.05) < 0.05)


class TestPseudoCoordinates:
    def test_exact_powers(self):
        # node 0 with in-degree 4; source node 1 with in-degree 1
        g = build_csr(EdgeList(6, [(1, 0), (2, 0), (3, 0), (4, 0), (0, 1)]))
        pc = pseudo_coordinates(g)
        assert pc[0].tolist() == [0.5, 1.0]

    def test_degree_one_identity(self):
        g = build_csr(EdgeList(2, [(1, 0), (0, 1)]))
        pc = pseudo_coordinates(g)
        assert pc[0].tolist() == [1.0, 1.0]
        assert pc[1].tolist() == [1.0, 1.0]

    def test_zero_degree_smoothing(self):
        g = build_csr(EdgeList(2, [(1, 0)]))  # node 1 has in-degree 0
        pc = pseudo_coordinates(g)
        assert pc[0].tolist() == [1.0, 1.0]

    def test_matches_direct_recomputation(self):
        g = make_graph("powerlaw", 6, 2, 5)
        degs = np.maximum(g.degrees(), 1).astype(np.float64)
        pc = pseudo_coordinates(g)
        pos = 0
        for i in range(g.num_nodes):
            for j in g.row(i):
                want = (degs[i] ** -0.5, degs[int(j)] ** 0.5)
                assert pc[pos, 0] == np.float32(want[0])
                assert pc[pos, 1] == np.float32(want[1])
                pos += 1


class TestPartition:
    def test_even_split(self):
        assert [(r.start, r.end) for r in partition_contiguous(10, 2)] == \
            [(0, 5), (5, 10)]

    def test_remainder_to_first(self):
        assert [(r.start, r.end) for r in partition_contiguous(7, 2)] == \
            [(0, 4), (4, 7)]

    def test_identity(self):
        assert [(r.start, r.end) for r in partition_contiguous(9, 1)] == [(0, 9)]

    def test_zero_cus_error(self):
        with pytest.raises(GraphError):
            partition_contiguous(5, 0)

    @given(st.integers(1, 400), st.integers(1, 16))
    @settings(max_examples=60, deadline=None)
    def test_tiles_exactly(self, n, k):
        k = min(k, n)
        ranges = partition_contiguous(n, k)
        covered = []
        sizes = []
        for r in ranges:
            covered.extend(range(r.start, r.end))
            sizes.append(len(r))
        assert covered == list(range(n))
        assert max(sizes) - min(sizes) <= 1


class TestRoundTrip:
    @given(st.integers(1, 12), st.lists(st.tuples(st.integers(0, 11),
                                                  st.integers(0, 11)),
                                        max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_csr_preserves_edge_multiset(self, n, raw_edges):
        edges = [(s % n, d % n) for s, d in raw_edges]
        g = build_csr(EdgeList(n, edges))
        back = []
        for i in range(n):
            back.extend((int(j), i) for j in g.row(i))
        assert sorted(back) == sorted(edges)

    def test_file_roundtrip(self, tmp_path):
        el = generate_regular(20, 2, 3)
        path = tmp_path / "g.txt"
        write_edge_list(el, path)
        el2 = parse_edge_list(path.read_text())
        assert el2.num_nodes == el.num_nodes
        assert el2.edges == el.edges


class TestGenerators:
    def test_regular_exact_edge_count(self):
        el = generate_regular(1000, 2, seed=1)
        assert len(el.edges) == 2000
        g = build_csr(el)
        assert degree_stats(g).max_degree == 2  # every node draws exactly 2

    def test_powerlaw_has_hubs(self):
        el = generate_powerlaw(1000, 7, seed=1)
        g = build_csr(el)
        s = degree_stats(g)
        assert s.max_degree > 10 * s.avg_degree
        assert s.avg_degree == pytest.approx(7.0, rel=0.05)

    def test_degenerate(self):
        assert generate_regular(1, 0, 0).edges == []
        assert generate_powerlaw(1, 0, 0).edges == []

    def test_deterministic(self):
        assert generate_powerlaw(50, 3, 7).edges == generate_powerlaw(50, 3, 7).edges
