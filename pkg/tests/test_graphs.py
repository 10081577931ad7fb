import numpy as np
import pytest

from warpcones.errors import InputError
from warpcones.graphs import ApproxGraph, approx_graph, export_graph, graph_report, import_graph
from warpcones.nets import voronoi_partition
from warpcones.warped import ActionSpec
from warpcones.algebra import GeneratorSet


@pytest.fixture(scope="module")
def quarter_partition(exact_quarter_net):
    return voronoi_partition(exact_quarter_net, 40_000, 7)


class TestApproxGraph:
    def test_trivial_action_is_edgeless(self, trivial_sphere_action, sphere2):
        from warpcones.nets import build_net

        net = build_net(sphere2, 0.8, 3)
        part = voronoi_partition(net, 150 * len(net), 5)
        g = approx_graph(trivial_sphere_action, part)
        assert g.edge_count == 0

    def test_quarter_turn_gives_cycle(self, quarter_turn_action, quarter_partition):
        # each quarter cell maps exactly onto the next one
        g = approx_graph(quarter_turn_action, quarter_partition)
        assert g.vertex_count == 4
        assert g.edges == ((0, 1), (0, 3), (1, 2), (2, 3))

    def test_witness_counts_recorded(self, quarter_turn_action, quarter_partition):
        g = approx_graph(quarter_turn_action, quarter_partition)
        assert set(g.witness_counts) == set(g.edges)
        assert all(c > 1000 for c in g.witness_counts.values())

    def test_min_witness_filters(self, quarter_turn_action, quarter_partition):
        huge = max(approx_graph(quarter_turn_action, quarter_partition).witness_counts.values())
        g = approx_graph(quarter_turn_action, quarter_partition, min_witness=huge + 1)
        assert g.edge_count < 4

    def test_degree_bound_against_packing(self, lps_action, sphere2):
        from warpcones.nets import build_net

        net = build_net(sphere2, 0.25, 4)
        part = voronoi_partition(net, 120 * len(net), 6)
        g = approx_graph(lps_action, part)
        rep = graph_report(g)
        n_generators = len(lps_action.gens.generators)
        # per-generator packing constant: most regions a single region meets
        per_gen_hits = rep.max_degree / n_generators
        assert per_gen_hits <= 16

    def test_rejects_self_loops_and_range(self):
        with pytest.raises(InputError):
            ApproxGraph(3, ((1, 1),))
        with pytest.raises(InputError):
            ApproxGraph(3, ((0, 5),))

    def test_provenance(self, quarter_turn_action, quarter_partition):
        g = approx_graph(quarter_turn_action, quarter_partition, level_t=4.0)
        assert g.provenance["t"] == 4.0
        assert g.provenance["generators"] == ["q", "q_inv"]


class TestReport:
    def test_cycle(self):
        rep = graph_report(ApproxGraph(4, ((0, 1), (1, 2), (2, 3), (0, 3))))
        assert rep.max_degree == 2
        assert rep.component_count == 1

    def test_edgeless(self):
        rep = graph_report(ApproxGraph(5, ()))
        assert rep.component_count == 5
        assert rep.max_degree == 0

    def test_complete(self):
        k4 = ApproxGraph(4, tuple((i, j) for i in range(4) for j in range(i + 1, 4)))
        rep = graph_report(k4)
        assert rep.max_degree == 3
        assert rep.mean_degree == 3.0
        assert rep.component_count == 1


class TestExport:
    def test_triangle_edge_list(self, tmp_path):
        c3 = ApproxGraph(3, ((0, 1), (0, 2), (1, 2)))
        path = tmp_path / "c3.txt"
        export_graph(c3, "edge-list", path)
        lines = path.read_text().strip().split("\n")
        assert lines == ["# vertices 3", "0 1", "0 2", "1 2"]

    def test_empty_graph_keeps_header(self, tmp_path):
        g = ApproxGraph(4, ())
        path = tmp_path / "empty.txt"
        export_graph(g, "edge-list", path)
        assert path.read_text() == "# vertices 4\n"
        assert import_graph(path, "edge-list") == g

    def test_unknown_format(self, tmp_path):
        with pytest.raises(InputError):
            export_graph(ApproxGraph(2, ((0, 1),)), "dot", tmp_path / "x")

    def test_bit_stable(self, tmp_path):
        g = ApproxGraph(5, ((0, 1), (2, 4), (1, 3)))
        a, b = tmp_path / "a", tmp_path / "b"
        export_graph(g, "json", a)
        export_graph(g, "json", b)
        assert a.read_bytes() == b.read_bytes()

    @pytest.mark.parametrize("fmt", ["edge-list", "adjacency-csv", "json"])
    def test_round_trip_random_graphs(self, fmt, tmp_path):
        rng = np.random.default_rng(31)
        for trial in range(20):
            n = int(rng.integers(2, 12))
            mask = rng.random((n, n)) < 0.4
            edges = tuple(
                (i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]
            )
            g = ApproxGraph(n, edges)
            path = tmp_path / f"g{fmt}{trial}"
            export_graph(g, fmt, path)
            assert import_graph(path, fmt) == g
