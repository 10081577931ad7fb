import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from warpcones.algebra import GeneratorSet
from warpcones.errors import InputError
from warpcones.graphs import ApproxGraph, graph_report
from warpcones.nets import Net, Partition, voronoi_partition
from warpcones.spectral import (
    ControlFunction,
    ControlFunctions,
    action_gap,
    cheeger_bounds,
    cheeger_exact,
    embedding_obstruction,
    laplacian_spectrum,
    boundary_size,
)
from warpcones.warped import ActionSpec

C4 = ApproxGraph(4, ((0, 1), (1, 2), (2, 3), (0, 3)))
K4 = ApproxGraph(4, tuple((i, j) for i in range(4) for j in range(i + 1, 4)))
K2 = ApproxGraph(2, ((0, 1),))
P5 = ApproxGraph(5, ((0, 1), (1, 2), (2, 3), (3, 4)))


def random_connected_graph(rng, n):
    while True:
        mask = rng.random((n, n)) < 0.45
        edges = tuple((i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j])
        g = ApproxGraph(n, edges)
        if edges and graph_report(g).component_count == 1:
            return g


def conductance_exact(g):
    vol_total = int(g.degrees().sum())
    best = math.inf
    for size in range(1, g.vertex_count):
        for subset in itertools.combinations(range(g.vertex_count), size):
            vol = int(g.degrees()[list(subset)].sum())
            vol_min = min(vol, vol_total - vol)
            if vol_min == 0:
                continue
            best = min(best, boundary_size(g, subset) / vol_min)
    return best


class TestSpectrum:
    def test_cycle_closed_form(self):
        report = laplacian_spectrum(C4, 4)
        assert np.allclose(report.eigenvalues, [0.0, 1.0, 1.0, 2.0], atol=1e-8)
        assert report.connected

    def test_complete_graph(self):
        assert laplacian_spectrum(K4, 2).lambda2 == pytest.approx(4 / 3, abs=1e-8)

    def test_disconnected_flagged(self):
        report = laplacian_spectrum(ApproxGraph(4, ((0, 1), (2, 3))), 2)
        assert abs(report.lambda2) < 1e-10
        assert not report.connected

    def test_eigenvalue_range(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            g = random_connected_graph(rng, 8)
            vals = laplacian_spectrum(g, 8).eigenvalues
            assert vals[0] == pytest.approx(0.0, abs=1e-8)
            assert np.all(vals <= 2.0 + 1e-8)

    def test_iterative_matches_dense(self):
        rng = np.random.default_rng(9)
        g = random_connected_graph(rng, 60)
        dense = laplacian_spectrum(g, 4, solver="dense")
        iterative = laplacian_spectrum(g, 4, solver="iterative")
        assert np.allclose(dense.eigenvalues, iterative.eigenvalues, atol=1e-7)
        assert iterative.solver == "iterative"
        assert np.all(iterative.residual_norms < 1e-6)


class TestCheeger:
    def test_hand_values(self):
        assert cheeger_exact(K2)[0] == 1.0
        assert cheeger_exact(C4)[0] == 1.0
        assert cheeger_exact(K4)[0] == 2.0
        assert cheeger_exact(P5)[0] == 0.5

    def test_witness_is_minimizer(self):
        h, witness = cheeger_exact(C4)
        assert len(witness) <= 2
        assert boundary_size(C4, witness) / len(witness) == h

    def test_refuses_large(self):
        big = ApproxGraph(25, tuple((i, i + 1) for i in range(24)))
        with pytest.raises(InputError):
            cheeger_exact(big)

    def test_bounds_cycle(self):
        rep = cheeger_bounds(C4)
        assert rep.h_lower == pytest.approx(0.5, abs=1e-8)
        assert rep.h_upper == pytest.approx(1.0, abs=1e-8)

    def test_bounds_complete(self):
        rep = cheeger_bounds(K4)
        assert rep.h_lower == pytest.approx(2 / 3, abs=1e-8)
        assert rep.h_upper == pytest.approx(2.0, abs=1e-8)

    def test_sandwich_on_corpus(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            g = random_connected_graph(rng, int(rng.integers(4, 11)))
            h_exact, _ = cheeger_exact(g)
            rep = cheeger_bounds(g)
            assert rep.h_lower <= h_exact + 1e-8
            assert h_exact <= rep.h_upper + 1e-8
            assert len(rep.witness_set) <= g.vertex_count // 2

    def test_conductance_sandwich(self):
        rng = np.random.default_rng(78)
        for _ in range(15):
            g = random_connected_graph(rng, 8)
            lam2 = laplacian_spectrum(g, 2).lambda2
            phi = conductance_exact(g)
            h, _ = cheeger_exact(g)
            d_max = graph_report(g).max_degree
            assert lam2 / 2 <= phi + 1e-8
            assert phi <= math.sqrt(2 * lam2) + 1e-8
            assert phi <= h + 1e-8
            assert h <= d_max * phi + 1e-8


class TestActionGap:
    def test_trivial_gap_zero(self, trivial_sphere_action, exact_quarter_net):
        part = voronoi_partition(exact_quarter_net, 2000, 3)
        assert action_gap(trivial_sphere_action, part).epsilon_avg == 0.0

    def test_cyclic_shift_exact_value(self, circle, quarter_turn_action):
        # hand-built partition with exactly equal measures: the transition
        # matrices are exact permutations and the averaged form has
        # smallest eigenvalue |1 - i|^2 = 2 on zero-mean functions
        reps = 100
        samples = np.tile(np.eye(2), (2 * reps, 1))
        samples = np.concatenate(
            [
                np.tile([[1.0, 0.0]], (reps, 1)),
                np.tile([[0.0, 1.0]], (reps, 1)),
                np.tile([[-1.0, 0.0]], (reps, 1)),
                np.tile([[0.0, -1.0]], (reps, 1)),
            ]
        )
        net = Net(circle, np.array([[1.0, 0], [0, 1.0], [-1.0, 0], [0, -1.0]]), 1.0, 1.0, 0, 0)
        part = Partition(
            net=net,
            samples=samples,
            assignments=np.repeat(np.arange(4), reps),
            counts=np.full(4, reps),
            measures=np.full(4, 0.25),
            mesh=0.0,
            q_ratio=1.0,
            n_samples=4 * reps,
            seed=0,
        )
        gap = action_gap(quarter_turn_action, part)
        assert gap.epsilon_avg == pytest.approx(2 * math.sin(math.pi / 4), abs=1e-9)
        assert gap.lower_bound_for_max_form

    def test_sampled_partition_close(self, quarter_turn_action, exact_quarter_net):
        part = voronoi_partition(exact_quarter_net, 100_000, 7)
        gap = action_gap(quarter_turn_action, part)
        assert gap.epsilon_avg == pytest.approx(math.sqrt(2), abs=0.02)

    def test_relabel_invariance(self, quarter_turn_action, circle):
        order = [2, 0, 3, 1]
        pts = np.array([[1.0, 0], [0, 1.0], [-1.0, 0], [0, -1.0]])[order]
        net = Net(circle, pts, math.pi / 2, math.pi / 2, 0, 0)
        part = voronoi_partition(net, 100_000, 7)
        gap = action_gap(quarter_turn_action, part)
        base = action_gap(
            quarter_turn_action,
            voronoi_partition(
                Net(circle, np.array([[1.0, 0], [0, 1.0], [-1.0, 0], [0, -1.0]]), math.pi / 2, math.pi / 2, 0, 0),
                100_000,
                7,
            ),
        )
        assert gap.epsilon_avg == pytest.approx(base.epsilon_avg, abs=1e-8)

    def test_amenable_gap_decays(self, circle_rotation_action, circle):
        from warpcones.nets import build_net

        vals = {}
        for t in (8.0, 64.0):
            net = build_net(circle, 1.0 / t, 50 + int(t))
            part = voronoi_partition(net, 300 * len(net), 60 + int(t))
            vals[t] = action_gap(circle_rotation_action, part).epsilon_avg
        assert vals[64.0] < vals[8.0]


class TestControls:
    def test_families(self):
        ident = ControlFunction()
        assert ident(3.5) == 3.5
        affine = ControlFunction("affine", a=2.0, b=1.0)
        assert affine(2.0) == 5.0
        log = ControlFunction("log")
        assert log(0.0) == 0.0
        assert log(10.0) < 10.0

    def test_table(self):
        table = ControlFunction("table", table=((0.0, 0.0), (1.0, 0.5), (3.0, 2.0)))
        assert table(1.0) == 0.5
        assert table(2.0) == pytest.approx(1.25)
        assert table(5.0) == pytest.approx(2.0 + 0.75 * 2.0)

    def test_table_must_increase(self):
        with pytest.raises(InputError):
            ControlFunction("table", table=((0.0, 0.0), (1.0, 0.0)))
        with pytest.raises(InputError):
            ControlFunction("affine", a=0.0)

    def test_from_dict_round_trip(self):
        spec = {"family": "affine", "a": 3.0, "b": 0.5}
        cf = ControlFunction.from_dict(spec)
        assert cf.to_dict() == spec


class TestObstruction:
    def test_hand_arithmetic(self):
        cert = embedding_obstruction(2048, 2, 4, 1.0)
        assert cert.inner_value == pytest.approx(3.5)
        assert cert.lower_bound == pytest.approx(0.875)
        assert cert.verdict == "no-contradiction"

    def test_contradiction_with_stronger_gap(self):
        cert = embedding_obstruction(2048, 2, 4, 2.0)
        assert cert.upper_bound == pytest.approx(0.5)
        assert cert.verdict == "contradiction"

    def test_proviso_boundary(self):
        cert = embedding_obstruction(4, 2, 4, 2.0)
        assert cert.verdict == "undefined"
        assert cert.lower_bound is None

    def test_input_validation(self):
        with pytest.raises(InputError):
            embedding_obstruction(100, 2, 1, 1.0)
        with pytest.raises(InputError):
            embedding_obstruction(100, 2, 4, 0.0)

    @given(
        st.integers(min_value=64, max_value=10**6),
        st.floats(min_value=1.0, max_value=8.0),
        st.floats(min_value=2.0, max_value=16.0),
    )
    def test_monotone_in_inputs(self, p_size, q_ratio, degree):
        base = embedding_obstruction(p_size, q_ratio, degree, 1.0)
        bigger_p = embedding_obstruction(2 * p_size, q_ratio, degree, 1.0)
        if base.lower_bound is not None and bigger_p.lower_bound is not None:
            assert bigger_p.lower_bound >= base.lower_bound - 1e-12
        bigger_q = embedding_obstruction(p_size, 2 * q_ratio, degree, 1.0)
        if base.lower_bound is not None and bigger_q.lower_bound is not None:
            assert bigger_q.lower_bound <= base.lower_bound + 1e-12
        bigger_d = embedding_obstruction(p_size, q_ratio, 2 * degree, 1.0)
        if base.lower_bound is not None and bigger_d.lower_bound is not None:
            assert bigger_d.lower_bound <= base.lower_bound + 1e-12

    def test_json_payload(self):
        cert = embedding_obstruction(2048, 2, 4, 2.0, ControlFunctions.identity_pair())
        payload = cert.to_dict()
        assert payload["verdict"] == "contradiction"
        assert payload["P_size"] == 2048
        import json

        json.dumps(payload)
