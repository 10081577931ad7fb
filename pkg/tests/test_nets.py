import json
import math

import numpy as np
import pytest

from warpcones.errors import InputError, RegionEmptyError
from warpcones.manifolds import ball_volume, dist_to_point, haar_sample, parse_model
from warpcones.nets import (
    Net,
    NearestIndex,
    build_net,
    extend_net,
    interpolate_net,
    load_net_csv,
    save_net_csv,
    save_partition_csv,
    partition_summary,
    voronoi_partition,
)


def min_pairwise(model, points):
    from warpcones.manifolds import pairwise_dist

    mat = pairwise_dist(model, points)
    np.fill_diagonal(mat, np.inf)
    return float(mat.min())


class TestBuildNet:
    def test_circle_four_points(self, circle):
        # the continuum greedy at any separation in (pi/3, pi/2) places
        # two near-antipodes and the two mid points: four points total
        net = build_net(circle, 1.5, 3)
        assert len(net) == 4

    def test_degenerate(self, sphere2):
        net = build_net(sphere2, 4.0, 3)
        assert len(net) == 1
        assert net.degenerate

    def test_sphere_counting_window(self, sphere2):
        net = build_net(sphere2, 0.2, 5)
        lo = 1.0 / ball_volume(sphere2, 0.2)
        hi = 1.0 / ball_volume(sphere2, 0.1)
        assert lo - 1 <= len(net) <= hi + 1

    @pytest.mark.parametrize("spec,r", [("sphere:3", 0.25), ("torus:2", 0.7), ("so3", 0.8)])
    def test_separation_exhaustive(self, spec, r):
        model = parse_model(spec)
        net = build_net(model, r, 12)
        assert min_pairwise(model, net.points) >= r - 1e-9

    def test_density_fresh_samples(self, sphere2):
        net = build_net(sphere2, 0.3, 8)
        fresh = haar_sample(sphere2, 10_000, 99)
        index = NearestIndex(sphere2, net.points)
        nearest = net.points[index.query(fresh)]
        dists = np.array(
            [dist_to_point(sphere2, nearest[i][None], fresh[i])[0] for i in range(len(fresh))]
        )
        resolution = 0.05  # pool-sampling slack
        assert dists.max() <= net.density_radius + resolution

    def test_counting_sandwich(self, sphere2):
        net = build_net(sphere2, 0.3, 8)
        v_half = ball_volume(sphere2, 0.15)
        v_dense = ball_volume(sphere2, net.density_radius)
        assert v_half * len(net) <= 1.0 + 1e-9
        assert v_dense * len(net) >= 1.0 - 0.35  # density holds up to pool resolution

    def test_invalid_separation(self, sphere2):
        with pytest.raises(InputError):
            build_net(sphere2, 0.0, 1)

    def test_deterministic(self, sphere2):
        a = build_net(sphere2, 0.4, 6)
        b = build_net(sphere2, 0.4, 6)
        assert np.array_equal(a.points, b.points)


class TestExtendInterpolate:
    def test_prefix_preserved(self, sphere2):
        coarse = build_net(sphere2, 0.4, 6)
        fine = extend_net(coarse, 0.2, 7)
        assert np.array_equal(fine.points[: len(coarse)], coarse.points)
        assert min_pairwise(sphere2, fine.points) >= 0.2 - 1e-9

    def test_endpoints(self, sphere2):
        coarse = build_net(sphere2, 0.4, 6)
        fine = extend_net(coarse, 0.2, 7)
        assert interpolate_net(coarse, fine, len(coarse)) is coarse
        assert interpolate_net(coarse, fine, len(fine)) is fine

    def test_exact_target_and_separation(self, sphere2):
        coarse = build_net(sphere2, 0.4, 6)
        fine = extend_net(coarse, 0.2, 7)
        target = (len(coarse) + len(fine)) // 2
        mid = interpolate_net(coarse, fine, target)
        assert len(mid) == target
        assert min_pairwise(sphere2, mid.points) >= 0.2 - 1e-9
        assert mid.density_radius == coarse.density_radius

    def test_target_out_of_range(self, sphere2):
        coarse = build_net(sphere2, 0.4, 6)
        fine = extend_net(coarse, 0.2, 7)
        with pytest.raises(InputError):
            interpolate_net(coarse, fine, len(fine) + 1)
        with pytest.raises(InputError):
            interpolate_net(coarse, fine, len(coarse) - 1)

    def test_unrelated_nets_rejected(self, sphere2):
        a = build_net(sphere2, 0.4, 6)
        b = build_net(sphere2, 0.2, 9)
        with pytest.raises(InputError):
            interpolate_net(a, b, len(a) + 1)


class TestPartition:
    def test_single_region(self, sphere2):
        net = build_net(sphere2, 4.0, 3)
        part = voronoi_partition(net, 500, 4)
        assert part.size == 1
        assert part.measures[0] == 1.0
        assert part.q_ratio == 1.0

    def test_quarter_circle(self, exact_quarter_net):
        part = voronoi_partition(exact_quarter_net, 100_000, 7)
        assert np.all(np.abs(part.measures - 0.25) < 0.01)
        assert part.q_ratio < 1.1
        assert abs(part.mesh - math.pi / 2) < 0.05 * math.pi / 2
        assert abs(part.measures.sum() - 1.0) < 1e-9

    def test_mesh_bounded_by_two_radii(self, sphere2):
        net = build_net(sphere2, 0.5, 11)
        part = voronoi_partition(net, 200 * len(net), 13)
        assert part.mesh <= 2 * net.density_radius + 1e-9

    def test_requires_enough_samples(self, exact_quarter_net):
        with pytest.raises(InputError):
            voronoi_partition(exact_quarter_net, 399, 1)

    def test_empty_region_detected(self, circle):
        # a duplicated net point can never win a nearest-point tie
        pts = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
        net = Net(circle, pts, 0.1, math.pi, seed=0, pool_size=0)
        with pytest.raises(RegionEmptyError) as err:
            voronoi_partition(net, 1000, 3)
        assert err.value.region_index == 1

    def test_deterministic(self, exact_quarter_net):
        a = voronoi_partition(exact_quarter_net, 5000, 7)
        b = voronoi_partition(exact_quarter_net, 5000, 7)
        assert np.array_equal(a.assignments, b.assignments)
        assert a.mesh == b.mesh


class TestSerialization:
    def test_net_csv_round_trip(self, sphere2, tmp_path):
        net = build_net(sphere2, 0.5, 11)
        path = tmp_path / "net.csv"
        save_net_csv(net, path)
        loaded = load_net_csv(sphere2, path, net.separation, net.density_radius)
        assert np.array_equal(loaded.points, net.points)

    def test_partition_outputs(self, exact_quarter_net, tmp_path):
        part = voronoi_partition(exact_quarter_net, 5000, 7)
        save_partition_csv(part, tmp_path / "part.csv")
        lines = (tmp_path / "part.csv").read_text().strip().split("\n")
        assert lines[0] == "region,measure,count"
        assert len(lines) == 5
        summary = partition_summary(part)
        assert summary["size"] == 4
        assert summary["n_samples"] == 5000
        json.dumps(summary)  # JSON-serializable
