import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from warpcones.algebra import GeneratorSet, get_enumerator, group_ball, word_eval
from warpcones.coarse import (
    BallCheckConfig,
    ball_product_check,
    cardinality_schedule,
    growth_fingerprint,
    lattice_ball_size,
    pick_base_point,
    point_margin,
    product_ball_size,
    profile_gap,
    singular_set,
    subsequence_separation,
)
from warpcones.errors import InputError, PreconditionError
from warpcones.manifolds import haar_sample, parse_model
from warpcones.nets import build_net
from warpcones.warped import ActionSpec, WarpedLevel


class TestSingularSet:
    def test_trivial_group_empty(self, trivial_sphere_action, net_s2_eighth):
        ss = singular_set(trivial_sphere_action, net_s2_eighth, 8.0, 1.0)
        assert ss.fraction == 0.0

    def test_finite_order_saturates_at_relation_length(self, quarter_turn_action, exact_quarter_net):
        # below the relation length only honest displacements count; from
        # 6r = 4 on, the full-turn word fixes every point at any scale
        for t in (8.0, 64.0):
            assert singular_set(quarter_turn_action, exact_quarter_net, t, 0.5).fraction == 0.0
            ss = singular_set(quarter_turn_action, exact_quarter_net, t, 2.0 / 3.0)
            assert ss.fraction == 1.0
            assert ss.relation_word is not None
            m = word_eval(ss.relation_word, quarter_turn_action.gens)
            assert m.is_identity()

    def test_free_action_fraction_decays_in_t(self, lps_action, net_s2_eighth):
        f8 = singular_set(lps_action, net_s2_eighth, 8.0, 1.0).fraction
        f64 = singular_set(lps_action, net_s2_eighth, 64.0, 1.0).fraction
        assert f64 < f8

    def test_witnesses_satisfy_definition(self, lps_action, net_s2_eighth):
        ss = singular_set(lps_action, net_s2_eighth, 64.0, 1.0)
        ball = group_ball(lps_action.gens, 6)
        lengths = {e.matrix: e.word_length for e in ball.elements}
        for idx in list(ss.member_indices)[:: max(1, len(ss.member_indices) // 15)]:
            word, disp = ss.witnesses[int(idx)]
            assert 1 <= len(word) <= 6
            assert disp <= 6.0 / 64.0 + 1e-12
            assert lengths[word_eval(word, lps_action.gens)] == len(word)

    def test_monotone_inclusions(self, lps_action, net_s2_eighth):
        in_r_small = singular_set(lps_action, net_s2_eighth, 16.0, 0.5).member_set
        in_r_large = singular_set(lps_action, net_s2_eighth, 16.0, 1.0).member_set
        at_larger_t = singular_set(lps_action, net_s2_eighth, 32.0, 0.5).member_set
        assert in_r_small <= in_r_large
        assert at_larger_t <= in_r_small

    def test_input_validation(self, lps_action, net_s2_eighth):
        with pytest.raises(InputError):
            singular_set(lps_action, net_s2_eighth, 0.5, 1.0)


class TestBallProductCheck:
    def test_trivial_group_zero_distortion(self, trivial_sphere_action, sphere2):
        net = build_net(sphere2, 1.0 / 8.0, 77)
        level = WarpedLevel(trivial_sphere_action, 8.0)
        rep = ball_product_check(level, net, BallCheckConfig(r=2.0))
        assert rep.max_distortion == 0.0
        assert rep.n_members > 1

    def test_single_member_ball(self, trivial_sphere_action, sphere2):
        net = build_net(sphere2, 1.0 / 8.0, 77)
        level = WarpedLevel(trivial_sphere_action, 64.0)
        rep = ball_product_check(level, net, BallCheckConfig(r=0.5))
        assert rep.n_members == 1
        assert rep.max_distortion == 0.0

    def test_circle_rotation_product_structure(self, circle_rotation_action, circle):
        net = build_net(circle, 1.0 / 128.0, 77)
        level = WarpedLevel(circle_rotation_action, 64.0)
        rep = ball_product_check(level, net, BallCheckConfig(r=2.0))
        assert rep.n_members >= 5
        assert rep.max_distortion <= 1e-9

    def test_singular_base_rejected(self, quarter_turn_action, exact_quarter_net):
        level = WarpedLevel(quarter_turn_action, 8.0)
        with pytest.raises(PreconditionError) as err:
            ball_product_check(level, exact_quarter_net, BallCheckConfig(r=1.0))
        assert err.value.witness is not None  # the relator word

    def test_lps_small_radius(self, lps_action, net_s2_eighth):
        # at radius 1 the sphere action still has non-singular points
        level = WarpedLevel(lps_action, 64.0)
        rep = ball_product_check(level, net_s2_eighth, BallCheckConfig(r=1.0))
        assert rep.margin > 6.0 / 64.0
        assert rep.max_distortion <= 1e-9


class TestMargins:
    def test_trivial_margin_infinite(self, trivial_sphere_action):
        m, w = point_margin(trivial_sphere_action, np.array([0.0, 0.0, 1.0]), 6)
        assert m == math.inf and w is None

    def test_relator_gives_zero_margin(self, quarter_turn_action):
        m, w = point_margin(quarter_turn_action, np.array([1.0, 0.0]), 4)
        assert m == 0.0
        assert w is not None

    def test_rotation_margin_matches_angle_arithmetic(self, circle_rotation_action):
        # displacement of x by the k-th power is the wrapped angle |k*theta|
        theta = math.acos(0.6)
        expected = min(
            min(abs(k) * theta % (2 * math.pi), 2 * math.pi - (abs(k) * theta % (2 * math.pi)))
            for k in range(1, 13)
        )
        m, _ = point_margin(circle_rotation_action, np.array([1.0, 0.0]), 12)
        assert m == pytest.approx(expected, abs=1e-12)

    def test_pick_base_point_reports_margin(self, lps_action, net_s2_eighth):
        idx, margin, relator = pick_base_point(lps_action, net_s2_eighth, 6)
        assert relator is None
        direct, _ = point_margin(lps_action, net_s2_eighth.points[idx], 6)
        assert margin == pytest.approx(direct, abs=1e-12)


def brute_force_product_ball(gens, m, radius):
    """Enumerate the group x lattice l1 ball directly."""
    if gens is None:
        group_lengths = [0]
    else:
        ball = group_ball(gens, radius)
        group_lengths = [e.word_length for e in ball.elements]
    count = 0
    for length in group_lengths:
        budget = radius - length
        if budget < 0:
            continue
        for vec in itertools.product(range(-radius, radius + 1), repeat=m):
            if sum(abs(v) for v in vec) <= budget:
                count += 1
    return count


class TestProductBallSize:
    def test_lattice_formula(self):
        assert lattice_ball_size(1, 2) == 5
        assert lattice_ball_size(2, 2) == 13
        assert lattice_ball_size(0, 5) == 1

    def test_hand_values(self):
        assert product_ball_size([1, 1, 1], 1, 2) == 5
        assert product_ball_size([1, 1, 1], 2, 2) == 13
        assert product_ball_size([1, 5, 17], 1, 2) == 29

    @pytest.mark.parametrize("group", ["trivial", "cyclic_z", "free2"])
    @pytest.mark.parametrize("m", [0, 1, 2])
    def test_matches_brute_force(self, group, m, lps_gens):
        from warpcones.algebra import circle_rotation_generators

        if group == "trivial":
            gens = None
            sizes = [1] * 6
        elif group == "cyclic_z":
            gens = circle_rotation_generators()
            sizes = [2 * r + 1 for r in range(6)]
        else:
            gens = lps_gens
            sizes = [2 * 3**r - 1 for r in range(6)]
        for radius in range(6):
            expected = brute_force_product_ball(gens, m, radius)
            assert product_ball_size(sizes, m, radius) == expected

    def test_requires_enough_sizes(self):
        with pytest.raises(InputError):
            product_ball_size([1, 3], 1, 2)


class TestFingerprint:
    def test_radius_zero(self, trivial_sphere_action, net_s2_eighth):
        level = WarpedLevel(trivial_sphere_action, 8.0)
        fp = growth_fingerprint(level, net_s2_eighth, 0)
        assert list(fp.measured.counts) == [1]
        assert list(fp.product_model.counts) == [1]
        assert fp.deviation == 0.0

    def test_trivial_group_matches_model(self, trivial_sphere_action, sphere2):
        net = build_net(sphere2, 1.0 / 16.0, 2042)
        level = WarpedLevel(trivial_sphere_action, 16.0)
        fp = growth_fingerprint(level, net, 3)
        assert fp.measured.counts[-1] > 10  # nondegenerate ball
        assert fp.deviation <= 0.15

    def test_profiles_start_at_one(self, lps_action, net_s2_eighth):
        level = WarpedLevel(lps_action, 64.0)
        fp = growth_fingerprint(level, net_s2_eighth, 2)
        assert fp.measured.counts[0] == 1
        assert fp.product_model.counts[0] == 1
        assert np.all(np.diff(fp.measured.counts) >= 0)

    def test_singular_base_rejected(self, quarter_turn_action, exact_quarter_net):
        level = WarpedLevel(quarter_turn_action, 8.0)
        with pytest.raises(PreconditionError):
            growth_fingerprint(level, exact_quarter_net, 3)

    def test_discriminates_instances(self, lps_action, circle_rotation_action, net_s2_32, circle):
        # product structure needs the net spacing to match the level scale
        rot_net = build_net(circle, 1.0 / 128.0, 77)
        fp_lps = growth_fingerprint(WarpedLevel(lps_action, 32.0), net_s2_32, 3)
        fp_rot = growth_fingerprint(WarpedLevel(circle_rotation_action, 32.0), rot_net, 3)
        cross = profile_gap(fp_lps.measured, fp_rot.measured)
        assert cross > fp_lps.deviation
        assert cross > fp_rot.deviation


class TestSchedule:
    def test_small_targets_exact(self, lps_action):
        entries = cardinality_schedule(lps_action, [40, 90], seed=17)
        assert [e.achieved for e in entries] == [40, 90]
        for e in entries:
            assert len(e.net) == e.target
            assert e.coarse_size <= e.target <= e.fine_size
            assert e.sandwich_ok

    def test_single_point(self, lps_action):
        entries = cardinality_schedule(lps_action, [1], seed=5)
        assert entries[0].achieved == 1

    def test_existing_size_shortcut(self, lps_action, sphere2):
        probe = cardinality_schedule(lps_action, [60], seed=9)[0]
        assert probe.achieved == 60

    def test_validation(self, lps_action):
        with pytest.raises(InputError):
            cardinality_schedule(lps_action, [10, 10], seed=1)
        with pytest.raises(InputError):
            cardinality_schedule(lps_action, [0, 5], seed=1)
        with pytest.raises(InputError):
            cardinality_schedule(lps_action, [3, 300_000], seed=1)


class TestSeparation:
    def test_hand_threshold(self):
        rep = subsequence_separation([2, 10, 100], 3, 2)
        assert rep.threshold == 27

    def test_thinning_semantics(self):
        sizes = [2, 3, 4, 10, 11, 50, 51, 600]
        rep = subsequence_separation(sizes, 3, 1)
        # kept sizes must satisfy next > position * current
        kept = rep.selected_sizes
        for pos, (a, b) in enumerate(zip(kept, kept[1:]), start=1):
            assert b > pos * a

    def test_pairs_contradict_beyond_threshold(self):
        # degree 2, radius 0: threshold 2, pairs with m > 2 must contradict
        sizes = [10]
        while len(sizes) < 7:
            sizes.append(sizes[-1] * len(sizes) + 1)
        rep = subsequence_separation(sizes, 2, 0)
        assert rep.threshold == 2
        beyond = [p for p in rep.pairs if p.position_m > rep.threshold]
        assert beyond
        for p in beyond:
            assert p.contradiction
            assert p.size_n > p.upper

    def test_validation(self):
        with pytest.raises(InputError):
            subsequence_separation([5], 3, 2)
        with pytest.raises(InputError):
            subsequence_separation([5, 5], 3, 2)
        with pytest.raises(InputError):
            subsequence_separation([5, 6], 1, 2)


@given(st.lists(st.integers(min_value=0, max_value=4), min_size=1, max_size=5))
def test_lattice_ball_monotone(radii):
    for m in (1, 2, 3):
        sizes = [lattice_ball_size(m, r) for r in sorted(radii)]
        assert sizes == sorted(sizes)
