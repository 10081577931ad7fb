"""Coarse-geometry probes: singular sets, local ball-product structure,
growth profiles, cardinality scheduling, and subsequence separation.

The singular set at scale t and radius r collects the points moved less
than 6r/t by some short group element (word length at most 6r).  Base
points outside it see the warped ball split as a product of a metric ball
with a group ball, which is what the ball-product check and the growth
fingerprint measure.

Witnesses come from the abstract group of words: when the generators
satisfy a relation (a nonempty word acting as the identity, e.g. the full
turn of a finite-order rotation), that word is a valid witness with zero
displacement, so non-faithful control actions are singular everywhere once
6r reaches the relation length.  Free actions are unaffected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import get_enumerator
from .errors import InputError, PreconditionError
from .manifolds import apply_isometry_many, ball_volume, dist_to_point
from .nets import Net, build_net, extend_net, interpolate_net
from .warped import (
    ActionSpec,
    WarpedLevel,
    _level_images,
    level_element_images,
    warped_ball_distances,
    warped_dist_exact,
)


# ---------------------------------------------------------------------------
# singular ("almost fixed") sets


@dataclass
class SingularSet:
    """Net points nearly fixed by a short nontrivial group element."""

    t: float
    r: float
    net_size: int
    member_indices: np.ndarray
    witnesses: dict  # index -> (word, displacement)
    relation_word: tuple | None

    @property
    def fraction(self) -> float:
        return len(self.member_indices) / self.net_size

    @property
    def member_set(self) -> frozenset:
        return frozenset(int(i) for i in self.member_indices)


def singular_set(action: ActionSpec, net: Net, t: float, r: float, cap: int | None = None) -> SingularSet:
    """Exact membership test of every net point against every short element.

    A point belongs when some group element of word length <= 6r moves it
    at most 6r/t; a relator word of length <= 6r (if any) certifies every
    point at displacement zero.
    """
    if t < 1:
        raise InputError("scale t must be at least 1")
    if r < 0:
        raise InputError("radius must be non-negative")
    points = net.points
    n = len(points)
    threshold = 6.0 * r / t
    word_radius = int(math.floor(6.0 * r))
    member = np.zeros(n, dtype=bool)
    witnesses: dict = {}
    relation_word = None
    if action.gens.generators and word_radius >= 1:
        enum = get_enumerator(action.gens, cap)
        enum.ensure_radius(word_radius)
        if enum.relation_girth is not None and enum.relation_girth <= word_radius:
            relation_word = enum.relation_word
            member[:] = True
            witnesses = {int(i): (relation_word, 0.0) for i in range(n)}
        else:
            for k in range(1, word_radius + 1):
                ids = enum.level_ids[k]
                if not ids:
                    break
                for pos, eid in enumerate(ids):
                    images = level_element_images(action, enum, k, pos, points)
                    moved = _displacements(action.model, points, images)
                    fresh = (moved <= threshold) & ~member
                    if np.any(fresh):
                        word = enum.word_for(eid)
                        for i in np.nonzero(fresh)[0]:
                            witnesses[int(i)] = (word, float(moved[i]))
                        member |= fresh
                if member.all():
                    break
    return SingularSet(
        t=t,
        r=r,
        net_size=n,
        member_indices=np.nonzero(member)[0],
        witnesses=witnesses,
        relation_word=relation_word,
    )


def _displacements(model, points, images) -> np.ndarray:
    if model.kind == "sphere":
        dm = np.linalg.norm(points - images, axis=1)
        dp = np.linalg.norm(points + images, axis=1)
        return 2.0 * np.arctan2(dm, dp)
    if model.kind == "so3":
        sign = np.where(np.sum(points * images, axis=1) < 0.0, -1.0, 1.0)[:, None]
        dm = np.linalg.norm(points - sign * images, axis=1)
        dp = np.linalg.norm(points + sign * images, axis=1)
        return 4.0 * np.arctan2(dm, dp)
    diff = np.abs(points - images)
    wrapped = np.minimum(diff, 2.0 * math.pi - diff)
    return np.sqrt(np.sum(wrapped * wrapped, axis=1))


def point_margin(action: ActionSpec, point: np.ndarray, word_radius: int, cap: int | None = None):
    """Smallest displacement of `point` by a nontrivial element of B(word_radius).

    Relators count as displacement zero.  Returns (margin, worst_word);
    margin is +inf for the trivial group.
    """
    if not action.gens.generators or word_radius < 1:
        return math.inf, None
    enum = get_enumerator(action.gens, cap)
    enum.ensure_radius(word_radius)
    if enum.relation_girth is not None and enum.relation_girth <= word_radius:
        return 0.0, enum.relation_word
    best = math.inf
    worst = None
    for k in range(1, word_radius + 1):
        ids = enum.level_ids[k]
        if not ids:
            break
        images = _level_images(action, enum, k, point)
        moved = dist_to_point(action.model, images, point)
        j = int(np.argmin(moved))
        if moved[j] < best:
            best = float(moved[j])
            worst = enum.word_for(ids[j])
    return best, worst


def pick_base_point(action: ActionSpec, net: Net, word_radius: int, cap: int | None = None):
    """Net point maximizing the singular margin; a heuristic, margin reported."""
    if not action.gens.generators:
        return 0, math.inf, None
    enum = get_enumerator(action.gens, cap)
    enum.ensure_radius(word_radius)
    if enum.relation_girth is not None and enum.relation_girth <= word_radius:
        return 0, 0.0, enum.relation_word
    points = net.points
    margins = np.full(len(points), np.inf)
    for k in range(1, word_radius + 1):
        ids = enum.level_ids[k]
        if not ids:
            break
        for pos in range(len(ids)):
            images = level_element_images(action, enum, k, pos, points)
            moved = _displacements(action.model, points, images)
            np.minimum(margins, moved, out=margins)
    idx = int(np.argmax(margins))
    return idx, float(margins[idx]), None


# ---------------------------------------------------------------------------
# ball-product comparison


@dataclass
class BallCheckConfig:
    r: float
    lipschitz_constant: float = 1.0
    additive_constant: float = 0.0
    epsilon: float = 0.05
    pair_cap: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.lipschitz_constant < 1:
            raise InputError("L must be at least 1")
        if self.additive_constant < 0:
            raise InputError("A must be non-negative")
        if self.epsilon <= 0:
            raise InputError("epsilon must be positive")


@dataclass
class BallProductReport:
    base_index: int
    margin: float
    t: float
    r: float
    n_members: int
    n_pairs: int
    max_distortion: float
    config: BallCheckConfig


def ball_product_check(
    level: WarpedLevel,
    net: Net,
    cfg: BallCheckConfig,
    base_index: int | None = None,
    cap: int | None = None,
) -> BallProductReport:
    """Compare warped distances in a small ball with the metric x group product.

    For a base point outside the singular set at radius r, every member x
    of the warped r-ball has a unique short frame element g_x with
    rho(x, x0) = |g_x| + t*d(g_x.x0, x); the product metric on pairs is
    t*d(g_x^-1.x, g_y^-1.y) + |g_y g_x^-1|.  The report carries the largest
    deviation between that and the exact warped distance.
    """
    action = level.action
    model = action.model
    t = level.t
    r = cfg.r
    word_radius = int(math.floor(6.0 * r))
    if base_index is None:
        base_index, margin, relator = pick_base_point(action, net, word_radius, cap)
    else:
        margin, relator = point_margin(action, net.points[base_index], word_radius, cap)
    threshold = 6.0 * r / t
    if relator is not None or margin <= threshold:
        raise PreconditionError(
            f"base point {base_index} lies in the singular set at (t={t}, r={r})",
            witness=relator,
        )
    x0 = net.points[base_index]
    vals, wits = warped_ball_distances(level, x0, net.points, r, cap)
    member_ids = np.nonzero(vals <= r + 1e-9)[0]
    has_group = bool(action.gens.generators)
    enum = get_enumerator(action.gens, cap) if has_group else None
    if has_group:
        enum.ensure_radius(2 * max(1, int(math.ceil(r))))
    # frame coordinates: metric part g^-1 . x, group part g
    frame_points = []
    frame_ids = []
    for i in member_ids:
        eid = int(wits[i])
        if has_group and eid:
            mat = enum.matrix_for(eid).transpose()  # exact inverse
            frame_points.append(apply_isometry_many(mat, net.points[i][None], model)[0])
        else:
            frame_points.append(net.points[i].copy())
        frame_ids.append(eid)
    pairs = [
        (a, b)
        for ai, a in enumerate(member_ids)
        for b in member_ids[ai + 1 :]
    ]
    rng = np.random.default_rng(cfg.seed)
    if len(pairs) > cfg.pair_cap:
        sel = rng.choice(len(pairs), size=cfg.pair_cap, replace=False)
        pairs = [pairs[int(s)] for s in sorted(sel)]
    pos_of = {int(m): j for j, m in enumerate(member_ids)}
    max_distortion = 0.0
    for a, b in pairs:
        exact = warped_dist_exact(level, net.points[a], net.points[b], cap).value
        ja, jb = pos_of[int(a)], pos_of[int(b)]
        if has_group:
            ga = enum.matrix_for(frame_ids[ja])
            gb = enum.matrix_for(frame_ids[jb])
            rel = gb @ ga.transpose()
            rel_id = enum.lookup(rel)
            if rel_id is None:
                raise RuntimeError("relative frame element missing from enumerated ball")
            word_part = enum.length[rel_id]
        else:
            word_part = 0
        metric_part = t * float(
            dist_to_point(model, frame_points[ja][None], frame_points[jb])[0]
        )
        product = metric_part + word_part
        max_distortion = max(max_distortion, abs(exact - product))
    return BallProductReport(
        base_index=int(base_index),
        margin=float(margin),
        t=t,
        r=r,
        n_members=int(len(member_ids)),
        n_pairs=len(pairs),
        max_distortion=float(max_distortion),
        config=cfg,
    )


# ---------------------------------------------------------------------------
# product ball sizes (group x lattice, l1 metric)


def lattice_ball_size(m: int, radius: int) -> int:
    """|{v in Z^m : ||v||_1 <= radius}| by the binomial convolution formula."""
    if m < 0 or radius < 0:
        raise InputError("dimension and radius must be non-negative")
    return sum(
        2**k * math.comb(m, k) * math.comb(radius, k) for k in range(0, min(m, radius) + 1)
    )


def product_ball_size(gamma_ball_sizes, m: int, radius: int) -> int:
    """|B(radius)| in the l1 product of a group with Z^m.

    `gamma_ball_sizes[j]` is the group ball size at radius j; sphere sizes
    are taken by differencing, and the product ball is the convolution
    sum_j sphere(j) * |B_{Z^m}(radius - j)|.
    """
    if radius < 0:
        raise InputError("radius must be non-negative")
    sizes = list(gamma_ball_sizes)
    if len(sizes) < radius + 1:
        raise InputError(f"need group ball sizes up to radius {radius}")
    spheres = [sizes[0]] + [sizes[j] - sizes[j - 1] for j in range(1, radius + 1)]
    return int(sum(spheres[j] * lattice_ball_size(m, radius - j) for j in range(radius + 1)))


# ---------------------------------------------------------------------------
# growth fingerprints


@dataclass
class GrowthProfile:
    radii: np.ndarray
    counts: np.ndarray
    source: str  # "warped-ball" | "product-model"

    def normalized(self) -> np.ndarray:
        total = float(self.counts[-1])
        return self.counts / max(total, 1.0)


def profile_gap(a: GrowthProfile, b: GrowthProfile) -> float:
    """Largest gap between terminally-normalized profiles (scale-free)."""
    if len(a.counts) != len(b.counts):
        raise InputError("profiles cover different radius ranges")
    return float(np.max(np.abs(a.normalized() - b.normalized())))


@dataclass
class FingerprintReport:
    measured: GrowthProfile
    product_model: GrowthProfile
    deviation: float
    base_index: int
    margin: float


def growth_fingerprint(
    level: WarpedLevel,
    net: Net,
    r_max: int,
    base_index: int | None = None,
    cap: int | None = None,
) -> FingerprintReport:
    """Warped-ball growth at a base point against the product-model prediction.

    The model convolves group sphere sizes with the base point's own
    metric-ball net counts -- the net-density rescaling of the lattice
    product.  The deviation is the largest gap between the terminally
    normalized profiles.

    The base point must not be singular at the scale needed by the
    disjointness of the product decomposition: every nontrivial element of
    word length <= 2*r_max must move it more than 2*r_max/t.
    """
    if r_max < 0:
        raise InputError("r_max must be non-negative")
    action = level.action
    model = action.model
    t = level.t
    word_radius = 2 * r_max
    if base_index is None:
        base_index, margin, relator = pick_base_point(action, net, word_radius, cap)
    else:
        margin, relator = point_margin(action, net.points[base_index], word_radius, cap)
    if action.gens.generators and r_max > 0:
        if relator is not None or margin <= 2.0 * r_max / t:
            raise PreconditionError(
                f"base point {base_index} is singular at the product scale "
                f"(margin {margin:.6f} <= {2.0 * r_max / t:.6f})",
                witness=relator,
            )
    x0 = net.points[base_index]
    radii = np.arange(r_max + 1)
    vals, _ = warped_ball_distances(level, x0, net.points, float(r_max), cap)
    measured = np.array([int(np.sum(vals <= k + 1e-9)) for k in radii])
    metric = t * dist_to_point(model, net.points, x0)
    metric_counts = np.array([int(np.sum(metric <= k + 1e-9)) for k in radii])
    if action.gens.generators:
        enum = get_enumerator(action.gens, cap)
        sizes = [enum.ball_size(k) for k in range(r_max + 1)]
    else:
        sizes = [1] * (r_max + 1)
    spheres = [sizes[0]] + [sizes[j] - sizes[j - 1] for j in range(1, r_max + 1)]
    predicted = np.array(
        [sum(spheres[j] * metric_counts[k - j] for j in range(k + 1)) for k in radii]
    )
    prof_measured = GrowthProfile(radii, measured, "warped-ball")
    prof_model = GrowthProfile(radii, predicted, "product-model")
    deviation = profile_gap(prof_measured, prof_model) if r_max > 0 else 0.0
    return FingerprintReport(
        measured=prof_measured,
        product_model=prof_model,
        deviation=deviation,
        base_index=int(base_index),
        margin=float(margin),
    )


# ---------------------------------------------------------------------------
# cardinality scheduling


@dataclass
class ScheduleEntry:
    target: int
    t: float
    coarse_size: int
    fine_size: int
    achieved: int
    volume_constant: float
    sandwich_ok: bool
    net: Net = field(repr=False, default=None)


def _separation_for_count(model, target: int) -> float:
    """Radius r with 1/vol(r/2) = target, so any r-separated set has <= target points."""
    lo, hi = 1e-9, 2.0 * model.diameter
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ball_volume(model, mid / 2.0) * target >= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def cardinality_schedule(
    action: ActionSpec,
    targets,
    seed: int = 0,
    pool_factor: int = 50,
) -> list:
    """Nets of exactly the requested sizes, one per target.

    The nominal scale for target N is t = N^(1/m).  A coarse net whose
    separation guarantees at most N points is refined at separation 1/t
    (which guarantees at least N points by the volume sandwich) and the
    extension is truncated to exactly N.
    """
    targets = [int(n) for n in targets]
    if any(n2 <= n1 for n1, n2 in zip(targets, targets[1:])):
        raise InputError("targets must be strictly increasing")
    if targets and targets[0] < 1:
        raise InputError("targets must be at least 1")
    if targets and targets[-1] > 200_000:
        raise InputError("target beyond the supported fine-net cap (200000)")
    model = action.model
    m = model.manifold_dim
    entries = []
    for n_target in targets:
        t = max(float(n_target) ** (1.0 / m), 1.0)
        r_coarse = _separation_for_count(model, n_target)
        coarse = build_net(model, r_coarse, seed)
        if len(coarse) > n_target:
            raise RuntimeError("volume sandwich violated by coarse net")
        r_fine = min(1.0 / t, coarse.separation)
        fine = extend_net(coarse, r_fine, seed + 1, pool_factor)
        while len(fine) < n_target:
            r_fine /= 2.0
            fine = extend_net(coarse, r_fine, seed + 1, pool_factor)
        achieved_net = interpolate_net(coarse, fine, n_target)
        v_half = ball_volume(model, (1.0 / t) / 2.0)
        v_full = ball_volume(model, 1.0 / t)
        constant = max(1.0 / (n_target * v_half), n_target * v_full, 1.0)
        sandwich_ok = (
            n_target / constant <= len(fine) <= constant * n_target
        )
        entries.append(
            ScheduleEntry(
                target=n_target,
                t=t,
                coarse_size=len(coarse),
                fine_size=len(fine),
                achieved=len(achieved_net),
                volume_constant=constant,
                sandwich_ok=sandwich_ok,
                net=achieved_net,
            )
        )
    return entries


# ---------------------------------------------------------------------------
# subsequence separation


@dataclass
class SeparationPair:
    position_m: int
    position_n: int
    size_m: int
    size_n: int
    lower: int  # m * |G_m|, what a coarse equivalence forces strictly below |G_n|
    upper: int  # D^(r+1) * |G_m|, what it forces at or above |G_n|
    contradiction: bool


@dataclass
class SeparationReport:
    degree: float
    radius: int
    threshold: int  # positions beyond this cannot be pairwise equivalent
    selected_indices: list
    selected_sizes: list
    pairs: list


def subsequence_separation(sizes, degree: float, radius: int) -> SeparationReport:
    """Thin a size sequence and certify pairwise non-equivalence beyond D^(r+1).

    Selection keeps indices so the k-th kept size exceeds k-1 times the
    previous kept size.  For kept positions n > m with m above the
    threshold, any coarse equivalence would force
    m*|G_m| < |G_n| <= D^(r+1)*|G_m|, and the right inequality fails.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise InputError("need at least two graph sizes")
    if any(s2 <= s1 for s1, s2 in zip(sizes, sizes[1:])):
        raise InputError("sizes must be strictly increasing")
    if degree < 2:
        raise InputError("degree bound must be at least 2")
    if radius < 0:
        raise InputError("radius must be non-negative")
    selected = [0]
    for i in range(1, len(sizes)):
        position = len(selected)  # 1-based position of the previously kept entry
        if sizes[i] > position * sizes[selected[-1]]:
            selected.append(i)
    threshold = int(degree ** (radius + 1))
    kept_sizes = [sizes[i] for i in selected]
    pairs = []
    for mi in range(len(selected)):
        for ni in range(mi + 1, len(selected)):
            m_pos, n_pos = mi + 1, ni + 1
            size_m, size_n = kept_sizes[mi], kept_sizes[ni]
            lower = m_pos * size_m
            upper = threshold * size_m
            pairs.append(
                SeparationPair(
                    position_m=m_pos,
                    position_n=n_pos,
                    size_m=size_m,
                    size_n=size_n,
                    lower=lower,
                    upper=upper,
                    contradiction=(m_pos > threshold and size_n > upper),
                )
            )
    return SeparationReport(
        degree=float(degree),
        radius=int(radius),
        threshold=threshold,
        selected_indices=selected,
        selected_sizes=kept_sizes,
        pairs=pairs,
    )
