"""The warped metric on a level set of a group action.

For an isometric action and scale t >= 1, the warped distance between x
and y is the minimum over group elements g of  t*d(x, g.y) + |g|,  where
|g| is the minimal word length.  Isometric actions on a compact manifold
attain this minimum, which makes iterative deepening exact: once the ball
radius reaches the best value found, longer words cost more than their
length alone and cannot improve it.

A fast companion metric lives on a net: a weighted graph with short-range
metric edges and weight-one warp edges along the generators.  Its shortest
paths track the exact oracle to within an additive discretization error
(empirically about t * R; validated against the oracle to 5 * t * R).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .algebra import BallEnumerator, GeneratorSet, get_enumerator, verify_special_orthogonal
from .errors import BallSizeExceeded, InputError
from .manifolds import (
    ManifoldModel,
    apply_isometry_many,
    check_point,
    dist_to_point,
    geo_dist,
    geodesic_move,
    quat_mult,
    quaternions_from_matrices,
)
from .nets import NearestIndex, Net


@dataclass(frozen=True)
class ActionSpec:
    """A generator set acting isometrically on a model manifold.

    Exact special-orthogonality (plus integrality, on the torus) is checked
    at load time; this is what guarantees the action is by isometries and
    that the warped-distance infimum is attained.
    """

    model: ManifoldModel
    gens: GeneratorSet

    def __post_init__(self):
        if not self.gens.generators:
            return
        if self.gens.dim != self.model.matrix_dim:
            raise InputError(
                f"generators of dimension {self.gens.dim} cannot act on "
                f"{self.model.spec_string()}"
            )
        for lab, mat in self.gens.generators:
            if not verify_special_orthogonal(mat):
                raise InputError(f"generator {lab!r} is not special-orthogonal")
            if self.model.kind == "torus" and mat.exponent != 0:
                raise InputError(f"generator {lab!r} does not preserve the torus lattice")


@dataclass(frozen=True)
class WarpedLevel:
    """A fixed scale t >= 1 of the warped cone over an action."""

    action: ActionSpec
    t: float

    def __post_init__(self):
        if self.t < 1.0:
            raise InputError("level scale t must be at least 1")


@dataclass
class WarpedDistance:
    value: float
    witness_word: tuple
    levels_enumerated: int


def _level_images(action: ActionSpec, enum: BallEnumerator, k: int, p: np.ndarray) -> np.ndarray:
    """Images of a single point under every length-k element."""
    model = action.model
    mats = enum.level_matrix_array(k)
    if len(mats) == 0:
        return np.zeros((0, model.point_dim))
    if model.kind == "sphere":
        return mats @ p
    if model.kind == "torus":
        return np.mod(mats @ p, 2.0 * math.pi)
    quats = enum._aux_cache.get(("quat", k))
    if quats is None:
        quats = quaternions_from_matrices(mats)
        enum._aux_cache[("quat", k)] = quats
    return quat_mult(quats, p)


def level_element_images(action: ActionSpec, enum: BallEnumerator, k: int, pos: int, points: np.ndarray) -> np.ndarray:
    """Images of many points under the pos-th length-k element."""
    model = action.model
    mats = enum.level_matrix_array(k)
    if model.kind == "sphere":
        return points @ mats[pos].T
    if model.kind == "torus":
        return np.mod(points @ mats[pos].T, 2.0 * math.pi)
    quats = enum._aux_cache.get(("quat", k))
    if quats is None:
        quats = quaternions_from_matrices(mats)
        enum._aux_cache[("quat", k)] = quats
    return quat_mult(quats[pos], points)


def warped_dist_exact(level: WarpedLevel, x, y, cap: int | None = None) -> WarpedDistance:
    """Exact warped distance and a minimizing group element.

    Iterative deepening over word-length spheres; the value is the true
    minimum because elements of length k contribute at least k.
    """
    model = level.action.model
    t = level.t
    x = check_point(model, x)
    y = check_point(model, y)
    best = t * geo_dist(model, x, y)
    best_word: tuple = ()
    if not level.action.gens.generators:
        return WarpedDistance(best, best_word, 0)
    enum = get_enumerator(level.action.gens, cap)
    k = 1
    while k < best:
        try:
            enum.ensure_radius(k)
        except BallSizeExceeded as exc:
            raise BallSizeExceeded(
                f"warped distance needs ball radius {k}, cap {enum.cap} hit "
                f"(best upper bound so far {best:.6f})",
                partial_count=exc.partial_count,
                radius=k,
                upper_bound=best,
            ) from exc
        ids = enum.level_ids[k]
        if not ids:
            break  # group saturated: every element already considered
        images = _level_images(level.action, enum, k, y)
        vals = t * dist_to_point(model, images, x) + k
        j = int(np.argmin(vals))
        if vals[j] < best:
            best = float(vals[j])
            best_word = enum.word_for(ids[j])
        k += 1
    return WarpedDistance(best, best_word, k - 1)


def warped_ball_distances(level: WarpedLevel, x0, points: np.ndarray, radius: float, cap: int | None = None):
    """Warped distances from x0 to many points, exact wherever <= radius.

    Returns ``(values, witness_ids)`` where witness_ids[i] is the enumerator
    element id realizing the minimum (0 = identity).  Entries above `radius`
    are only upper bounds, since words longer than `radius` are not explored.
    """
    model = level.action.model
    t = level.t
    x0 = check_point(model, x0)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    vals = t * dist_to_point(model, points, x0)
    wits = np.zeros(len(points), dtype=int)
    if not level.action.gens.generators:
        return vals, wits
    enum = get_enumerator(level.action.gens, cap)
    kmax = int(math.floor(radius))
    for k in range(1, kmax + 1):
        enum.ensure_radius(k)
        ids = enum.level_ids[k]
        if not ids:
            break
        images = _level_images(level.action, enum, k, x0)
        for pos, eid in enumerate(ids):
            cand = t * dist_to_point(model, points, images[pos]) + k
            better = cand < vals
            if np.any(better):
                vals[better] = cand[better]
                wits[better] = eid
    return vals, wits


# ---------------------------------------------------------------------------
# graph companion metric


@dataclass(eq=False)
class WarpedGraphOracle:
    """All-sources shortest-path oracle for the discretized warped metric."""

    level: WarpedLevel
    net: Net
    graph: object  # scipy.sparse csr_matrix
    metric_cutoff: float
    warp_edge_count: int
    metric_edge_count: int

    def distances(self, sources) -> np.ndarray:
        """Shortest-path distances from the given net indices (row per source)."""
        sources = np.atleast_1d(np.asarray(sources, dtype=int))
        return dijkstra(self.graph, directed=False, indices=sources)

    def export_edge_list(self, path):
        coo = self.graph.tocoo()
        lines = []
        for u, v, w in zip(coo.row, coo.col, coo.data):
            if u < v:
                lines.append(f"{u} {v} {w:.9f}")
        lines.sort(key=lambda s: tuple(int(x) for x in s.split()[:2]))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))


def _metric_pairs(model: ManifoldModel, points: np.ndarray, cutoff: float):
    """Index pairs within geodesic distance `cutoff` (chord-tree search)."""
    n = len(points)
    if model.kind == "sphere":
        if cutoff >= math.pi:
            iu, ju = np.triu_indices(n, k=1)
            return np.stack([iu, ju], axis=1)
        from scipy.spatial import cKDTree

        tree = cKDTree(points)
        pairs = tree.query_pairs(2.0 * math.sin(cutoff / 2.0) + 1e-12, output_type="ndarray")
        return pairs
    if model.kind == "so3":
        from scipy.spatial import cKDTree

        doubled = np.vstack([points, -points])
        tree = cKDTree(doubled)
        chord = 2.0 * math.sin(min(cutoff, math.pi) / 4.0) + 1e-12
        raw = tree.query_pairs(chord, output_type="ndarray") % n
        raw = raw[raw[:, 0] != raw[:, 1]]
        raw.sort(axis=1)
        return np.unique(raw, axis=0)
    iu, ju = np.triu_indices(n, k=1)
    d = np.array(
        [geo_dist(model, points[i], points[j]) for i, j in zip(iu, ju)]
    )
    keep = d <= cutoff
    return np.stack([iu[keep], ju[keep]], axis=1)


def warped_graph_metric(level: WarpedLevel, net: Net, metric_factor: float = 3.0) -> WarpedGraphOracle:
    """Weighted auxiliary graph on net points approximating the warped metric.

    Metric edges join net points within ``metric_factor * R`` at weight
    t * geodesic distance; each generator contributes weight-one warp edges
    from every net point to the net point nearest its image.
    """
    model = level.action.model
    t = level.t
    pts = net.points
    n = len(pts)
    cutoff = metric_factor * net.density_radius
    pairs = _metric_pairs(model, pts, cutoff)
    if len(pairs):
        seg = _pair_dists(model, pts, pairs)
        keep = seg <= cutoff + 1e-12
        pairs, seg = pairs[keep], seg[keep]
        weights = t * seg
    else:
        weights = np.zeros(0)
    metric_edge_count = len(pairs)
    rows = [pairs[:, 0]] if len(pairs) else []
    cols = [pairs[:, 1]] if len(pairs) else []
    data = [weights] if len(pairs) else []
    warp_count = 0
    if level.action.gens.generators:
        index = NearestIndex(model, pts)
        for _, mat in level.action.gens.generators:
            images = apply_isometry_many(mat, pts, model)
            target = index.query(images)
            src = np.arange(n)
            keep = target != src
            u = np.minimum(src[keep], target[keep])
            v = np.maximum(src[keep], target[keep])
            rows.append(u)
            cols.append(v)
            data.append(np.ones(len(u)))
            warp_count += int(len(u))
    if rows:
        row = np.concatenate(rows)
        col = np.concatenate(cols)
        val = np.concatenate(data)
        order = np.lexsort((val, col, row))
        row, col, val = row[order], col[order], val[order]
        first = np.ones(len(row), dtype=bool)
        first[1:] = (row[1:] != row[:-1]) | (col[1:] != col[:-1])
        row, col, val = row[first], col[first], val[first]
        graph = coo_matrix((val, (row, col)), shape=(n, n)).tocsr()
    else:
        graph = coo_matrix((n, n)).tocsr()
    return WarpedGraphOracle(
        level=level,
        net=net,
        graph=graph,
        metric_cutoff=cutoff,
        warp_edge_count=warp_count,
        metric_edge_count=metric_edge_count,
    )


def _pair_dists(model: ManifoldModel, pts: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    a = pts[pairs[:, 0]]
    b = pts[pairs[:, 1]]
    if model.kind == "sphere":
        dm = np.linalg.norm(a - b, axis=1)
        dp = np.linalg.norm(a + b, axis=1)
        return 2.0 * np.arctan2(dm, dp)
    if model.kind == "so3":
        sign = np.where(np.sum(a * b, axis=1) < 0.0, -1.0, 1.0)[:, None]
        dm = np.linalg.norm(a - sign * b, axis=1)
        dp = np.linalg.norm(a + sign * b, axis=1)
        return 4.0 * np.arctan2(dm, dp)
    diff = np.abs(a - b)
    wrapped = np.minimum(diff, 2.0 * math.pi - diff)
    return np.sqrt(np.sum(wrapped * wrapped, axis=1))


# ---------------------------------------------------------------------------
# neighborhood cover


@dataclass
class CoverReport:
    """Witness data for the warped-neighborhood covering inclusion.

    Every point of the radius-r warped neighborhood of Y lies in some
    translate g . (metric neighborhood of Y of radius r/t) with |g| <= r.
    """

    radius: float
    group_radius: int
    metric_radius: float
    ball_size: int
    n_checked: int
    n_covered: int
    max_metric_excess: float

    @property
    def all_covered(self) -> bool:
        return self.n_checked == self.n_covered


def neighborhood_cover(
    level: WarpedLevel,
    base_points: np.ndarray,
    radius: float,
    n_check: int = 500,
    seed: int = 0,
    cap: int | None = None,
) -> CoverReport:
    """Realize and spot-check the covering of a warped neighborhood.

    Sample points are produced inside the warped neighborhood by applying a
    short word and then a small geodesic move, and each is verified to land
    in the advertised cover.
    """
    model = level.action.model
    t = level.t
    base_points = np.atleast_2d(np.asarray(base_points, dtype=float))
    if radius < 0:
        raise InputError("radius must be non-negative")
    kmax = int(math.floor(radius))
    gens = level.action.gens
    has_group = bool(gens.generators)
    enum = get_enumerator(gens, cap) if has_group else None
    ball_ids = [0]
    if has_group:
        enum.ensure_radius(kmax)
        ball_ids = [eid for k in range(kmax + 1) for eid in enum.level_ids[k]]
    rng = np.random.default_rng(seed)
    metric_radius = radius / t
    n_covered = 0
    max_excess = 0.0
    n_checked = n_check if radius > 0 else min(n_check, len(base_points))
    for trial in range(n_checked):
        y = base_points[rng.integers(len(base_points))]
        if radius == 0:
            z = y.copy()
        else:
            eid = ball_ids[rng.integers(len(ball_ids))]
            word_len = enum.length[eid] if has_group else 0
            if has_group and eid:
                z0 = apply_isometry_many(enum.matrix_for(eid), y[None], model)[0]
            else:
                z0 = y.copy()
            u = rng.uniform(0.0, max(radius - word_len, 0.0) / t)
            z = geodesic_move(model, z0, u, rng)
        covered = False
        best = math.inf
        for k in range(kmax + 1):
            if has_group:
                if len(enum.level_matrix_array(k)) == 0:
                    break
                inv_images = _inverse_images(level.action, enum, k, z)
            else:
                if k > 0:
                    break
                inv_images = z[None]
            for img in inv_images:
                d = float(np.min(dist_to_point(model, base_points, img)))
                best = min(best, d)
                if d <= metric_radius + 1e-9:
                    covered = True
                    break
            if covered:
                break
        if covered:
            n_covered += 1
        else:
            max_excess = max(max_excess, best - metric_radius)
    return CoverReport(
        radius=radius,
        group_radius=kmax,
        metric_radius=metric_radius,
        ball_size=len(ball_ids),
        n_checked=n_checked,
        n_covered=n_covered,
        max_metric_excess=max_excess,
    )


def _inverse_images(action: ActionSpec, enum: BallEnumerator, k: int, z: np.ndarray) -> np.ndarray:
    """Images of z under the inverses (= transposes) of the length-k elements."""
    model = action.model
    mats = enum.level_matrix_array(k)
    if model.kind == "sphere":
        return np.einsum("nji,j->ni", mats, z)
    if model.kind == "torus":
        return np.mod(np.einsum("nji,j->ni", mats, z), 2.0 * math.pi)
    # rotation group: conjugate quaternion acts as the inverse rotation
    quats = enum._aux_cache.get(("quat", k))
    if quats is None:
        quats = quaternions_from_matrices(mats)
        enum._aux_cache[("quat", k)] = quats
    conj = quats * np.array([1.0, -1.0, -1.0, -1.0])
    return quat_mult(conj, z)
