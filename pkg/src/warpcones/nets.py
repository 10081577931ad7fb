"""Separated/dense nets on model manifolds and their Voronoi partitions.

Nets are built by greedy farthest-point insertion over a uniform candidate
pool.  A maximal r-separated set is automatically r-dense, so the density
radius equals the separation up to the pool's sampling resolution; the pool
holds at least ``pool_factor`` candidates per expected net point, which is
the documented resolution of the density guarantee.  Insertion order is part
of the output contract (prefixes of an extension stay separated, which is
what net interpolation relies on).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError, RegionEmptyError
from .manifolds import (
    TWO_PI,
    ManifoldModel,
    ball_volume,
    dist_to_point,
    haar_sample,
    pairwise_dist,
)

MAX_POOL = 5_000_000
_MESH_SAMPLE_CAP = 128


@dataclass(eq=False)
class Net:
    """An r-separated, R-dense point set, in greedy insertion order."""

    model: ManifoldModel
    points: np.ndarray
    separation: float
    density_radius: float
    seed: int
    pool_size: int
    degenerate: bool = False

    def __len__(self):
        return len(self.points)


@dataclass(eq=False)
class Partition:
    """Voronoi regions of a net with Monte-Carlo measures.

    ``measures`` are sample fractions (they sum to one), ``q_ratio`` is the
    max/min measure ratio, and ``mesh`` is the largest sampled intra-region
    distance.
    """

    net: Net
    samples: np.ndarray
    assignments: np.ndarray
    counts: np.ndarray
    measures: np.ndarray
    mesh: float
    q_ratio: float
    n_samples: int
    seed: int

    @property
    def size(self) -> int:
        return len(self.net)


# ---------------------------------------------------------------------------
# similarity-space helpers: larger similarity = closer, so the greedy loop
# runs without transcendentals.


def _sims_to_point(model: ManifoldModel, points: np.ndarray, q: np.ndarray) -> np.ndarray:
    if model.kind == "sphere":
        return points @ q
    if model.kind == "so3":
        return np.abs(points @ q)
    diff = np.abs(points - q)
    wrapped = np.minimum(diff, TWO_PI - diff)
    return -np.sum(wrapped * wrapped, axis=-1)


def _closeness_threshold(model: ManifoldModel, r: float) -> float:
    if model.kind == "sphere":
        return math.cos(min(r, math.pi))
    if model.kind == "so3":
        return math.cos(min(r, math.pi) / 2.0)
    return -(r * r)


def _pool_size(model: ManifoldModel, separation: float, pool_factor: int) -> int:
    expected = 1.0 / max(ball_volume(model, separation / 2.0), 1e-12)
    return int(min(max(1000, math.ceil(pool_factor * expected)), MAX_POOL))


def _greedy_fill(model, pool, chosen, best_sim, threshold):
    """Farthest-point insertion until every pool point is within threshold."""
    alive = np.nonzero(best_sim < threshold)[0]
    while alive.size:
        sub = best_sim[alive]
        j = int(alive[np.argmin(sub)])
        chosen.append(j)
        sims = _sims_to_point(model, pool[alive], pool[j])
        np.maximum(best_sim[alive], sims, out=sub)
        best_sim[alive] = sub
        alive = alive[sub < threshold]
    return chosen


def build_net(model: ManifoldModel, separation: float, seed: int, pool_factor: int = 50) -> Net:
    """Greedy r-separated, r-dense net at the given separation."""
    if separation <= 0:
        raise InputError("separation must be positive")
    pool_n = _pool_size(model, separation, pool_factor)
    pool = haar_sample(model, pool_n, seed)
    if separation >= model.diameter:
        return Net(model, pool[:1].copy(), separation, separation, seed, pool_n, degenerate=True)
    threshold = _closeness_threshold(model, separation)
    best_sim = _sims_to_point(model, pool, pool[0])
    chosen = _greedy_fill(model, pool, [0], best_sim, threshold)
    return Net(model, pool[chosen].copy(), separation, separation, seed, pool_n)


def extend_net(base: Net, separation: float, seed: int, pool_factor: int = 50) -> Net:
    """Refine a net: keep all base points, insert new ones at a finer separation.

    The result starts with ``base.points`` verbatim, so every prefix of at
    least ``len(base)`` points is a valid net between the two scales.
    """
    if separation > base.separation:
        raise InputError("extension separation must not exceed the base separation")
    model = base.model
    pool_n = _pool_size(model, separation, pool_factor)
    pool = haar_sample(model, pool_n, seed)
    threshold = _closeness_threshold(model, separation)
    best_sim = np.full(pool_n, -np.inf)
    for p in base.points:
        np.maximum(best_sim, _sims_to_point(model, pool, p), out=best_sim)
    chosen = _greedy_fill(model, pool, [], best_sim, threshold)
    points = np.vstack([base.points, pool[chosen]])
    return Net(model, points, separation, separation, seed, pool_n)


def interpolate_net(coarse: Net, fine: Net, target: int) -> Net:
    """Net with exactly `target` points, containing coarse, contained in fine."""
    if coarse.model != fine.model:
        raise InputError("coarse and fine nets live on different models")
    if len(fine) < len(coarse) or not np.array_equal(
        fine.points[: len(coarse)], coarse.points
    ):
        raise InputError("fine net does not extend the coarse net")
    if not (len(coarse) <= target <= len(fine)):
        raise InputError(
            f"target {target} outside [{len(coarse)}, {len(fine)}]"
        )
    if target == len(coarse):
        return coarse
    if target == len(fine):
        return fine
    return Net(
        model=fine.model,
        points=fine.points[:target].copy(),
        separation=fine.separation,
        density_radius=coarse.density_radius,
        seed=fine.seed,
        pool_size=fine.pool_size,
    )


# ---------------------------------------------------------------------------
# nearest-region assignment


class NearestIndex:
    """Nearest-net-point queries; geodesic order via chord distance trees."""

    def __init__(self, model: ManifoldModel, points: np.ndarray):
        self.model = model
        self.points = np.asarray(points, dtype=float)
        self.n = len(self.points)
        if model.kind == "sphere":
            self._tree = cKDTree(self.points)
        elif model.kind == "so3":
            # antipodal quaternions are the same rotation
            self._tree = cKDTree(np.vstack([self.points, -self.points]))
        else:
            self._tree = None

    def query(self, queries: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        if self._tree is not None:
            _, idx = self._tree.query(queries, k=1)
            return np.asarray(idx) % self.n
        out = np.empty(len(queries), dtype=int)
        chunk = max(1, int(4_000_000 / max(self.n, 1)))
        for lo in range(0, len(queries), chunk):
            q = queries[lo : lo + chunk]
            diff = np.abs(q[:, None, :] - self.points[None, :, :])
            wrapped = np.minimum(diff, TWO_PI - diff)
            d2 = np.sum(wrapped * wrapped, axis=-1)
            out[lo : lo + chunk] = np.argmin(d2, axis=1)
        return out


def voronoi_partition(net: Net, n_samples: int, seed: int) -> Partition:
    """Assign Haar samples to nearest net points and estimate region data.

    Requires at least 100 samples per region.  Exact distance ties go to the
    lower region index up to the resolution of the tree query; ties have
    probability zero for Haar samples.
    """
    k = len(net)
    if k == 0:
        raise InputError("net is empty")
    if n_samples < 100 * k:
        raise InputError(f"need at least {100 * k} samples for {k} regions")
    samples = haar_sample(net.model, int(n_samples), seed)
    index = NearestIndex(net.model, net.points)
    assignments = index.query(samples)
    counts = np.bincount(assignments, minlength=k)
    if counts.min() == 0:
        region = int(np.argmin(counts))
        raise RegionEmptyError(region)
    measures = counts / float(n_samples)
    mesh = 0.0
    order = np.argsort(assignments, kind="stable")
    bounds = np.searchsorted(assignments[order], np.arange(k + 1))
    for region in range(k):
        ids = order[bounds[region] : bounds[region + 1]][:_MESH_SAMPLE_CAP]
        if len(ids) < 2:
            continue
        local = pairwise_dist(net.model, samples[ids])
        mesh = max(mesh, float(local.max()))
    q_ratio = float(measures.max() / measures.min())
    return Partition(
        net=net,
        samples=samples,
        assignments=assignments,
        counts=counts,
        measures=measures,
        mesh=mesh,
        q_ratio=q_ratio,
        n_samples=int(n_samples),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# serialization


def save_net_csv(net: Net, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index"] + [f"x{i}" for i in range(net.points.shape[1])])
        for i, row in enumerate(net.points):
            writer.writerow([i] + [repr(float(v)) for v in row])


def load_net_csv(model: ManifoldModel, path, separation: float, density_radius: float, seed: int = -1) -> Net:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row[1:]] for row in reader]
    del header
    points = np.asarray(rows, dtype=float)
    return Net(model, points, separation, density_radius, seed, pool_size=0)


def save_partition_csv(partition: Partition, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region", "measure", "count"])
        for i, (m, c) in enumerate(zip(partition.measures, partition.counts)):
            writer.writerow([i, repr(float(m)), int(c)])


def partition_summary(partition: Partition) -> dict:
    return {
        "size": partition.size,
        "r": partition.net.separation,
        "R": partition.net.density_radius,
        "mesh": partition.mesh,
        "Q": partition.q_ratio,
        "n_samples": partition.n_samples,
        "seed": partition.seed,
    }


def save_partition_summary(partition: Partition, path):
    with open(path, "w") as fh:
        json.dump(partition_summary(partition), fh, indent=2, sort_keys=True)
        fh.write("\n")
