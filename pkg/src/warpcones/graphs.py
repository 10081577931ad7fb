"""Approximating graphs on partition regions.

Vertices are the regions of a Voronoi partition; two regions are joined
when some generator transports positive sampled mass from one to the other.
Sampling can only miss edges of tiny intersection measure, never invent
them, so per-edge witness counts are kept for auditing borderline edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InputError
from .manifolds import apply_isometry_many
from .nets import NearestIndex, Partition
from .warped import ActionSpec


@dataclass
class ApproxGraph:
    """Simple undirected graph over region indices (no self-loops)."""

    vertex_count: int
    edges: tuple  # sorted tuple of (u, v) with u < v
    provenance: dict = field(default_factory=dict, compare=False)
    witness_counts: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        edges = tuple(sorted((min(u, v), max(u, v)) for u, v in self.edges))
        for u, v in edges:
            if u == v:
                raise InputError("self-loops are not allowed")
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise InputError(f"edge ({u}, {v}) out of range")
        if len(set(edges)) != len(edges):
            edges = tuple(sorted(set(edges)))
        self.edges = edges

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.vertex_count, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self):
        """Symmetric sparse adjacency matrix."""
        if not self.edges:
            return coo_matrix((self.vertex_count, self.vertex_count)).tocsr()
        e = np.asarray(self.edges)
        row = np.concatenate([e[:, 0], e[:, 1]])
        col = np.concatenate([e[:, 1], e[:, 0]])
        ones = np.ones(len(row))
        return coo_matrix((ones, (row, col)), shape=(self.vertex_count,) * 2).tocsr()

    def neighbors(self):
        adj = [[] for _ in range(self.vertex_count)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return [sorted(a) for a in adj]


def approx_graph(
    action: ActionSpec,
    partition: Partition,
    level_t: float | None = None,
    min_witness: int = 1,
) -> ApproxGraph:
    """Build the approximating graph of an action over a partition.

    An edge {R, R'} appears when at least `min_witness` retained samples of
    one region land in the other under some generator.
    """
    if partition.net.model != action.model:
        raise InputError("partition and action live on different models")
    net = partition.net
    k = len(net)
    index = NearestIndex(action.model, net.points)
    pair_counts: dict = {}
    for _, mat in action.gens.generators:
        images = apply_isometry_many(mat, partition.samples, action.model)
        image_regions = index.query(images)
        src = partition.assignments
        mask = image_regions != src
        if not np.any(mask):
            continue
        u = np.minimum(src[mask], image_regions[mask])
        v = np.maximum(src[mask], image_regions[mask])
        codes = u.astype(np.int64) * k + v
        uniq, counts = np.unique(codes, return_counts=True)
        for code, c in zip(uniq.tolist(), counts.tolist()):
            pair_counts[code] = pair_counts.get(code, 0) + c
    edges = []
    witness = {}
    for code, c in pair_counts.items():
        if c >= min_witness:
            uv = (code // k, code % k)
            edges.append(uv)
            witness[uv] = c
    provenance = {
        "generators": list(action.gens.labels),
        "partition": {
            "size": k,
            "r": net.separation,
            "R": net.density_radius,
            "n_samples": partition.n_samples,
            "seed": partition.seed,
            "Q": partition.q_ratio,
            "mesh": partition.mesh,
        },
        "model": action.model.spec_string(),
        "t": level_t,
        "min_witness": min_witness,
    }
    return ApproxGraph(k, tuple(edges), provenance, witness)


@dataclass
class GraphReport:
    max_degree: int
    mean_degree: float
    component_count: int
    component_sizes: list


def graph_report(g: ApproxGraph) -> GraphReport:
    """Exact combinatorial statistics."""
    if g.vertex_count == 0:
        return GraphReport(0, 0.0, 0, [])
    deg = g.degrees()
    n_comp, labels = connected_components(g.adjacency(), directed=False)
    sizes = np.bincount(labels, minlength=n_comp)
    return GraphReport(
        max_degree=int(deg.max()),
        mean_degree=float(deg.mean()),
        component_count=int(n_comp),
        component_sizes=sorted((int(s) for s in sizes), reverse=True),
    )


# ---------------------------------------------------------------------------
# import / export

FORMATS = ("edge-list", "adjacency-csv", "json")


def export_graph(g: ApproxGraph, fmt: str, path):
    """Bit-stable export; edges are sorted lexicographically."""
    if fmt == "edge-list":
        with open(path, "w") as fh:
            fh.write(f"# vertices {g.vertex_count}\n")
            for u, v in g.edges:
                fh.write(f"{u} {v}\n")
    elif fmt == "adjacency-csv":
        with open(path, "w") as fh:
            fh.write("vertex,neighbors\n")
            for v, nbrs in enumerate(g.neighbors()):
                fh.write(f"{v}," + " ".join(str(u) for u in nbrs) + "\n")
    elif fmt == "json":
        payload = {
            "vertex_count": g.vertex_count,
            "edges": [list(e) for e in g.edges],
            "provenance": g.provenance,
            "witness_counts": {f"{u}-{v}": c for (u, v), c in sorted(g.witness_counts.items())},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        raise InputError(f"unknown graph format {fmt!r}")


def import_graph(path, fmt: str) -> ApproxGraph:
    if fmt == "edge-list":
        edges = []
        vertex_count = 0
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    parts = line[1:].split()
                    if parts and parts[0] == "vertices":
                        vertex_count = int(parts[1])
                    continue
                u, v = line.split()
                edges.append((int(u), int(v)))
        return ApproxGraph(vertex_count, tuple(edges))
    if fmt == "adjacency-csv":
        edges = set()
        vertex_count = 0
        with open(path) as fh:
            header = fh.readline()
            del header
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                v_str, _, nbrs = line.partition(",")
                v = int(v_str)
                vertex_count = max(vertex_count, v + 1)
                for u in nbrs.split():
                    edges.add((min(v, int(u)), max(v, int(u))))
        return ApproxGraph(vertex_count, tuple(sorted(edges)))
    if fmt == "json":
        with open(path) as fh:
            payload = json.load(fh)
        return ApproxGraph(
            payload["vertex_count"], tuple(tuple(e) for e in payload["edges"])
        )
    raise InputError(f"unknown graph format {fmt!r}")
