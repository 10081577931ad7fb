"""Expansion certification: spectra, Cheeger constants, action gaps,
and the coarse-embedding obstruction certificate.

Conventions.  The graph Laplacian is degree-normalized, with spectrum in
[0, 2].  The Cheeger constant is the edge-expansion  h = min |boundary(A)| / |A|
over vertex sets of at most half size.  Conductance divides by volume
instead, giving the sandwich  lambda2/2 <= phi <= h <= D * phi,  so
lambda2/2 is always a certified lower bound for h.

The action gap is computed in averaged form: the mean over generators of
the measure-weighted quadratic forms ||(I - A_s) f||^2 on zero-mean
functions.  Mean over generators is at most max over generators, so the
reported value is a certified lower bound for the max-form gap constant,
never the constant itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError, SpectralError
from .graphs import ApproxGraph, graph_report
from .manifolds import apply_isometry_many
from .nets import NearestIndex, Partition
from .warped import ActionSpec

DENSE_LIMIT = 2000
_CHEEGER_EXACT_LIMIT = 24


# ---------------------------------------------------------------------------
# normalized Laplacian spectrum


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    solver: str
    residual_norms: np.ndarray
    connected: bool

    @property
    def lambda2(self) -> float:
        if len(self.eigenvalues) < 2:
            return 0.0
        return float(self.eigenvalues[1])


def normalized_laplacian(g: ApproxGraph):
    """I - D^(-1/2) A D^(-1/2); isolated vertices get an all-zero row."""
    adj = g.adjacency()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    d_half = sp.diags(inv_sqrt)
    lap = sp.identity(g.vertex_count, format="csr") - d_half @ adj @ d_half
    lap.setdiag(np.where(nz, lap.diagonal(), 0.0))
    return lap.tocsr()


def _spectrum_pair(g: ApproxGraph, k: int, solver: str, tol: float):
    n = g.vertex_count
    lap = normalized_laplacian(g)
    k = min(k, n)
    if solver == "dense" or (solver == "auto" and n <= DENSE_LIMIT):
        dense = lap.toarray()
        vals, vecs = scipy.linalg.eigh(dense)
        return vals[:k], vecs[:, :k], "dense", lap
    v0 = np.full(n, 1.0 / math.sqrt(n))
    try:
        vals, vecs = spla.eigsh(lap, k=max(k, 2), sigma=-1e-3, which="LM", v0=v0, tol=tol)
    except spla.ArpackNoConvergence as exc:
        partial = exc.eigenvalues
        res = None
        if partial is not None and len(partial):
            res = np.array(
                [float(np.linalg.norm(lap @ v - w * v)) for w, v in zip(partial, exc.eigenvectors.T)]
            )
        raise SpectralError(f"eigensolver did not converge: {exc}", residuals=res) from exc
    order = np.argsort(vals)
    return vals[order][:k], vecs[:, order][:, :k], "iterative", lap


def laplacian_spectrum(g: ApproxGraph, k: int = 6, solver: str = "auto", tol: float = 1e-8) -> SpectrumReport:
    """k smallest eigenvalues of the normalized Laplacian, with residuals."""
    if solver not in ("auto", "dense", "iterative"):
        raise InputError(f"unknown solver {solver!r}")
    if g.vertex_count == 0:
        raise InputError("empty graph")
    vals, vecs, used, lap = _spectrum_pair(g, k, solver, tol)
    residuals = np.array(
        [float(np.linalg.norm(lap @ vecs[:, i] - vals[i] * vecs[:, i])) for i in range(vecs.shape[1])]
    )
    report = graph_report(g)
    return SpectrumReport(
        eigenvalues=np.asarray(vals, dtype=float),
        solver=used,
        residual_norms=residuals,
        connected=report.component_count <= 1,
    )


# ---------------------------------------------------------------------------
# Cheeger constants


def cheeger_exact(g: ApproxGraph):
    """Exact edge expansion by subset enumeration; refuses above 24 vertices.

    Runtime is exponential (2^23 subsets at the cap, minutes in pure
    Python); intended for oracle-grade checks on small graphs.
    """
    n = g.vertex_count
    if n > _CHEEGER_EXACT_LIMIT:
        raise InputError(
            f"cheeger_exact is capped at {_CHEEGER_EXACT_LIMIT} vertices; use cheeger_bounds"
        )
    if n < 2:
        raise InputError("need at least two vertices")
    rep = graph_report(g)
    if rep.component_count != 1:
        raise InputError("graph is disconnected")
    adj_mask = [0] * n
    for u, v in g.edges:
        adj_mask[u] |= 1 << v
        adj_mask[v] |= 1 << u
    best = math.inf
    best_set = 0
    half = n // 2
    for subset in range(1, 1 << n):
        size = subset.bit_count()
        if size > half:
            continue
        boundary = 0
        m = subset
        while m:
            low = m & -m
            v = low.bit_length() - 1
            boundary += (adj_mask[v] & ~subset).bit_count()
            m ^= low
        ratio = boundary / size
        if ratio < best:
            best = ratio
            best_set = subset
    witness = frozenset(v for v in range(n) if best_set >> v & 1)
    return best, witness


@dataclass
class CheegerReport:
    h_lower: float
    h_upper: float
    h_exact: float | None
    witness_set: frozenset
    lambda2: float


def boundary_size(g: ApproxGraph, subset) -> int:
    s = set(subset)
    return sum(1 for u, v in g.edges if (u in s) != (v in s))


def cheeger_bounds(g: ApproxGraph, spectrum: SpectrumReport | None = None, exact_if_small: bool = False) -> CheegerReport:
    """Sweep-cut upper bound and spectral lower bound for edge expansion.

    The lower bound lambda2/2 routes through conductance (h >= phi >= lambda2/2,
    valid since minimum degree >= 1 on a connected graph), so the sandwich
    h_lower <= h <= h_upper holds regardless of sweep quality.
    """
    n = g.vertex_count
    if n < 2:
        raise InputError("need at least two vertices")
    rep = graph_report(g)
    if rep.component_count != 1:
        raise InputError("cheeger bounds require a connected graph")
    vals, vecs, _, _ = _spectrum_pair(g, 2, "auto", 1e-8)
    lam2 = float(vals[1])
    deg = g.degrees().astype(float)
    embed = vecs[:, 1] / np.sqrt(deg)
    order = np.argsort(embed, kind="stable")
    rank = np.empty(n, dtype=int)
    rank[order] = np.arange(n)
    # prefix boundary sizes via a difference array over the sweep order
    diff = np.zeros(n + 1, dtype=int)
    for u, v in g.edges:
        a, b = sorted((rank[u], rank[v]))
        diff[a + 1] += 1
        diff[b + 1] -= 1
    crossing = np.cumsum(diff)[1:]  # crossing[k-1] = |boundary(first k)|
    best = math.inf
    best_k = 1
    for kk in range(1, n):
        ratio = crossing[kk - 1] / min(kk, n - kk)
        if ratio < best:
            best = ratio
            best_k = kk
    if best_k <= n - best_k:
        witness = frozenset(int(v) for v in order[:best_k])
    else:
        witness = frozenset(int(v) for v in order[best_k:])
    h_exact = None
    if exact_if_small and n <= _CHEEGER_EXACT_LIMIT:
        h_exact, _ = cheeger_exact(g)
    return CheegerReport(
        h_lower=lam2 / 2.0,
        h_upper=float(best),
        h_exact=h_exact,
        witness_set=witness,
        lambda2=lam2,
    )


# ---------------------------------------------------------------------------
# action spectral gap (averaged form, scalar coefficients)


@dataclass
class GapReport:
    epsilon_avg: float
    provenance: dict = field(default_factory=dict)
    # mean over generators <= max over generators: epsilon_avg is a certified
    # lower bound for the max-form gap constant, never the constant itself.
    lower_bound_for_max_form: bool = True
    solver: str = "dense"


def transition_matrices(action: ActionSpec, partition: Partition):
    """Row-stochastic region-to-region mass transport, one matrix per generator."""
    net = partition.net
    k = len(net)
    index = NearestIndex(action.model, net.points)
    mats = []
    for _, gmat in action.gens.generators:
        images = apply_isometry_many(gmat, partition.samples, action.model)
        image_regions = index.query(images)
        data = np.ones(partition.n_samples)
        mat = sp.coo_matrix(
            (data, (partition.assignments, image_regions)), shape=(k, k)
        ).tocsr()
        inv_counts = 1.0 / partition.counts
        mat = sp.diags(inv_counts) @ mat
        mats.append(mat)
    return mats


def action_gap(action: ActionSpec, partition: Partition, tol: float = 1e-9, seed: int = 7) -> GapReport:
    """Averaged-form spectral gap of the action over a partition.

    Smallest eigenvalue of the mean of (I-A_s)^T W (I-A_s) on the
    measure-weighted zero-mean subspace, reported as its square root.
    """
    if not action.gens.generators:
        return GapReport(0.0, {"generators": [], "size": partition.size})
    k = partition.size
    w = partition.measures
    if np.any(w <= 0):
        raise InputError("partition has a zero-measure region")
    sqrt_w = np.sqrt(w)
    mats = transition_matrices(action, partition)
    ident = sp.identity(k, format="csr")
    acc = None
    for a_s in mats:
        b = sp.diags(sqrt_w) @ (ident - a_s) @ sp.diags(1.0 / sqrt_w)
        term = (b.T @ b).tocsr()
        acc = term if acc is None else acc + term
    m_tilde = acc / len(mats)
    u = sqrt_w / np.linalg.norm(sqrt_w)
    if k <= 3000:
        dense = m_tilde.toarray()
        dense = 0.5 * (dense + dense.T)
        shift = 10.0
        deflated = dense + shift * np.outer(u, u)
        vals = scipy.linalg.eigvalsh(deflated)
        smallest = float(vals[0])
        solver = "dense"
    else:
        rng = np.random.default_rng(seed)
        x0 = rng.standard_normal((k, 3))
        sym = 0.5 * (m_tilde + m_tilde.T)
        vals, _ = spla.lobpcg(
            sym, x0, Y=u[:, None], tol=tol, maxiter=500, largest=False
        )
        smallest = float(np.min(vals))
        solver = "lobpcg"
    eps = math.sqrt(max(smallest, 0.0))
    return GapReport(
        epsilon_avg=eps,
        provenance={
            "generators": list(action.gens.labels),
            "size": k,
            "n_samples": partition.n_samples,
            "seed": partition.seed,
        },
        solver=solver,
    )


# ---------------------------------------------------------------------------
# control functions and the obstruction certificate


@dataclass(frozen=True)
class ControlFunction:
    """Increasing unbounded map in a named family or as a breakpoint table."""

    family: str = "identity"  # identity | affine | log | table
    a: float = 1.0
    b: float = 0.0
    table: tuple = ()

    def __post_init__(self):
        if self.family in ("identity", "log"):
            return
        if self.family == "affine":
            if self.a <= 0:
                raise InputError("affine control needs positive slope")
            return
        if self.family == "table":
            pts = tuple((float(x), float(y)) for x, y in self.table)
            if len(pts) < 2:
                raise InputError("table control needs at least two breakpoints")
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            if any(x2 <= x1 for x1, x2 in zip(xs, xs[1:])):
                raise InputError("table x-coordinates must be strictly increasing")
            if any(y2 <= y1 for y1, y2 in zip(ys, ys[1:])):
                raise InputError("table control must be strictly increasing")
            # unbounded: extrapolation uses the last segment's slope
            if (ys[-1] - ys[-2]) / (xs[-1] - xs[-2]) <= 0:
                raise InputError("table control must have positive final slope")
            object.__setattr__(self, "table", pts)
            return
        raise InputError(f"unknown control family {self.family!r}")

    def __call__(self, x: float) -> float:
        if self.family == "identity":
            return float(x)
        if self.family == "affine":
            return self.a * x + self.b
        if self.family == "log":
            return math.log1p(max(x, 0.0)) if x >= 0 else -math.log1p(-x)
        xs = [p[0] for p in self.table]
        ys = [p[1] for p in self.table]
        if x <= xs[0]:
            slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
            return ys[0] + slope * (x - xs[0])
        if x >= xs[-1]:
            slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
            return ys[-1] + slope * (x - xs[-1])
        return float(np.interp(x, xs, ys))

    @classmethod
    def from_dict(cls, spec) -> "ControlFunction":
        if spec is None:
            return cls()
        if isinstance(spec, str):
            return cls(family=spec)
        if isinstance(spec, ControlFunction):
            return spec
        if "table" in spec:
            return cls(family="table", table=tuple(tuple(p) for p in spec["table"]))
        return cls(
            family=spec.get("family", "identity"),
            a=float(spec.get("a", 1.0)),
            b=float(spec.get("b", 0.0)),
        )

    def to_dict(self) -> dict:
        if self.family == "table":
            return {"family": "table", "table": [list(p) for p in self.table]}
        if self.family == "affine":
            return {"family": "affine", "a": self.a, "b": self.b}
        return {"family": self.family}


@dataclass(frozen=True)
class ControlFunctions:
    rho_minus: ControlFunction
    rho_plus: ControlFunction

    @classmethod
    def identity_pair(cls):
        return cls(ControlFunction(), ControlFunction())


@dataclass
class ObstructionCertificate:
    """Arithmetic verdict: can graphs with these statistics embed with these controls?

    ``lower_bound`` is what any coarse embedding must give some function
    norm; ``upper_bound`` is what the spectral gap allows.  When the lower
    bound exceeds the upper, no such embedding exists (verdict
    "contradiction").  When the defining expression is negative the bound
    is vacuous and the verdict is "undefined".
    """

    p_size: int
    q_ratio: float
    degree: float
    epsilon: float
    controls: ControlFunctions
    inner_value: float | None
    lower_bound: float | None
    upper_bound: float
    verdict: str  # "contradiction" | "no-contradiction" | "undefined"

    def to_dict(self) -> dict:
        return {
            "P_size": self.p_size,
            "Q": self.q_ratio,
            "D": self.degree,
            "epsilon": self.epsilon,
            "rho_minus": self.controls.rho_minus.to_dict(),
            "rho_plus": self.controls.rho_plus.to_dict(),
            "inner_value": self.inner_value,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "verdict": self.verdict,
        }


def embedding_obstruction(
    p_size: int,
    q_ratio: float,
    degree: float,
    epsilon: float,
    controls: ControlFunctions | None = None,
) -> ObstructionCertificate:
    """Evaluate the non-embeddability arithmetic for one graph's statistics.

    lower = (1/4) * rho_minus( log(|P| / 2Q) / log(D) - 1 )
    upper = rho_plus(1) / epsilon
    """
    if controls is None:
        controls = ControlFunctions.identity_pair()
    if degree < 2:
        raise InputError("degree must be at least 2")
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    if q_ratio < 1:
        raise InputError("measure-ratio bound Q must be at least 1")
    if p_size < 1:
        raise InputError("partition size must be positive")
    upper = controls.rho_plus(1.0) / epsilon
    inner = math.log(p_size / (2.0 * q_ratio)) / math.log(degree) - 1.0
    lower = None
    verdict = "undefined"
    if inner >= 0:
        lower = 0.25 * controls.rho_minus(inner)
        verdict = "contradiction" if lower > upper else "no-contradiction"
    return ObstructionCertificate(
        p_size=int(p_size),
        q_ratio=float(q_ratio),
        degree=float(degree),
        epsilon=float(epsilon),
        controls=controls,
        inner_value=inner,
        lower_bound=lower,
        upper_bound=upper,
        verdict=verdict,
    )
