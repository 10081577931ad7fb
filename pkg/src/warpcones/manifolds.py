"""Model manifolds with exact isometric actions.

Three homogeneous models, each normalized to total volume one:

* ``sphere:d`` -- the round unit sphere S^(d-1) in R^d, geodesic metric;
* ``torus:d``  -- the flat torus of angles in [0, 2pi)^d, wrapped l2 metric;
* ``so3``      -- SO(3) as unit quaternions, bi-invariant metric
  2*arccos|<p, q>| (the relative rotation angle).

Points are plain float arrays; exactness lives in the algebra module, and
isometries act here through float images of exact matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import RationalMatrix
from .errors import InputError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ManifoldModel:
    kind: str  # "sphere" | "torus" | "so3"
    d: int

    def __post_init__(self):
        if self.kind == "sphere":
            if self.d < 2:
                raise InputError("sphere model needs ambient dimension d >= 2")
        elif self.kind == "torus":
            if self.d < 1:
                raise InputError("torus model needs d >= 1")
        elif self.kind == "so3":
            if self.d != 3:
                raise InputError("rotation-group model is fixed at d = 3")
        else:
            raise InputError(f"unknown manifold kind {self.kind!r}")

    @property
    def manifold_dim(self) -> int:
        if self.kind == "sphere":
            return self.d - 1
        if self.kind == "torus":
            return self.d
        return 3

    @property
    def point_dim(self) -> int:
        """Length of a coordinate vector (quaternions for the rotation group)."""
        return 4 if self.kind == "so3" else self.d

    @property
    def matrix_dim(self) -> int:
        """Dimension of matrices acting isometrically on the model."""
        return 3 if self.kind == "so3" else self.d

    @property
    def diameter(self) -> float:
        if self.kind == "torus":
            return math.pi * math.sqrt(self.d)
        return math.pi

    def spec_string(self) -> str:
        return "so3" if self.kind == "so3" else f"{self.kind}:{self.d}"


def parse_model(spec: str) -> ManifoldModel:
    """Parse a model spec string: "sphere:d", "torus:d", or "so3"."""
    spec = spec.strip().lower()
    if spec == "so3":
        return ManifoldModel("so3", 3)
    if ":" in spec:
        kind, _, num = spec.partition(":")
        try:
            return ManifoldModel(kind, int(num))
        except ValueError as exc:
            raise InputError(f"bad model spec {spec!r}") from exc
    raise InputError(f"bad model spec {spec!r}")


def check_point(model: ManifoldModel, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (model.point_dim,):
        raise InputError(
            f"point of shape {p.shape} does not fit model {model.spec_string()}"
        )
    if model.kind in ("sphere", "so3"):
        norm = float(np.linalg.norm(p))
        if abs(norm - 1.0) > 1e-12:
            raise InputError(f"point norm {norm} deviates from 1 beyond 1e-12")
    else:
        p = np.mod(p, TWO_PI)
    return p


# ---------------------------------------------------------------------------
# distances


def dist_to_point(model: ManifoldModel, points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Geodesic distances from each row of `points` to the single point `q`.

    Sphere and rotation-group distances use 2*atan2(|p-q|, |p+q|), which is
    stable near zero where arccos of a dot product loses eight digits.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    q = np.asarray(q, dtype=float)
    if model.kind == "sphere":
        dm = np.linalg.norm(points - q, axis=-1)
        dp = np.linalg.norm(points + q, axis=-1)
        return 2.0 * np.arctan2(dm, dp)
    if model.kind == "so3":
        # antipodal quaternions are one rotation: flip to the nearer sign
        sign = np.where(points @ q < 0.0, -1.0, 1.0)[:, None]
        dm = np.linalg.norm(points - sign * q, axis=-1)
        dp = np.linalg.norm(points + sign * q, axis=-1)
        return 4.0 * np.arctan2(dm, dp)
    diff = np.abs(points - q)
    wrapped = np.minimum(diff, TWO_PI - diff)
    return np.sqrt(np.sum(wrapped * wrapped, axis=-1))


def geo_dist(model: ManifoldModel, p, q) -> float:
    """Geodesic distance between two points of the model."""
    p = check_point(model, p)
    q = check_point(model, q)
    return float(dist_to_point(model, p[None, :], q)[0])


def pairwise_dist(model: ManifoldModel, points: np.ndarray) -> np.ndarray:
    """Dense pairwise geodesic distance matrix (intended for small sets)."""
    points = np.asarray(points, dtype=float)
    if model.kind == "sphere":
        dm = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
        dp = np.linalg.norm(points[:, None, :] + points[None, :, :], axis=-1)
        return 2.0 * np.arctan2(dm, dp)
    if model.kind == "so3":
        dots = points @ points.T
        sign = np.where(dots < 0.0, -1.0, 1.0)
        diff = points[:, None, :] - sign[:, :, None] * points[None, :, :]
        summ = points[:, None, :] + sign[:, :, None] * points[None, :, :]
        return 4.0 * np.arctan2(
            np.linalg.norm(diff, axis=-1), np.linalg.norm(summ, axis=-1)
        )
    diff = np.abs(points[:, None, :] - points[None, :, :])
    wrapped = np.minimum(diff, TWO_PI - diff)
    return np.sqrt(np.sum(wrapped * wrapped, axis=-1))


# ---------------------------------------------------------------------------
# quaternion utilities (rotation-group model)


def quaternions_from_matrices(mats: np.ndarray) -> np.ndarray:
    """Unit quaternions for a stack of rotation matrices, canonical sign."""
    mats = np.asarray(mats, dtype=float)
    single = mats.ndim == 2
    if single:
        mats = mats[None]
    n = mats.shape[0]
    q = np.empty((n, 4))
    m00, m11, m22 = mats[:, 0, 0], mats[:, 1, 1], mats[:, 2, 2]
    trace = m00 + m11 + m22
    # Shepperd's method: branch on the largest of trace and diagonal entries.
    choice = np.argmax(np.stack([trace, m00, m11, m22], axis=1), axis=1)
    for case in range(4):
        idx = np.nonzero(choice == case)[0]
        if idx.size == 0:
            continue
        m = mats[idx]
        if case == 0:
            s = np.sqrt(trace[idx] + 1.0) * 2.0
            q[idx, 0] = 0.25 * s
            q[idx, 1] = (m[:, 2, 1] - m[:, 1, 2]) / s
            q[idx, 2] = (m[:, 0, 2] - m[:, 2, 0]) / s
            q[idx, 3] = (m[:, 1, 0] - m[:, 0, 1]) / s
        elif case == 1:
            s = np.sqrt(1.0 + m[:, 0, 0] - m[:, 1, 1] - m[:, 2, 2]) * 2.0
            q[idx, 0] = (m[:, 2, 1] - m[:, 1, 2]) / s
            q[idx, 1] = 0.25 * s
            q[idx, 2] = (m[:, 0, 1] + m[:, 1, 0]) / s
            q[idx, 3] = (m[:, 0, 2] + m[:, 2, 0]) / s
        elif case == 2:
            s = np.sqrt(1.0 + m[:, 1, 1] - m[:, 0, 0] - m[:, 2, 2]) * 2.0
            q[idx, 0] = (m[:, 0, 2] - m[:, 2, 0]) / s
            q[idx, 1] = (m[:, 0, 1] + m[:, 1, 0]) / s
            q[idx, 2] = 0.25 * s
            q[idx, 3] = (m[:, 1, 2] + m[:, 2, 1]) / s
        else:
            s = np.sqrt(1.0 + m[:, 2, 2] - m[:, 0, 0] - m[:, 1, 1]) * 2.0
            q[idx, 0] = (m[:, 1, 0] - m[:, 0, 1]) / s
            q[idx, 1] = (m[:, 0, 2] + m[:, 2, 0]) / s
            q[idx, 2] = (m[:, 1, 2] + m[:, 2, 1]) / s
            q[idx, 3] = 0.25 * s
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q = canonical_quaternion_sign(q)
    return q[0] if single else q


def canonical_quaternion_sign(q: np.ndarray) -> np.ndarray:
    """Flip each quaternion so its largest-magnitude component is positive."""
    q = np.atleast_2d(np.asarray(q, dtype=float)).copy()
    lead = np.take_along_axis(q, np.argmax(np.abs(q), axis=1)[:, None], axis=1)[:, 0]
    q[lead < 0] *= -1.0
    return q


def quat_mult(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w1, x1, y1, z1 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    w2, x2, y2, z2 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


# ---------------------------------------------------------------------------
# group action


def _require_action_matrix(model: ManifoldModel, g: RationalMatrix):
    if g.dim != model.matrix_dim:
        raise InputError(
            f"matrix of dimension {g.dim} cannot act on {model.spec_string()}"
        )
    if model.kind == "torus" and g.exponent != 0:
        raise InputError("torus isometries must have integer entries")


def apply_isometry_many(g: RationalMatrix, points: np.ndarray, model: ManifoldModel) -> np.ndarray:
    """Image of each row of `points` under the isometry g."""
    _require_action_matrix(model, g)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    gf = g.to_float()
    if model.kind == "sphere":
        return points @ gf.T
    if model.kind == "torus":
        return np.mod(points @ gf.T, TWO_PI)
    qg = quaternions_from_matrices(gf)
    return canonical_quaternion_sign(quat_mult(qg[None, :], points))


def apply_isometry(g: RationalMatrix, p, model: ManifoldModel) -> np.ndarray:
    p = check_point(model, p)
    return apply_isometry_many(g, p[None, :], model)[0]


# ---------------------------------------------------------------------------
# sampling


def haar_sample(model: ManifoldModel, n: int, seed: int) -> np.ndarray:
    """n independent draws from the normalized invariant measure."""
    if n < 0:
        raise InputError("sample count must be non-negative")
    rng = np.random.default_rng(seed)
    if n == 0:
        return np.zeros((0, model.point_dim))
    if model.kind == "torus":
        return rng.uniform(0.0, TWO_PI, size=(n, model.d))
    vecs = rng.standard_normal((n, model.point_dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    if model.kind == "so3":
        vecs = canonical_quaternion_sign(vecs)
    return vecs


def geodesic_move(model: ManifoldModel, p: np.ndarray, dist: float, rng) -> np.ndarray:
    """A point at geodesic distance `dist` from p, in a random direction."""
    p = np.asarray(p, dtype=float)
    if dist == 0.0:
        return p.copy()
    if model.kind == "sphere":
        w = rng.standard_normal(model.d)
        w -= (w @ p) * p
        w /= np.linalg.norm(w)
        return math.cos(dist) * p + math.sin(dist) * w
    if model.kind == "torus":
        v = rng.standard_normal(model.d)
        v /= np.linalg.norm(v)
        return np.mod(p + dist * v, TWO_PI)
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    half = dist / 2.0
    r = np.array([math.cos(half), *(math.sin(half) * axis)])
    return canonical_quaternion_sign(quat_mult(p, r))[0]


# ---------------------------------------------------------------------------
# ball volumes


def ball_volume(model: ManifoldModel, r: float) -> float:
    """Normalized volume of a metric ball of radius r (any center)."""
    if r <= 0.0:
        return 0.0
    if r >= model.diameter:
        return 1.0
    if model.kind == "sphere":
        return _sphere_cap_fraction(model.d, r)
    if model.kind == "so3":
        return (r - math.sin(r)) / math.pi
    if r <= math.pi:
        d = model.d
        unit_ball = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
        return unit_ball * r**d / TWO_PI**d
    return _torus_ball_mc(model, r)[0]


def _sphere_cap_fraction(d: int, r: float) -> float:
    if d == 2:
        return r / math.pi
    if d == 3:
        return 0.5 * (1.0 - math.cos(r))
    from scipy.special import betainc

    a, b = (d - 1) / 2.0, 0.5
    if r <= math.pi / 2.0:
        return 0.5 * float(betainc(a, b, math.sin(r) ** 2))
    return 1.0 - 0.5 * float(betainc(a, b, math.sin(math.pi - r) ** 2))


_TORUS_MC_SAMPLES = 200_000


def _torus_ball_mc(model: ManifoldModel, r: float) -> tuple[float, float]:
    # Large-radius torus balls self-overlap; no closed form, use a fixed-seed
    # Monte Carlo estimate with its standard error.
    rng = np.random.default_rng(abs(hash(("torus-ball", model.d, round(r, 12)))) % 2**63)
    pts = rng.uniform(0.0, TWO_PI, size=(_TORUS_MC_SAMPLES, model.d))
    frac = float(np.mean(dist_to_point(model, pts, np.zeros(model.d)) <= r))
    stderr = math.sqrt(max(frac * (1.0 - frac), 1e-12) / _TORUS_MC_SAMPLES)
    return frac, stderr


@dataclass(frozen=True)
class VolumeBounds:
    """Two-sided ball-volume bounds plus a volume-comparison constant.

    For the homogeneous models here the minimum and maximum ball volumes
    coincide, so ``v_lower == v_upper`` and the comparison constant is the
    exact ratio of volumes at the two radii.
    """

    radius: float
    v_lower: float
    v_upper: float
    kappa: float
    comparison_constant: float
    degenerate: bool = False
    mc_stderr: float | None = None


def ball_volume_bounds(model: ManifoldModel, r: float, kappa: float = 1.0) -> VolumeBounds:
    """Volume bounds v(r) = V(r) and C(kappa) with V(kappa*r) <= C * v(r)."""
    if r <= 0.0:
        raise InputError("radius must be positive")
    if kappa < 1.0:
        raise InputError("kappa must be at least 1")
    degenerate = r >= model.diameter
    stderr = None
    if model.kind == "torus" and math.pi < r < model.diameter:
        vol, stderr = _torus_ball_mc(model, r)
    else:
        vol = ball_volume(model, r)
    scaled = ball_volume(model, min(kappa * r, model.diameter))
    constant = max(scaled / vol, 1.0) if vol > 0 else math.inf
    return VolumeBounds(
        radius=r,
        v_lower=vol,
        v_upper=vol,
        kappa=kappa,
        comparison_constant=constant,
        degenerate=degenerate,
        mc_stderr=stderr,
    )
