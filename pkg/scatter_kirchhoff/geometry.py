"""
Surface geometry for convex obstacles

Spheres and axis-aligned ellipsoids described by the implicit function
Q(p) = sum(((p_i - c_i) / a_i)^2) - 1, with outer normals, principal
curvatures and principal frames, exact graph charts, ray/line intersection
and the quadrature grids used by the Kirchhoff layers.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Literal, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from scatter_kirchhoff.config import SolverConfig, get_config
from scatter_kirchhoff.exceptions import (
    EmptySceneError,
    OffSurfaceError,
    OverlapError,
    ResourceError,
)

logger = logging.getLogger(__name__)

Vector = NDArray[np.float64]

# Gap below this fraction of the scene scale counts as touching
TOUCH_TOL = 1e-9

# Samples per polar / azimuthal direction for the ellipsoid gap search
_GAP_SAMPLES = (24, 48)

# Relative curvature difference below which a point is umbilic
_UMBILIC_TOL = 1e-9


@dataclass(frozen=True)
class Obstacle:
    """A smooth strictly convex obstacle aligned with the coordinate axes"""
    id: int
    kind: Literal["sphere", "ellipsoid"]
    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.kind not in ("sphere", "ellipsoid"):
            raise ValueError(f"Unknown obstacle kind: {self.kind}")
        if len(self.center) != 3 or len(self.semi_axes) != 3:
            raise ValueError("center and semi_axes need three components")
        if not all(math.isfinite(c) for c in self.center):
            raise ValueError("center must be finite")
        if not all(math.isfinite(a) and a > 0 for a in self.semi_axes):
            raise ValueError(f"semi-axes must be positive, got {self.semi_axes}")
        if self.kind == "sphere" and len(set(self.semi_axes)) != 1:
            raise ValueError("a sphere needs three equal semi-axes")

    @classmethod
    def sphere(cls, id: int, center: Sequence[float], radius: float) -> "Obstacle":
        """Build a sphere of the given radius"""
        c = tuple(float(v) for v in center)
        r = float(radius)
        return cls(id=id, kind="sphere", center=(c[0], c[1], c[2]), semi_axes=(r, r, r))

    @classmethod
    def ellipsoid(
        cls, id: int, center: Sequence[float], semi_axes: Sequence[float]
    ) -> "Obstacle":
        """Build an axis-aligned ellipsoid"""
        c = tuple(float(v) for v in center)
        a = tuple(float(v) for v in semi_axes)
        return cls(id=id, kind="ellipsoid", center=(c[0], c[1], c[2]), semi_axes=(a[0], a[1], a[2]))

    @property
    def c(self) -> Vector:
        return np.asarray(self.center, dtype=np.float64)

    @property
    def a(self) -> Vector:
        return np.asarray(self.semi_axes, dtype=np.float64)

    @property
    def scale(self) -> float:
        """Largest semi-axis"""
        return max(self.semi_axes)

    def implicit(self, p: ArrayLike) -> NDArray[np.float64]:
        """Q(p); negative inside, zero on the surface, positive outside"""
        q = (np.asarray(p, dtype=np.float64) - self.c) / self.a
        return np.sum(q * q, axis=-1) - 1.0

    def normal_at(self, p: ArrayLike) -> NDArray[np.float64]:
        """Unit outer normal of the level set through p (vectorized over rows)"""
        g = (np.asarray(p, dtype=np.float64) - self.c) / self.a**2
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def support_point(self, direction: ArrayLike) -> Vector:
        """Surface point whose outer normal is parallel to direction"""
        d = np.asarray(direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
        ad = self.a * d
        return self.c + self.a * ad / np.linalg.norm(ad)

    def param_point(self, theta: ArrayLike, phi: ArrayLike) -> NDArray[np.float64]:
        """Polar parametrization, theta measured from the +z semi-axis"""
        th = np.asarray(theta, dtype=np.float64)
        ph = np.asarray(phi, dtype=np.float64)
        s = np.sin(th)
        local = np.stack(
            [self.semi_axes[0] * s * np.cos(ph),
             self.semi_axes[1] * s * np.sin(ph),
             self.semi_axes[2] * np.cos(th) * np.ones_like(ph)],
            axis=-1,
        )
        return self.c + local


@dataclass(frozen=True)
class Scene:
    """Validated set of pairwise disjoint obstacles"""
    obstacles: tuple[Obstacle, ...]
    min_gap: float  # smallest surface-to-surface distance, inf for one obstacle

    def obstacle(self, obstacle_id: int) -> Obstacle:
        for ob in self.obstacles:
            if ob.id == obstacle_id:
                return ob
        raise KeyError(f"No obstacle with id {obstacle_id}")

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(ob.id for ob in self.obstacles)

    @property
    def scale(self) -> float:
        """Largest semi-axis in the scene"""
        return max(ob.scale for ob in self.obstacles)

    def inside_any(self, x: ArrayLike) -> bool:
        return any(float(ob.implicit(x)) <= 0.0 for ob in self.obstacles)


@dataclass(frozen=True, eq=False)
class SurfacePoint:
    """A point on an obstacle with its normal and principal frame"""
    obstacle_id: int
    point: Vector
    normal: Vector  # outer unit normal
    k1: float  # larger principal curvature
    k2: float
    dir_u: Vector  # principal direction of k1
    dir_v: Vector  # n x dir_u, so (dir_u, dir_v, normal) is right-handed

    @property
    def tangent_basis(self) -> NDArray[np.float64]:
        """3x2 matrix with columns dir_u, dir_v"""
        return np.column_stack([self.dir_u, self.dir_v])

    @property
    def frame(self) -> NDArray[np.float64]:
        """3x3 matrix with columns dir_u, dir_v, normal"""
        return np.column_stack([self.dir_u, self.dir_v, self.normal])

    @property
    def shape_operator(self) -> NDArray[np.float64]:
        """B = k1 u u^T + k2 v v^T in global coordinates"""
        return (self.k1 * np.outer(self.dir_u, self.dir_u)
                + self.k2 * np.outer(self.dir_v, self.dir_v))

    def distance_to(self, other: "SurfacePoint") -> float:
        return float(np.linalg.norm(self.point - other.point))


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """Quadrature nodes on one obstacle surface"""
    obstacle_id: int
    points: NDArray[np.float64]  # (N, 3)
    normals: NDArray[np.float64]  # (N, 3)
    weights: NDArray[np.float64]  # (N,)
    k: float
    ppw: float
    obstacle: Obstacle

    def __len__(self) -> int:
        return int(self.weights.shape[0])

    @property
    def total_area(self) -> float:
        return float(np.sum(self.weights))

    def node(self, index: int) -> tuple[SurfacePoint, float]:
        """Full surface data and weight of one node"""
        return surface_eval(self.obstacle, self.points[index]), float(self.weights[index])

    def nodes(self) -> Iterator[tuple[SurfacePoint, float]]:
        for i in range(len(self)):
            yield self.node(i)


@dataclass(frozen=True, eq=False)
class LineHit:
    """One crossing of a line with an obstacle surface"""
    obstacle_id: int
    t: float
    point: Vector
    entering: bool  # direction points into the obstacle


@dataclass(frozen=True, eq=False)
class RayHit:
    """Nearest forward intersection of a ray with the scene"""
    point: SurfacePoint
    t: float
    grazing: bool


def _min_implicit(outer: Obstacle, surface: Obstacle, tt: NDArray[np.float64], pp: NDArray[np.float64]) -> float:
    """Smallest Q_outer over the surface of the other obstacle; <= 0 means they intersect"""
    values = outer.implicit(surface.param_point(tt, pp)).ravel()
    i = int(np.argmin(values))
    if values[i] <= 0.0:
        return float(values[i])
    start = np.array([tt.ravel()[i], pp.ravel()[i]])
    result = minimize(lambda z: float(outer.implicit(surface.param_point(z[0], z[1]))), start,
                      method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 2000})
    return float(min(result.fun, values[i]))


def _ellipsoid_gap(a: Obstacle, b: Obstacle) -> float:
    """Surface distance of two ellipsoids, or -inf when they overlap"""
    if float(a.implicit(b.c)) <= 0.0 or float(b.implicit(a.c)) <= 0.0:
        return -math.inf
    n_t, n_p = _GAP_SAMPLES
    theta = (np.arange(n_t) + 0.5) * math.pi / n_t
    phi = np.arange(n_p) * 2.0 * math.pi / n_p
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    pts_a = a.param_point(tt, pp).reshape(-1, 3)
    pts_b = b.param_point(tt, pp).reshape(-1, 3)
    if _min_implicit(b, a, tt, pp) <= 0.0 or _min_implicit(a, b, tt, pp) <= 0.0:
        return -math.inf

    dist = cdist(pts_a, pts_b)
    ia, ib = np.unravel_index(int(np.argmin(dist)), dist.shape)
    start = np.array([tt.ravel()[ia], pp.ravel()[ia], tt.ravel()[ib], pp.ravel()[ib]])

    def objective(z: NDArray[np.float64]) -> float:
        return float(np.linalg.norm(a.param_point(z[0], z[1]) - b.param_point(z[2], z[3])))

    result = minimize(objective, start, method="Nelder-Mead",
                      options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    return float(min(result.fun, dist[ia, ib]))


def pair_gap(a: Obstacle, b: Obstacle) -> float:
    """Smallest surface-to-surface distance between two obstacles"""
    if a.kind == "sphere" and b.kind == "sphere":
        return float(np.linalg.norm(a.c - b.c)) - a.semi_axes[0] - b.semi_axes[0]
    return _ellipsoid_gap(a, b)


def validate_scene(obstacles: Sequence[Obstacle]) -> Scene:
    """
    Check that obstacles are pairwise disjoint and build a Scene

    Args:
        obstacles: Obstacles with distinct ids

    Returns:
        Scene with the minimum pairwise surface gap

    Raises:
        EmptySceneError: No obstacles given
        OverlapError: Two obstacles intersect, touch or nest
    """
    obs = tuple(obstacles)
    if not obs:
        raise EmptySceneError("scene needs at least one obstacle")
    ids = [ob.id for ob in obs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate obstacle ids: {ids}")

    scale = max(ob.scale for ob in obs)
    min_gap = math.inf
    for i in range(len(obs)):
        for j in range(i + 1, len(obs)):
            gap = pair_gap(obs[i], obs[j])
            if gap <= TOUCH_TOL * scale:
                raise OverlapError(
                    f"obstacles {obs[i].id} and {obs[j].id} overlap (gap {gap:.3e})"
                )
            min_gap = min(min_gap, gap)
    logger.debug("Validated scene with %d obstacles, min gap %.6g", len(obs), min_gap)
    return Scene(obstacles=obs, min_gap=min_gap)


def _tangent_pair(n: Vector) -> tuple[Vector, Vector]:
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    t1 = np.cross(n, axis)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def _umbilic_direction(n: Vector) -> Vector:
    for ref in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        proj = ref - np.dot(ref, n) * n
        norm = np.linalg.norm(proj)
        if norm > 1e-6:
            return proj / norm
    raise AssertionError("unreachable: +x and +y cannot both be normal")


def surface_eval(
    obstacle: Obstacle, p: ArrayLike, config: Optional[SolverConfig] = None
) -> SurfacePoint:
    """
    Normal, principal curvatures and principal frame at a surface point

    The point is first projected radially onto the surface so the returned
    point satisfies the implicit equation to round-off.

    Raises:
        OffSurfaceError: p is farther than the surface tolerance from the surface
    """
    cfg = config or get_config()
    x = np.asarray(p, dtype=np.float64)
    q = float(obstacle.implicit(x))
    if not math.isfinite(q) or abs(q) > 2.0 * cfg.surface_tol:
        raise OffSurfaceError(f"point {x.tolist()} is off obstacle {obstacle.id} (Q={q:.3e})")
    point = obstacle.c + (x - obstacle.c) / math.sqrt(1.0 + q)

    inv_a2 = 1.0 / obstacle.a**2
    g = (point - obstacle.c) * inv_a2
    g_norm = float(np.linalg.norm(g))
    n = g / g_norm

    # second fundamental form on the tangent plane: t^T diag(1/a^2) t / |g|
    t1, t2 = _tangent_pair(n)
    basis = np.column_stack([t1, t2])
    form = basis.T @ (inv_a2[:, None] * basis) / g_norm
    vals, vecs = np.linalg.eigh(form)
    k2, k1 = float(vals[0]), float(vals[1])

    if k1 - k2 <= _UMBILIC_TOL * k1:
        u = _umbilic_direction(n)
    else:
        u = basis @ vecs[:, 1]
        u /= np.linalg.norm(u)
        if u[int(np.argmax(np.abs(u)))] < 0:
            u = -u
    v = np.cross(n, u)
    return SurfacePoint(obstacle.id, point, n, k1, k2, u, v)


def chart_point(obstacle: Obstacle, sp: SurfacePoint, u: float, v: float) -> Vector:
    """
    Lift tangent-plane coordinates (u, v) at sp to the surface along -n

    Solves Q(q + z n) = 0 for the root z nearest zero, q = sp + u e_u + v e_v.
    """
    q = sp.point + u * sp.dir_u + v * sp.dir_v
    inv_a2 = 1.0 / obstacle.a**2
    rel = q - obstacle.c
    alpha = float(np.sum(sp.normal**2 * inv_a2))
    beta = 2.0 * float(np.sum(rel * sp.normal * inv_a2))
    gamma = float(obstacle.implicit(q))
    disc = beta * beta - 4.0 * alpha * gamma
    if disc < 0.0 or beta <= 0.0:
        raise ValueError(f"chart coordinates ({u}, {v}) leave the graph domain")
    z = -2.0 * gamma / (beta + math.sqrt(disc))
    return q + z * sp.normal


def chart_derivative_oracle(
    obstacle: Obstacle,
    sp: SurfacePoint,
    f: Callable[[Vector], float],
    order: int,
    step: Optional[float] = None,
) -> NDArray[np.float64]:
    """
    Central finite differences of f along the exact chart at sp

    Args:
        obstacle: Obstacle owning sp
        sp: Base point of the chart
        f: Scalar function of a surface point
        order: 1 for the chart gradient, 2 for the chart Hessian
        step: Finite-difference step; defaults to 1e-5 (order 1) or
              1e-4 (order 2) times the largest semi-axis

    Returns:
        Gradient (2,) or Hessian (2, 2)
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    h = step if step is not None else (1e-5 if order == 1 else 1e-4) * obstacle.scale

    def at(du: float, dv: float) -> float:
        return float(f(chart_point(obstacle, sp, du, dv)))

    if order == 1:
        return np.array([
            (at(h, 0.0) - at(-h, 0.0)) / (2.0 * h),
            (at(0.0, h) - at(0.0, -h)) / (2.0 * h),
        ])

    f0 = at(0.0, 0.0)
    huu = (at(h, 0.0) - 2.0 * f0 + at(-h, 0.0)) / (h * h)
    hvv = (at(0.0, h) - 2.0 * f0 + at(0.0, -h)) / (h * h)
    huv = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
    return np.array([[huu, huv], [huv, hvv]])


def _band_rings(a_max: float, spacing: float, edges: NDArray[np.float64]) -> list[int]:
    rings = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sin_max = 1.0 if lo <= math.pi / 2 <= hi else max(math.sin(lo), math.sin(hi))
        rings.append(max(3, math.ceil(2.0 * math.pi * a_max * sin_max / spacing)))
    return rings


def _area_density(obstacle: Obstacle, theta: NDArray[np.float64], phi: NDArray[np.float64]) -> NDArray[np.float64]:
    """|r_theta x r_phi| of the polar parametrization"""
    a, b, c = obstacle.semi_axes
    s, t = np.sin(theta), np.cos(theta)
    cp, sp_ = np.cos(phi), np.sin(phi)
    return s * np.sqrt((b * c * s * cp) ** 2 + (a * c * s * sp_) ** 2 + (a * b * t) ** 2)


def build_grid(
    obstacle: Obstacle, k: float, ppw: float, config: Optional[SolverConfig] = None
) -> SurfaceGrid:
    """
    Latitude-band quadrature grid with spacing at most (2 pi / k) / ppw

    Nodes sit at cell centres; each weight is the area of its cell computed
    with a tensor Gauss-Legendre rule on the area density.

    Raises:
        ResourceError: The grid would exceed the configured node cap
    """
    cfg = config or get_config()
    if k <= 0 or ppw <= 0:
        raise ValueError(f"k and ppw must be positive, got k={k}, ppw={ppw}")
    spacing = 2.0 * math.pi / k / ppw
    a_max = obstacle.scale
    n_theta = max(2, math.ceil(math.pi * a_max / spacing))
    edges = np.linspace(0.0, math.pi, n_theta + 1)
    rings = _band_rings(a_max, spacing, edges)
    total = sum(rings)
    if total > cfg.max_grid_nodes:
        raise ResourceError(
            f"grid on obstacle {obstacle.id} needs {total} nodes (cap {cfg.max_grid_nodes})"
        )

    gx, gw = np.polynomial.legendre.leggauss(cfg.grid_quadrature_order)
    thetas, phis, weights = [], [], []
    for lo, hi, n_phi in zip(edges[:-1], edges[1:], rings):
        half_t = 0.5 * (hi - lo)
        th_q = 0.5 * (hi + lo) + half_t * gx
        d_phi = 2.0 * math.pi / n_phi
        phi_lo = np.arange(n_phi) * d_phi
        ph_q = phi_lo[:, None] + 0.5 * d_phi * (gx[None, :] + 1.0)
        dens = _area_density(obstacle, th_q[None, None, :], ph_q[:, :, None])
        w = np.einsum("jpt,p,t->j", dens, gw, gw) * half_t * 0.5 * d_phi
        thetas.append(np.full(n_phi, 0.5 * (lo + hi)))
        phis.append(phi_lo + 0.5 * d_phi)
        weights.append(w)

    theta = np.concatenate(thetas)
    phi = np.concatenate(phis)
    points = obstacle.param_point(theta, phi)
    normals = obstacle.normal_at(points)
    logger.debug("Grid on obstacle %d: %d nodes (k=%g, ppw=%g)", obstacle.id, total, k, ppw)
    return SurfaceGrid(
        obstacle_id=obstacle.id,
        points=points,
        normals=normals,
        weights=np.concatenate(weights),
        k=float(k),
        ppw=float(ppw),
        obstacle=obstacle,
    )


def line_roots(obstacle: Obstacle, origin: Vector, direction: Vector) -> list[float]:
    """Parameters t where origin + t direction crosses the obstacle surface, ascending"""
    inv_a2 = 1.0 / obstacle.a**2
    rel = origin - obstacle.c
    alpha = float(np.sum(direction**2 * inv_a2))
    beta = 2.0 * float(np.sum(rel * direction * inv_a2))
    gamma = float(np.sum(rel**2 * inv_a2)) - 1.0
    disc = beta * beta - 4.0 * alpha * gamma
    if disc < 0.0:
        if disc < -1e-12 * max(beta * beta, 4.0 * alpha * abs(gamma), 1e-300):
            return []
        disc = 0.0
    if disc == 0.0:
        return [-beta / (2.0 * alpha)]
    q = -0.5 * (beta + math.copysign(math.sqrt(disc), beta))
    roots = [q / alpha]
    if q != 0.0:
        roots.append(gamma / q)
    return sorted(roots)


def line_hits(
    scene: Scene,
    origin: ArrayLike,
    direction: ArrayLike,
    t_min: float = 0.0,
    t_max: float = math.inf,
    exclude: Sequence[int] = (),
) -> list[LineHit]:
    """All crossings of origin + t direction with t_min < t < t_max, sorted by t"""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    hits = []
    for ob in scene.obstacles:
        if ob.id in exclude:
            continue
        for t in line_roots(ob, o, d):
            if t_min < t < t_max:
                p = o + t * d
                n = ob.normal_at(p)
                hits.append(LineHit(ob.id, t, p, bool(np.dot(d, n) < 0.0)))
    hits.sort(key=lambda h: h.t)
    return hits


def segment_blocked(scene: Scene, start: ArrayLike, end: ArrayLike) -> bool:
    """True when the open segment between two points crosses an obstacle"""
    a = np.asarray(start, dtype=np.float64)
    b = np.asarray(end, dtype=np.float64)
    length = float(np.linalg.norm(b - a))
    if length == 0.0:
        return False
    eps = 1e-7 * scene.scale
    return bool(line_hits(scene, a, (b - a) / length, t_min=eps, t_max=length - eps))


def ray_intersect(
    scene: Scene,
    origin: ArrayLike,
    direction: ArrayLike,
    config: Optional[SolverConfig] = None,
) -> Optional[RayHit]:
    """
    Nearest forward intersection of a ray with the scene

    Returns:
        RayHit with the grazing flag set when |<d, n>| is below the grazing
        tolerance, or None when the ray misses every obstacle
    """
    cfg = config or get_config()
    d = np.asarray(direction, dtype=np.float64)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("ray direction must be non-zero")
    d = d / norm
    hits = line_hits(scene, origin, d, t_min=1e-9 * scene.scale)
    if not hits:
        return None
    hit = hits[0]
    sp = surface_eval(scene.obstacle(hit.obstacle_id), hit.point, cfg)
    grazing = abs(float(np.dot(d, sp.normal))) < cfg.grazing_tol
    return RayHit(point=sp, t=hit.t, grazing=grazing)
