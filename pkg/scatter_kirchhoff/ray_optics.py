"""
Geometrical-optics ray paths

Solves for stationary multi-bounce paths between the incident plane wave and
an observation point, propagates wavefront curvature along them and sums the
geometrical-optics field. Paths are described node by node: delta_j = 1 for a
reflection at node j, 0 for a transmission (the ray passes straight through
the surface point).
"""

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Literal, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from scatter_kirchhoff.config import SolverConfig, get_config
from scatter_kirchhoff.exceptions import (
    CausticError,
    NearBoundaryError,
    NoConvergence,
    ResourceError,
    SignViolation,
    SingularError,
    TangencyError,
)
from scatter_kirchhoff.geometry import (
    Obstacle,
    Scene,
    SurfacePoint,
    chart_point,
    line_hits,
    line_roots,
    segment_blocked,
    surface_eval,
)
from scatter_kirchhoff.matrix_maps import SymMatrix3, reflect_map, shift_map

logger = logging.getLogger(__name__)

BoundaryCondition = Literal["dirichlet", "neumann"]
BOUNDARY_CONDITIONS: tuple[BoundaryCondition, ...] = ("dirichlet", "neumann")

Vector = NDArray[np.float64]

# Tilt of perturbed Newton starts away from the bisector normal, radians
_START_TILT = 0.35
_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
_MAX_BACKTRACK = 30


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave exp(-ik<xi, x>)"""
    xi: tuple[float, float, float]
    k: float

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(v * v for v in self.xi))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, |xi|={norm!r}")
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError(f"wavenumber must be positive, got {self.k}")

    @classmethod
    def from_direction(cls, direction: Sequence[float], k: float) -> "IncidentWave":
        """Normalize an arbitrary non-zero direction"""
        d = np.asarray(direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
        return cls(xi=(float(d[0]), float(d[1]), float(d[2])), k=float(k))

    @property
    def direction(self) -> Vector:
        return np.asarray(self.xi, dtype=np.float64)

    def field(self, x: ArrayLike) -> NDArray[np.complex128]:
        """Incident field at x (vectorized over rows)"""
        return np.exp(-1j * self.k * (np.asarray(x, dtype=np.float64) @ self.direction))


@dataclass(frozen=True, eq=False)
class RayPath:
    """A stationary path x <- sigma_l <- ... <- sigma_1 <- incident wave"""
    nodes: tuple[SurfacePoint, ...]
    target: Vector
    incident: Vector  # xi
    delta: tuple[int, ...]
    directions: NDArray[np.float64]  # (l, 3); row j points from node j to node j+1 (or x)
    lengths: NDArray[np.float64]  # (l,)
    phase: float
    curvatures: tuple[SymMatrix3, ...]  # P_1 .. P_l
    residual: float  # max chart-gradient norm at the nodes
    caustic: bool
    occluded: bool

    @property
    def level(self) -> int:
        return len(self.nodes)

    @property
    def obstacle_ids(self) -> tuple[int, ...]:
        return tuple(sp.obstacle_id for sp in self.nodes)

    @property
    def incoming(self) -> NDArray[np.float64]:
        """(l, 3) direction arriving at each node; row 0 is xi"""
        return np.vstack([self.incident[None, :], self.directions[:-1]])

    @property
    def illumination_signs(self) -> NDArray[np.float64]:
        """<incoming_j, n(sigma_j)>; all negative on an illuminated path"""
        return np.einsum("ij,ij->i", self.incoming, np.array([sp.normal for sp in self.nodes]))

    @property
    def amplitude_determinants(self) -> NDArray[np.float64]:
        """det(I + lambda_j P_j)"""
        return np.array([
            np.linalg.det(np.eye(3) + lam * p) for lam, p in zip(self.lengths, self.curvatures)
        ])

    @property
    def all_reflections(self) -> bool:
        return all(d == 1 for d in self.delta)

    def key(self, tol: float) -> tuple[object, ...]:
        """Hashable identity used for deduplication"""
        return (self.obstacle_ids, self.delta,
                tuple(tuple(np.round(sp.point / tol).astype(int)) for sp in self.nodes))


def _points(nodes: Sequence[SurfacePoint]) -> NDArray[np.float64]:
    return np.array([sp.point for sp in nodes])


def _segments(nodes: Sequence[SurfacePoint], x: Vector) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    pts = np.vstack([_points(nodes), x[None, :]])
    diff = np.diff(pts, axis=0)
    lengths = np.linalg.norm(diff, axis=1)
    return diff / lengths[:, None], lengths


def path_phase(wave: IncidentWave, nodes: Sequence[SurfacePoint], x: ArrayLike) -> float:
    """psi = <xi, sigma_1> + sum |sigma_{j+1} - sigma_j| + |x - sigma_l|"""
    target = np.asarray(x, dtype=np.float64)
    _, lengths = _segments(nodes, target)
    return float(np.dot(wave.direction, nodes[0].point) + np.sum(lengths))


def _chart_gradient(incident: Vector, nodes: Sequence[SurfacePoint], x: Vector) -> NDArray[np.float64]:
    dirs, _ = _segments(nodes, x)
    incoming = np.vstack([incident[None, :], dirs[:-1]])
    return np.concatenate([sp.tangent_basis.T @ (incoming[j] - dirs[j]) for j, sp in enumerate(nodes)])


def path_gradient(
    wave: IncidentWave, nodes: Sequence[SurfacePoint], x: ArrayLike
) -> list[NDArray[np.float64]]:
    """Chart gradient of the phase at each node: E_j^T (xi_{j-1} - xi_j)"""
    g = _chart_gradient(wave.direction, nodes, np.asarray(x, dtype=np.float64))
    return [g[2 * j:2 * j + 2] for j in range(len(nodes))]


def chart_hessian(incident: Vector, nodes: Sequence[SurfacePoint], x: Vector) -> NDArray[np.float64]:
    """Full 2l x 2l phase Hessian in the principal charts of the nodes"""
    dirs, lengths = _segments(nodes, x)
    incoming = np.vstack([incident[None, :], dirs[:-1]])
    l = len(nodes)
    h = np.zeros((2 * l, 2 * l))
    eye = np.eye(3)
    for j, sp in enumerate(nodes):
        e = sp.tangent_basis
        amb = (eye - np.outer(dirs[j], dirs[j])) / lengths[j]
        if j > 0:
            amb = amb + (eye - np.outer(incoming[j], incoming[j])) / lengths[j - 1]
        grad = incoming[j] - dirs[j]
        block = e.T @ amb @ e - float(np.dot(grad, sp.normal)) * np.diag([sp.k1, sp.k2])
        h[2 * j:2 * j + 2, 2 * j:2 * j + 2] = block
        if j + 1 < l:
            off = -e.T @ ((eye - np.outer(dirs[j], dirs[j])) / lengths[j]) @ nodes[j + 1].tangent_basis
            h[2 * j:2 * j + 2, 2 * j + 2:2 * j + 4] = off
            h[2 * j + 2:2 * j + 4, 2 * j:2 * j + 2] = off.T
    return h


def _classify(incoming: Vector, outgoing: Vector, normal: Vector) -> tuple[int, float]:
    reflected = incoming - 2.0 * float(np.dot(incoming, normal)) * normal
    r_refl = float(np.linalg.norm(outgoing - reflected))
    r_trans = float(np.linalg.norm(outgoing - incoming))
    return (1, r_refl) if r_refl < r_trans else (0, r_trans)


def propagate_curvature(path: RayPath, config: Optional[SolverConfig] = None) -> list[SymMatrix3]:
    """
    Wavefront curvature matrices P_1 .. P_l along a path

    P_1 = T(0) for a reflection (0 for a transmission); afterwards the
    matrix is shifted along the segment and, at reflections, reflected.

    Raises:
        TangencyError: A reflection node is hit tangentially
        SingularError: The wavefront focuses on a segment
    """
    cfg = config or get_config()
    incoming = path.incoming
    out: list[SymMatrix3] = []
    current = np.zeros((3, 3))
    for j, sp in enumerate(path.nodes):
        if j > 0:
            current = shift_map(current, float(path.lengths[j - 1]), cfg)
        if path.delta[j]:
            current = reflect_map(current, sp.shape_operator, sp.normal, incoming[j], cfg)
        out.append(current)
    return out


def _assemble_path(
    scene: Scene,
    incident: Vector,
    nodes: Sequence[SurfacePoint],
    delta: Sequence[int],
    x: Vector,
    config: SolverConfig,
) -> RayPath:
    nodes = tuple(nodes)
    dirs, lengths = _segments(nodes, x)
    residual = float(np.max(np.abs(_chart_gradient(incident, nodes, x))))
    path = RayPath(
        nodes=nodes,
        target=x,
        incident=incident,
        delta=tuple(int(d) for d in delta),
        directions=dirs,
        lengths=lengths,
        phase=float(np.dot(incident, nodes[0].point) + np.sum(lengths)),
        curvatures=(),
        residual=residual,
        caustic=False,
        occluded=False,
    )
    signs = path.illumination_signs
    caustic = bool(np.any(np.abs(signs) < config.grazing_tol))
    try:
        curvatures = tuple(propagate_curvature(path, config))
    except (TangencyError, SingularError) as exc:
        logger.debug("Curvature propagation failed on %s: %s", path.obstacle_ids, exc)
        curvatures, caustic = (), True
    path = replace(path, curvatures=curvatures)
    if curvatures and np.any(np.abs(path.amplitude_determinants) < config.caustic_tol):
        caustic = True

    eps = 1e-7 * scene.scale
    occluded = bool(line_hits(scene, nodes[0].point, -incident, t_min=eps))
    pts = list(_points(nodes)) + [x]
    occluded = occluded or any(segment_blocked(scene, a, b) for a, b in zip(pts[:-1], pts[1:]))
    return replace(path, caustic=caustic, occluded=occluded)


def _unit(v: Vector) -> Vector:
    n = float(np.linalg.norm(v))
    return v / n if n > 0 else v


def _entry_point(ob: Obstacle, origin: Vector, direction: Vector) -> Vector:
    roots = line_roots(ob, origin, direction)
    if roots:
        return origin + roots[0] * direction
    return ob.support_point(-direction)


def _bisector_seed(
    scene: Scene, incident: Vector, sequence: Sequence[int], delta: Sequence[int], x: Vector
) -> list[Vector]:
    """Starting points with normals bisecting the reversed incoming and outgoing directions"""
    obstacles = [scene.obstacle(i) for i in sequence]
    anchors = [ob.c for ob in obstacles]
    far = 4.0 * (scene.scale + float(np.max([np.linalg.norm(ob.c - x) for ob in obstacles])))
    seeds: list[Vector] = []
    for _ in range(2):
        seeds = []
        for j, ob in enumerate(obstacles):
            nxt = anchors[j + 1] if j + 1 < len(obstacles) else x
            if delta[j]:
                back = -incident if j == 0 else _unit(anchors[j - 1] - anchors[j])
                d = back + _unit(nxt - anchors[j])
                if np.linalg.norm(d) < 1e-9:
                    d = back
                seeds.append(ob.support_point(d))
            elif j == 0:
                seeds.append(_entry_point(ob, nxt - far * incident, incident))
            else:
                seeds.append(_entry_point(ob, anchors[j - 1], _unit(nxt - anchors[j - 1])))
        anchors = seeds
    return seeds


def _tilted(ob: Obstacle, point: Vector, angle: float, tilt: float) -> Vector:
    n = ob.normal_at(point)
    t1 = np.cross(n, np.eye(3)[int(np.argmin(np.abs(n)))])
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    d = math.cos(tilt) * n + math.sin(tilt) * (math.cos(angle) * t1 + math.sin(angle) * t2)
    return ob.support_point(d)


def _starts(
    scene: Scene,
    incident: Vector,
    sequence: Sequence[int],
    delta: Sequence[int],
    x: Vector,
    multistart: int,
) -> list[list[Vector]]:
    base = _bisector_seed(scene, incident, sequence, delta, x)
    obstacles = [scene.obstacle(i) for i in sequence]
    starts = [base]
    for m in range(multistart):
        angle = 2.0 * math.pi * m / multistart
        starts.append([
            _tilted(ob, p, angle + j * _GOLDEN_ANGLE, _START_TILT)
            for j, (ob, p) in enumerate(zip(obstacles, base))
        ])
    if len(sequence) == 1 and delta[0] == 1:
        # coarse lit grid for single bounces
        ob = obstacles[0]
        for i in range(6):
            theta = (i + 0.5) * math.pi / 6
            for jj in range(12):
                phi = jj * math.pi / 6
                n = np.array([math.sin(theta) * math.cos(phi),
                              math.sin(theta) * math.sin(phi),
                              math.cos(theta)])
                p = ob.support_point(n)
                if np.dot(incident, n) < 0 and np.dot(x - p, n) > 0:
                    starts.append([p])
    return starts


def _newton(
    scene: Scene,
    incident: Vector,
    sequence: Sequence[int],
    start: Sequence[Vector],
    x: Vector,
    config: SolverConfig,
) -> tuple[SurfacePoint, ...]:
    """Damped Newton on the chart gradient, re-charting at every iterate"""
    obstacles = [scene.obstacle(i) for i in sequence]
    nodes = tuple(surface_eval(ob, p, config) for ob, p in zip(obstacles, start))
    caps = [0.5 * min(ob.semi_axes) for ob in obstacles]
    grad = _chart_gradient(incident, nodes, x)
    for iteration in range(config.newton_max_iter):
        g_norm = float(np.max(np.abs(grad)))
        if g_norm < config.newton_tol:
            logger.debug("Newton converged on %s after %d iterations", tuple(sequence), iteration)
            return nodes
        hess = chart_hessian(incident, nodes, x)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        for j, cap in enumerate(caps):
            size = float(np.linalg.norm(step[2 * j:2 * j + 2]))
            if size > cap:
                step *= cap / size

        alpha = 1.0
        for _ in range(_MAX_BACKTRACK):
            try:
                trial = tuple(
                    surface_eval(ob, chart_point(ob, sp, alpha * step[2 * j], alpha * step[2 * j + 1]), config)
                    for j, (ob, sp) in enumerate(zip(obstacles, nodes))
                )
            except ValueError:
                alpha *= 0.5
                continue
            trial_grad = _chart_gradient(incident, trial, x)
            if np.linalg.norm(trial_grad) < np.linalg.norm(grad):
                nodes, grad = trial, trial_grad
                break
            alpha *= 0.5
        else:
            raise NoConvergence(f"line search stalled on {tuple(sequence)} (|g|={g_norm:.3e})")
    if float(np.max(np.abs(grad))) < config.newton_tol:
        return nodes
    raise NoConvergence(f"no stationary point on {tuple(sequence)} after {config.newton_max_iter} iterations")


def _check_sequence(sequence: Sequence[int], delta: Sequence[int]) -> None:
    if not sequence:
        raise ValueError("obstacle sequence must be non-empty")
    if len(sequence) != len(delta):
        raise ValueError("obstacle and delta sequences differ in length")
    if any(a == b for a, b in zip(sequence[:-1], sequence[1:])):
        raise ValueError(f"consecutive nodes must lie on different obstacles: {tuple(sequence)}")
    if any(d not in (0, 1) for d in delta):
        raise ValueError(f"delta entries must be 0 or 1: {tuple(delta)}")


def solve_path(
    scene: Scene,
    wave: IncidentWave,
    obstacle_seq: Sequence[int],
    delta_seq: Sequence[int],
    x: ArrayLike,
    init: Optional[Sequence[ArrayLike]] = None,
    config: Optional[SolverConfig] = None,
) -> Optional[RayPath]:
    """
    Find a stationary path with the given obstacle and delta sequences

    Args:
        scene: Validated scene
        wave: Incident plane wave
        obstacle_seq: Obstacle id per node
        delta_seq: 1 for reflection, 0 for transmission, per node
        x: Observation point
        init: Starting surface points; a bisector seed is used when omitted
        config: Solver settings

    Returns:
        The converged RayPath, or None when Newton fails or converges to a
        point of a different reflection/transmission type

    Raises:
        SignViolation: The converged path is not illuminated
    """
    cfg = config or get_config()
    _check_sequence(obstacle_seq, delta_seq)
    target = np.asarray(x, dtype=np.float64)
    incident = wave.direction
    start = ([np.asarray(p, dtype=np.float64) for p in init] if init is not None
             else _bisector_seed(scene, incident, obstacle_seq, delta_seq, target))
    try:
        nodes = _newton(scene, incident, obstacle_seq, start, target, cfg)
    except NoConvergence as exc:
        logger.debug("%s", exc)
        return None

    dirs, _ = _segments(nodes, target)
    incoming = np.vstack([incident[None, :], dirs[:-1]])
    found = tuple(_classify(incoming[j], dirs[j], sp.normal)[0] for j, sp in enumerate(nodes))
    if found != tuple(delta_seq):
        logger.debug("Converged to delta %s, wanted %s", found, tuple(delta_seq))
        return None

    signs = np.einsum("ij,ij->i", incoming, np.array([sp.normal for sp in nodes]))
    if np.any(signs > cfg.grazing_tol):
        raise SignViolation(f"path on {tuple(obstacle_seq)} is not illuminated (signs {signs.tolist()})")
    return _assemble_path(scene, incident, nodes, delta_seq, target, cfg)


def _check_target(scene: Scene, x: Vector) -> None:
    if scene.inside_any(x):
        raise NearBoundaryError(f"observation point {x.tolist()} is inside an obstacle")


def obstacle_sequences(scene: Scene, level: int) -> list[tuple[int, ...]]:
    """All id sequences of the given length with distinct consecutive entries"""
    ids = scene.ids
    out = []
    for seq in itertools.product(ids, repeat=level):
        if all(a != b for a, b in zip(seq[:-1], seq[1:])):
            out.append(seq)
    return out


def enumerate_paths(
    scene: Scene,
    wave: IncidentWave,
    x: ArrayLike,
    max_bounces: int,
    config: Optional[SolverConfig] = None,
) -> list[RayPath]:
    """
    All illuminated all-reflection paths with 1..max_bounces nodes

    Occluded paths are returned with their occluded flag set; paths that
    touch a grazing or focal set carry the caustic flag.

    Raises:
        ResourceError: Too many obstacle sequences
    """
    cfg = config or get_config()
    if max_bounces < 0:
        raise ValueError("max_bounces must be non-negative")
    target = np.asarray(x, dtype=np.float64)
    _check_target(scene, target)
    n = len(scene.obstacles)
    count = sum(n * (n - 1) ** (level - 1) for level in range(1, max_bounces + 1))
    if count > cfg.max_sequences:
        raise ResourceError(f"{count} obstacle sequences exceed the cap of {cfg.max_sequences}")

    tol = cfg.dedup_tol * scene.scale
    found: dict[tuple[object, ...], RayPath] = {}
    for level in range(1, max_bounces + 1):
        delta = (1,) * level
        for seq in obstacle_sequences(scene, level):
            for start in _starts(scene, wave.direction, seq, delta, target, cfg.multistart):
                try:
                    path = solve_path(scene, wave, seq, delta, target, init=start, config=cfg)
                except SignViolation as exc:
                    logger.debug("%s", exc)
                    continue
                if path is None:
                    continue
                if any(_same_path(path, other, tol) for other in found.values()):
                    continue
                found[path.key(tol)] = path
    paths = sorted(found.values(), key=lambda p: (p.level, p.obstacle_ids, p.phase))
    for path in paths:
        if path.occluded:
            logger.info("Path on %s is occluded", path.obstacle_ids)
        if path.caustic:
            logger.warning("Path on %s is near a caustic", path.obstacle_ids)
    return paths


def _same_path(a: RayPath, b: RayPath, tol: float) -> bool:
    if a.obstacle_ids != b.obstacle_ids or a.delta != b.delta:
        return False
    return all(sa.distance_to(sb) < tol for sa, sb in zip(a.nodes, b.nodes))


@dataclass(frozen=True, eq=False)
class GoaField:
    """Geometrical-optics field with its individual contributions"""
    value: complex
    incident: complex  # 0 when the incident ray is blocked
    paths: tuple[RayPath, ...]  # visible paths that contribute
    contributions: tuple[complex, ...]
    shadowed: bool  # incident ray to x blocked by an obstacle
    caustic: bool  # some visible path touches a focal or grazing set


def path_sign(path: RayPath, bc: BoundaryCondition) -> float:
    """(-1) per reflection for Dirichlet; +1 per reflection, -1 per transmission for Neumann"""
    if bc == "dirichlet":
        return float((-1) ** path.level)
    if bc == "neumann":
        return float(np.prod([1 if d else -1 for d in path.delta]))
    raise ValueError(f"Unknown boundary condition: {bc}")


def path_contribution(path: RayPath, wave: IncidentWave, bc: BoundaryCondition) -> complex:
    """sign * exp(-ik psi) / prod sqrt(det(I + lambda_j P_j))"""
    if path.caustic or not path.curvatures:
        raise CausticError(f"path on {path.obstacle_ids} touches a caustic or grazing set")
    dets = path.amplitude_determinants
    amplitude = 1.0 / np.prod(np.sqrt(dets.astype(np.complex128)))
    return complex(path_sign(path, bc) * amplitude * np.exp(-1j * wave.k * path.phase))


def goa_field(
    scene: Scene,
    wave: IncidentWave,
    x: ArrayLike,
    bc: BoundaryCondition,
    max_bounces: int,
    config: Optional[SolverConfig] = None,
    allow_caustic: bool = False,
) -> GoaField:
    """
    Geometrical-optics field v_OG(x): incident term plus every visible
    reflected path up to max_bounces

    With allow_caustic the field is returned with its caustic flag set and
    the caustic paths left out of the sum.

    Raises:
        CausticError: A contributing path is on a caustic or grazing set
        NearBoundaryError: x lies inside an obstacle
    """
    cfg = config or get_config()
    target = np.asarray(x, dtype=np.float64)
    shadowed = bool(line_hits(scene, target, -wave.direction, t_min=0.0))
    incident = 0j if shadowed else complex(wave.field(target))
    visible = [p for p in enumerate_paths(scene, wave, target, max_bounces, cfg) if not p.occluded]
    caustic = any(p.caustic or not p.curvatures for p in visible)
    if caustic and not allow_caustic:
        ids = [p.obstacle_ids for p in visible if p.caustic or not p.curvatures]
        raise CausticError(f"target {target.tolist()} is near a caustic on paths {ids}")
    kept = tuple(p for p in visible if not (p.caustic or not p.curvatures))
    contributions = tuple(path_contribution(p, wave, bc) for p in kept)
    return GoaField(
        value=incident + sum(contributions, 0j),
        incident=incident,
        paths=kept,
        contributions=contributions,
        shadowed=shadowed,
        caustic=caustic,
    )


def direct_transmissions(
    scene: Scene, wave: IncidentWave, x: ArrayLike, config: Optional[SolverConfig] = None
) -> list[RayPath]:
    """Single-node transmission paths at entry points of the direct ray to x"""
    cfg = config or get_config()
    target = np.asarray(x, dtype=np.float64)
    incident = wave.direction
    out = []
    for hit in line_hits(scene, target, -incident, t_min=0.0):
        sp = surface_eval(scene.obstacle(hit.obstacle_id), hit.point, cfg)
        if np.dot(incident, sp.normal) < 0.0:
            out.append(_assemble_path(scene, incident, (sp,), (0,), target, cfg))
    return out


def insert_transmission(
    scene: Scene, path: RayPath, config: Optional[SolverConfig] = None
) -> list[RayPath]:
    """
    Paths with one extra transmission node on a straight piece of path

    Candidates are entry points on the incoming ray before sigma_1 and on
    each segment, the final segment to the observation point included. The
    phase is unchanged and each new path has level l + 1.
    """
    cfg = config or get_config()
    eps = 1e-7 * scene.scale
    incident = path.incident
    nodes = list(path.nodes)
    candidates: list[tuple[int, SurfacePoint]] = []

    for hit in line_hits(scene, nodes[0].point, -incident, t_min=eps):
        sp = surface_eval(scene.obstacle(hit.obstacle_id), hit.point, cfg)
        if np.dot(incident, sp.normal) < 0.0:
            candidates.append((0, sp))
    for j in range(path.level):
        start = nodes[j].point
        for hit in line_hits(scene, start, path.directions[j], t_min=eps, t_max=float(path.lengths[j]) - eps):
            if hit.entering:
                candidates.append((j + 1, surface_eval(scene.obstacle(hit.obstacle_id), hit.point, cfg)))

    out = []
    for pos, sp in candidates:
        new_nodes = nodes[:pos] + [sp] + nodes[pos:]
        new_delta = list(path.delta[:pos]) + [0] + list(path.delta[pos:])
        ids = [n.obstacle_id for n in new_nodes]
        if any(a == b for a, b in zip(ids[:-1], ids[1:])):
            continue
        out.append(_assemble_path(scene, incident, new_nodes, new_delta, path.target, cfg))
    return out
