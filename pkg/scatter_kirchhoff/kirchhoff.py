"""
Iterated Kirchhoff approximation

The incident wave induces a surface density p_1 on the illuminated part of
every obstacle; each further layer p_{l+1} is the field of p_l re-radiated
from the other obstacles and evaluated where it illuminates the surface.
The l-th field increment is the single-layer (Dirichlet) or double-layer
(Neumann) potential of p_l. All integrals are node sums over SurfaceGrid
quadratures.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist

from scatter_kirchhoff.config import SolverConfig, get_config
from scatter_kirchhoff.exceptions import NearBoundaryError
from scatter_kirchhoff.geometry import Scene, SurfaceGrid, build_grid
from scatter_kirchhoff.ray_optics import BoundaryCondition, IncidentWave
from scatter_kirchhoff.workers import parallel_map

logger = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]


@dataclass(frozen=True, eq=False)
class KernelLayer:
    """Surface density p_l on every obstacle grid"""
    level: int
    bc: BoundaryCondition
    wave: IncidentWave
    grids: tuple[SurfaceGrid, ...]
    values: tuple[ComplexArray, ...]  # one array per grid, aligned with grid nodes

    @property
    def is_zero(self) -> bool:
        return all(not np.any(v) for v in self.values)


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Kirchhoff field at one observation point"""
    target: NDArray[np.float64]
    k: float
    increments: tuple[complex, ...]  # incident term, then u_l - u_{l-1} for l = 1..n

    @property
    def total(self) -> complex:
        return sum(self.increments, 0j)

    def partial(self, level: int) -> complex:
        """u_level"""
        return sum(self.increments[:level + 1], 0j)


def _check_bc(bc: str) -> None:
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"Unknown boundary condition: {bc}")


def _dirichlet_bracket(c: NDArray[np.float64]) -> NDArray[np.float64]:
    # c - |c|
    return np.where(c < 0.0, 2.0 * c, 0.0)


def _neumann_bracket(c: NDArray[np.float64]) -> NDArray[np.float64]:
    # 1 - sgn(c), with the grazing value taken as dark
    return np.where(c < 0.0, 2.0, 0.0)


def build_grids(
    scene: Scene, k: float, ppw: float, config: Optional[SolverConfig] = None
) -> tuple[SurfaceGrid, ...]:
    """One quadrature grid per obstacle, in scene order"""
    return tuple(build_grid(ob, k, ppw, config) for ob in scene.obstacles)


def first_layer(
    scene: Scene,
    wave: IncidentWave,
    grids: Sequence[SurfaceGrid],
    bc: BoundaryCondition,
) -> KernelLayer:
    """
    p_1 on every grid

    Dirichlet: ik(<xi,n> - |<xi,n>|) exp(-ik<xi,sigma>)
    Neumann:   ik(1 - sgn<xi,n>) exp(-ik<xi,sigma>), zero where <xi,n> >= 0
    """
    _check_bc(bc)
    if len(grids) != len(scene.obstacles):
        raise ValueError("need one grid per obstacle")
    xi = wave.direction
    values = []
    for grid in grids:
        c = grid.normals @ xi
        phase = np.exp(-1j * wave.k * (grid.points @ xi))
        bracket = _dirichlet_bracket(c) if bc == "dirichlet" else _neumann_bracket(c)
        values.append(1j * wave.k * bracket * phase)
    return KernelLayer(level=1, bc=bc, wave=wave, grids=tuple(grids), values=tuple(values))


def _layer_rows(
    layer: KernelLayer,
    target: SurfaceGrid,
    rows: slice,
    sources: list[tuple[SurfaceGrid, ComplexArray, NDArray[np.bool_]]],
) -> ComplexArray:
    k = layer.wave.k
    pts = target.points[rows]
    nrm = target.normals[rows]
    out = np.zeros(pts.shape[0], dtype=np.complex128)
    for grid, vals, mask in sources:
        src = grid.points[mask]
        wp = grid.weights[mask] * vals[mask]
        r = cdist(pts, src)
        # <(sigma - sigma')/r, n(sigma)>
        c = (np.einsum("ij,ij->i", pts, nrm)[:, None] - nrm @ src.T) / r
        if layer.bc == "dirichlet":
            bracket = _dirichlet_bracket(c)
        else:
            src_n = grid.normals[mask]
            along = (pts @ src_n.T - np.einsum("ij,ij->i", src, src_n)[None, :]) / r
            bracket = _neumann_bracket(c) * along
        kernel = bracket * np.exp(-1j * k * r) / r
        out += np.sum(kernel * wp[None, :], axis=1)
    return out * (1j * k / (4.0 * math.pi))


def next_layer(
    layer: KernelLayer, threads: int = 1, config: Optional[SolverConfig] = None
) -> KernelLayer:
    """
    p_{l+1} from p_l

    p_{l+1}(sigma) = (ik/4pi) sum over the other obstacles of
    p_l(sigma') bracket(sigma', sigma) exp(-ik r)/r, r = |sigma - sigma'|,
    with bracket <d,n(sigma)> - |<d,n(sigma)>| (Dirichlet) or
    (1 - sgn<d,n(sigma)>) <d,n(sigma')> (Neumann), d = (sigma - sigma')/r.
    Rows are split in fixed-size chunks so results do not depend on threads.
    """
    cfg = config or get_config()
    new_values = []
    for j, target in enumerate(layer.grids):
        sources = []
        for i, grid in enumerate(layer.grids):
            if i == j:
                continue
            mask = layer.values[i] != 0
            if np.any(mask):
                sources.append((grid, layer.values[i], mask))
        if not sources:
            new_values.append(np.zeros(len(target), dtype=np.complex128))
            continue
        chunks = [slice(s, min(s + cfg.chunk_rows, len(target))) for s in range(0, len(target), cfg.chunk_rows)]
        parts = parallel_map(lambda rows: _layer_rows(layer, target, rows, sources), chunks, threads)
        new_values.append(np.concatenate(parts))
    logger.debug("Built layer %d on %d grids", layer.level + 1, len(layer.grids))
    return KernelLayer(
        level=layer.level + 1, bc=layer.bc, wave=layer.wave, grids=layer.grids, values=tuple(new_values)
    )


def check_targets(
    scene: Scene,
    grids: Sequence[SurfaceGrid],
    targets: NDArray[np.float64],
    k: float,
    config: Optional[SolverConfig] = None,
) -> None:
    """
    Raises:
        NearBoundaryError: A target is inside an obstacle or within the
                           configured number of wavelengths of a surface
    """
    cfg = config or get_config()
    limit = cfg.near_boundary_wavelengths * 2.0 * math.pi / k
    for x in targets:
        if scene.inside_any(x):
            raise NearBoundaryError(f"target {x.tolist()} is inside an obstacle")
        if limit > 0:
            dist = min(float(cdist(x[None, :], g.points).min()) for g in grids)
            if dist < limit:
                raise NearBoundaryError(
                    f"target {x.tolist()} is {dist:.3g} from the surface (limit {limit:.3g})"
                )


def field_update(
    layer: KernelLayer, targets: ArrayLike, config: Optional[SolverConfig] = None
) -> ComplexArray:
    """
    u_l - u_{l-1} at the targets

    Dirichlet: (1/4pi) sum p_l exp(-ik r)/r
    Neumann:   (1/4pi) sum p_l <(x - sigma)/r, n(sigma)> exp(-ik r)/r
    """
    pts = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    k = layer.wave.k
    out = np.zeros(pts.shape[0], dtype=np.complex128)
    if layer.is_zero:
        return out
    for grid, vals in zip(layer.grids, layer.values):
        mask = vals != 0
        if not np.any(mask):
            continue
        src = grid.points[mask]
        wp = grid.weights[mask] * vals[mask]
        r = cdist(pts, src)
        kernel = np.exp(-1j * k * r) / r
        if layer.bc == "neumann":
            src_n = grid.normals[mask]
            kernel = kernel * (pts @ src_n.T - np.einsum("ij,ij->i", src, src_n)[None, :]) / r
        out += np.sum(kernel * wp[None, :], axis=1)
    return out / (4.0 * math.pi)


def total_field(
    scene: Scene,
    wave: IncidentWave,
    targets: ArrayLike,
    bc: BoundaryCondition,
    n: int,
    ppw: float,
    threads: int = 1,
    config: Optional[SolverConfig] = None,
) -> list[FieldSample]:
    """
    u_n = incident + sum of the first n increments at each target

    Raises:
        NearBoundaryError: A target is inside or too close to an obstacle
        ResourceError: A grid exceeds the node cap
    """
    cfg = config or get_config()
    _check_bc(bc)
    if n < 1:
        raise ValueError(f"iteration count must be at least 1, got {n}")
    pts = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    grids = build_grids(scene, wave.k, ppw, cfg)
    check_targets(scene, grids, pts, wave.k, cfg)

    increments = [wave.field(pts)]
    layer = first_layer(scene, wave, grids, bc)
    increments.append(field_update(layer, pts, cfg))
    for _ in range(1, n):
        layer = next_layer(layer, threads, cfg)
        increments.append(field_update(layer, pts, cfg))
    stacked = np.array(increments)
    return [
        FieldSample(target=pts[i], k=wave.k, increments=tuple(complex(v) for v in stacked[:, i]))
        for i in range(pts.shape[0])
    ]


def dirichlet_weight(
    xi: ArrayLike, points: ArrayLike, normals: ArrayLike
) -> NDArray[np.float64]:
    """
    D_l for node chains sigma_1..sigma_l (arrays of shape (..., l, 3))

    (<xi,n_1> - |<xi,n_1>|) times prod_j (<d_j,n_j> - |<d_j,n_j>|),
    d_j = (sigma_j - sigma_{j-1}) / |sigma_j - sigma_{j-1}|.
    """
    p = np.asarray(points, dtype=np.float64)
    n = np.asarray(normals, dtype=np.float64)
    w = _dirichlet_bracket(n[..., 0, :] @ np.asarray(xi, dtype=np.float64))
    if p.shape[-2] > 1:
        d = np.diff(p, axis=-2)
        d = d / np.linalg.norm(d, axis=-1, keepdims=True)
        w = w * np.prod(_dirichlet_bracket(np.sum(d * n[..., 1:, :], axis=-1)), axis=-1)
    return w


def neumann_weight(
    xi: ArrayLike, points: ArrayLike, normals: ArrayLike
) -> NDArray[np.float64]:
    """
    N_l for node chains sigma_1..sigma_l (arrays of shape (..., l, 3))

    (1 - sgn<xi,n_1>) times prod_j (1 - sgn<d_j,n_j>) <d_j,n_{j-1}>.
    """
    p = np.asarray(points, dtype=np.float64)
    n = np.asarray(normals, dtype=np.float64)
    w = _neumann_bracket(n[..., 0, :] @ np.asarray(xi, dtype=np.float64))
    if p.shape[-2] > 1:
        d = np.diff(p, axis=-2)
        d = d / np.linalg.norm(d, axis=-1, keepdims=True)
        factors = _neumann_bracket(np.sum(d * n[..., 1:, :], axis=-1)) * np.sum(d * n[..., :-1, :], axis=-1)
        w = w * np.prod(factors, axis=-1)
    return w


def product_surface_increment(
    scene: Scene,
    wave: IncidentWave,
    grids: Sequence[SurfaceGrid],
    bc: BoundaryCondition,
    level: int,
    targets: ArrayLike,
    config: Optional[SolverConfig] = None,
) -> ComplexArray:
    """
    u_l - u_{l-1} by direct quadrature over the product surface (l = 1 or 2)

    (ik)^l/(4pi)^l times the sum over node chains of the kernel weight,
    exp(-ik psi_l) and the inverse segment lengths; Neumann adds the
    final <(x - sigma_l)/|x - sigma_l|, n(sigma_l)> factor.
    Level-2 node pairs are formed chunk_rows last nodes at a time.
    """
    _check_bc(bc)
    cfg = config or get_config()
    if level not in (1, 2):
        raise ValueError(f"product-surface quadrature supports levels 1 and 2, got {level}")
    pts = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    xi = wave.direction
    k = wave.k
    weight_fn = dirichlet_weight if bc == "dirichlet" else neumann_weight
    out = np.zeros(pts.shape[0], dtype=np.complex128)

    def finish(last: SurfaceGrid, chain_sum: ComplexArray) -> ComplexArray:
        # chain_sum is indexed by the last node
        r = cdist(pts, last.points)
        kernel = np.exp(-1j * k * r) / r
        if bc == "neumann":
            kernel = kernel * (pts @ last.normals.T - np.einsum("ij,ij->i", last.points, last.normals)[None, :]) / r
        return np.sum(kernel * (last.weights * chain_sum)[None, :], axis=1)

    for j, last in enumerate(grids):
        if level == 1:
            w = weight_fn(xi, last.points[:, None, :], last.normals[:, None, :])
            chain = w * np.exp(-1j * k * (last.points @ xi))
            out += finish(last, chain)
            continue
        chain = np.zeros(len(last), dtype=np.complex128)
        for i, first in enumerate(grids):
            if i == j:
                continue
            for start in range(0, len(last), cfg.chunk_rows):
                rows = slice(start, start + cfg.chunk_rows)
                chains_p = np.stack(np.broadcast_arrays(first.points[None, :, :], last.points[rows, None, :]), axis=-2)
                chains_n = np.stack(np.broadcast_arrays(first.normals[None, :, :], last.normals[rows, None, :]), axis=-2)
                w = weight_fn(xi, chains_p, chains_n)  # (rows, N_first)
                r = cdist(last.points[rows], first.points)
                phase = (first.points @ xi)[None, :] + r
                chain[rows] += np.sum(w * first.weights[None, :] * np.exp(-1j * k * phase) / r, axis=1)
        out += finish(last, chain)
    return out * (1j * k) ** level / (4.0 * math.pi) ** level
