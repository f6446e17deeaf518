"""
Stationary-phase analysis of multi-node ray paths

Block-tridiagonal phase Hessians in principal charts, their Schur
complements, the identities tying them to wavefront curvature, the full
stationary set C_l(x) and the asymptotic increments built from it.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from scatter_kirchhoff.config import SolverConfig, get_config
from scatter_kirchhoff.exceptions import SingularError
from scatter_kirchhoff.geometry import Scene
from scatter_kirchhoff.matrix_maps import frame_rotation, tangential_block
from scatter_kirchhoff.ray_optics import (
    BoundaryCondition,
    IncidentWave,
    RayPath,
    direct_transmissions,
    enumerate_paths,
    insert_transmission,
    path_contribution,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StationaryData:
    """Hessian blocks of one path and, once computed, their Schur complements"""
    path: RayPath
    diagonal: tuple[NDArray[np.float64], ...]  # H_jj
    off_diagonal: tuple[NDArray[np.float64], ...]  # H_{j,j+1}
    schur: tuple[NDArray[np.float64], ...] = ()  # M_j
    determinants: tuple[float, ...] = ()
    signatures: tuple[int, ...] = ()


def hessian_blocks(path: RayPath) -> StationaryData:
    """
    Diagonal and super-diagonal 2x2 blocks of the phase Hessian

    H_jj = E^T[(I - xi_{j-1} xi_{j-1}^T)/lambda_{j-1} + (I - xi_j xi_j^T)/lambda_j]E
           - <xi_{j-1} - xi_j, n_j> diag(k1, k2)
    (no first term for j = 1) and
    H_{j,j+1} = -E_j^T (I - xi_j xi_j^T) E_{j+1} / lambda_j.
    """
    eye = np.eye(3)
    dirs, lengths, incoming = path.directions, path.lengths, path.incoming
    diagonal = []
    off_diagonal = []
    for j, sp in enumerate(path.nodes):
        e = sp.tangent_basis
        amb = (eye - np.outer(dirs[j], dirs[j])) / lengths[j]
        if j > 0:
            amb = amb + (eye - np.outer(incoming[j], incoming[j])) / lengths[j - 1]
        tilt = float(np.dot(incoming[j] - dirs[j], sp.normal))
        diagonal.append(e.T @ amb @ e - tilt * np.diag([sp.k1, sp.k2]))
        if j + 1 < path.level:
            nxt = path.nodes[j + 1]
            rot = frame_rotation(sp, nxt)[:2, :2].T  # E_j^T E_{j+1}
            a = e.T @ dirs[j]
            b = nxt.tangent_basis.T @ dirs[j]
            off_diagonal.append(-(rot - np.outer(a, b)) / lengths[j])
    return StationaryData(path=path, diagonal=tuple(diagonal), off_diagonal=tuple(off_diagonal))


def full_hessian(data: StationaryData) -> NDArray[np.float64]:
    """Assemble the 2l x 2l block-tridiagonal Hessian"""
    l = len(data.diagonal)
    h = np.zeros((2 * l, 2 * l))
    for j, block in enumerate(data.diagonal):
        h[2 * j:2 * j + 2, 2 * j:2 * j + 2] = block
    for j, block in enumerate(data.off_diagonal):
        h[2 * j:2 * j + 2, 2 * j + 2:2 * j + 4] = block
        h[2 * j + 2:2 * j + 4, 2 * j:2 * j + 2] = block.T
    return h


def schur_M(data: StationaryData, config: Optional[SolverConfig] = None) -> StationaryData:
    """
    Schur complements M_1 = H_11, M_j = H_jj - H_{j-1,j}^T M_{j-1}^{-1} H_{j-1,j}

    Raises:
        SingularError: Some |det M_j| is below the Hessian tolerance
    """
    cfg = config or get_config()
    schur: list[NDArray[np.float64]] = []
    dets: list[float] = []
    sigs: list[int] = []
    for j, block in enumerate(data.diagonal):
        if j == 0:
            m = block.copy()
        else:
            off = data.off_diagonal[j - 1]
            m = block - off.T @ np.linalg.solve(schur[-1], off)
        m = 0.5 * (m + m.T)
        det = float(np.linalg.det(m))
        if abs(det) < cfg.hessian_tol:
            raise SingularError(f"Schur complement {j + 1} is singular (det={det:.3e})")
        eig = np.linalg.eigvalsh(m)
        schur.append(m)
        dets.append(det)
        sigs.append(int(np.sum(eig > 0) - np.sum(eig < 0)))
    return StationaryData(
        path=data.path,
        diagonal=data.diagonal,
        off_diagonal=data.off_diagonal,
        schur=tuple(schur),
        determinants=tuple(dets),
        signatures=tuple(sigs),
    )


def lemma1_residuals(path: RayPath) -> NDArray[np.float64]:
    """Residual of the reflection (delta=1) or transmission (delta=0) law at each node"""
    out = []
    for j, sp in enumerate(path.nodes):
        d_in, d_out = path.incoming[j], path.directions[j]
        if path.delta[j]:
            expected = d_in - 2.0 * float(np.dot(d_in, sp.normal)) * sp.normal
        else:
            expected = d_in
        out.append(float(np.linalg.norm(d_out - expected)))
    return np.array(out)


@dataclass(frozen=True)
class Lemma2Report:
    """Per-node residuals of the Schur/curvature identities"""
    curvature: NDArray[np.float64]  # |M_j - (P_j + (I - xi_j xi_j^T)/lambda_j)|_T| relative
    determinant: NDArray[np.float64]  # relative mismatch of det M_j
    signature: NDArray[np.float64]  # |sig M_j - 2|
    min_singular: NDArray[np.float64]  # smallest singular value of M_j

    @property
    def max_residual(self) -> float:
        return float(max(self.curvature.max(), self.determinant.max(), self.signature.max()))

    def passed(self, tol: float) -> bool:
        return self.max_residual <= tol


def lemma2_residuals(path: RayPath, config: Optional[SolverConfig] = None) -> Lemma2Report:
    """
    Compare Schur complements with the propagated curvature matrices

    M_j = (P_j + (I - xi_j xi_j^T)/lambda_j) restricted to the tangent plane,
    det M_j = (<xi_j, n_j>/lambda_j)^2 det(I + lambda_j P_j), sig M_j = 2.
    """
    data = schur_M(hessian_blocks(path), config)
    eye = np.eye(3)
    curv, det_res, sig_res, min_sv = [], [], [], []
    for j, sp in enumerate(path.nodes):
        m = data.schur[j]
        lam = float(path.lengths[j])
        xi_j = path.directions[j]
        p = path.curvatures[j]
        expected = tangential_block(p + (eye - np.outer(xi_j, xi_j)) / lam, sp)
        curv.append(float(np.linalg.norm(m - expected) / max(1.0, np.linalg.norm(m))))
        rhs = (float(np.dot(xi_j, sp.normal)) / lam) ** 2 * float(np.linalg.det(eye + lam * p))
        det_res.append(abs(data.determinants[j] - rhs) / max(abs(rhs), abs(data.determinants[j])))
        sig_res.append(float(abs(data.signatures[j] - 2)))
        min_sv.append(float(np.linalg.svd(m, compute_uv=False).min()))
    return Lemma2Report(np.array(curv), np.array(det_res), np.array(sig_res), np.array(min_sv))


@dataclass(frozen=True)
class TransmissionResidual:
    """Mismatch between a path and the same path with a transmission inserted"""
    phase_diff: float
    det_product_diff: float
    det_product_scale: float

    @property
    def det_product_rel(self) -> float:
        return self.det_product_diff / max(self.det_product_scale, 1e-300)


def lemma3_residuals(nu: RayPath, mu: RayPath) -> TransmissionResidual:
    """Phase and amplitude-determinant product differences of nu and mu"""
    a = float(np.prod(nu.amplitude_determinants))
    b = float(np.prod(mu.amplitude_determinants))
    return TransmissionResidual(
        phase_diff=abs(nu.phase - mu.phase),
        det_product_diff=abs(a - b),
        det_product_scale=max(abs(a), abs(b)),
    )


def _dedup(paths: list[RayPath], tol: float) -> list[RayPath]:
    seen: dict[tuple[object, ...], RayPath] = {}
    for p in paths:
        seen.setdefault(p.key(tol), p)
    return list(seen.values())


def stationary_set(
    scene: Scene,
    wave: IncidentWave,
    x: ArrayLike,
    level: int,
    config: Optional[SolverConfig] = None,
) -> list[RayPath]:
    """
    C_level(x): stationary paths with exactly `level` nodes

    Every member is an all-reflection skeleton with m <= level nodes
    (occluded skeletons and the direct ray included) with level - m
    transmission nodes inserted at entry points along its straight pieces.
    """
    cfg = config or get_config()
    if level < 1:
        raise ValueError(f"level must be at least 1, got {level}")
    target = np.asarray(x, dtype=np.float64)
    tol = cfg.dedup_tol * scene.scale
    skeletons = enumerate_paths(scene, wave, target, level, cfg)

    members: list[RayPath] = []
    for m in range(level + 1):
        if m == 0:
            current = direct_transmissions(scene, wave, target, cfg)
            rounds = level - 1
        else:
            current = [p for p in skeletons if p.level == m]
            rounds = level - m
        for _ in range(rounds):
            current = _dedup([q for p in current for q in insert_transmission(scene, p, cfg)], tol)
        members.extend(current)
    members = _dedup(members, tol)
    logger.debug("C_%d(x) has %d members", level, len(members))
    return sorted(members, key=lambda p: (p.obstacle_ids, p.delta, p.phase))


def asymptotic_terms(
    scene: Scene,
    wave: IncidentWave,
    x: ArrayLike,
    bc: BoundaryCondition,
    level: int,
    config: Optional[SolverConfig] = None,
) -> list[tuple[RayPath, complex]]:
    """Stationary-phase contribution of each member of C_level(x)"""
    return [(p, path_contribution(p, wave, bc)) for p in stationary_set(scene, wave, x, level, config)]


def asymptotic_field(
    scene: Scene,
    wave: IncidentWave,
    x: ArrayLike,
    bc: BoundaryCondition,
    level: int,
    config: Optional[SolverConfig] = None,
) -> complex:
    """
    Leading-order l-th increment v_l(x); level 0 is the incident field

    Raises:
        CausticError: A member of C_level(x) is on a caustic or grazing set
    """
    if level == 0:
        return complex(wave.field(np.asarray(x, dtype=np.float64)))
    return sum((t for _, t in asymptotic_terms(scene, wave, x, bc, level, config)), 0j)
