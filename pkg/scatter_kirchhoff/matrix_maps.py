"""
Matrix maps for curvature propagation along ray paths

S_s(A) carries a curvature matrix a distance s along a straight segment,
T_{B,eta,zeta}(A) reflects it off a surface with shape operator B and normal
eta for incoming direction zeta. All matrices are 3x3 in global coordinates.
"""

import logging
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from scatter_kirchhoff.config import SolverConfig, get_config
from scatter_kirchhoff.exceptions import SingularError, TangencyError
from scatter_kirchhoff.geometry import SurfacePoint

logger = logging.getLogger(__name__)

SymMatrix3 = NDArray[np.float64]
FrameRotation = NDArray[np.float64]


def _symmetric(a: NDArray[np.float64]) -> bool:
    return bool(np.allclose(a, a.T, rtol=1e-12, atol=1e-14 * (1.0 + np.abs(a).max())))


def shift_map(a: SymMatrix3, s: float, config: Optional[SolverConfig] = None) -> SymMatrix3:
    """
    S_s(A) = A (I + sA)^{-1}

    Raises:
        SingularError: I + sA is numerically singular
    """
    cfg = config or get_config()
    a = np.asarray(a, dtype=np.float64)
    m = np.eye(3) + s * a
    if np.linalg.cond(m) > cfg.singular_cond:
        raise SingularError(f"I + sA is singular for s={s}")
    # X (I + sA) = A
    out = np.linalg.solve(m.T, a.T).T
    if _symmetric(a):
        out = 0.5 * (out + out.T)
    return out


def reflect_map(
    a: SymMatrix3,
    b: SymMatrix3,
    eta: NDArray[np.float64],
    zeta: NDArray[np.float64],
    config: Optional[SolverConfig] = None,
) -> SymMatrix3:
    """
    Reflection map T_{B,eta,zeta}(A)

    T(A)x = (A - 2<zeta,eta>B)x - 2<eta,x>(A eta + B zeta)
            - 2<A eta + B zeta, x>eta
            + 2[2<A eta, eta> - <B zeta, zeta>/<zeta, eta>]<eta, x>eta

    Args:
        a: Incoming curvature matrix
        b: Shape operator of the surface
        eta: Unit outer normal
        zeta: Unit incoming direction

    Raises:
        TangencyError: zeta is tangent to the surface
    """
    cfg = config or get_config()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    zeta = np.asarray(zeta, dtype=np.float64)
    c = float(np.dot(zeta, eta))
    if abs(c) <= cfg.tangency_tol:
        raise TangencyError(f"incoming direction is tangent (<zeta,eta>={c:.3e})")
    w = a @ eta + b @ zeta
    beta = 2.0 * float(eta @ a @ eta) - float(zeta @ b @ zeta) / c
    return (a - 2.0 * c * b
            - 2.0 * np.outer(w, eta)
            - 2.0 * np.outer(eta, w)
            + 2.0 * beta * np.outer(eta, eta))


def frame_rotation(source: SurfacePoint, target: SurfacePoint) -> FrameRotation:
    """R[p, q] = <e_p(target), e_q(source)> for the principal frames (u, v, n)"""
    return target.frame.T @ source.frame


def tangential_block(m: SymMatrix3, sp: SurfacePoint) -> NDArray[np.float64]:
    """Restriction E^T M E of a 3x3 matrix to the tangent plane at sp"""
    e = sp.tangent_basis
    return e.T @ np.asarray(m, dtype=np.float64) @ e
