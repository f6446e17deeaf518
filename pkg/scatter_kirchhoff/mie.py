"""
Exact plane-wave scattering by a single sphere

Partial-wave series with time convention e^{-ik...}: the incident wave is
sum (2l+1)(-i)^l j_l(kr) P_l(cos g) and the scattered wave
sum (2l+1)(-i)^l a_l h_l(kr) P_l(cos g) with h_l = j_l - i y_l (outgoing).
Sound-soft spheres use a_l = -j_l(kR)/h_l(kR), sound-hard spheres the same
ratio of derivatives.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import eval_legendre, spherical_jn, spherical_yn

from scatter_kirchhoff.config import SolverConfig, get_config
from scatter_kirchhoff.exceptions import ConvergenceError
from scatter_kirchhoff.ray_optics import BoundaryCondition, IncidentWave

logger = logging.getLogger(__name__)


def minimum_truncation(radius: float, k: float) -> int:
    """Smallest admissible order: ceil(kR + 10 (kR)^(1/3) + 10)"""
    kr = k * radius
    return math.ceil(kr + 10.0 * kr ** (1.0 / 3.0) + 10.0)


@dataclass(frozen=True)
class MieConfig:
    """Sphere radius, wavenumber and series truncation order"""
    radius: float
    k: float
    truncation: int

    def __post_init__(self) -> None:
        if self.radius <= 0 or self.k <= 0:
            raise ValueError("radius and k must be positive")
        needed = minimum_truncation(self.radius, self.k)
        if self.truncation < needed:
            raise ValueError(f"truncation {self.truncation} below the minimum {needed} for kR={self.k * self.radius}")

    @classmethod
    def for_sphere(cls, radius: float, k: float, extra_terms: int = 0) -> "MieConfig":
        return cls(radius=radius, k=k, truncation=minimum_truncation(radius, k) + extra_terms)

    @property
    def orders(self) -> NDArray[np.int64]:
        return np.arange(self.truncation + 1)


def mie_coefficients(cfg: MieConfig, bc: BoundaryCondition) -> NDArray[np.complex128]:
    """a_l for l = 0..L"""
    l = cfg.orders
    kr = cfg.k * cfg.radius
    if bc == "dirichlet":
        j = spherical_jn(l, kr)
        y = spherical_yn(l, kr)
    elif bc == "neumann":
        j = spherical_jn(l, kr, derivative=True)
        y = spherical_yn(l, kr, derivative=True)
    else:
        raise ValueError(f"Unknown boundary condition: {bc}")
    return -j / (j - 1j * y)


def _geometry(xi: Sequence[float], x: ArrayLike, center: Sequence[float]) -> tuple[float, float]:
    rel = np.asarray(x, dtype=np.float64) - np.asarray(center, dtype=np.float64)
    r = float(np.linalg.norm(rel))
    if r == 0.0:
        return 0.0, 1.0
    return r, float(np.clip(np.dot(rel, np.asarray(xi, dtype=np.float64)) / r, -1.0, 1.0))


def mie_scattered(
    cfg: MieConfig,
    xi: Sequence[float],
    x: ArrayLike,
    bc: BoundaryCondition,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    config: Optional[SolverConfig] = None,
) -> complex:
    """
    Scattered field at x outside the sphere

    Raises:
        ValueError: x is inside the sphere
        ConvergenceError: The last retained term exceeds the tail tolerance
    """
    solver = config or get_config()
    r, cos_g = _geometry(xi, x, center)
    if r < cfg.radius * (1.0 - 1e-12):
        raise ValueError(f"point at r={r} is inside the sphere of radius {cfg.radius}")
    l = cfg.orders
    kr = cfg.k * r
    h = spherical_jn(l, kr) - 1j * spherical_yn(l, kr)
    terms = (2 * l + 1) * (-1j) ** l * mie_coefficients(cfg, bc) * h * eval_legendre(l, cos_g)
    total = complex(np.sum(terms))
    if abs(terms[-1]) > solver.mie_tail_tol * max(abs(total), 1e-300):
        raise ConvergenceError(
            f"Mie series not converged at L={cfg.truncation}: last term {abs(terms[-1]):.3e}"
        )
    return total


def mie_field(
    cfg: MieConfig,
    xi: Sequence[float],
    x: ArrayLike,
    bc: BoundaryCondition,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    config: Optional[SolverConfig] = None,
) -> complex:
    """Total field: incident plane wave plus the scattered series"""
    wave = IncidentWave.from_direction(xi, cfg.k)
    incident = complex(wave.field(np.asarray(x, dtype=np.float64)))
    return incident + mie_scattered(cfg, xi, x, bc, center, config)


def mie_far_field(cfg: MieConfig, bc: BoundaryCondition, cos_angle: float) -> complex:
    """Far-field amplitude f with u_s ~ f exp(-ikr)/r; cos_angle measured from xi"""
    l = cfg.orders
    terms = (2 * l + 1) * mie_coefficients(cfg, bc) * eval_legendre(l, cos_angle)
    return complex(1j / cfg.k * np.sum(terms))


def mie_forward_amplitude(cfg: MieConfig, bc: BoundaryCondition) -> complex:
    """f in the incidence direction"""
    return mie_far_field(cfg, bc, 1.0)


def mie_cross_section(cfg: MieConfig, bc: BoundaryCondition) -> float:
    """Total scattering cross-section (4pi/k^2) sum (2l+1)|a_l|^2"""
    a = mie_coefficients(cfg, bc)
    l = cfg.orders
    return float(4.0 * math.pi / cfg.k**2 * np.sum((2 * l + 1) * np.abs(a) ** 2))


def mie_extinction(cfg: MieConfig, bc: BoundaryCondition) -> float:
    """Cross-section from the optical theorem, -(4pi/k) Im f(xi)"""
    return float(-4.0 * math.pi / cfg.k * mie_forward_amplitude(cfg, bc).imag)
