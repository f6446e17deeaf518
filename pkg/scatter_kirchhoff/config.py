"""
Configuration for the scattering library

Numerical tolerances and resource caps shared by every module. Values come
from the defaults below, overridden by SCATTER_* environment variables.
"""

import logging
import os
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

# Set up logger for this module
logger = logging.getLogger(__name__)

ENV_PREFIX = "SCATTER_"


class SolverConfig(BaseModel):
    """Solver tolerances and caps"""

    model_config = ConfigDict(validate_assignment=True, extra="forbid")

    # Geometry
    surface_tol: float = Field(default=1e-9, gt=0, description="On-surface tolerance, relative to semi-axis")
    grazing_tol: float = Field(default=1e-6, gt=0, description="|<d,n>| below this counts as grazing")
    max_grid_nodes: int = Field(default=400_000, gt=0, description="Node cap per obstacle grid")
    grid_quadrature_order: int = Field(default=4, ge=1, le=16, description="Gauss-Legendre points per cell axis")

    # Matrix maps
    singular_cond: float = Field(default=1e12, gt=1, description="Condition number treated as singular")
    tangency_tol: float = Field(default=1e-9, gt=0, description="|<zeta,eta>| below this is tangent")

    # Ray solver
    newton_max_iter: int = Field(default=100, gt=0, description="Newton iteration cap per start")
    newton_tol: float = Field(default=1e-10, gt=0, description="Gradient norm accepted as stationary")
    multistart: int = Field(default=6, ge=0, description="Perturbed starts per obstacle sequence")
    dedup_tol: float = Field(default=1e-6, gt=0, description="Node distance for duplicate paths, relative to scale")
    caustic_tol: float = Field(default=1e-6, gt=0, description="|det(I + lambda P)| below this flags a caustic")
    max_sequences: int = Field(default=10_000, gt=0, description="Cap on enumerated obstacle sequences")

    # Stationary phase
    hessian_tol: float = Field(default=1e-12, gt=0, description="|det M_j| below this is singular")

    # Kirchhoff layers
    chunk_rows: int = Field(default=256, gt=0, description="Target rows per kernel chunk")
    near_boundary_wavelengths: float = Field(default=1.0, ge=0, description="Exclusion layer around the surface")

    # Mie series
    mie_tail_tol: float = Field(default=1e-12, gt=0, description="Last-term to sum ratio accepted as converged")


def load_config() -> SolverConfig:
    """Load configuration from environment variables"""
    overrides = {}
    for name in SolverConfig.model_fields:
        value = os.getenv(f"{ENV_PREFIX}{name.upper()}")
        if value is not None:
            overrides[name] = value
            logger.debug("Config override %s=%s", name, value)
    return SolverConfig.model_validate(overrides)


# Global configuration instance
_config = load_config()


def get_config() -> SolverConfig:
    """Get the global configuration instance"""
    return _config


def set_config(config: Optional[SolverConfig] = None) -> SolverConfig:
    """
    Replace the global configuration

    Args:
        config: New configuration; reloads from the environment when omitted

    Returns:
        The configuration now in effect
    """
    global _config
    _config = config if config is not None else load_config()
    return _config
