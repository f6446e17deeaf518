"""
Scatter Kirchhoff - Main Package

Plane-wave scattering by several smooth convex obstacles:
- Surface geometry, quadrature grids and ray intersection (geometry)
- Curvature propagation maps (matrix_maps)
- Multi-bounce geometrical-optics paths and fields (ray_optics)
- Iterated Kirchhoff surface densities and fields (kirchhoff)
- Stationary-phase Hessians, identities and asymptotics (stationary_phase)
- Exact single-sphere series (mie)
- Solver configuration (config)
"""

__version__ = "0.1.0"
__author__ = "ScatterKirchhoff"

from scatter_kirchhoff.config import SolverConfig, get_config, load_config, set_config
from scatter_kirchhoff.exceptions import ScatterError
from scatter_kirchhoff.geometry import (
    Obstacle,
    Scene,
    SurfaceGrid,
    SurfacePoint,
    build_grid,
    ray_intersect,
    surface_eval,
    validate_scene,
)
from scatter_kirchhoff.kirchhoff import (
    FieldSample,
    KernelLayer,
    field_update,
    first_layer,
    next_layer,
    total_field,
)
from scatter_kirchhoff.mie import MieConfig, mie_field
from scatter_kirchhoff.ray_optics import (
    GoaField,
    IncidentWave,
    RayPath,
    enumerate_paths,
    goa_field,
    solve_path,
)
from scatter_kirchhoff.stationary_phase import asymptotic_field, stationary_set

__all__ = [
    # Version info
    '__version__',
    '__author__',

    # Configuration
    'SolverConfig',
    'get_config',
    'load_config',
    'set_config',
    'ScatterError',

    # Geometry
    'Obstacle',
    'Scene',
    'SurfaceGrid',
    'SurfacePoint',
    'build_grid',
    'ray_intersect',
    'surface_eval',
    'validate_scene',

    # Kirchhoff iteration
    'FieldSample',
    'KernelLayer',
    'field_update',
    'first_layer',
    'next_layer',
    'total_field',

    # Geometrical optics
    'GoaField',
    'IncidentWave',
    'RayPath',
    'enumerate_paths',
    'goa_field',
    'solve_path',

    # Asymptotics and reference solution
    'asymptotic_field',
    'stationary_set',
    'MieConfig',
    'mie_field',
]
