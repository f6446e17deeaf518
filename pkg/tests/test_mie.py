"""
Tests for the single-sphere series solution
"""

import cmath
import math

import numpy as np
import pytest

from scatter_kirchhoff.config import SolverConfig
from scatter_kirchhoff.exceptions import ConvergenceError
from scatter_kirchhoff.geometry import Obstacle, validate_scene
from scatter_kirchhoff.mie import (
    MieConfig,
    mie_cross_section,
    mie_extinction,
    mie_far_field,
    mie_field,
    mie_forward_amplitude,
    mie_scattered,
    minimum_truncation,
)
from scatter_kirchhoff.ray_optics import IncidentWave, goa_field

UP = (0.0, 0.0, 1.0)


def test_truncation_floor() -> None:
    """Orders below ceil(kR + 10 (kR)^(1/3) + 10) are refused"""
    assert minimum_truncation(1.0, 1.0) == 21
    assert minimum_truncation(1.0, 8.0) == 38
    with pytest.raises(ValueError):
        MieConfig(radius=1.0, k=8.0, truncation=37)
    with pytest.raises(ValueError):
        MieConfig(radius=0.0, k=1.0, truncation=50)
    assert MieConfig.for_sphere(1.0, 8.0, extra_terms=5).truncation == 43


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_extra_terms_do_not_change_field(bc: str) -> None:
    """Ten more orders change the field only at round-off"""
    x = (0.3, -0.4, 2.0)
    base = mie_field(MieConfig.for_sphere(1.0, 6.0), UP, x, bc)
    more = mie_field(MieConfig.for_sphere(1.0, 6.0, extra_terms=10), UP, x, bc)
    assert abs(base - more) < 1e-12


@pytest.mark.parametrize("k", [1.0, 5.0])
def test_dirichlet_field_vanishes_on_surface(k: float) -> None:
    """The total sound-soft field is zero just outside the sphere"""
    cfg = MieConfig.for_sphere(1.0, k)
    for x in [(0.0, 0.0, -1.000001), (1.000001, 0.0, 0.0), (0.0, 0.6, 0.8000008)]:
        assert abs(mie_field(cfg, UP, x, "dirichlet")) < 1e-4


@pytest.mark.parametrize("k", [1.0, 2.0])
def test_neumann_radial_derivative_vanishes(k: float) -> None:
    """The total sound-hard field has zero normal derivative on the sphere"""
    cfg = MieConfig.for_sphere(1.0, k)
    h = 1e-4
    for direction in [(0.0, 0.0, -1.0), (0.6, 0.0, 0.8), (0.0, 1.0, 0.0)]:
        u = [mie_field(cfg, UP, tuple((1.0 + m * h) * c for c in direction), "neumann") for m in range(3)]
        derivative = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
        assert abs(derivative) < 1e-6


def test_inside_point_is_refused() -> None:
    """The series is only evaluated outside the sphere"""
    with pytest.raises(ValueError):
        mie_scattered(MieConfig.for_sphere(1.0, 2.0), UP, (0.0, 0.0, 0.5), "dirichlet")


def test_tail_check() -> None:
    """An impossible tail tolerance reports non-convergence"""
    cfg = MieConfig.for_sphere(1.0, 2.0)
    with pytest.raises(ConvergenceError):
        mie_scattered(cfg, UP, (0.0, 0.0, -3.0), "dirichlet", config=SolverConfig(mie_tail_tol=1e-300))


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
@pytest.mark.parametrize("k", [0.5, 3.0, 20.0])
def test_optical_theorem(bc: str, k: float) -> None:
    """Extinction from the forward amplitude equals the scattering cross-section"""
    cfg = MieConfig.for_sphere(1.0, k)
    assert mie_extinction(cfg, bc) == pytest.approx(mie_cross_section(cfg, bc), rel=1e-10)
    assert mie_forward_amplitude(cfg, bc).imag < 0


def test_large_sphere_cross_section_tends_to_twice_area() -> None:
    """Extinction paradox: the cross-section of a large sphere approaches 2 pi R^2"""
    sigma = mie_cross_section(MieConfig.for_sphere(1.0, 60.0), "dirichlet")
    assert sigma == pytest.approx(2.0 * math.pi, rel=0.1)


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_geometrical_optics_close_at_high_frequency(bc: str) -> None:
    """In front of the sphere the GO field is within 0.1 of the series at k = 40"""
    k = 40.0
    scene = validate_scene([Obstacle.sphere(0, (0, 0, 0), 1.0)])
    x = (0.0, 0.0, -3.0)
    exact = mie_field(MieConfig.for_sphere(1.0, k), UP, x, bc)
    assert abs(goa_field(scene, IncidentWave(xi=UP, k=k), x, bc, 1).value - exact) < 0.1


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_reciprocity(bc: str) -> None:
    """Swapping source and observation directions (both reversed) leaves the scattered field unchanged"""
    cfg = MieConfig.for_sphere(1.0, 4.0)
    rng = np.random.default_rng(5)
    for _ in range(5):
        xi, d = (v / np.linalg.norm(v) for v in rng.normal(size=(2, 3)))
        r = 2.5
        forward = mie_scattered(cfg, xi, r * d, bc)
        swapped = mie_scattered(cfg, -d, -r * xi, bc)
        assert forward == pytest.approx(swapped, rel=1e-10)


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_far_field_matches_series_at_large_distance(bc: str) -> None:
    """r exp(ikr) u_s(r d) tends to the far-field amplitude"""
    cfg = MieConfig.for_sphere(1.0, 3.0)
    r = 1e4
    for cos_angle in (1.0, 0.3, -0.8):
        d = np.array([math.sqrt(1.0 - cos_angle**2), 0.0, cos_angle])
        u = mie_scattered(cfg, UP, r * d, bc)
        f = mie_far_field(cfg, bc, cos_angle)
        assert r * cmath.exp(1j * cfg.k * r) * u == pytest.approx(f, rel=1e-2)
