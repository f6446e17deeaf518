"""
Tests for the iterated Kirchhoff layers and fields
"""

import numpy as np
import pytest

from scatter_kirchhoff.config import SolverConfig
from scatter_kirchhoff.exceptions import NearBoundaryError
from scatter_kirchhoff.geometry import Obstacle, validate_scene
from scatter_kirchhoff.kirchhoff import (
    KernelLayer,
    build_grids,
    dirichlet_weight,
    field_update,
    first_layer,
    neumann_weight,
    next_layer,
    product_surface_increment,
    total_field,
)
from scatter_kirchhoff.mie import MieConfig, mie_field
from scatter_kirchhoff.ray_optics import IncidentWave, goa_field

UP = (0.0, 0.0, 1.0)


@pytest.fixture
def sphere_scene():
    return validate_scene([Obstacle.sphere(0, (0, 0, 0), 1.0)])


@pytest.fixture
def two_spheres():
    return validate_scene([Obstacle.sphere(0, (0, 0, 0), 1.0), Obstacle.sphere(1, (4, 0, 0), 1.0)])


def test_first_layer_dirichlet_and_neumann(sphere_scene) -> None:
    """p_1 is 2ik<xi,n> e^{-ik<xi,sigma>} (D) or 2ik e^{-ik<xi,sigma>} (N) on the lit side"""
    wave = IncidentWave(xi=UP, k=3.0)
    grids = build_grids(sphere_scene, wave.k, 4.0)
    grid = grids[0]
    c = grid.normals @ wave.direction
    phase = np.exp(-1j * wave.k * (grid.points @ wave.direction))
    lit = c < 0

    dirichlet = first_layer(sphere_scene, wave, grids, "dirichlet").values[0]
    neumann = first_layer(sphere_scene, wave, grids, "neumann").values[0]
    np.testing.assert_allclose(dirichlet[lit], 2j * wave.k * c[lit] * phase[lit], rtol=1e-14)
    np.testing.assert_allclose(neumann[lit], 2j * wave.k * phase[lit], rtol=1e-14)
    assert not np.any(dirichlet[~lit]) and not np.any(neumann[~lit])


def test_first_layer_needs_one_grid_per_obstacle(two_spheres) -> None:
    """Grids and obstacles must match"""
    wave = IncidentWave(xi=UP, k=2.0)
    grids = build_grids(two_spheres, wave.k, 3.0)
    with pytest.raises(ValueError):
        first_layer(two_spheres, wave, grids[:1], "dirichlet")
    with pytest.raises(ValueError):
        first_layer(two_spheres, wave, grids, "robin")


def test_single_obstacle_stops_after_first_increment(sphere_scene) -> None:
    """With one obstacle every later layer vanishes and u_n = u_1"""
    wave = IncidentWave(xi=UP, k=4.0)
    for bc in ("dirichlet", "neumann"):
        sample = total_field(sphere_scene, wave, [(0.0, 0.0, -3.0)], bc, 3, 4.0)[0]
        assert len(sample.increments) == 4
        assert sample.increments[2] == 0 and sample.increments[3] == 0
        assert sample.total == sample.partial(1)
        assert sample.increments[1] != 0


def test_total_field_rejects_near_targets(sphere_scene) -> None:
    """Targets inside or within a wavelength of the surface are refused"""
    wave = IncidentWave(xi=UP, k=10.0)
    with pytest.raises(NearBoundaryError):
        total_field(sphere_scene, wave, [(0.0, 0.0, -1.1)], "dirichlet", 1, 4.0)
    with pytest.raises(NearBoundaryError):
        total_field(sphere_scene, wave, [(0.0, 0.0, 0.0)], "dirichlet", 1, 4.0)
    relaxed = SolverConfig(near_boundary_wavelengths=0.0)
    assert total_field(sphere_scene, wave, [(0.0, 0.0, -1.1)], "dirichlet", 1, 4.0, config=relaxed)


def test_total_field_rejects_bad_iteration_count(sphere_scene) -> None:
    """At least one iteration is needed"""
    wave = IncidentWave(xi=UP, k=2.0)
    with pytest.raises(ValueError):
        total_field(sphere_scene, wave, [(0.0, 0.0, -3.0)], "dirichlet", 0, 4.0)


def test_threads_do_not_change_results(two_spheres) -> None:
    """Layer sums are identical for one and several threads"""
    wave = IncidentWave(xi=UP, k=3.0)
    cfg = SolverConfig(chunk_rows=16)
    targets = [(2.0, 0.0, -3.0), (1.0, 1.0, -4.0)]
    serial = total_field(two_spheres, wave, targets, "neumann", 3, 4.0, threads=1, config=cfg)
    threaded = total_field(two_spheres, wave, targets, "neumann", 3, 4.0, threads=4, config=cfg)
    for a, b in zip(serial, threaded):
        assert a.increments == b.increments


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_layers_match_product_surface_quadrature(two_spheres, bc: str) -> None:
    """Nested layer sums equal the direct sum over node chains"""
    wave = IncidentWave.from_direction((0.2, 0.1, 1.0), 2.0)
    grids = build_grids(two_spheres, wave.k, 3.0)
    targets = np.array([[2.0, 0.0, -3.0], [-1.0, 2.0, -4.0]])
    layer = first_layer(two_spheres, wave, grids, bc)
    direct_1 = product_surface_increment(two_spheres, wave, grids, bc, 1, targets)
    np.testing.assert_allclose(field_update(layer, targets), direct_1, rtol=1e-10, atol=1e-14)

    layer = next_layer(layer)
    direct_2 = product_surface_increment(two_spheres, wave, grids, bc, 2, targets)
    np.testing.assert_allclose(field_update(layer, targets), direct_2, rtol=1e-10, atol=1e-14)
    assert np.all(np.abs(direct_2) > 0)

    with pytest.raises(ValueError):
        product_surface_increment(two_spheres, wave, grids, bc, 3, targets)


def test_product_surface_chunking_is_exact(two_spheres) -> None:
    """Splitting node pairs into row chunks does not change the level-2 sum"""
    wave = IncidentWave.from_direction((0.2, 0.1, 1.0), 2.0)
    grids = build_grids(two_spheres, wave.k, 3.0)
    targets = np.array([[2.0, 0.0, -3.0]])
    whole = product_surface_increment(two_spheres, wave, grids, "neumann", 2, targets,
                                      config=SolverConfig(chunk_rows=100_000))
    chunked = product_surface_increment(two_spheres, wave, grids, "neumann", 2, targets,
                                        config=SolverConfig(chunk_rows=7))
    np.testing.assert_allclose(chunked, whole, rtol=1e-14)


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_layers_are_linear(two_spheres, bc: str) -> None:
    """next_layer and field_update map superpositions of densities to superpositions"""
    wave = IncidentWave(xi=UP, k=2.0)
    grids = build_grids(two_spheres, wave.k, 3.0)
    lit = first_layer(two_spheres, wave, grids, bc)
    rng = np.random.default_rng(3)
    noise = tuple(rng.normal(size=len(g)) + 1j * rng.normal(size=len(g)) for g in grids)
    alpha, beta = 0.7 - 0.2j, -1.3 + 0.5j

    def layer(values: tuple) -> KernelLayer:
        return KernelLayer(level=1, bc=bc, wave=wave, grids=lit.grids, values=values)

    other = layer(noise)
    mixed = layer(tuple(alpha * a + beta * b for a, b in zip(lit.values, noise)))
    targets = np.array([[2.0, 0.0, -3.0], [-1.0, 2.0, -4.0]])

    expected = alpha * field_update(lit, targets) + beta * field_update(other, targets)
    got = field_update(mixed, targets)
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12 * np.max(np.abs(expected)))

    nxt_lit, nxt_other, nxt_mixed = next_layer(lit), next_layer(other), next_layer(mixed)
    for a, b, m in zip(nxt_lit.values, nxt_other.values, nxt_mixed.values):
        expected = alpha * a + beta * b
        np.testing.assert_allclose(m, expected, rtol=1e-12, atol=1e-12 * np.max(np.abs(expected)))


def test_field_update_converged_in_ppw(sphere_scene) -> None:
    """The backscattered first increment changes by less than 1e-3 from ppw 10 to 15"""
    wave = IncidentWave(xi=UP, k=20.0)
    x = np.array([[0.0, 0.0, -3.0]])
    values = []
    for ppw in (10.0, 15.0):
        grids = build_grids(sphere_scene, wave.k, ppw)
        values.append(field_update(first_layer(sphere_scene, wave, grids, "dirichlet"), x)[0])
    assert abs(values[1] - values[0]) < 1e-3 * abs(values[1])


def test_kernel_weights() -> None:
    """Weights are products of lit brackets and vanish on any dark node"""
    xi = np.array(UP)
    points = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, -2.5]])
    normals = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]])
    assert dirichlet_weight(xi, points, normals) == pytest.approx(4.0)
    assert neumann_weight(xi, points, normals) == pytest.approx(4.0)
    assert dirichlet_weight(xi, points[:1], normals[:1]) == pytest.approx(-2.0)
    assert neumann_weight(xi, points[:1], normals[:1]) == pytest.approx(2.0)

    dark_first = normals.copy()
    dark_first[0] = [0.0, 0.0, 1.0]
    assert dirichlet_weight(xi, points, dark_first) == 0.0
    assert neumann_weight(xi, points, dark_first) == 0.0

    dark_second = normals.copy()
    dark_second[1] = [0.0, 0.0, -1.0]
    assert dirichlet_weight(xi, points, dark_second) == 0.0
    assert neumann_weight(xi, points, dark_second) == 0.0

    batch = np.stack([normals, dark_first, dark_second])
    np.testing.assert_allclose(dirichlet_weight(xi, np.stack([points] * 3), batch), [4.0, 0.0, 0.0])


def _ratios(errors: list[float]) -> list[float]:
    return [b / a for a, b in zip(errors[:-1], errors[1:])]


@pytest.mark.slow
@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_backscatter_error_halves_with_k(sphere_scene, bc: str) -> None:
    """|u_1 - GOA| in front of the sphere decays like 1/k"""
    x = (0.0, 0.0, -3.0)
    errors = []
    for k in (10.0, 20.0, 40.0):
        wave = IncidentWave(xi=UP, k=k)
        u = total_field(sphere_scene, wave, [x], bc, 1, 10.0)[0].total
        errors.append(abs(u - goa_field(sphere_scene, wave, x, bc, 1).value))
    for ratio in _ratios(errors):
        assert 0.3 <= ratio <= 0.7


@pytest.mark.slow
def test_kirchhoff_close_to_exact_sphere_solution(sphere_scene) -> None:
    """u_1 is within 0.1 of the series solution at k = 40"""
    k = 40.0
    wave = IncidentWave(xi=UP, k=k)
    x = (0.0, 0.0, -3.0)
    exact = mie_field(MieConfig.for_sphere(1.0, k), UP, x, "dirichlet")
    u = total_field(sphere_scene, wave, [x], "dirichlet", 1, 10.0)[0].total
    assert abs(u - exact) < 0.1


@pytest.mark.slow
@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_two_sphere_error_decays(two_spheres, bc: str) -> None:
    """|u_2 - GOA| between two spheres roughly halves as k doubles"""
    x = (2.0, 0.0, -3.0)
    errors = []
    for k in (5.0, 10.0, 20.0):
        wave = IncidentWave(xi=UP, k=k)
        u = total_field(two_spheres, wave, [x], bc, 2, 10.0, threads=4)[0].total
        errors.append(abs(u - goa_field(two_spheres, wave, x, bc, 2).value))
    for ratio in _ratios(errors):
        assert 0.25 <= ratio <= 0.75


@pytest.mark.slow
def test_relative_error_to_exact_solution_shrinks(sphere_scene) -> None:
    """The relative error of u_1 against the series solution is smaller at k = 40 than at k = 20"""
    x = (0.0, 0.0, -3.0)
    rel = []
    for k in (20.0, 40.0):
        exact = mie_field(MieConfig.for_sphere(1.0, k), UP, x, "dirichlet")
        u = total_field(sphere_scene, IncidentWave(xi=UP, k=k), [x], "dirichlet", 1, 10.0)[0].total
        rel.append(abs(u - exact) / abs(exact))
    assert rel[1] < rel[0] < 0.1


@pytest.mark.slow
@pytest.mark.parametrize("x", [(0.0, 0.0, 3.0), (0.3, 0.0, 3.0)])
def test_shadow_cancellation_improves_with_k(sphere_scene, x: tuple) -> None:
    """Behind the sphere the first increment cancels more of the incident wave as k grows"""
    residual = []
    for k in (20.0, 40.0):
        sample = total_field(sphere_scene, IncidentWave(xi=UP, k=k), [x], "dirichlet", 1, 10.0)[0]
        residual.append(abs(sample.total))
    assert residual[1] < residual[0] < 1.0
