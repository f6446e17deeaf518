"""
Tests for the shift and reflection maps and frame rotations
"""

import math

import numpy as np
import pytest

from scatter_kirchhoff.exceptions import SingularError, TangencyError
from scatter_kirchhoff.geometry import SurfacePoint
from scatter_kirchhoff.matrix_maps import frame_rotation, reflect_map, shift_map, tangential_block

UNIT_SPHERE_B = np.diag([1.0, 1.0, 0.0])
UP = np.array([0.0, 0.0, 1.0])


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _psd(rng: np.random.Generator, null: np.ndarray | None = None) -> np.ndarray:
    """Random positive semidefinite matrix, optionally with a given null vector"""
    if null is None:
        q = _random_rotation(rng)
        vals = rng.uniform(0, 3, 3)
    else:
        q = _frame_with_normal(rng, null)
        vals = np.array([rng.uniform(0, 3), rng.uniform(0, 3), 0.0])
    return q @ np.diag(vals) @ q.T


def _frame_with_normal(rng: np.random.Generator, n: np.ndarray) -> np.ndarray:
    t = rng.normal(size=3)
    t -= np.dot(t, n) * n
    t /= np.linalg.norm(t)
    return np.column_stack([t, np.cross(n, t), n])


def _surface_point(frame: np.ndarray, k1: float = 1.0, k2: float = 0.5) -> SurfacePoint:
    return SurfacePoint(0, np.zeros(3), frame[:, 2], k1, k2, frame[:, 0], frame[:, 1])


def test_shift_map_zero_and_diagonal() -> None:
    """Zero is fixed; diagonal entries follow a / (1 + s a)"""
    np.testing.assert_allclose(shift_map(np.zeros((3, 3)), 2.5), np.zeros((3, 3)))
    out = shift_map(np.diag([2.0, 0.5, 0.0]), 3.0)
    np.testing.assert_allclose(out, np.diag([2.0 / 7.0, 0.5 / 2.5, 0.0]), atol=1e-15)


def test_shift_map_semigroup() -> None:
    """Shifting by s then t equals shifting by s + t"""
    rng = np.random.default_rng(1)
    for _ in range(200):
        a = _psd(rng)
        s, t = rng.uniform(0.01, 10.0, 2)
        np.testing.assert_allclose(shift_map(shift_map(a, s), t), shift_map(a, s + t), atol=1e-10)


def test_shift_map_determinant_identity() -> None:
    """det(I + l S_s(A)) det(I + s A) = det(I + (s + l) A)"""
    rng = np.random.default_rng(2)
    eye = np.eye(3)
    for _ in range(1000):
        a = _psd(rng)
        lam, s = rng.uniform(0.0, 10.0, 2)
        lhs = np.linalg.det(eye + lam * shift_map(a, s)) * np.linalg.det(eye + s * a)
        rhs = np.linalg.det(eye + (s + lam) * a)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_shift_map_symmetric_output() -> None:
    """Symmetric input gives exactly symmetric output"""
    rng = np.random.default_rng(3)
    out = shift_map(_psd(rng), 1.7)
    np.testing.assert_array_equal(out, out.T)


def test_shift_map_singular() -> None:
    """I + sA with a zero eigenvalue is refused"""
    with pytest.raises(SingularError):
        shift_map(np.diag([-1.0, 0.0, 0.0]), 1.0)


def test_reflect_map_backscatter() -> None:
    """Normal incidence on the unit sphere doubles the shape operator"""
    out = reflect_map(np.zeros((3, 3)), UNIT_SPHERE_B, UP, -UP)
    np.testing.assert_allclose(out, np.diag([2.0, 2.0, 0.0]), atol=1e-15)


def test_reflect_map_oblique_tangential_block() -> None:
    """At 60 degree incidence the tangential block of T(0) is the identity"""
    zeta = np.array([math.sqrt(3.0) / 2.0, 0.0, -0.5])
    out = reflect_map(np.zeros((3, 3)), UNIT_SPHERE_B, UP, zeta)
    np.testing.assert_allclose(out[:2, :2], np.eye(2), atol=1e-14)
    np.testing.assert_allclose(out, out.T, atol=1e-15)


def test_reflect_map_tangent_direction() -> None:
    """A tangent incoming direction is refused"""
    with pytest.raises(TangencyError):
        reflect_map(np.zeros((3, 3)), UNIT_SPHERE_B, UP, np.array([1.0, 0.0, 0.0]))


def test_reflect_map_null_direction_and_symmetry() -> None:
    """If A zeta = 0 then T(A) annihilates the reflected direction"""
    rng = np.random.default_rng(4)
    for _ in range(200):
        eta = _random_rotation(rng)[:, 2]
        zeta = rng.normal(size=3)
        zeta /= np.linalg.norm(zeta)
        if np.dot(zeta, eta) > 0:
            zeta = -zeta
        if abs(np.dot(zeta, eta)) < 0.05:
            continue
        frame = _frame_with_normal(rng, eta)
        b = _surface_point(frame, *sorted(rng.uniform(0.1, 2.0, 2), reverse=True)).shape_operator
        a = _psd(rng, null=zeta)
        out = reflect_map(a, b, eta, zeta)
        reflected = zeta - 2.0 * np.dot(zeta, eta) * eta
        np.testing.assert_allclose(out @ reflected, 0.0, atol=1e-10 * (1.0 + np.abs(out).max()))
        np.testing.assert_allclose(out, out.T, atol=1e-12)


def test_shift_then_reflect_stays_positive() -> None:
    """Propagating a diverging front onto a convex surface keeps it positive"""
    rng = np.random.default_rng(5)
    for _ in range(1000):
        zeta = rng.normal(size=3)
        zeta /= np.linalg.norm(zeta)
        a = shift_map(_psd(rng, null=zeta), rng.uniform(0.1, 5.0))
        eta = rng.normal(size=3)
        eta /= np.linalg.norm(eta)
        if np.dot(zeta, eta) > -0.05:
            eta = eta - (np.dot(zeta, eta) + 0.5) * zeta
            eta /= np.linalg.norm(eta)
        frame = _frame_with_normal(rng, eta)
        b = _surface_point(frame, *sorted(rng.uniform(0.1, 2.0, 2), reverse=True)).shape_operator
        out = reflect_map(a, b, eta, zeta)
        assert np.linalg.eigvalsh(out).min() >= -1e-10 * (1.0 + np.abs(out).max())


def test_frame_rotation_identity_and_quarter_turn() -> None:
    """Same frame gives I; a quarter turn about n permutes the tangents"""
    frame = np.eye(3)
    sp = _surface_point(frame)
    np.testing.assert_allclose(frame_rotation(sp, sp), np.eye(3), atol=1e-15)
    turned = _surface_point(np.column_stack([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
    expected = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(frame_rotation(sp, turned), expected, atol=1e-15)


def test_frame_rotation_orthogonal() -> None:
    """Rotations between random frames are orthogonal"""
    rng = np.random.default_rng(6)
    for _ in range(100):
        r = frame_rotation(_surface_point(_random_rotation(rng)), _surface_point(_random_rotation(rng)))
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(r)) == pytest.approx(1.0, abs=1e-12)


def test_tangential_block_of_shape_operator() -> None:
    """The shape operator restricts to diag(k1, k2) in its own frame"""
    rng = np.random.default_rng(7)
    sp = _surface_point(_random_rotation(rng), 1.5, 0.25)
    np.testing.assert_allclose(tangential_block(sp.shape_operator, sp), np.diag([1.5, 0.25]), atol=1e-14)
