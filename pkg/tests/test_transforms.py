"""Rotation and rigid-transform machinery, checked against independent
constructions (explicit matrices, matrix exponentials, direct products)."""

import numpy as np
import pytest
from scipy.linalg import expm

from markercal.transforms import (
    RigidTransform,
    fixed_xyz_angles,
    fixed_xyz_matrix,
    matrix_to_rotation_vector,
    orthonormalize,
    rotation_vector_to_matrix,
    rotation_x,
    rotation_y,
    rotation_z,
    skew,
)


def random_rotation(rng):
    return rotation_vector_to_matrix(rng.uniform(-np.pi, np.pi, 3) * rng.uniform(0, 1))


def test_skew_reproduces_cross_product(rng):
    for _ in range(20):
        a, b = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(skew(a) @ b, np.cross(a, b), atol=1e-15)


def test_axis_rotations_match_explicit_matrices():
    angle = 0.7
    c, s = np.cos(angle), np.sin(angle)
    assert np.allclose(rotation_x(angle), [[1, 0, 0], [0, c, -s], [0, s, c]])
    assert np.allclose(rotation_y(angle), [[c, 0, s], [0, 1, 0], [-s, 0, c]])
    assert np.allclose(rotation_z(angle), [[c, -s, 0], [s, c, 0], [0, 0, 1]])


def test_axis_rotations_quarter_turn_permutes_axes():
    assert np.allclose(rotation_z(np.pi / 2) @ [1, 0, 0], [0, 1, 0], atol=1e-15)
    assert np.allclose(rotation_x(np.pi / 2) @ [0, 1, 0], [0, 0, 1], atol=1e-15)
    assert np.allclose(rotation_y(np.pi / 2) @ [0, 0, 1], [1, 0, 0], atol=1e-15)


def test_rotation_vector_matches_matrix_exponential(rng):
    for _ in range(50):
        r = rng.normal(size=3) * rng.uniform(0, np.pi)
        assert np.allclose(rotation_vector_to_matrix(r), expm(skew(r)), atol=1e-12)


def test_rotation_vector_round_trip(rng):
    for scale in (1e-12, 1e-6, 0.3, 2.0, np.pi - 1e-4):
        for _ in range(10):
            direction = rng.normal(size=3)
            r = direction / np.linalg.norm(direction) * scale
            rot = rotation_vector_to_matrix(r)
            assert np.allclose(matrix_to_rotation_vector(rot), r, atol=1e-9)


def test_rotation_vector_identity_and_half_turn():
    assert np.allclose(matrix_to_rotation_vector(np.eye(3)), 0.0)
    rot = rotation_x(np.pi)
    r = matrix_to_rotation_vector(rot)
    assert np.isclose(np.linalg.norm(r), np.pi, atol=1e-12)
    assert np.allclose(rotation_vector_to_matrix(r), rot, atol=1e-9)


def test_fixed_xyz_convention_is_z_after_y_after_x():
    angles = np.array([0.2, -0.4, 1.1])
    expected = rotation_z(angles[2]) @ rotation_y(angles[1]) @ rotation_x(angles[0])
    assert np.allclose(fixed_xyz_matrix(angles), expected, atol=1e-15)


def test_fixed_xyz_round_trip(rng):
    for _ in range(50):
        angles = rng.uniform([-np.pi, -np.pi / 2 + 0.05, -np.pi], [np.pi, np.pi / 2 - 0.05, np.pi])
        recovered = fixed_xyz_angles(fixed_xyz_matrix(angles))
        assert np.allclose(recovered, angles, atol=1e-10)


def test_orthonormalize_returns_nearest_rotation(rng):
    for _ in range(20):
        rot = random_rotation(rng)
        noisy = rot + rng.normal(scale=1e-4, size=(3, 3))
        fixed = orthonormalize(noisy)
        assert np.allclose(fixed @ fixed.T, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(fixed), 1.0, atol=1e-12)
        assert np.max(np.abs(fixed - rot)) < 1e-3


def test_rigid_transform_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 1.01, np.zeros(3))


def test_rigid_transform_apply_matches_direct_formula(rng):
    for _ in range(20):
        t = RigidTransform(random_rotation(rng), rng.normal(size=3))
        points = rng.normal(size=(5, 3))
        assert np.allclose(t.apply(points), points @ t.rotation.T + t.translation, atol=1e-12)
        single = rng.normal(size=3)
        assert np.allclose(t.apply(single), t.rotation @ single + t.translation, atol=1e-12)


def test_rigid_transform_compose_and_inverse(rng):
    for _ in range(20):
        a = RigidTransform(random_rotation(rng), rng.normal(size=3))
        b = RigidTransform(random_rotation(rng), rng.normal(size=3))
        p = rng.normal(size=3)
        assert np.allclose((a @ b).apply(p), a.apply(b.apply(p)), atol=1e-10)
        ident = a @ a.inverse()
        assert ident.almost_equal(RigidTransform.identity(), atol=1e-12)


def test_small_rotation_construction_is_first_order_accurate(rng):
    for scale in (1e-7, 1e-5):
        for _ in range(10):
            r = rng.normal(size=3)
            r *= scale / np.linalg.norm(r)
            approx = RigidTransform.from_small_rotation(r)
            exact = RigidTransform.from_rotation_vector(r)
            error = np.max(np.abs(approx.rotation - exact.rotation))
            # linearization drops the second-order Rodrigues terms
            assert error < scale**2 + 1e-15
