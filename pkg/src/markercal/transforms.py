"""Rigid transforms, elementary rotations and small-rotation helpers.

Conventions used throughout the package:

* rotations are 3x3 orthonormal matrices with det = +1,
* translations are 3-vectors in millimeters,
* angles are radians (degrees appear only at file / report boundaries),
* fixed-axis x-y-z angles (phi_x, phi_y, phi_z) satisfy
  ``R = Rz(phi_z) @ Ry(phi_y) @ Rx(phi_x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHONORMALITY_ATOL = 1e-9


def skew(r):
    """Skew-symmetric matrix [~r] with skew(r) @ v == cross(r, v)."""
    rx, ry, rz = np.asarray(r, dtype=float)
    return np.array(
        [
            [0.0, -rz, ry],
            [rz, 0.0, -rx],
            [-ry, rx, 0.0],
        ]
    )


def rotation_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def orthonormalize(matrix):
    """Nearest rotation matrix (polar factor) of an almost-rotation matrix."""
    u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=float))
    rot = u @ vt
    if np.linalg.det(rot) < 0.0:
        rot = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return rot


def rotation_vector_to_matrix(r):
    """Rodrigues formula: rotation by ``norm(r)`` about ``r / norm(r)``."""
    r = np.asarray(r, dtype=float)
    angle = np.linalg.norm(r)
    if angle < 1e-12:
        # second-order series keeps the map smooth through zero
        k = skew(r)
        return np.eye(3) + k + 0.5 * (k @ k)
    axis = r / angle
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def matrix_to_rotation_vector(rot):
    """Inverse of :func:`rotation_vector_to_matrix` (angle in [0, pi])."""
    rot = np.asarray(rot, dtype=float)
    cos_angle = np.clip(0.5 * (np.trace(rot) - 1.0), -1.0, 1.0)
    angle = np.arccos(cos_angle)
    axial = 0.5 * np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
    )
    if angle < 1e-7:
        return axial
    if np.pi - angle < 1e-6:
        # near pi the axial part degenerates; recover the axis from R + I
        sym = 0.5 * (rot + np.eye(3))
        axis = np.sqrt(np.clip(np.diag(sym), 0.0, None))
        major = int(np.argmax(axis))
        if axis[major] > 0.0:
            for k in range(3):
                if k != major:
                    axis[k] = sym[major, k] / axis[major]
        axis /= np.linalg.norm(axis)
        if np.dot(axis, axial) < 0.0:
            axis = -axis
        return angle * axis
    return angle / np.sin(angle) * axial


def fixed_xyz_angles(rot):
    """Fixed-axis x-y-z angles of a rotation: R = Rz(c) @ Ry(b) @ Rx(a).

    Returns (phi_x, phi_y, phi_z).  At the representation singularity
    (|cos phi_y| ~ 0) phi_x is set to zero and the remaining freedom is
    absorbed into phi_z.
    """
    rot = np.asarray(rot, dtype=float)
    sy = -rot[2, 0]
    cy = np.hypot(rot[0, 0], rot[1, 0])
    phi_y = np.arctan2(sy, cy)
    if cy < 1e-9:
        phi_x = 0.0
        phi_z = np.arctan2(-rot[0, 1], rot[1, 1])
    else:
        phi_x = np.arctan2(rot[2, 1], rot[2, 2])
        phi_z = np.arctan2(rot[1, 0], rot[0, 0])
    return np.array([phi_x, phi_y, phi_z])


def fixed_xyz_matrix(angles):
    phi_x, phi_y, phi_z = np.asarray(angles, dtype=float)
    return rotation_z(phi_z) @ rotation_y(phi_y) @ rotation_x(phi_x)


@dataclass(frozen=True)
class RigidTransform:
    """Rigid placement: ``apply(x) = rotation @ x + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float)
        trans = np.array(self.translation, dtype=float)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if trans.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got {trans.shape}")
        defect = np.max(np.abs(rot.T @ rot - np.eye(3)))
        if defect > ORTHONORMALITY_ATOL or abs(np.linalg.det(rot) - 1.0) > ORTHONORMALITY_ATOL:
            raise ValueError(
                "rotation is not orthonormal with det +1 "
                f"(defect {defect:.2e}); use orthonormalize() first"
            )
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_rotation_vector(cls, r, translation=(0.0, 0.0, 0.0)):
        return cls(rotation_vector_to_matrix(r), np.asarray(translation, dtype=float))

    @classmethod
    def from_small_rotation(cls, r, translation=(0.0, 0.0, 0.0)):
        """Build from the first-order form I + [~r], re-orthonormalized."""
        return cls(orthonormalize(np.eye(3) + skew(r)), np.asarray(translation, dtype=float))

    def rotation_vector(self):
        return matrix_to_rotation_vector(self.rotation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self then applied after other: (self @ other)(x) = self(other(x))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rot_t = self.rotation.T
        return RigidTransform(rot_t, -rot_t @ self.translation)

    def apply(self, points):
        """Transform a 3-vector or an (n, 3) array of points."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def almost_equal(self, other: "RigidTransform", atol=1e-9):
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )
