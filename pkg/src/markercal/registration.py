"""Rigid point-set registration and marker-based pose reconstruction."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .transforms import RigidTransform, fixed_xyz_angles


class RegistrationError(ValueError):
    """The point sets do not determine a unique rigid transform."""


def fit_rigid_points(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Least-squares rigid transform T with T(source) ~= target.

    Uses the SVD of the cross-covariance of the centered sets, with the
    determinant correction that keeps the result a proper rotation.
    """
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3:
        raise ValueError("source and target must be matching (n, 3) arrays")
    if source.shape[0] < 3:
        raise RegistrationError("need at least 3 points to fix orientation")
    centroid_s = source.mean(axis=0)
    centroid_t = target.mean(axis=0)
    cov = (target - centroid_t).T @ (source - centroid_s)
    u, svals, vt = np.linalg.svd(cov)
    scale = max(svals[0], 1.0)
    if svals[1] <= 1e-10 * scale:
        raise RegistrationError("points are collinear; orientation is unobservable")
    sign = np.sign(np.linalg.det(u @ vt))
    if sign == 0:
        sign = 1.0
    d = np.diag([1.0, 1.0, sign])
    rotation = u @ d @ vt
    translation = centroid_t - rotation @ centroid_s
    return RigidTransform(rotation, translation)


class MarkerPose(NamedTuple):
    """Tool pose reconstructed from marker positions.

    ``angles`` are fixed-axis x-y-z angles (radians); ``rms`` is the
    root-mean-square registration residual over the markers (mm).
    """

    transform: RigidTransform
    position: np.ndarray
    angles: np.ndarray
    rms: float


def pose_from_markers(measured: np.ndarray, offsets: np.ndarray) -> MarkerPose:
    """Recover the tool pose from measured marker positions.

    ``offsets`` are the marker coordinates in the tool frame; ``measured``
    are the corresponding world coordinates.  The returned transform maps
    tool-frame points to world coordinates.
    """
    transform = fit_rigid_points(offsets, measured)
    residual = transform.apply(offsets) - np.asarray(measured, dtype=float)
    rms = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
    return MarkerPose(
        transform=transform,
        position=transform.translation.copy(),
        angles=np.array(fixed_xyz_angles(transform.rotation)),
        rms=rms,
    )
