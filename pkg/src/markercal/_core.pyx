# cython: language_level=3
"""Compiled chain-evaluation kernel.

Same call signatures and semantics as the NumPy fallback ``_core_py``.
A chain is a flat table of elementary operations (rotation about or
translation along a local axis), each driven by an accumulated value

    value = const + joint_sign * q[joint] + param_sign * params[param] + theta[deflect]

where negative indices mean "no contribution".  Kind codes: 0/1/2 rotate
about x/y/z, 3/4/5 translate along x/y/z.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


cdef inline void _accumulate_values(
    const int[::1] kind,
    const int[::1] joint,
    const double[::1] joint_sign,
    const int[::1] param,
    const double[::1] param_sign,
    const int[::1] deflect,
    const double[::1] const_term,
    const double[::1] q,
    const double[::1] params,
    const double[::1] theta,
    double[::1] values,
) noexcept nogil:
    cdef Py_ssize_t k
    cdef double value
    for k in range(kind.shape[0]):
        value = const_term[k]
        if joint[k] >= 0:
            value += joint_sign[k] * q[joint[k]]
        if param[k] >= 0:
            value += param_sign[k] * params[param[k]]
        if deflect[k] >= 0:
            value += theta[deflect[k]]
        values[k] = value


cdef inline void _apply_rotation(double[3][3] rot, int axis, double angle) noexcept nogil:
    """rot <- rot @ R_axis(angle), in place."""
    cdef double c = cos(angle)
    cdef double s = sin(angle)
    cdef double a, b
    cdef Py_ssize_t r
    cdef int c1, c2
    # R_axis mixes the two columns other than `axis`
    if axis == 0:
        c1, c2 = 1, 2
    elif axis == 1:
        c1, c2 = 2, 0
    else:
        c1, c2 = 0, 1
    for r in range(3):
        a = rot[r][c1]
        b = rot[r][c2]
        rot[r][c1] = a * c + b * s
        rot[r][c2] = -a * s + b * c


@cython.boundscheck(False)
@cython.wraparound(False)
def chain_points(
    const int[::1] kind,
    const int[::1] joint,
    const double[::1] joint_sign,
    const int[::1] param,
    const double[::1] param_sign,
    const int[::1] deflect,
    const double[::1] const_term,
    const double[::1] q,
    const double[::1] params,
    const double[::1] theta,
    const double[:, ::1] points,
):
    """Evaluate the chain and locate ``points`` (given in the end frame).

    Returns ``(rotation, origin, world)`` where ``rotation``/``origin``
    form the end-frame transform and ``world[i] = rotation @ points[i] +
    origin``.
    """
    cdef Py_ssize_t n_ops = kind.shape[0]
    cdef Py_ssize_t n_points = points.shape[0]
    values_arr = np.empty(n_ops, dtype=np.float64)
    rot_arr = np.empty((3, 3), dtype=np.float64)
    origin_arr = np.empty(3, dtype=np.float64)
    world_arr = np.empty((n_points, 3), dtype=np.float64)
    cdef double[::1] values = values_arr
    cdef double[:, ::1] rot_out = rot_arr
    cdef double[::1] origin_out = origin_arr
    cdef double[:, ::1] world = world_arr

    cdef double[3][3] rot
    cdef double[3] origin
    cdef Py_ssize_t k, i, r
    cdef int code, axis
    cdef double value

    with nogil:
        _accumulate_values(
            kind, joint, joint_sign, param, param_sign, deflect,
            const_term, q, params, theta, values,
        )
        for r in range(3):
            origin[r] = 0.0
            for i in range(3):
                rot[r][i] = 1.0 if r == i else 0.0
        for k in range(n_ops):
            code = kind[k]
            value = values[k]
            if code < 3:
                _apply_rotation(rot, code, value)
            else:
                axis = code - 3
                for r in range(3):
                    origin[r] += value * rot[r][axis]
        for i in range(n_points):
            for r in range(3):
                world[i, r] = (
                    rot[r][0] * points[i, 0]
                    + rot[r][1] * points[i, 1]
                    + rot[r][2] * points[i, 2]
                    + origin[r]
                )
        for r in range(3):
            origin_out[r] = origin[r]
            for i in range(3):
                rot_out[r, i] = rot[r][i]
    return rot_arr, origin_arr, world_arr


@cython.boundscheck(False)
@cython.wraparound(False)
def chain_jacobian(
    const int[::1] kind,
    const int[::1] joint,
    const double[::1] joint_sign,
    const int[::1] param,
    const double[::1] param_sign,
    const int[::1] deflect,
    const double[::1] const_term,
    const double[::1] q,
    const double[::1] params,
    const double[::1] theta,
    const double[:, ::1] points,
):
    """Chain evaluation plus derivatives with respect to every op value.

    Returns ``(rotation, origin, world, jac_point, jac_rot)``:

    * ``jac_point[i, :, k]`` is d(world point i) / d(value of op k),
    * ``jac_rot[:, k]`` is the world-frame rotation axis of op k (zero
      for translations), i.e. the angular-velocity column.
    """
    cdef Py_ssize_t n_ops = kind.shape[0]
    cdef Py_ssize_t n_points = points.shape[0]
    values_arr = np.empty(n_ops, dtype=np.float64)
    rot_arr = np.empty((3, 3), dtype=np.float64)
    origin_arr = np.empty(3, dtype=np.float64)
    world_arr = np.empty((n_points, 3), dtype=np.float64)
    axes_arr = np.empty((n_ops, 3), dtype=np.float64)
    origins_arr = np.empty((n_ops, 3), dtype=np.float64)
    jac_point_arr = np.empty((n_points, 3, n_ops), dtype=np.float64)
    jac_rot_arr = np.empty((3, n_ops), dtype=np.float64)
    cdef double[::1] values = values_arr
    cdef double[:, ::1] rot_out = rot_arr
    cdef double[::1] origin_out = origin_arr
    cdef double[:, ::1] world = world_arr
    cdef double[:, ::1] axes_world = axes_arr
    cdef double[:, ::1] origins = origins_arr
    cdef double[:, :, ::1] jac_point = jac_point_arr
    cdef double[:, ::1] jac_rot = jac_rot_arr

    cdef double[3][3] rot
    cdef double[3] origin
    cdef Py_ssize_t k, i, r
    cdef int code, axis
    cdef double value, lx, ly, lz, ax, ay, az

    with nogil:
        _accumulate_values(
            kind, joint, joint_sign, param, param_sign, deflect,
            const_term, q, params, theta, values,
        )
        for r in range(3):
            origin[r] = 0.0
            for i in range(3):
                rot[r][i] = 1.0 if r == i else 0.0
        for k in range(n_ops):
            code = kind[k]
            value = values[k]
            axis = code if code < 3 else code - 3
            for r in range(3):
                axes_world[k, r] = rot[r][axis]
                origins[k, r] = origin[r]
            if code < 3:
                _apply_rotation(rot, code, value)
            else:
                for r in range(3):
                    origin[r] += value * rot[r][axis]
        for i in range(n_points):
            for r in range(3):
                world[i, r] = (
                    rot[r][0] * points[i, 0]
                    + rot[r][1] * points[i, 1]
                    + rot[r][2] * points[i, 2]
                    + origin[r]
                )
        for k in range(n_ops):
            code = kind[k]
            ax = axes_world[k, 0]
            ay = axes_world[k, 1]
            az = axes_world[k, 2]
            if code < 3:
                jac_rot[0, k] = ax
                jac_rot[1, k] = ay
                jac_rot[2, k] = az
                for i in range(n_points):
                    # axis x (world point - op origin)
                    lx = world[i, 0] - origins[k, 0]
                    ly = world[i, 1] - origins[k, 1]
                    lz = world[i, 2] - origins[k, 2]
                    jac_point[i, 0, k] = ay * lz - az * ly
                    jac_point[i, 1, k] = az * lx - ax * lz
                    jac_point[i, 2, k] = ax * ly - ay * lx
            else:
                jac_rot[0, k] = 0.0
                jac_rot[1, k] = 0.0
                jac_rot[2, k] = 0.0
                for i in range(n_points):
                    jac_point[i, 0, k] = ax
                    jac_point[i, 1, k] = ay
                    jac_point[i, 2, k] = az
        for r in range(3):
            origin_out[r] = origin[r]
            for i in range(3):
                rot_out[r, i] = rot[r][i]
    return rot_arr, origin_arr, world_arr, jac_point_arr, jac_rot_arr
