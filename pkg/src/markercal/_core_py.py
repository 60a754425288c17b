"""NumPy fallback for the compiled chain-evaluation kernel.

Same call signatures and semantics as the Cython module ``_core``; used
when the extension is not built.  A chain is a flat table of elementary
operations (rotation about or translation along a local axis), each driven
by an accumulated value

    value = const + joint_sign * q[joint] + param_sign * params[param] + theta[deflect]

where negative indices mean "no contribution".  Kind codes: 0/1/2 rotate
about x/y/z, 3/4/5 translate along x/y/z.
"""

from __future__ import annotations

import numpy as np

_AXES = np.eye(3)


def _op_values(kind, joint, joint_sign, param, param_sign, deflect, const, q, params, theta):
    values = const.astype(float).copy()
    has_q = joint >= 0
    values[has_q] += joint_sign[has_q] * q[joint[has_q]]
    has_p = param >= 0
    values[has_p] += param_sign[has_p] * params[param[has_p]]
    has_t = deflect >= 0
    values[has_t] += theta[deflect[has_t]]
    return values


def _rotation(axis, angle):
    c, s = np.cos(angle), np.sin(angle)
    if axis == 0:
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == 1:
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def chain_points(kind, joint, joint_sign, param, param_sign, deflect, const, q, params, theta, points):
    """Evaluate the chain and locate ``points`` (given in the end frame).

    Returns ``(rotation, origin, world)`` where ``rotation``/``origin`` form
    the end-frame transform and ``world[i] = rotation @ points[i] + origin``.
    """
    values = _op_values(kind, joint, joint_sign, param, param_sign, deflect, const, q, params, theta)
    rot = np.eye(3)
    origin = np.zeros(3)
    for k in range(kind.shape[0]):
        code = kind[k]
        if code < 3:
            rot = rot @ _rotation(code, values[k])
        else:
            origin = origin + values[k] * rot[:, code - 3]
    world = points @ rot.T + origin
    return rot, origin, world


def chain_jacobian(kind, joint, joint_sign, param, param_sign, deflect, const, q, params, theta, points):
    """Chain evaluation plus derivatives with respect to every op value.

    Returns ``(rotation, origin, world, jac_point, jac_rot)``:

    * ``jac_point[i, :, k]`` is d(world point i) / d(value of op k),
    * ``jac_rot[:, k]`` is the world-frame rotation axis of op k (zero for
      translations), i.e. the angular-velocity column.
    """
    values = _op_values(kind, joint, joint_sign, param, param_sign, deflect, const, q, params, theta)
    n_ops = kind.shape[0]
    rot = np.eye(3)
    origin = np.zeros(3)
    axes_world = np.empty((n_ops, 3))
    origins = np.empty((n_ops, 3))
    for k in range(n_ops):
        code = kind[k]
        axes_world[k] = rot[:, code % 3]
        origins[k] = origin
        if code < 3:
            rot = rot @ _rotation(code, values[k])
        else:
            origin = origin + values[k] * axes_world[k]
    world = points @ rot.T + origin

    rotating = kind < 3
    jac_rot = np.where(rotating, 1.0, 0.0) * axes_world.T

    # lever arms from each rotation op's origin to every target point
    lever = world[:, None, :] - origins[None, :, :]
    jac_point = np.cross(axes_world[None, :, :], lever)
    jac_point[:, ~rotating, :] = axes_world[~rotating]
    return rot, origin, world, np.ascontiguousarray(np.swapaxes(jac_point, 1, 2)), jac_rot
