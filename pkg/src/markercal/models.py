"""Bundled manipulator models.

Two models ship with the package:

* ``demo_manipulator`` — a 3-DOF arm (rotary base, two pitch joints) used
  by the accuracy-comparison study.  Its closed-form position equations
  also yield a hand-derived parameter Jacobian, attached as an analytic
  cross-check path that bypasses the chain kernel entirely.
* ``industrial_manipulator`` — a 6-DOF industrial arm with compliant
  joints 2..6, joint-2 compliance segmented over five ranges of q2 to
  absorb a configuration-dependent balancing mechanism.

Matching YAML descriptions live in ``markercal/data``.
"""

from __future__ import annotations

import numpy as np

from .chain import ChainOp, SerialManipulator
from .compliance import ComplianceCoefficient, ComplianceModel

#: standard gravity, m/s^2 (mass in kg -> force in N)
STANDARD_GRAVITY = 9.80665


def demo_manipulator() -> SerialManipulator:
    """3-DOF demo arm: z-rotary base, vertical link, two pitch joints.

    Flange position in closed form (alpha = q1 + dq1, beta = q2 + dq2,
    gamma = q3 + dq3, phi = beta + gamma):

        x = (l2 cos(beta) + l3 cos(phi)) cos(alpha)
        y = (l2 cos(beta) + l3 cos(phi)) sin(alpha)
        z = l1 + l2 sin(beta) + l3 sin(phi)

    The pitch ops carry negative signs so that positive q2/q3 raise the
    arm (right-handed rotation about -y).
    """
    ops = [
        ChainOp("rz", joint=0, param="dq1"),
        ChainOp("tz", param="l1"),
        ChainOp("ry", joint=1, joint_sign=-1.0, param="dq2", param_sign=-1.0),
        ChainOp("tx", param="l2"),
        ChainOp("ry", joint=2, joint_sign=-1.0, param="dq3", param_sign=-1.0),
        ChainOp("tx", param="l3"),
    ]
    markers = np.array(
        [
            [250.0, -60.0, -60.0],
            [250.0, -60.0, 60.0],
            [250.0, 80.0, 0.0],
        ]
    )
    model = SerialManipulator(
        name="demo3r",
        dof=3,
        ops=ops,
        param_names=["l1", "l2", "l3", "dq1", "dq2", "dq3"],
        param_nominal=np.array([1000.0, 800.0, 600.0, 0.0, 0.0, 0.0]),
        param_units=["mm", "mm", "mm", "rad", "rad", "rad"],
        markers=markers,
        marker_ids=["M1", "M2", "M3"],
        joint_limits=np.deg2rad([[-180.0, 180.0], [-90.0, 90.0], [-90.0, 90.0]]),
        analytic_param_jacobian=demo_param_jacobian,
    )
    return model


def demo_flange(q, params):
    """Closed-form flange position and rotation of the demo arm."""
    q = np.asarray(q, dtype=float)
    params = np.asarray(params, dtype=float)
    l1, l2, l3, dq1, dq2, dq3 = params
    alpha = q[0] + dq1
    beta = q[1] + dq2
    phi = beta + q[2] + dq3
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cp, sp = np.cos(phi), np.sin(phi)
    reach = l2 * cb + l3 * cp
    position = np.array([reach * ca, reach * sa, l1 + l2 * sb + l3 * sp])
    rotation = np.array(
        [
            [ca * cp, -sa, -ca * sp],
            [sa * cp, ca, -sa * sp],
            [sp, 0.0, cp],
        ]
    )
    return position, rotation


def demo_param_jacobian(model, q, params=None, theta=None, base=None, marker=0):
    """Hand-derived marker Jacobian of the demo arm (no kernel involved).

    Columns follow the parameter order (l1, l2, l3, dq1, dq2, dq3).
    """
    if params is None:
        params = model.param_nominal
    q = np.asarray(q, dtype=float)
    params = np.asarray(params, dtype=float)
    l1, l2, l3, dq1, dq2, dq3 = params
    alpha = q[0] + dq1
    beta = q[1] + dq2
    phi = beta + q[2] + dq3
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cp, sp = np.cos(phi), np.sin(phi)
    u = model.markers[marker]
    reach = l2 * cb + l3 * cp

    # rotation split R = Rz(alpha) @ Ry(-phi) and its two partials
    d_rz = np.array([[-sa, -ca, 0.0], [ca, -sa, 0.0], [0.0, 0.0, 0.0]])
    ry_neg = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
    rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    d_ry = np.array([[-sp, 0.0, -cp], [0.0, 0.0, 0.0], [cp, 0.0, -sp]])

    jac = np.empty((3, 6))
    jac[:, 0] = (0.0, 0.0, 1.0)
    jac[:, 1] = (cb * ca, cb * sa, sb)
    jac[:, 2] = (cp * ca, cp * sa, sp)
    jac[:, 3] = np.array([-reach * sa, reach * ca, 0.0]) + (d_rz @ ry_neg) @ u
    d_phi = np.array([-(l2 * sb + l3 * sp) * ca, -(l2 * sb + l3 * sp) * sa, l2 * cb + l3 * cp])
    rot_phi = (rz @ d_ry) @ u
    jac[:, 4] = d_phi + rot_phi
    jac[:, 5] = np.array([-l3 * sp * ca, -l3 * sp * sa, l3 * cp]) + rot_phi
    if base is not None:
        jac = base.rotation @ jac
    return jac


# q2 segmentation: five equal ranges over the declared joint-2 travel
_Q2_BINS_DEG = [
    ("chi21", (-23.0, 10.0)),
    ("chi22", (-56.0, -23.0)),
    ("chi23", (-89.0, -56.0)),
    ("chi24", (-122.0, -89.0)),
    ("chi25", (-155.0, -122.0)),
]


def industrial_manipulator() -> SerialManipulator:
    """6-DOF industrial arm with compliant joints 2..6.

    Joint-2 compliance is piecewise constant over five equal q2 ranges
    (coefficients chi21..chi25, nearest-zero range first); joints 3..6
    carry one coefficient each.  Compliances are reported in
    1e-9 rad/(N mm).
    """
    ops = [
        ChainOp("tz", param="l0"),
        ChainOp("rz", joint=0, param="dq1"),
        ChainOp("tx", param="l1"),
        ChainOp("ry", joint=1, param="dq2", compliant=True),
        ChainOp("tx", param="l2"),
        ChainOp("ry", joint=2, param="dq3", compliant=True),
        ChainOp("tx", param="l3"),
        ChainOp("rx", joint=3, param="dq4", compliant=True),
        ChainOp("tx", param="l4"),
        ChainOp("ry", joint=4, param="dq5", compliant=True),
        ChainOp("rx", joint=5, param="dq6", compliant=True),
        ChainOp("tx", param="l5"),
    ]
    coefficients = [
        ComplianceCoefficient(name, theta=0, gate=tuple(np.deg2rad(gate)))
        for name, gate in _Q2_BINS_DEG
    ] + [
        ComplianceCoefficient("chi3", theta=1),
        ComplianceCoefficient("chi4", theta=2),
        ComplianceCoefficient("chi5", theta=3),
        ComplianceCoefficient("chi6", theta=4),
    ]
    compliance = ComplianceModel(
        coefficients, display_scale=1e-9, display_unit="1e-9 rad/(N mm)"
    )
    markers = np.array(
        [
            [279.2, -16.4, -91.9],
            [279.2, -25.2, 96.1],
            [281.8, 130.5, 5.6],
        ]
    )
    model = SerialManipulator(
        name="industrial6r",
        dof=6,
        ops=ops,
        param_names=[
            "l0", "l1", "l2", "l3", "l4", "l5",
            "dq1", "dq2", "dq3", "dq4", "dq5", "dq6",
        ],
        param_nominal=np.array(
            [675.0, 350.0, 1150.0, 115.0, 1200.0, 240.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        ),
        param_units=["mm"] * 6 + ["rad"] * 6,
        markers=markers,
        marker_ids=["M1", "M2", "M3"],
        joint_limits=np.deg2rad(
            [
                [-185.0, 185.0],
                [-155.0, 10.0],
                [-120.0, 155.0],
                [-350.0, 350.0],
                [-125.0, 125.0],
                [-350.0, 350.0],
            ]
        ),
        compliance=compliance,
    )
    return model


BUILTIN_MODELS = {
    "demo3r": demo_manipulator,
    "industrial6r": industrial_manipulator,
}


def builtin_model(name: str) -> SerialManipulator:
    try:
        return BUILTIN_MODELS[name]()
    except KeyError:
        raise KeyError(
            f"unknown built-in model {name!r}; available: {sorted(BUILTIN_MODELS)}"
        )
