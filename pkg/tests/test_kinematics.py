"""Chain forward kinematics and Jacobians against independent oracles:
closed-form position equations, hand-derived derivatives, central finite
differences, and the compiled/fallback kernel pair against each other."""

import numpy as np
import pytest

from conftest import random_joint_states
from markercal import _core_py
from markercal.backend import COMPILED
from markercal.chain import (
    ChainOp,
    JointLimitWarning,
    SerialManipulator,
    fd_jacobian_elastic,
    fd_jacobian_parameters,
)
from markercal.models import demo_flange, demo_param_jacobian
from markercal.transforms import RigidTransform, rotation_vector_to_matrix


def random_demo_state(demo, rng):
    q = rng.uniform(demo.joint_limits[:, 0] * 0.9, demo.joint_limits[:, 1] * 0.9)
    params = demo.param_nominal + np.concatenate(
        [rng.normal(0, 5.0, 3), rng.normal(0, 0.03, 3)]
    )
    return q, params


def test_flange_at_home_position(demo):
    fk = demo.fk(np.zeros(3))
    assert np.allclose(fk.flange.translation, [1400.0, 0.0, 1000.0], atol=1e-12)


def test_flange_matches_closed_form_equations(demo, rng):
    for _ in range(100):
        q, params = random_demo_state(demo, rng)
        fk = demo.fk(q, params)
        position, rotation = demo_flange(q, params)
        assert np.allclose(fk.flange.translation, position, atol=1e-9)
        assert np.allclose(fk.flange.rotation, rotation, atol=1e-12)


def test_markers_are_flange_frame_offsets(demo, rng):
    q, params = random_demo_state(demo, rng)
    fk = demo.fk(q, params)
    assert np.allclose(fk.markers, fk.flange.apply(demo.markers), atol=1e-9)


def test_base_transform_premultiplies(demo, rng):
    q, params = random_demo_state(demo, rng)
    base = RigidTransform.from_rotation_vector([0.05, -0.02, 0.1], [-30.0, 40.0, -100.0])
    plain = demo.fk(q, params)
    moved = demo.fk(q, params, base=base)
    assert np.allclose(moved.markers, base.apply(plain.markers), atol=1e-9)
    assert np.allclose(moved.flange.translation, base.apply(plain.flange.translation), atol=1e-9)


def test_parameter_jacobian_matches_hand_derivation(demo, rng):
    for _ in range(50):
        q, params = random_demo_state(demo, rng)
        analytic = demo.jacobian_parameters(q, params)
        by_hand = demo_param_jacobian(demo, q, params)
        assert np.allclose(analytic, by_hand, atol=1e-9)


def test_parameter_jacobian_matches_finite_differences(demo, rng):
    worst = 0.0
    for _ in range(100):
        q, params = random_demo_state(demo, rng)
        analytic = demo.jacobian_parameters(q, params)
        numeric = fd_jacobian_parameters(demo, q, params)
        scale = max(1.0, np.max(np.abs(numeric)))
        worst = max(worst, np.max(np.abs(analytic - numeric)) / scale)
    assert worst < 1e-6


def test_parameter_jacobian_matches_finite_differences_six_joint(industrial, rng):
    worst = 0.0
    for _ in range(100):
        q = random_joint_states(industrial, rng, 1)[0]
        analytic = industrial.jacobian_parameters(q)
        numeric = fd_jacobian_parameters(industrial, q)
        scale = max(1.0, np.max(np.abs(numeric)))
        worst = max(worst, np.max(np.abs(analytic - numeric)) / scale)
    assert worst < 1e-6


def test_elastic_jacobian_matches_finite_differences(industrial, rng):
    worst = 0.0
    for _ in range(100):
        q = random_joint_states(industrial, rng, 1)[0]
        theta = rng.normal(0, 1e-3, industrial.n_theta)
        analytic = industrial.jacobian_elastic(q, theta=theta)
        numeric = fd_jacobian_elastic(industrial, q, theta=theta)
        scale = max(1.0, np.max(np.abs(numeric)))
        worst = max(worst, np.max(np.abs(analytic - numeric)) / scale)
    assert worst < 1e-6


def test_flange_angular_jacobian_matches_finite_differences(industrial, rng):
    step = 1e-7
    for _ in range(20):
        q = random_joint_states(industrial, rng, 1)[0]
        lin = industrial.linearize(q)
        for t in range(industrial.n_theta):
            theta_plus = np.zeros(industrial.n_theta)
            theta_minus = np.zeros(industrial.n_theta)
            theta_plus[t] += step
            theta_minus[t] -= step
            rot_p = industrial.fk(q, theta=theta_plus).flange.rotation
            rot_m = industrial.fk(q, theta=theta_minus).flange.rotation
            # world angular velocity: (dR) R^T is skew(w * dtheta)
            omega_skew = (rot_p - rot_m) @ lin.flange.rotation.T / (2 * step)
            numeric = np.array([omega_skew[2, 1], omega_skew[0, 2], omega_skew[1, 0]])
            assert np.allclose(lin.jac_flange_theta[3:, t], numeric, atol=1e-6)


def test_linearization_flange_position_rows(industrial, rng):
    q = random_joint_states(industrial, rng, 1)[0]
    lin = industrial.linearize(q)
    numeric = fd_jacobian_parameters(industrial, q)
    # marker 0 position block agrees with the per-marker helper
    assert np.allclose(lin.jac_marker_params[0], industrial.jacobian_parameters(q), atol=1e-12)
    assert np.allclose(lin.jac_marker_params[0], numeric, atol=1e-5)


def test_joint_limit_warning(demo):
    with pytest.warns(JointLimitWarning):
        demo.fk(np.array([0.0, np.deg2rad(95.0), 0.0]))


def test_collinear_markers_rejected():
    with pytest.raises(ValueError, match="collinear"):
        SerialManipulator(
            name="bad",
            dof=1,
            ops=[ChainOp(op="rz", joint=0), ChainOp(op="tx", const=100.0)],
            param_names=[],
            param_nominal=np.zeros(0),
            param_units=[],
            markers=np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]]),
        )


def test_too_few_markers_rejected():
    with pytest.raises(ValueError):
        SerialManipulator(
            name="bad",
            dof=1,
            ops=[ChainOp(op="rz", joint=0)],
            param_names=[],
            param_nominal=np.zeros(0),
            param_units=[],
            markers=np.array([[0.0, 0, 0], [1.0, 0, 0]]),
        )


def test_compliant_translation_rejected():
    with pytest.raises(ValueError):
        ChainOp(op="tx", compliant=True)


def test_negated_joint_offset_enters_with_joint_sign(demo):
    """An angular offset on a negated joint must shift the joint value
    inside the negation: op(q, d) = -(q + d)."""
    q = np.array([0.3, 0.2, -0.4])
    params = demo.param_nominal.copy()
    delta = 0.05
    params[demo.param_index("dq2")] += delta
    shifted_q = q + np.array([0.0, delta, 0.0])
    assert np.allclose(
        demo.fk(q, params).markers, demo.fk(shifted_q).markers, atol=1e-9
    )


@pytest.mark.skipif(not COMPILED, reason="compiled kernel not built")
def test_backends_agree(industrial, rng):
    from markercal import _core

    prog = industrial.program
    for _ in range(100):
        q = random_joint_states(industrial, rng, 1)[0]
        params = industrial.param_nominal + rng.normal(0, 2.0, industrial.n_params)
        theta = rng.normal(0, 1e-3, prog.n_theta)
        args = prog._args() + (q, params, theta, industrial.markers)
        for a, b in zip(_core.chain_points(*args), _core_py.chain_points(*args)):
            assert np.allclose(a, b, atol=1e-9)
        for a, b in zip(_core.chain_jacobian(*args), _core_py.chain_jacobian(*args)):
            assert np.allclose(a, b, atol=1e-9)


def test_kernel_jacobian_columns_are_twists(industrial, rng):
    """Each op's derivative column equals the classic twist form: for a
    rotation, axis x (point - op origin); for a translation, the axis."""
    prog = industrial.program
    q = random_joint_states(industrial, rng, 1)[0]
    theta = np.zeros(prog.n_theta)
    args = prog._args() + (q, industrial.param_nominal, theta, industrial.markers)
    rot, origin, world, jac_point, jac_rot = _core_py.chain_jacobian(*args)

    # brute force: re-evaluate with each op value nudged
    step = 1e-6
    values_args = list(prog._args())
    const = values_args[6]
    for k in range(prog.n_ops):
        const_plus, const_minus = const.copy(), const.copy()
        const_plus[k] += step
        const_minus[k] -= step
        args_p = tuple(values_args[:6]) + (const_plus, q, industrial.param_nominal, theta, industrial.markers)
        args_m = tuple(values_args[:6]) + (const_minus, q, industrial.param_nominal, theta, industrial.markers)
        _, _, world_p = _core_py.chain_points(*args_p)
        _, _, world_m = _core_py.chain_points(*args_m)
        numeric = (world_p - world_m) / (2 * step)
        assert np.allclose(jac_point[:, :, k], numeric, atol=1e-5)
