"""Serial-chain manipulator description, forward kinematics and Jacobians.

A manipulator is a flat sequence of elementary operations (rotation about
or translation along a local axis).  Each op is driven by the sum of an
optional actuated joint coordinate, an optional named geometric parameter,
an optional elastic deflection coordinate (a virtual joint coincident with
the op axis) and a constant.  This covers joint offsets, link lengths and
joint compliances with one mechanism.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import backend
from .transforms import RigidTransform

if TYPE_CHECKING:  # pragma: no cover
    from .compliance import ComplianceModel

OP_CODES = {"rx": 0, "ry": 1, "rz": 2, "tx": 3, "ty": 4, "tz": 5}
ROTATION_OPS = ("rx", "ry", "rz")


class JointLimitWarning(UserWarning):
    """A configuration lies outside the declared joint range."""


@dataclass(frozen=True)
class ChainOp:
    """One elementary transform in the kinematic chain.

    value = const + joint_sign * q[joint] + param_sign * params[param] + deflection

    ``param_sign`` matters for joint offsets on negated joints: an offset
    in the joint coordinate enters the op with the joint's own sign.
    """

    op: str
    joint: int = -1
    joint_sign: float = 1.0
    param: Optional[str] = None
    param_sign: float = 1.0
    compliant: bool = False
    const: float = 0.0

    def __post_init__(self):
        if self.op not in OP_CODES:
            raise ValueError(f"unknown op kind {self.op!r}")
        if self.compliant and self.op not in ROTATION_OPS:
            raise ValueError("compliant virtual joints must be rotations")

    @property
    def is_rotation(self) -> bool:
        return self.op in ROTATION_OPS


class ChainProgram:
    """Packed array form of an op sequence, consumed by the kernels."""

    def __init__(self, ops: Sequence[ChainOp], param_names: Sequence[str]):
        name_to_index = {name: i for i, name in enumerate(param_names)}
        n = len(ops)
        self.kind = np.empty(n, dtype=np.int32)
        self.joint = np.empty(n, dtype=np.int32)
        self.joint_sign = np.empty(n, dtype=np.float64)
        self.param = np.empty(n, dtype=np.int32)
        self.param_sign = np.empty(n, dtype=np.float64)
        self.deflect = np.empty(n, dtype=np.int32)
        self.const = np.empty(n, dtype=np.float64)
        theta_count = 0
        for i, op in enumerate(ops):
            self.kind[i] = OP_CODES[op.op]
            self.joint[i] = op.joint
            self.joint_sign[i] = op.joint_sign
            self.param_sign[i] = op.param_sign
            if op.param is None:
                self.param[i] = -1
            else:
                try:
                    self.param[i] = name_to_index[op.param]
                except KeyError:
                    raise ValueError(f"op {i} references undeclared parameter {op.param!r}")
            if op.compliant:
                self.deflect[i] = theta_count
                theta_count += 1
            else:
                self.deflect[i] = -1
            self.const[i] = op.const
        self.n_ops = n
        self.n_theta = theta_count
        self.n_params = len(param_names)
        self.n_joints = int(self.joint.max()) + 1 if n and self.joint.max() >= 0 else 0
        # theta index -> actuated joint of the op hosting that virtual joint
        self.theta_joint = np.full(self.n_theta, -1, dtype=np.int32)
        for i, op in enumerate(ops):
            if self.deflect[i] >= 0:
                self.theta_joint[self.deflect[i]] = op.joint

    def _args(self):
        return (
            self.kind,
            self.joint,
            self.joint_sign,
            self.param,
            self.param_sign,
            self.deflect,
            self.const,
        )


class FkResult(NamedTuple):
    flange: RigidTransform
    markers: np.ndarray


class Linearization(NamedTuple):
    """Forward kinematics plus all first-order sensitivities at one state.

    Rows 0:3 of the flange Jacobians are positional, rows 3:6 are the
    angular-velocity components.  All quantities are in the world frame
    (i.e. after the base transform).
    """

    flange: RigidTransform
    markers: np.ndarray            # (n_markers, 3)
    jac_marker_params: np.ndarray  # (n_markers, 3, n_params)
    jac_marker_theta: np.ndarray   # (n_markers, 3, n_theta)
    jac_flange_params: np.ndarray  # (6, n_params)
    jac_flange_theta: np.ndarray   # (6, n_theta)


@dataclass
class ManipulatorState:
    """One measured situation: joint coordinates, deflections, load.

    ``load`` is the external wrench acting at the flange-frame origin,
    expressed along world axes: (Fx, Fy, Fz) in N, (Tx, Ty, Tz) in N mm.
    """

    q: np.ndarray
    theta: Optional[np.ndarray] = None
    load: Optional[np.ndarray] = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.theta is not None:
            self.theta = np.asarray(self.theta, dtype=float)
        if self.load is not None:
            self.load = np.asarray(self.load, dtype=float)
            if self.load.shape != (6,):
                raise ValueError("load must be a 6-vector (force N, torque N mm)")


@dataclass
class SerialManipulator:
    """Kinematic chain with named parameters, tool markers and compliance."""

    name: str
    dof: int
    ops: Sequence[ChainOp]
    param_names: Sequence[str]
    param_nominal: np.ndarray
    param_units: Sequence[str]
    markers: np.ndarray
    marker_ids: Sequence[str] = ()
    joint_limits: Optional[np.ndarray] = None
    compliance: Optional["ComplianceModel"] = None
    analytic_param_jacobian: Optional[Callable] = None
    program: ChainProgram = field(init=False, repr=False)

    def __post_init__(self):
        self.param_nominal = np.asarray(self.param_nominal, dtype=float)
        self.markers = np.asarray(self.markers, dtype=float)
        if len(self.param_names) != self.param_nominal.shape[0]:
            raise ValueError("parameter names and nominal values differ in length")
        if len(self.param_units) != len(self.param_names):
            raise ValueError("parameter units and names differ in length")
        if any(unit not in ("mm", "rad") for unit in self.param_units):
            raise ValueError("parameter units must be 'mm' or 'rad'")
        if self.markers.ndim != 2 or self.markers.shape[1] != 3:
            raise ValueError("markers must be an (n, 3) array")
        if self.markers.shape[0] < 3:
            raise ValueError("at least 3 tool markers are required")
        _require_non_collinear(self.markers)
        if not self.marker_ids:
            self.marker_ids = [f"M{j + 1}" for j in range(self.markers.shape[0])]
        if len(self.marker_ids) != self.markers.shape[0]:
            raise ValueError("marker ids and marker count differ")
        self.program = ChainProgram(self.ops, self.param_names)
        if self.program.n_joints > self.dof:
            raise ValueError("chain references more joints than declared dof")
        if self.joint_limits is not None:
            self.joint_limits = np.asarray(self.joint_limits, dtype=float)
            if self.joint_limits.shape != (self.dof, 2):
                raise ValueError("joint_limits must be (dof, 2)")
        if self.compliance is not None:
            self.compliance.bind(self.program, self.joint_limits)

    # -- bookkeeping ------------------------------------------------------

    @property
    def n_markers(self) -> int:
        return self.markers.shape[0]

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def n_theta(self) -> int:
        return self.program.n_theta

    def param_index(self, name: str) -> int:
        try:
            return list(self.param_names).index(name)
        except ValueError:
            raise KeyError(f"unknown parameter {name!r}")

    def _check_inputs(self, q, params, theta):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ValueError(f"expected {self.dof} joint coordinates, got shape {q.shape}")
        if params is None:
            params = self.param_nominal
        else:
            params = np.asarray(params, dtype=float)
            if params.shape != self.param_nominal.shape:
                raise ValueError(
                    f"parameter vector has length {params.shape}, "
                    f"model declares {self.param_nominal.shape[0]}"
                )
        if theta is None:
            theta = np.zeros(self.program.n_theta)
        else:
            theta = np.asarray(theta, dtype=float)
            if theta.shape != (self.program.n_theta,):
                raise ValueError(
                    f"deflection vector has length {theta.shape}, "
                    f"model declares {self.program.n_theta} compliant coordinates"
                )
        if self.joint_limits is not None:
            below = q < self.joint_limits[:, 0] - 1e-12
            above = q > self.joint_limits[:, 1] + 1e-12
            if np.any(below | above):
                joints = np.nonzero(below | above)[0] + 1
                warnings.warn(
                    f"configuration leaves declared range for joint(s) {joints.tolist()}",
                    JointLimitWarning,
                    stacklevel=3,
                )
        return q, params, theta

    # -- kinematics -------------------------------------------------------

    def fk(self, q, params=None, theta=None, base=None, points=None) -> FkResult:
        """Flange transform and world marker positions (exact, nonlinear)."""
        q, params, theta = self._check_inputs(q, params, theta)
        pts = self.markers if points is None else np.asarray(points, dtype=float)
        rot, origin, world = backend.chain_points(
            *self.program._args(), q, params, theta, np.ascontiguousarray(pts)
        )
        flange = RigidTransform(rot, origin)
        if base is not None:
            flange = base @ flange
            world = base.apply(world)
        return FkResult(flange, world)

    def linearize(self, q, params=None, theta=None, base=None, points=None) -> Linearization:
        """FK together with marker and flange Jacobians w.r.t. params / theta."""
        q, params, theta = self._check_inputs(q, params, theta)
        pts = self.markers if points is None else np.asarray(points, dtype=float)
        n_pts = pts.shape[0]
        targets = np.ascontiguousarray(np.vstack([pts, np.zeros((1, 3))]))
        rot, origin, world, jac_point, jac_rot = backend.chain_jacobian(
            *self.program._args(), q, params, theta, targets
        )
        prog = self.program
        jac_params = _gather_columns(jac_point, prog.param, prog.n_params, prog.param_sign)
        jac_theta = _gather_columns(jac_point, prog.deflect, prog.n_theta)
        jac_rot_params = _gather_columns(jac_rot, prog.param, prog.n_params, prog.param_sign)
        jac_rot_theta = _gather_columns(jac_rot, prog.deflect, prog.n_theta)
        flange = RigidTransform(rot, origin)
        if base is not None:
            flange = base @ flange
            world = base.apply(world)
            rot_b = base.rotation
            jac_params = rot_b @ jac_params
            jac_theta = rot_b @ jac_theta
            jac_rot_params = rot_b @ jac_rot_params
            jac_rot_theta = rot_b @ jac_rot_theta
        return Linearization(
            flange=flange,
            markers=world[:n_pts],
            jac_marker_params=jac_params[:n_pts],
            jac_marker_theta=jac_theta[:n_pts],
            jac_flange_params=np.vstack([jac_params[n_pts], jac_rot_params]),
            jac_flange_theta=np.vstack([jac_theta[n_pts], jac_rot_theta]),
        )

    def jacobian_parameters(self, q, params=None, theta=None, base=None, marker=0):
        """3 x n_params position Jacobian of one marker."""
        if self.analytic_param_jacobian is not None:
            return self.analytic_param_jacobian(self, q, params, theta, base, marker)
        return self.linearize(q, params, theta, base).jac_marker_params[marker]

    def jacobian_elastic(self, q, params=None, theta=None, base=None, marker=0):
        """3 x n_theta position Jacobian of one marker w.r.t. deflections."""
        return self.linearize(q, params, theta, base).jac_marker_theta[marker]


def _gather_columns(jac_ops, indices, width, signs=None):
    """Sum per-op derivative columns into per-coordinate columns."""
    out = np.zeros(jac_ops.shape[:-1] + (width,))
    for k, idx in enumerate(indices):
        if idx >= 0:
            column = jac_ops[..., k]
            out[..., idx] += column if signs is None else signs[k] * column
    return out


def _require_non_collinear(markers, rtol=1e-8):
    centered = markers - markers.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    scale = max(svals[0], 1.0)
    if svals.shape[0] < 2 or svals[1] <= rtol * scale:
        raise ValueError("tool markers are collinear; orientation is unobservable")


# -- finite-difference oracles (kept independent of the analytic path) ----


def fd_jacobian_parameters(model, q, params=None, theta=None, base=None, marker=0, step=1e-6):
    """Central-difference marker Jacobian w.r.t. the geometric parameters."""
    if params is None:
        params = model.param_nominal
    params = np.asarray(params, dtype=float)
    cols = []
    for k in range(model.n_params):
        plus = params.copy()
        minus = params.copy()
        plus[k] += step
        minus[k] -= step
        f_plus = model.fk(q, plus, theta, base).markers[marker]
        f_minus = model.fk(q, minus, theta, base).markers[marker]
        cols.append((f_plus - f_minus) / (2.0 * step))
    return np.column_stack(cols) if cols else np.zeros((3, 0))


def fd_jacobian_elastic(model, q, params=None, theta=None, base=None, marker=0, step=1e-6):
    """Central-difference marker Jacobian w.r.t. the elastic deflections."""
    n_theta = model.n_theta
    if theta is None:
        theta = np.zeros(n_theta)
    theta = np.asarray(theta, dtype=float)
    cols = []
    for k in range(n_theta):
        plus = theta.copy()
        minus = theta.copy()
        plus[k] += step
        minus[k] -= step
        f_plus = model.fk(q, params, plus, base).markers[marker]
        f_minus = model.fk(q, params, minus, base).markers[marker]
        cols.append((f_plus - f_minus) / (2.0 * step))
    return np.column_stack(cols) if cols else np.zeros((3, 0))
