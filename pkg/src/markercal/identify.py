"""Parameter identification from marker measurements.

Two estimators are provided:

* ``identify_iterative`` works on marker positions directly.  It
  alternates a base/tool estimation step (linear in small base rotations
  and in the tool-frame marker coordinates) with a parameter step that
  solves for geometric corrections and compliance values from stacked
  marker residuals, iterating both to convergence.
* ``identify_fullpose`` is the conventional scheme: each configuration's
  markers are first collapsed to a 6-DOF pose by rigid registration, and
  a Gauss-Newton fit runs on position plus weighted orientation
  residuals.

Both share one guarded linear solver with column-norm screening and
condition monitoring.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .chain import Linearization, SerialManipulator
from .compliance import elastic_regressor, solve_deflections
from .measurements import MeasurementSet, Observation
from .registration import pose_from_markers
from .transforms import RigidTransform, matrix_to_rotation_vector, skew

#: cond(normal matrix) above which the solver abandons the normal
#: equations for an orthogonal factorization of the regressor itself.
CONDITION_SWITCH = 1e8
#: cond(normal matrix) above which the problem is declared unidentifiable.
CONDITION_FAIL = 1e10
#: columns whose Euclidean norm falls below this are excluded from the solve.
COLUMN_NORM_FLOOR = 1e-12
#: base rotations beyond this (rad) strain the small-angle linearization.
BASE_ROTATION_TRUST = 0.15


class IdentifiabilityError(RuntimeError):
    """The regressor does not determine the requested parameters."""

    def __init__(self, message: str, directions: Optional[List[str]] = None):
        super().__init__(message)
        self.directions = directions or []


class NumericalConditioningWarning(UserWarning):
    """The solver switched away from the normal equations."""


@dataclass
class SolveDiagnostics:
    condition: float
    method: str
    excluded: List[str]
    n_rows: int
    n_cols: int
    kept: np.ndarray
    normal_inverse: Optional[np.ndarray]


def solve_least_squares(
    matrix: np.ndarray,
    rhs: np.ndarray,
    labels: Sequence[str],
    cond_switch: float = CONDITION_SWITCH,
    cond_fail: float = CONDITION_FAIL,
) -> Tuple[np.ndarray, SolveDiagnostics]:
    """Guarded linear least squares min ||matrix x - rhs||.

    Columns are equilibrated to unit norm before conditioning is assessed,
    so the reported condition number measures identifiability rather than
    the mix of physical units.  Columns with negligible norm are excluded
    (their solution entries are zero) and reported by label.
    """
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float).ravel()
    n_rows, n_cols = matrix.shape
    if len(labels) != n_cols:
        raise ValueError("one label per column is required")
    norms = np.linalg.norm(matrix, axis=0)
    kept = norms > COLUMN_NORM_FLOOR
    excluded = [labels[i] for i in np.nonzero(~kept)[0]]
    x = np.zeros(n_cols)
    if not np.any(kept):
        diag = SolveDiagnostics(0.0, "normal", excluded, n_rows, n_cols, kept, None)
        return x, diag
    scaled = matrix[:, kept] / norms[kept]
    normal = scaled.T @ scaled
    condition = float(np.linalg.cond(normal))
    if condition > cond_fail:
        directions = _null_directions(normal, [labels[i] for i in np.nonzero(kept)[0]])
        raise IdentifiabilityError(
            "regressor is rank deficient (condition {:.3g}); unidentifiable "
            "directions: {}".format(condition, "; ".join(directions) or "none isolated"),
            directions,
        )
    if condition <= cond_switch:
        method = "normal"
        y = np.linalg.solve(normal, scaled.T @ rhs)
    else:
        method = "lstsq"
        warnings.warn(
            f"normal equations poorly conditioned ({condition:.3g}); "
            "switching to orthogonal factorization",
            NumericalConditioningWarning,
            stacklevel=2,
        )
        y, *_ = np.linalg.lstsq(scaled, rhs, rcond=None)
    x[kept] = y / norms[kept]
    # unit-covariance factor (matrix^T matrix)^-1 on the kept columns
    inv_scaled = np.linalg.inv(normal)
    d = 1.0 / norms[kept]
    normal_inverse = inv_scaled * np.outer(d, d)
    diag = SolveDiagnostics(
        condition, method, excluded, n_rows, n_cols, kept, normal_inverse
    )
    return x, diag


def _null_directions(normal: np.ndarray, labels: Sequence[str]) -> List[str]:
    """Describe near-null eigenvectors of the normal matrix by label."""
    eigvals, eigvecs = np.linalg.eigh(normal)
    cutoff = eigvals[-1] * 1e-10
    directions = []
    for k in range(eigvals.shape[0]):
        if eigvals[k] > cutoff:
            break
        vec = eigvecs[:, k]
        strong = np.nonzero(np.abs(vec) > 0.3 * np.abs(vec).max())[0]
        terms = ", ".join(f"{labels[i]} ({vec[i]:+.2f})" for i in strong)
        directions.append(terms)
    return directions


# -- step 1: base and tool ------------------------------------------------


@dataclass
class BaseToolEstimate:
    """World-to-robot-root transform and tool-frame marker coordinates."""

    base: RigidTransform
    tool_markers: np.ndarray
    iterations: int
    converged: bool
    residual_rms: float
    condition: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.base.translation,
                self.base.rotation_vector(),
                self.tool_markers.reshape(-1),
            ]
        )


def estimate_base_tool(
    model: SerialManipulator,
    observations: Sequence[Observation],
    params: Optional[np.ndarray] = None,
    thetas: Optional[np.ndarray] = None,
    max_iter: int = 30,
    tol: float = 1e-12,
) -> BaseToolEstimate:
    """Estimate the base transform and tool-frame marker coordinates.

    With the geometric parameters held fixed, the measured marker
    positions are linear in the base translation, the small base rotation
    and the marker coordinates in the flange frame.  Measurements are
    pulled back through the current base estimate before each pass, so
    arbitrarily large base offsets are handled by composing small
    corrections; the first pass from an identity start equals the
    one-shot linear solution.
    """
    if not observations:
        raise ValueError("base/tool estimation needs at least one observation")
    n_markers = observations[0].n_markers
    labels = (
        ["base_px", "base_py", "base_pz", "base_rx", "base_ry", "base_rz"]
        + [f"tool_{j + 1}_{axis}" for j in range(n_markers) for axis in "xyz"]
    )
    flange_rots = []
    flange_origins = []
    measured = []
    for i, obs in enumerate(observations):
        theta = None if thetas is None else thetas[i]
        fk = model.fk(obs.q, params, theta)
        flange_rots.append(fk.flange.rotation)
        flange_origins.append(fk.flange.translation)
        measured.append(obs.markers)
    base = RigidTransform.identity()
    tool = np.zeros((n_markers, 3))
    condition = 0.0
    residual_rms = float("nan")
    converged = False
    iterations = 0
    n_rows = 3 * n_markers * len(observations)
    n_cols = 6 + 3 * n_markers
    for iterations in range(1, max_iter + 1):
        matrix = np.zeros((n_rows, n_cols))
        rhs = np.zeros(n_rows)
        row = 0
        rot_back = base.rotation.T
        for i, obs in enumerate(observations):
            pulled = (obs.markers - base.translation) @ base.rotation  # row form of R^T p
            for j in range(n_markers):
                block = slice(row, row + 3)
                matrix[block, 0:3] = np.eye(3)
                matrix[block, 3:6] = -skew(pulled[j])
                col = 6 + 3 * j
                matrix[block, col : col + 3] = flange_rots[i]
                rhs[row : row + 3] = pulled[j] - flange_origins[i]
                row += 3
        solution, diag = solve_least_squares(matrix, rhs, labels)
        condition = diag.condition
        delta_p = solution[0:3]
        delta_r = solution[3:6]
        tool = solution[6:].reshape(n_markers, 3)
        base = base @ RigidTransform.from_small_rotation(delta_r, delta_p)
        update = max(np.max(np.abs(delta_p)), np.max(np.abs(delta_r)))
        if update < tol:
            converged = True
            break
    # residual of the final estimate, in world coordinates
    sq_sum = 0.0
    for i, obs in enumerate(observations):
        predicted = base.apply(flange_origins[i] + tool @ flange_rots[i].T)
        sq_sum += float(np.sum((obs.markers - predicted) ** 2))
    residual_rms = float(np.sqrt(sq_sum / (n_markers * len(observations) * 3)))
    rot_angle = np.linalg.norm(base.rotation_vector())
    if rot_angle > BASE_ROTATION_TRUST:
        warnings.warn(
            f"estimated base rotation of {rot_angle:.3f} rad is large for the "
            "small-angle formulation; verify the setup",
            UserWarning,
            stacklevel=2,
        )
    return BaseToolEstimate(base, tool, iterations, converged, residual_rms, condition)


# -- step 2 and the combined iteration ------------------------------------


@dataclass
class IdentifyOptions:
    """Controls for the iterative identification."""

    max_iter: int = 20
    tol: float = 1e-9
    estimate_base_tool: bool = True
    base: Optional[RigidTransform] = None
    free_params: Optional[Sequence[str]] = None
    fit_compliance: bool = False
    differential: bool = False
    orientation_weight: Optional[float] = None  # full-pose method only

    def resolve_free(self, model: SerialManipulator) -> List[int]:
        if self.free_params is None:
            return list(range(model.n_params))
        return [model.param_index(name) for name in self.free_params]


@dataclass
class IdentificationResult:
    """Outcome of an identification run."""

    approach: str
    params: np.ndarray
    delta_params: np.ndarray
    free_indices: List[int]
    param_labels: List[str]
    chi: np.ndarray
    chi_labels: List[str]
    base_tool: Optional[BaseToolEstimate]
    covariance: Optional[np.ndarray]
    residual_rms: float
    converged: bool
    iterations: int
    condition: float
    excluded: List[str]
    n_equations: int
    n_unknowns: int
    history: List[Tuple[int, float, float]] = field(default_factory=list)

    @property
    def labels(self) -> List[str]:
        return [self.param_labels[i] for i in self.free_indices] + self.chi_labels

    def std(self) -> Optional[np.ndarray]:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def _solve_thetas(model, observations, params, chi, base):
    """Deflection vector per observation under the current compliance."""
    thetas = np.zeros((len(observations), model.n_theta))
    if model.compliance is None or model.n_theta == 0:
        return thetas
    for i, obs in enumerate(observations):
        if np.any(obs.load):
            thetas[i] = solve_deflections(
                model, obs.q, chi, obs.load, params=params, base=base
            )
    return thetas


def _parameter_rows(
    model: SerialManipulator,
    obs: Observation,
    lin: Linearization,
    free: Sequence[int],
    fit_compliance: bool,
) -> Tuple[np.ndarray, np.ndarray]:
    """Regressor block and residual for one observation."""
    m = model.n_markers
    blocks = []
    if free:
        blocks.append(lin.jac_marker_params[:, :, free].reshape(3 * m, len(free)))
    if fit_compliance:
        blocks.append(elastic_regressor(lin, model.compliance, obs.q, obs.load))
    matrix = np.hstack(blocks) if blocks else np.zeros((3 * m, 0))
    residual = (obs.markers - lin.markers).reshape(-1)
    return matrix, residual


def identify_iterative(
    model: SerialManipulator,
    measurements: MeasurementSet,
    options: Optional[IdentifyOptions] = None,
) -> IdentificationResult:
    """Identify geometric parameters (and compliances) from marker positions.

    Alternates base/tool estimation with a linear parameter step until the
    update norm falls below ``options.tol``.  Non-convergence is reported
    through the ``converged`` flag, not an exception, so partial results
    remain inspectable.
    """
    options = options or IdentifyOptions()
    free = options.resolve_free(model)
    fit_chi = options.fit_compliance and model.compliance is not None
    chi_labels = model.compliance.names if fit_chi else []
    chi_scale = model.compliance.display_scale if fit_chi else 1.0
    n_chi = len(chi_labels)
    labels = [model.param_names[i] for i in free] + list(chi_labels)

    if options.differential:
        pairs = measurements.paired()
        if not pairs:
            raise ValueError("differential identification needs pre/post pairs")
        step2_obs: List[Observation] = [post for _, post in pairs]
        pre_obs: List[Observation] = [pre for pre, _ in pairs]
        base_obs = measurements.phase("pre")
    else:
        step2_obs = list(measurements.observations)
        pre_obs = []
        base_obs = step2_obs

    params = model.param_nominal.copy()
    chi = np.zeros(n_chi)
    base = options.base if options.base is not None else RigidTransform.identity()
    tool = model.markers.copy()
    base_tool: Optional[BaseToolEstimate] = None
    converged = False
    history: List[Tuple[int, float, float]] = []
    diag: Optional[SolveDiagnostics] = None
    residual_rms = float("nan")
    n_equations = 0
    iterations = 0

    def _pack_state(params_, chi_, base_, tool_):
        return np.concatenate(
            [
                params_,
                chi_ / chi_scale if n_chi else np.zeros(0),
                base_.translation,
                base_.rotation_vector(),
                tool_.reshape(-1),
            ]
        )

    prev_state = _pack_state(params, chi, base, tool)
    for iterations in range(1, options.max_iter + 1):
        if options.estimate_base_tool:
            thetas = _solve_thetas(model, base_obs, params, chi, base)
            base_tool = estimate_base_tool(model, base_obs, params, thetas)
            base = base_tool.base
            tool = base_tool.tool_markers
        rows = []
        rhs = []
        for obs in step2_obs:
            theta = (
                solve_deflections(model, obs.q, chi, obs.load, params=params, base=base)
                if fit_chi and np.any(obs.load)
                else None
            )
            lin = model.linearize(obs.q, params, theta, base, points=tool)
            matrix, residual = _parameter_rows(model, obs, lin, free, fit_chi)
            rows.append(matrix)
            rhs.append(residual)
        if options.differential:
            for i, obs in enumerate(pre_obs):
                lin = model.linearize(obs.q, params, None, base, points=tool)
                matrix, residual = _parameter_rows(model, obs, lin, free, fit_chi)
                rows[i] = rows[i] - matrix
                rhs[i] = rhs[i] - residual
        matrix = np.vstack(rows)
        rhs_vec = np.concatenate(rhs)
        n_equations = matrix.shape[0]
        solution, diag = solve_least_squares(matrix, rhs_vec, labels)
        update = solution[: len(free)]
        params[free] += update
        if n_chi:
            chi = chi + solution[len(free) :]
        residual_rms = float(np.sqrt(np.mean((rhs_vec - matrix @ solution) ** 2)))
        state = _pack_state(params, chi, base, tool)
        update_norm = float(np.max(np.abs(state - prev_state)))
        history.append((iterations, residual_rms, update_norm))
        prev_state = state
        if update_norm < options.tol:
            converged = True
            break

    covariance = None
    if diag is not None and diag.normal_inverse is not None:
        dof = n_equations - int(np.sum(diag.kept))
        if dof > 0:
            sigma2 = np.sum((rhs_vec - matrix @ solution) ** 2) / dof
            covariance = np.full((len(labels), len(labels)), np.nan)
            kept_idx = np.nonzero(diag.kept)[0]
            covariance[np.ix_(kept_idx, kept_idx)] = sigma2 * diag.normal_inverse
    if not converged and options.max_iter > 1:
        warnings.warn(
            f"identification did not meet tol={options.tol:g} within "
            f"{options.max_iter} iterations (last update {history[-1][2]:.3g})",
            UserWarning,
            stacklevel=2,
        )
    return IdentificationResult(
        approach="partial",
        params=params,
        delta_params=params - model.param_nominal,
        free_indices=free,
        param_labels=list(model.param_names),
        chi=chi,
        chi_labels=list(chi_labels),
        base_tool=base_tool,
        covariance=covariance,
        residual_rms=residual_rms,
        converged=converged,
        iterations=iterations,
        condition=diag.condition if diag else float("nan"),
        excluded=diag.excluded if diag else [],
        n_equations=n_equations,
        n_unknowns=len(labels),
        history=history,
    )


def default_orientation_weight(markers: np.ndarray) -> float:
    """RMS marker distance from the triad centroid (mm per rad).

    Scaling orientation residuals by this length makes one radian of pose
    error comparable to the marker displacement it would cause.
    """
    markers = np.asarray(markers, dtype=float)
    centered = markers - markers.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum(centered**2, axis=1))))


def identify_fullpose(
    model: SerialManipulator,
    measurements: MeasurementSet,
    options: Optional[IdentifyOptions] = None,
) -> IdentificationResult:
    """Conventional identification from registered full poses.

    Each configuration's markers are collapsed to a pose by rigid
    registration against the tool-frame marker coordinates; Gauss-Newton
    then fits the free parameters to stacked position and weighted
    orientation residuals (6 equations per configuration).
    """
    options = options or IdentifyOptions()
    if options.fit_compliance or options.differential:
        raise ValueError(
            "the full-pose method supports neither compliance fitting nor "
            "differential (loaded minus unloaded) measurements"
        )
    free = options.resolve_free(model)
    labels = [model.param_names[i] for i in free]
    weight = options.orientation_weight
    if weight is None:
        weight = default_orientation_weight(model.markers)
    base = options.base if options.base is not None else RigidTransform.identity()

    poses = [
        pose_from_markers(obs.markers, model.markers) for obs in measurements
    ]
    params = model.param_nominal.copy()
    converged = False
    history: List[Tuple[int, float, float]] = []
    diag = None
    residual_rms = float("nan")
    n_equations = 6 * len(measurements.observations)
    iterations = 0
    for iterations in range(1, options.max_iter + 1):
        matrix = np.zeros((n_equations, len(free)))
        rhs = np.zeros(n_equations)
        for i, obs in enumerate(measurements):
            lin = model.linearize(obs.q, params, None, base)
            block = slice(6 * i, 6 * i + 6)
            jac = lin.jac_flange_params[:, free].copy()
            jac[3:6] *= weight
            matrix[block] = jac
            pos_res = poses[i].position - lin.flange.translation
            rot_res = matrix_to_rotation_vector(
                poses[i].transform.rotation @ lin.flange.rotation.T
            )
            rhs[6 * i : 6 * i + 3] = pos_res
            rhs[6 * i + 3 : 6 * i + 6] = weight * rot_res
        solution, diag = solve_least_squares(matrix, rhs, labels)
        params[free] += solution
        residual_rms = float(np.sqrt(np.mean((rhs - matrix @ solution) ** 2)))
        update_norm = float(np.max(np.abs(solution))) if len(free) else 0.0
        history.append((iterations, residual_rms, update_norm))
        if update_norm < options.tol:
            converged = True
            break
    covariance = None
    if diag is not None and diag.normal_inverse is not None:
        dof = n_equations - int(np.sum(diag.kept))
        if dof > 0:
            sigma2 = np.sum((rhs - matrix @ solution) ** 2) / dof
            covariance = np.full((len(labels), len(labels)), np.nan)
            kept_idx = np.nonzero(diag.kept)[0]
            covariance[np.ix_(kept_idx, kept_idx)] = sigma2 * diag.normal_inverse
    if not converged and options.max_iter > 1:
        warnings.warn(
            f"full-pose identification did not meet tol={options.tol:g} within "
            f"{options.max_iter} iterations",
            UserWarning,
            stacklevel=2,
        )
    return IdentificationResult(
        approach="fullpose",
        params=params,
        delta_params=params - model.param_nominal,
        free_indices=free,
        param_labels=list(model.param_names),
        chi=np.zeros(0),
        chi_labels=[],
        base_tool=None,
        covariance=covariance,
        residual_rms=residual_rms,
        converged=converged,
        iterations=iterations,
        condition=diag.condition if diag else float("nan"),
        excluded=diag.excluded if diag else [],
        n_equations=n_equations,
        n_unknowns=len(labels),
        history=history,
    )
