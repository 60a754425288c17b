"""Joint compliance: stiffness coefficients, deflections, elastic regressor.

Compliance is strictly diagonal: each compliant coordinate deflects under
its own generalized torque only, ``theta_t = k_t * tau_t``.  A coordinate
may have a single coefficient valid everywhere, or several coefficients
gated by intervals of the hosting joint's coordinate (piecewise-constant
stiffness); exactly one coefficient is active per configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence, Tuple

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .chain import Linearization, SerialManipulator

_GATE_TOL = 1e-9


class ComplianceError(ValueError):
    """Invalid compliance description or unresolvable configuration."""


@dataclass(frozen=True)
class ComplianceCoefficient:
    """One inverse-stiffness coefficient.

    ``theta`` is the index of the compliant coordinate (chain order).
    ``gate`` restricts validity to an interval of the hosting joint's
    coordinate, in radians; ``None`` means valid everywhere.
    """

    name: str
    theta: int
    gate: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.gate is not None:
            lo, hi = self.gate
            if not hi > lo:
                raise ComplianceError(f"coefficient {self.name!r}: empty gate interval")


class ComplianceModel:
    """Set of compliance coefficients for a manipulator.

    ``display_scale`` converts internal values (rad per N mm) to the unit
    used in reports; e.g. 1e-9 reports in 1e-9 rad/(N mm).
    """

    def __init__(
        self,
        coefficients: Sequence[ComplianceCoefficient],
        display_scale: float = 1e-9,
        display_unit: str = "1e-9 rad/(N mm)",
    ):
        names = [c.name for c in coefficients]
        if len(set(names)) != len(names):
            raise ComplianceError("duplicate compliance coefficient names")
        self.coefficients = list(coefficients)
        self.display_scale = float(display_scale)
        self.display_unit = display_unit
        self._theta_joint = None

    @property
    def n_coefficients(self) -> int:
        return len(self.coefficients)

    @property
    def names(self):
        return [c.name for c in self.coefficients]

    def bind(self, program, joint_limits=None) -> None:
        """Check the coefficients against a chain and remember its layout."""
        n_theta = program.n_theta
        groups = {t: [] for t in range(n_theta)}
        for coeff in self.coefficients:
            if not 0 <= coeff.theta < n_theta:
                raise ComplianceError(
                    f"coefficient {coeff.name!r} references compliant coordinate "
                    f"{coeff.theta}, chain declares {n_theta}"
                )
            groups[coeff.theta].append(coeff)
        for t, group in groups.items():
            if not group:
                raise ComplianceError(f"compliant coordinate {t} has no coefficient")
            if len(group) == 1 and group[0].gate is None:
                continue
            if any(c.gate is None for c in group):
                raise ComplianceError(
                    f"compliant coordinate {t}: gated and ungated coefficients mixed"
                )
            host = program.theta_joint[t]
            if host < 0:
                raise ComplianceError(
                    f"compliant coordinate {t}: gates need an actuated hosting joint"
                )
            ordered = sorted(group, key=lambda c: c.gate[0])
            for prev, nxt in zip(ordered, ordered[1:]):
                if nxt.gate[0] < prev.gate[1] - _GATE_TOL:
                    raise ComplianceError(
                        f"gates of {prev.name!r} and {nxt.name!r} overlap"
                    )
                if nxt.gate[0] > prev.gate[1] + _GATE_TOL:
                    raise ComplianceError(
                        f"gap between gates of {prev.name!r} and {nxt.name!r}"
                    )
            if joint_limits is not None:
                lo, hi = joint_limits[host]
                if ordered[0].gate[0] > lo + _GATE_TOL or ordered[-1].gate[1] < hi - _GATE_TOL:
                    raise ComplianceError(
                        f"gates for compliant coordinate {t} do not cover the "
                        f"declared range of joint {host + 1}"
                    )
        self._theta_joint = np.array(program.theta_joint, dtype=int)

    def _require_bound(self):
        if self._theta_joint is None:
            raise ComplianceError("compliance model is not bound to a chain")

    def active_indices(self, q: np.ndarray) -> np.ndarray:
        """Index of the active coefficient for each compliant coordinate."""
        self._require_bound()
        q = np.asarray(q, dtype=float)
        n_theta = self._theta_joint.shape[0]
        active = np.full(n_theta, -1, dtype=int)
        for t in range(n_theta):
            candidates = [
                (i, c) for i, c in enumerate(self.coefficients) if c.theta == t
            ]
            if len(candidates) == 1 and candidates[0][1].gate is None:
                active[t] = candidates[0][0]
                continue
            value = q[self._theta_joint[t]]
            ordered = sorted(candidates, key=lambda item: item[1].gate[0])
            last = len(ordered) - 1
            for rank, (i, c) in enumerate(ordered):
                lo, hi = c.gate
                upper_ok = value <= hi + _GATE_TOL if rank == last else value < hi
                if value >= lo - _GATE_TOL and upper_ok:
                    active[t] = i
                    break
            if active[t] < 0:
                raise ComplianceError(
                    f"joint {self._theta_joint[t] + 1} at {value:.6f} rad lies outside "
                    f"every gate of compliant coordinate {t}"
                )
        return active

    def stiffness_vector(self, chi: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Per-coordinate inverse stiffness at configuration q (rad per N mm)."""
        chi = np.asarray(chi, dtype=float)
        if chi.shape != (self.n_coefficients,):
            raise ComplianceError(
                f"expected {self.n_coefficients} compliance values, got {chi.shape}"
            )
        return chi[self.active_indices(q)]


def generalized_torques(linearization: "Linearization", load: np.ndarray) -> np.ndarray:
    """Torque on each compliant coordinate from a flange wrench (N mm)."""
    return linearization.jac_flange_theta.T @ np.asarray(load, dtype=float)


def solve_deflections(
    model: "SerialManipulator",
    q: np.ndarray,
    chi: np.ndarray,
    load: np.ndarray,
    params: Optional[np.ndarray] = None,
    base=None,
    tol: float = 1e-14,
    max_iter: int = 60,
) -> np.ndarray:
    """Elastic deflections under a flange wrench, theta = k * tau(theta).

    The torque depends on the deflected posture, so the relation is solved
    as a fixed point starting from the rigid posture.  Deflections are tiny
    compared to joint motions, making the iteration strongly contractive.
    """
    comp = model.compliance
    if comp is None:
        raise ComplianceError(f"model {model.name!r} declares no compliance")
    load = np.asarray(load, dtype=float)
    k = comp.stiffness_vector(chi, q)
    theta = np.zeros(model.n_theta)
    if not np.any(load):
        return theta
    for _ in range(max_iter):
        lin = model.linearize(q, params, theta, base)
        theta_new = k * generalized_torques(lin, load)
        if np.max(np.abs(theta_new - theta)) < tol:
            return theta_new
        theta = theta_new
    raise ComplianceError("deflection fixed point did not converge")


def elastic_regressor(
    linearization: "Linearization",
    compliance: ComplianceModel,
    q: np.ndarray,
    load: np.ndarray,
) -> np.ndarray:
    """Regressor mapping compliance values to stacked marker displacements.

    Column c collects, over the coordinates where coefficient c is active,
    the marker displacement per unit deflection times the generalized
    torque, so that ``regressor @ chi`` reproduces the elastic marker
    displacement to first order.  Shape (3 * n_markers, n_coefficients).
    """
    torques = generalized_torques(linearization, load)
    active = compliance.active_indices(q)
    n_rows = 3 * linearization.markers.shape[0]
    out = np.zeros((n_rows, compliance.n_coefficients))
    for t, coeff_index in enumerate(active):
        column = linearization.jac_marker_theta[:, :, t] * torques[t]
        out[:, coeff_index] += column.reshape(-1)
    return out
