"""Synthetic experiments: simulated measurements and Monte-Carlo studies.

A scenario bundles a model, an injected ground truth (parameter errors,
compliances, base placement), a configuration source, a load case and
noise settings.  Configurations are drawn once per scenario from the
scenario seed; each trial re-derives its own noise stream from
``(seed, trial)``, so runs are reproducible bit for bit and two noise
levels can share identical normalized draws.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .chain import SerialManipulator
from .compliance import solve_deflections
from .identify import (
    IdentifiabilityError,
    IdentificationResult,
    IdentifyOptions,
    identify_fullpose,
    identify_iterative,
)
from .measurements import MeasurementSet, Observation
from .models import STANDARD_GRAVITY
from .transforms import RigidTransform

#: a Monte-Carlo run aborts if more than this fraction of trials fail
FAILURE_BUDGET = 0.01


@dataclass(frozen=True)
class LoadCase:
    """A mass hung from the tool at a flange-frame attachment point.

    The resulting wrench (vertical gravity force, torque about the
    flange-frame origin) is evaluated at the unloaded pose and treated as
    the applied load for both simulation and identification.
    """

    mass_kg: float
    attachment: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def wrench(self, flange: RigidTransform) -> np.ndarray:
        force = np.array([0.0, 0.0, -self.mass_kg * STANDARD_GRAVITY])
        arm = flange.rotation @ np.asarray(self.attachment, dtype=float)
        return np.concatenate([force, np.cross(arm, force)])


@dataclass
class ExperimentScenario:
    """Everything needed to simulate and identify one synthetic study."""

    model: SerialManipulator
    name: str = "scenario"
    kind: str = "comparison"  # "comparison" | "elastostatic"
    seed: int = 0
    trials: int = 1
    noise_std: float = 0.0  # mm, i.i.d. per marker coordinate
    configurations: Optional[np.ndarray] = None  # explicit (m, dof), rad
    n_configurations: int = 3
    joint_ranges: Optional[np.ndarray] = None  # (dof, 2) rad for random draws
    truth_delta_params: Optional[np.ndarray] = None  # internal units
    truth_chi_display: Optional[np.ndarray] = None  # model display units
    truth_base: RigidTransform = field(default_factory=RigidTransform.identity)
    load: Optional[LoadCase] = None
    free_params: Optional[Sequence[str]] = None
    estimate_base_tool: bool = False
    fit_compliance: bool = False
    differential: bool = False
    orientation_weight: Optional[float] = None
    max_iter: int = 20
    tol: float = 1e-9

    def __post_init__(self):
        if self.kind not in ("comparison", "elastostatic"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.truth_delta_params is None:
            self.truth_delta_params = np.zeros(self.model.n_params)
        else:
            self.truth_delta_params = np.asarray(self.truth_delta_params, dtype=float)
        if self.configurations is not None:
            self.configurations = np.asarray(self.configurations, dtype=float)

    # -- ground truth -------------------------------------------------

    @property
    def true_params(self) -> np.ndarray:
        return self.model.param_nominal + self.truth_delta_params

    @property
    def true_chi(self) -> np.ndarray:
        """Injected compliances in internal units (rad per N mm)."""
        comp = self.model.compliance
        if comp is None or self.truth_chi_display is None:
            return np.zeros(0 if comp is None else comp.n_coefficients)
        chi = np.asarray(self.truth_chi_display, dtype=float) * comp.display_scale
        if chi.shape != (comp.n_coefficients,):
            raise ValueError("truth_chi_display length does not match the model")
        return chi

    def resolve_configurations(self) -> np.ndarray:
        """Explicit configurations, or a seed-pinned uniform random draw."""
        if self.configurations is not None:
            return self.configurations
        ranges = self.joint_ranges
        if ranges is None:
            ranges = self.model.joint_limits
        if ranges is None:
            raise ValueError("random configurations need joint ranges")
        ranges = np.asarray(ranges, dtype=float)
        rng = np.random.default_rng([self.seed, 0])
        return rng.uniform(
            ranges[:, 0], ranges[:, 1], size=(self.n_configurations, self.model.dof)
        )

    def identify_options(self, approach: str) -> IdentifyOptions:
        return IdentifyOptions(
            max_iter=self.max_iter,
            tol=self.tol,
            estimate_base_tool=self.estimate_base_tool and approach == "partial",
            base=None if self.estimate_base_tool else self.truth_base,
            free_params=self.free_params,
            fit_compliance=self.fit_compliance,
            differential=self.differential and approach == "partial",
            orientation_weight=self.orientation_weight,
        )


def simulate_measurements(
    scenario: ExperimentScenario,
    trial: int = 1,
    configurations: Optional[np.ndarray] = None,
) -> MeasurementSet:
    """Exact forward simulation with the injected truth plus sensor noise.

    Deflections under load follow the full nonlinear model (fixed-point
    solve, load held at its unloaded-pose value).  Noise is sigma times a
    standard-normal draw from ``default_rng([seed, trial])``, so datasets
    for two sigma values with the same trial index differ only by scale.
    """
    if trial < 1:
        raise ValueError("trial must be >= 1 (stream 0 is reserved for configuration draws)")
    model = scenario.model
    configs = (
        scenario.resolve_configurations() if configurations is None else configurations
    )
    rng = np.random.default_rng([scenario.seed, int(trial)])
    params = scenario.true_params
    chi = scenario.true_chi
    base = scenario.truth_base
    two_phase = scenario.kind == "elastostatic"
    observations: List[Observation] = []
    for i, q in enumerate(configs):
        config_id = f"C{i + 1:03d}"
        noise = scenario.noise_std * rng.standard_normal((model.n_markers, 3))
        rigid = model.fk(q, params, None, base)
        observations.append(
            Observation(config_id, q, rigid.markers + noise, None, "pre")
        )
        if two_phase:
            if scenario.load is None:
                raise ValueError("elastostatic scenario needs a load case")
            wrench = scenario.load.wrench(rigid.flange)
            theta = solve_deflections(model, q, chi, wrench, params=params, base=base)
            loaded = model.fk(q, params, theta, base)
            noise = scenario.noise_std * rng.standard_normal((model.n_markers, 3))
            observations.append(
                Observation(config_id, q, loaded.markers + noise, wrench, "post")
            )
    return MeasurementSet(observations)


@dataclass
class TrialStatistics:
    """Per-parameter Monte-Carlo statistics for one estimator."""

    approach: str
    labels: List[str]
    truth: np.ndarray
    mean: np.ndarray
    std: Optional[np.ndarray]
    n_trials: int
    n_failures: int
    n_equations: int


@dataclass
class ComparisonResult:
    """Side-by-side Monte-Carlo statistics of the two estimators."""

    name: str
    labels: List[str]
    fullpose: TrialStatistics
    partial: TrialStatistics
    improvement: np.ndarray  # std(fullpose) / std(partial); NaN where undefined
    configurations: np.ndarray
    noise_std: float
    trials: int
    seed: int


def _check_failures(n_failures: int, trials: int, approach: str) -> None:
    if n_failures > FAILURE_BUDGET * trials:
        raise RuntimeError(
            f"{approach}: {n_failures}/{trials} trials failed, "
            f"exceeding the {FAILURE_BUDGET:.0%} failure budget"
        )


def _statistics(approach, labels, truth, estimates, trials, failures, n_equations):
    stack = np.asarray(estimates)
    mean = stack.mean(axis=0)
    std = stack.std(axis=0, ddof=1) if stack.shape[0] > 1 else None
    return TrialStatistics(
        approach=approach,
        labels=labels,
        truth=truth,
        mean=mean,
        std=std,
        n_trials=stack.shape[0],
        n_failures=failures,
        n_equations=n_equations,
    )


def run_comparison(scenario: ExperimentScenario) -> ComparisonResult:
    """Monte-Carlo comparison of the two estimators on identical data.

    Each trial simulates one noisy dataset and runs both estimators on
    it; per-parameter means and standard deviations are aggregated, and
    the improvement factor is std(full-pose) / std(partial).  Failed
    trials (rank deficiency, non-convergence) are excluded and counted;
    more than 1 % failures aborts the run.
    """
    model = scenario.model
    free = scenario.identify_options("partial").resolve_free(model)
    labels = [model.param_names[i] for i in free]
    truth = scenario.truth_delta_params[free]
    configs = scenario.resolve_configurations()
    opts_partial = scenario.identify_options("partial")
    opts_full = scenario.identify_options("fullpose")
    collected = {"fullpose": [], "partial": []}
    failures = {"fullpose": 0, "partial": 0}
    n_equations = {"fullpose": 0, "partial": 0}
    for trial in range(1, scenario.trials + 1):
        measurements = simulate_measurements(scenario, trial, configs)
        for approach, runner, opts in (
            ("fullpose", identify_fullpose, opts_full),
            ("partial", identify_iterative, opts_partial),
        ):
            try:
                result = runner(model, measurements, opts)
            except (IdentifiabilityError, np.linalg.LinAlgError):
                failures[approach] += 1
                continue
            if not result.converged:
                failures[approach] += 1
                continue
            collected[approach].append(result.delta_params[free])
            n_equations[approach] = result.n_equations
    for approach in ("fullpose", "partial"):
        _check_failures(failures[approach], scenario.trials, approach)
    stats = {
        approach: _statistics(
            approach,
            labels,
            truth,
            collected[approach],
            scenario.trials,
            failures[approach],
            n_equations[approach],
        )
        for approach in ("fullpose", "partial")
    }
    if (
        scenario.noise_std > 0
        and stats["fullpose"].std is not None
        and stats["partial"].std is not None
    ):
        with np.errstate(divide="ignore", invalid="ignore"):
            improvement = stats["fullpose"].std / stats["partial"].std
    else:
        improvement = np.full(len(labels), np.nan)
    return ComparisonResult(
        name=scenario.name,
        labels=labels,
        fullpose=stats["fullpose"],
        partial=stats["partial"],
        improvement=improvement,
        configurations=configs,
        noise_std=scenario.noise_std,
        trials=scenario.trials,
        seed=scenario.seed,
    )


def elastostatic_experiment(
    scenario: ExperimentScenario,
) -> Tuple[IdentificationResult, Optional[TrialStatistics]]:
    """Loaded/unloaded identification of the compliance coefficients.

    Returns the identification of trial 1 (whose covariance provides the
    per-coefficient uncertainties) plus Monte-Carlo statistics over the
    scenario's trials when more than one is requested.  Compliance values
    in the statistics are in the model's display unit.
    """
    if scenario.kind != "elastostatic":
        raise ValueError("elastostatic_experiment needs an elastostatic scenario")
    model = scenario.model
    comp = model.compliance
    if comp is None:
        raise ValueError("the scenario model declares no compliance")
    configs = scenario.resolve_configurations()
    options = scenario.identify_options("partial")
    first_result: Optional[IdentificationResult] = None
    estimates = []
    failures = 0
    n_equations = 0
    for trial in range(1, scenario.trials + 1):
        measurements = simulate_measurements(scenario, trial, configs)
        try:
            result = identify_iterative(model, measurements, options)
        except (IdentifiabilityError, np.linalg.LinAlgError):
            failures += 1
            continue
        if trial == 1:
            first_result = result
        if not result.converged:
            failures += 1
            continue
        estimates.append(result.chi / comp.display_scale)
        n_equations = result.n_equations
    _check_failures(failures, scenario.trials, "partial")
    if first_result is None:
        raise RuntimeError("the first trial failed; nothing to report")
    stats = None
    if len(estimates) > 1:
        truth = (
            np.asarray(scenario.truth_chi_display, dtype=float)
            if scenario.truth_chi_display is not None
            else np.zeros(comp.n_coefficients)
        )
        stats = _statistics(
            "partial", comp.names, truth, estimates, scenario.trials, failures, n_equations
        )
    return first_result, stats


def scenario_with(scenario: ExperimentScenario, **changes) -> ExperimentScenario:
    """A copy of the scenario with selected fields replaced."""
    return dataclasses.replace(scenario, **changes)
