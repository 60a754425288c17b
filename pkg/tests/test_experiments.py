"""Synthetic-study engine: seeding discipline, load model, Monte-Carlo
statistics, and the two study kinds."""

import numpy as np
import pytest

from markercal.experiments import (
    ExperimentScenario,
    LoadCase,
    elastostatic_experiment,
    run_comparison,
    scenario_with,
    simulate_measurements,
)
from markercal.models import STANDARD_GRAVITY
from markercal.transforms import RigidTransform, rotation_vector_to_matrix

DEMO_TRUTH = np.array([3.0, 2.0, 5.0, np.deg2rad(1.0), np.deg2rad(0.5), np.deg2rad(2.0)])


def comparison_scenario(demo, **kwargs):
    defaults = dict(
        model=demo, seed=424242, trials=40, noise_std=0.01,
        truth_delta_params=DEMO_TRUTH.copy(),
    )
    defaults.update(kwargs)
    return ExperimentScenario(**defaults)


def test_configurations_drawn_once_per_scenario(demo):
    scenario = comparison_scenario(demo)
    a = scenario.resolve_configurations()
    b = scenario.resolve_configurations()
    assert np.array_equal(a, b)
    assert a.shape == (3, demo.dof)
    lo, hi = demo.joint_limits[:, 0], demo.joint_limits[:, 1]
    assert np.all(a >= lo) and np.all(a <= hi)


def test_same_trial_same_bytes_different_trials_differ(demo):
    scenario = comparison_scenario(demo)
    a = simulate_measurements(scenario, trial=7)
    b = simulate_measurements(scenario, trial=7)
    c = simulate_measurements(scenario, trial=8)
    for x, y in zip(a, b):
        assert np.array_equal(x.markers, y.markers)
    assert any(
        not np.array_equal(x.markers, y.markers) for x, y in zip(a, c)
    )


def test_trial_zero_is_reserved(demo):
    scenario = comparison_scenario(demo)
    with pytest.raises(ValueError, match="trial"):
        simulate_measurements(scenario, trial=0)


def test_noise_is_scaled_shared_draw(demo):
    """sigma and sigma/2 datasets of the same trial share the underlying
    standard-normal draw, so their deviations differ by exactly 2x."""
    scenario = comparison_scenario(demo)
    half = scenario_with(scenario, noise_std=scenario.noise_std / 2)
    clean = scenario_with(scenario, noise_std=0.0)
    a = simulate_measurements(scenario, trial=3)
    b = simulate_measurements(half, trial=3)
    c = simulate_measurements(clean, trial=3)
    for x, y, z in zip(a, b, c):
        assert np.allclose(x.markers - z.markers, 2 * (y.markers - z.markers), atol=1e-15)


def test_load_case_wrench_matches_hand_computation(rng):
    mass = 250.0
    attachment = np.array([400.0, 0.0, -300.0])
    case = LoadCase(mass_kg=mass, attachment=tuple(attachment))
    flange = RigidTransform(
        rotation_vector_to_matrix(rng.normal(size=3)), rng.normal(0, 500, 3)
    )
    wrench = case.wrench(flange)
    force = np.array([0.0, 0.0, -mass * STANDARD_GRAVITY])
    assert np.allclose(wrench[:3], force, atol=1e-12)
    arm = flange.rotation @ attachment
    assert np.allclose(wrench[3:], np.cross(arm, force), atol=1e-9)


def test_elastostatic_simulation_emits_paired_phases(industrial):
    chi = np.array([0.287, 0.277, 0.302, 0.293, 0.246, 0.416, 2.786, 3.483, 2.074])
    scenario = ExperimentScenario(
        model=industrial,
        kind="elastostatic",
        seed=99,
        noise_std=0.0,
        n_configurations=4,
        truth_chi_display=chi,
        load=LoadCase(mass_kg=250.0, attachment=(400.0, 0.0, -300.0)),
        free_params=(),
        fit_compliance=True,
        differential=True,
    )
    measurements = simulate_measurements(scenario, trial=1)
    pairs = measurements.paired()
    assert len(pairs) == 4
    for pre, post in pairs:
        assert not np.any(pre.load)
        assert pre.load is not post.load
        assert np.any(post.load)
        # loading must actually displace the markers
        assert np.max(np.abs(post.markers - pre.markers)) > 0.01


def test_comparison_runs_both_estimators_on_identical_data(demo):
    scenario = comparison_scenario(demo)
    result = run_comparison(scenario)
    assert result.labels == list(demo.param_names)
    assert result.fullpose.n_trials == result.partial.n_trials == scenario.trials
    assert result.fullpose.n_failures == 0 and result.partial.n_failures == 0
    assert result.fullpose.n_equations == 6 * 3
    assert result.partial.n_equations == 3 * 3 * 3
    assert np.all(np.isfinite(result.improvement))
    # estimates are unbiased within Monte-Carlo resolution
    for stats in (result.fullpose, result.partial):
        margin = 5.0 * stats.std / np.sqrt(stats.n_trials)
        assert np.all(np.abs(stats.mean - stats.truth) < margin)


def test_comparison_is_deterministic(demo):
    scenario = comparison_scenario(demo, trials=10)
    a = run_comparison(scenario)
    b = run_comparison(scenario)
    assert np.array_equal(a.fullpose.std, b.fullpose.std)
    assert np.array_equal(a.partial.std, b.partial.std)
    assert np.array_equal(a.improvement, b.improvement)


def test_single_trial_reports_no_spread(demo):
    scenario = comparison_scenario(demo, trials=1)
    result = run_comparison(scenario)
    assert result.fullpose.std is None and result.partial.std is None
    assert np.all(np.isnan(result.improvement))


def test_zero_noise_comparison_has_undefined_improvement(demo):
    scenario = comparison_scenario(demo, trials=3, noise_std=0.0)
    result = run_comparison(scenario)
    assert np.all(np.isnan(result.improvement))
    # both estimators hit the truth exactly on every trial
    assert np.max(np.abs(result.partial.mean - result.partial.truth)) < 1e-8
    assert np.max(np.abs(result.fullpose.mean - result.fullpose.truth)) < 1e-8


def test_failure_budget_aborts_run(demo):
    scenario = comparison_scenario(demo, trials=5, noise_std=5.0, max_iter=1, tol=1e-16)
    with pytest.raises(RuntimeError, match="failure budget"):
        run_comparison(scenario)


def test_scenario_with_replaces_fields(demo):
    scenario = comparison_scenario(demo)
    changed = scenario_with(scenario, trials=7, noise_std=0.5)
    assert changed.trials == 7 and changed.noise_std == 0.5
    assert scenario.trials == 40  # original untouched
    assert np.array_equal(
        changed.resolve_configurations(), scenario.resolve_configurations()
    )


def test_elastostatic_experiment_recovers_truth(industrial, rng):
    chi = np.array([0.287, 0.277, 0.302, 0.293, 0.246, 0.416, 2.786, 3.483, 2.074])
    base = RigidTransform.from_rotation_vector(
        [0.0528, 0.0022, -0.0156], [-34.4, -31.9, -97.8]
    )
    # every joint-2 compliance gate must see at least two postures,
    # otherwise its column is structurally absent from the regressor
    lo, hi = industrial.joint_limits[:, 0], industrial.joint_limits[:, 1]
    configurations = rng.uniform(lo, hi, size=(10, industrial.dof))
    configurations[:, 1] = np.deg2rad(
        [-5.0, -20.0, -45.0, -80.0, -120.0, -8.0, -25.0, -50.0, -90.0, -130.0]
    )
    scenario = ExperimentScenario(
        model=industrial,
        kind="elastostatic",
        seed=6,
        trials=1,
        noise_std=0.0,
        configurations=configurations,
        truth_chi_display=chi,
        truth_base=base,
        load=LoadCase(mass_kg=250.0, attachment=(400.0, 0.0, -300.0)),
        free_params=(),
        estimate_base_tool=True,
        fit_compliance=True,
        differential=True,
    )
    result, stats = elastostatic_experiment(scenario)
    assert result.converged
    truth_chi = chi * industrial.compliance.display_scale
    assert np.max(np.abs(result.chi - truth_chi) / truth_chi) < 1e-8
    assert stats is None  # single trial: no spread statistics


def test_invalid_scenarios_rejected(demo):
    with pytest.raises(ValueError):
        ExperimentScenario(model=demo, kind="nope")
    with pytest.raises(ValueError):
        ExperimentScenario(model=demo, noise_std=-0.1)
    with pytest.raises(ValueError):
        ExperimentScenario(model=demo, trials=0)
