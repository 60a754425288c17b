"""Observation and measurement-set validation and pairing."""

import numpy as np
import pytest

from markercal.measurements import MeasurementSet, Observation, from_arrays

TRIAD = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])


def obs(config_id="C1", phase="pre", load=None, q=(0.1, 0.2)):
    return Observation(config_id, np.array(q), TRIAD.copy(), load, phase)


def test_pre_phase_must_be_unloaded():
    with pytest.raises(ValueError, match="wrench"):
        obs(phase="pre", load=np.array([0, 0, -10.0, 0, 0, 0]))


def test_post_phase_carries_wrench():
    loaded = obs(phase="post", load=np.array([0, 0, -10.0, 0, 0, 0]))
    assert loaded.load[2] == -10.0


def test_missing_load_defaults_to_zero_wrench():
    assert np.all(obs().load == 0.0)


def test_bad_phase_and_shapes_rejected():
    with pytest.raises(ValueError, match="phase"):
        obs(phase="during")
    with pytest.raises(ValueError, match="markers"):
        Observation("C1", np.zeros(2), np.zeros((3, 2)))
    with pytest.raises(ValueError, match="6-vector"):
        obs(phase="post", load=np.array([1.0, 2.0]))


def test_measurement_set_rejects_mixed_shapes():
    with pytest.raises(ValueError, match="joint"):
        MeasurementSet([obs("C1"), Observation("C2", np.zeros(3), TRIAD)])
    with pytest.raises(ValueError, match="markers"):
        MeasurementSet([obs("C1"), Observation("C2", np.zeros(2), TRIAD[:3].repeat(2, 0))])


def test_measurement_set_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        MeasurementSet([obs("C1"), obs("C1")])
    # same id with different phases is allowed
    paired = MeasurementSet(
        [obs("C1"), obs("C1", phase="post", load=np.array([0, 0, -1.0, 0, 0, 0]))]
    )
    assert len(paired) == 2


def test_phase_filter_and_pairing():
    wrench = np.array([0, 0, -5.0, 0, 0, 0])
    ms = MeasurementSet(
        [
            obs("C1"),
            obs("C2"),
            obs("C1", phase="post", load=wrench),
            obs("C2", phase="post", load=wrench),
        ]
    )
    assert [o.config_id for o in ms.phase("pre")] == ["C1", "C2"]
    pairs = ms.paired()
    assert [(a.config_id, b.config_id) for a, b in pairs] == [("C1", "C1"), ("C2", "C2")]
    for pre, post in pairs:
        assert pre.phase == "pre" and post.phase == "post"


def test_pairing_requires_matching_joint_values():
    wrench = np.array([0, 0, -5.0, 0, 0, 0])
    ms = MeasurementSet(
        [obs("C1", q=(0.1, 0.2)), obs("C1", phase="post", load=wrench, q=(0.1, 0.3))]
    )
    with pytest.raises(ValueError, match="joint"):
        ms.paired()


def test_loaded_observation_without_pre_partner_rejected():
    wrench = np.array([0, 0, -5.0, 0, 0, 0])
    ms = MeasurementSet([obs("C1"), obs("C9", phase="post", load=wrench)])
    with pytest.raises(ValueError, match="C9"):
        ms.paired()


def test_from_arrays_builds_consistent_set(rng):
    q = rng.uniform(-1, 1, (4, 3))
    markers = rng.normal(size=(4, 3, 3))
    ms = from_arrays(q, markers)
    assert len(ms) == 4
    assert ms.observations[0].phase == "pre"
    assert np.allclose(ms.observations[2].q, q[2])
    assert np.allclose(ms.observations[2].markers, markers[2])
