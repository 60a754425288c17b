"""Measurement containers: joint configurations with measured marker positions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

PHASES = ("pre", "post")


@dataclass
class Observation:
    """Marker positions measured at one joint configuration.

    ``phase`` distinguishes measurements taken before ("pre", unloaded)
    and after ("post", loaded) applying an external wrench; purely
    geometric studies use a single "pre" observation per configuration.
    ``load`` is the flange wrench along world axes (N, N mm); zero for
    the pre phase.
    """

    config_id: str
    q: np.ndarray
    markers: np.ndarray
    load: Optional[np.ndarray] = None
    phase: str = "pre"

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.markers = np.asarray(self.markers, dtype=float)
        if self.markers.ndim != 2 or self.markers.shape[1] != 3:
            raise ValueError(f"configuration {self.config_id!r}: markers must be (m, 3)")
        if self.phase not in PHASES:
            raise ValueError(
                f"configuration {self.config_id!r}: phase must be one of {PHASES}"
            )
        if self.load is None:
            self.load = np.zeros(6)
        else:
            self.load = np.asarray(self.load, dtype=float)
            if self.load.shape != (6,):
                raise ValueError(f"configuration {self.config_id!r}: load must be a 6-vector")
        if self.phase == "pre" and np.any(self.load):
            raise ValueError(
                f"configuration {self.config_id!r}: pre-load phase carries a nonzero wrench"
            )

    @property
    def n_markers(self) -> int:
        return self.markers.shape[0]


@dataclass
class MeasurementSet:
    """A homogeneous collection of observations for one manipulator."""

    observations: List[Observation] = field(default_factory=list)

    def __post_init__(self):
        if not self.observations:
            return
        dof = self.observations[0].q.shape[0]
        m = self.observations[0].n_markers
        seen = set()
        for obs in self.observations:
            if obs.q.shape[0] != dof:
                raise ValueError(
                    f"configuration {obs.config_id!r} has {obs.q.shape[0]} joint values, "
                    f"expected {dof}"
                )
            if obs.n_markers != m:
                raise ValueError(
                    f"configuration {obs.config_id!r} has {obs.n_markers} markers, "
                    f"expected {m}"
                )
            key = (obs.config_id, obs.phase)
            if key in seen:
                raise ValueError(
                    f"duplicate observation for configuration {obs.config_id!r} "
                    f"phase {obs.phase!r}"
                )
            seen.add(key)

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations)

    def __getitem__(self, index: int) -> Observation:
        return self.observations[index]

    @property
    def dof(self) -> int:
        return self.observations[0].q.shape[0]

    @property
    def n_markers(self) -> int:
        return self.observations[0].n_markers

    def phase(self, phase: str) -> List[Observation]:
        return [obs for obs in self.observations if obs.phase == phase]

    def paired(self) -> List[Tuple[Observation, Observation]]:
        """(pre, post) pairs sharing a configuration id, in file order.

        Every post observation must have a matching pre observation at the
        same joint coordinates.
        """
        pre: Dict[str, Observation] = {obs.config_id: obs for obs in self.phase("pre")}
        pairs = []
        for obs in self.phase("post"):
            match = pre.get(obs.config_id)
            if match is None:
                raise ValueError(
                    f"configuration {obs.config_id!r} has a loaded observation "
                    f"but no unloaded baseline"
                )
            if not np.allclose(match.q, obs.q, atol=1e-12):
                raise ValueError(
                    f"configuration {obs.config_id!r}: joint values differ "
                    f"between load phases"
                )
            pairs.append((match, obs))
        return pairs


def from_arrays(
    q: np.ndarray,
    markers: np.ndarray,
    loads: Optional[np.ndarray] = None,
    phases: Optional[Sequence[str]] = None,
    config_ids: Optional[Sequence[str]] = None,
) -> MeasurementSet:
    """Bundle stacked arrays into a MeasurementSet.

    ``q`` is (n, dof), ``markers`` is (n, m, 3); optional ``loads`` (n, 6).
    """
    q = np.asarray(q, dtype=float)
    markers = np.asarray(markers, dtype=float)
    n = q.shape[0]
    if markers.shape[0] != n:
        raise ValueError("q and markers disagree on the number of observations")
    if config_ids is None:
        config_ids = [f"C{i + 1:03d}" for i in range(n)]
    if phases is None:
        phases = ["pre"] * n
    observations = []
    for i in range(n):
        load = None if loads is None else loads[i]
        observations.append(
            Observation(
                config_id=str(config_ids[i]),
                q=q[i],
                markers=markers[i],
                load=load,
                phase=phases[i],
            )
        )
    return MeasurementSet(observations)
