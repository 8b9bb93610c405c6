"""Photon-count readout model and the grouped error-bar procedure."""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .pulses import TimeTrace, TraceKind


class MeasurementError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class ReadoutModel:
    """Poisson fluorescence model.

    rate_bright / rate_dark are mean photons per shot with the electron in
    ms=0 / ms=-1; ``shots`` is the number of repetitions per grid point.
    """

    rate_bright: float = 0.030
    rate_dark: float = 0.021
    shots: int = 600_000

    def __post_init__(self):
        if not (self.rate_bright > self.rate_dark > 0):
            raise MeasurementError("need rate_bright > rate_dark > 0")
        if int(self.shots) != self.shots or self.shots < 1:
            raise MeasurementError("shots must be a positive integer")
        object.__setattr__(self, "shots", int(self.shots))

    @property
    def contrast(self) -> float:
        return self.rate_bright - self.rate_dark

    def expected_counts(self, p):
        return self.shots * (self.rate_dark + self.contrast * np.asarray(p, dtype=float))

    def replace(self, **changes) -> "ReadoutModel":
        return dataclasses.replace(self, **changes)


def point_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator per (seed, grid index); schedule independent."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def sample_counts(prob_trace: TimeTrace, model: ReadoutModel, seed: int) -> TimeTrace:
    if prob_trace.kind is not TraceKind.PROBABILITY:
        raise MeasurementError("sample_counts needs a probability trace")
    mu = model.expected_counts(prob_trace.values)
    counts = np.array([point_rng(seed, i).poisson(m) for i, m in enumerate(mu)], dtype=float)
    return dataclasses.replace(prob_trace, values=counts, kind=TraceKind.COUNTS,
                               shots=model.shots, seed=int(seed))


def normalize_counts(counts: TimeTrace, model: ReadoutModel) -> TimeTrace:
    """Invert the readout model: p = (c/shots - dark) / (bright - dark), clamped."""
    if counts.kind is not TraceKind.COUNTS:
        raise MeasurementError("normalize_counts needs a counts trace")
    p = (counts.values / model.shots - model.rate_dark) / model.contrast
    return dataclasses.replace(counts, values=np.clip(p, 0.0, 1.0), kind=TraceKind.PROBABILITY)


def group_error_bars(values: Sequence[float], groups: int = 3) -> tuple[float, float]:
    """Mean of per-group estimates and its standard error (68.3 % interval)."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise MeasurementError("need at least two group estimates")
    if v.size != groups:
        raise MeasurementError(f"expected {groups} group estimates, got {v.size}")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
