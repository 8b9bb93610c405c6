"""Calibration runs: ODMR dips, electron and nuclear π durations, MW artifact."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import analysis, pulses
from .params import MWStep, PhysicalParams
from .pulses import TimeTrace


def first_minimum(trace: TimeTrace) -> float:
    """Grid position of the first local minimum (the π time of a nutation)."""
    v = trace.values
    for i in range(1, v.size - 1):
        if v[i] <= v[i - 1] and v[i] < v[i + 1]:
            return float(trace.tau_grid[i])
    return float(trace.tau_grid[np.argmin(v)])


def dip_position(trace: TimeTrace) -> float:
    return float(trace.tau_grid[np.argmin(trace.values)])


@dataclasses.dataclass(frozen=True)
class CalibrationResult:
    f1: float
    f2: float
    mw_pi_f1: float
    mw_pi_f2: float
    rf_pi: float
    artifact: analysis.ArtifactCalibration
    traces: dict[str, TimeTrace] = dataclasses.field(repr=False, compare=False)

    def to_text(self) -> str:
        return "\n".join([
            f"f1_mhz: {self.f1:.9g}",
            f"f2_mhz: {self.f2:.9g}",
            f"mw_pi_f1_ns: {self.mw_pi_f1:.9g}",
            f"mw_pi_f2_ns: {self.mw_pi_f2:.9g}",
            f"rf_pi_us: {self.rf_pi:.9g}",
            f"epsilon_plus: {self.artifact.eps_plus:.9g}",
            f"epsilon_minus: {self.artifact.eps_minus:.9g}",
            f"epsilon: {self.artifact.epsilon:.9g}",
        ]) + "\n"


def calibrate(params: PhysicalParams, settings: analysis.PipelineSettings | None = None, *,
              freq_step: float = 0.1, dur_step_ns: float = 2.0, rf_step_us: float = 0.5) -> CalibrationResult:
    """Locate f1/f2 by ODMR, π durations by nutation, and the MW cross-talk fraction."""
    settings = settings or analysis.PipelineSettings()
    lo = math.floor(params.f2 - 10)
    hi = math.ceil(params.f1 + 10)
    freqs = pulses.uniform_grid(freq_step, hi, start=lo)
    odmr_up = pulses.run_odmr(params, freqs, theta=0.0)
    odmr_down = pulses.run_odmr(params, freqs, theta=math.pi)

    durs = pulses.uniform_grid(dur_step_ns, 3 * max(params.mw_pi_f1, params.mw_pi_f2))
    rabi1 = pulses.run_rabi(params, MWStep.MW1, durs, theta=0.0)
    # the f2 nutation needs the nuclear spin in ↓ first
    rabi2 = pulses.run_rabi(params, MWStep.MW2, durs, theta=math.pi)

    rf = pulses.uniform_grid(rf_step_us, 2.5 * params.rf_pi)
    nrabi = pulses.run_nuclear_rabi(params, rf)

    return CalibrationResult(
        f1=dip_position(odmr_up),
        f2=dip_position(odmr_down),
        mw_pi_f1=first_minimum(rabi1),
        mw_pi_f2=first_minimum(rabi2),
        rf_pi=first_minimum(nrabi),
        artifact=analysis.calibrate_power_broadening_artifact(params, settings),
        traces={"odmr_theta0": odmr_up, "odmr_thetapi": odmr_down, "rabi_mw1": rabi1,
                "rabi_mw2": rabi2, "nuclear_rabi": nrabi},
    )
