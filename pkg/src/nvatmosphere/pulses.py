"""Pulse segments, sequences and the simulated experiments built from them."""

from __future__ import annotations

import dataclasses
import enum
import math
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from . import spin
from .params import MWStep, PhysicalParams


class PulseError(ValueError):
    pass


class RfMode(str, enum.Enum):
    IDEAL = "ideal"
    DRIVEN = "driven"


class PulseModel(str, enum.Enum):
    """How detection pulses are realised in ``run_ramsey``."""

    FINITE = "finite"  # driven at the per-step Rabi rate for t_pi/2
    IDEAL = "ideal"  # instantaneous, perfectly manifold-selective


class TraceKind(str, enum.Enum):
    PROBABILITY = "probability"
    COUNTS = "counts"


# --- segments -------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class LaserInit:
    p: float

    def __post_init__(self):
        if not math.isfinite(self.p) or abs(self.p) > 1:
            raise PulseError(f"laser polarization must lie in [-1, 1], got {self.p}")


@dataclasses.dataclass(frozen=True)
class RfRotation:
    theta: float
    mode: RfMode = RfMode.IDEAL

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise PulseError("RF angle must be finite")
        object.__setattr__(self, "mode", RfMode(self.mode))


@dataclasses.dataclass(frozen=True)
class MwPulse:
    step: MWStep
    duration: float  # ns
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "step", MWStep.parse(self.step))
        if not math.isfinite(self.duration) or self.duration < 0:
            raise PulseError(f"MW duration must be a non-negative number, got {self.duration}")
        if not math.isfinite(self.phase):
            raise PulseError("MW phase must be finite")


@dataclasses.dataclass(frozen=True)
class FreeEvolution:
    tau: float  # µs

    def __post_init__(self):
        if not math.isfinite(self.tau) or self.tau < 0:
            raise PulseError(f"free evolution time must be a non-negative number, got {self.tau}")


@dataclasses.dataclass(frozen=True)
class Readout:
    pass


PulseSegment = Union[LaserInit, RfRotation, MwPulse, FreeEvolution, Readout]


@dataclasses.dataclass(frozen=True)
class PulseSequence:
    segments: tuple[PulseSegment, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for i, seg in enumerate(self.segments):
            if isinstance(seg, Readout) and i != len(self.segments) - 1:
                raise PulseError("readout must be the last segment")

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)


# --- traces ---------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class TimeTrace:
    """Sampled signal on a uniform grid.

    ``tau_grid`` is normally the Ramsey wait in µs; calibration sweeps reuse the
    container with a different ``axis`` label (``dur_ns``, ``freq_mhz``, ``rf_us``).
    """

    step: MWStep | None
    tau_grid: NDArray[np.float64]
    values: NDArray[np.float64]
    kind: TraceKind = TraceKind.PROBABILITY
    shots: int = 0
    seed: int | None = None
    axis: str = "tau_us"

    def __post_init__(self):
        grid = np.asarray(self.tau_grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "tau_grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", TraceKind(self.kind))
        if self.step is not None:
            object.__setattr__(self, "step", MWStep.parse(self.step))
        check_grid(grid)
        if values.shape != grid.shape:
            raise PulseError("values and grid lengths differ")
        if self.kind is TraceKind.PROBABILITY and np.any((values < -1e-9) | (values > 1 + 1e-9)):
            raise PulseError("probability trace outside [0, 1]")

    @property
    def spacing(self) -> float:
        return float(self.tau_grid[1] - self.tau_grid[0]) if len(self.tau_grid) > 1 else 0.0

    def to_csv(self) -> str:
        step = self.step.value if self.step is not None else "none"
        lines = [f"# step={step} shots={self.shots} seed={self.seed} kind={self.kind.value}",
                 f"{self.axis},value"]
        lines += [f"{t:.12g},{v:.12g}" for t, v in zip(self.tau_grid, self.values)]
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str) -> "TimeTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise PulseError("missing trace metadata header")
        meta = dict(item.split("=", 1) for item in lines[0][1:].split())
        axis = lines[1].split(",")[0]
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]]).reshape(-1, 2)
        return cls(
            step=None if meta["step"] == "none" else MWStep(meta["step"]),
            tau_grid=rows[:, 0],
            values=rows[:, 1],
            kind=TraceKind(meta["kind"]),
            shots=int(meta["shots"]),
            seed=None if meta["seed"] == "None" else int(meta["seed"]),
            axis=axis,
        )


def check_grid(grid: NDArray[np.float64]) -> None:
    """Grids must be finite, strictly increasing and uniform to 1e-12 relative."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise PulseError("grid must be a non-empty 1-D array")
    if not np.all(np.isfinite(grid)):
        raise PulseError("grid contains non-finite values")
    if grid.size > 1:
        d = np.diff(grid)
        if np.any(d <= 0):
            raise PulseError("grid must be strictly increasing")
        if np.max(np.abs(d - d[0])) > 1e-12 * max(1.0, abs(grid).max()):
            raise PulseError("grid must be uniformly spaced")


def uniform_grid(step: float, stop: float, start: float = 0.0) -> NDArray[np.float64]:
    """Uniform grid ``start, start+step, ..., <= stop`` without float drift."""
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


# --- segment execution ----------------------------------------------------


def apply_segment(rho: spin.ComplexMatrix, seg: PulseSegment, params: PhysicalParams,
                  include_transverse: bool = False,
                  dephasing: spin.DephasingShape | str = spin.DephasingShape.EXPONENTIAL,
                  frame: MWStep | str = MWStep.MW1) -> spin.ComplexMatrix:
    """Apply one segment. Free evolution uses the rotating frame of ``frame``
    (the step of the most recent MW pulse when run via ``run_sequence``)."""
    if isinstance(seg, LaserInit):
        return spin.initial_state(seg.p)
    if isinstance(seg, RfRotation):
        if seg.mode is RfMode.IDEAL:
            u = spin.nuclear_rotation(seg.theta)
            return u @ rho @ u.conj().T
        duration = abs(seg.theta) * params.rf_pi / math.pi
        phase = 0.0 if seg.theta >= 0 else math.pi
        h = spin.nuclear_drive_hamiltonian(params, phase=phase - math.pi / 2)
        return spin.propagate_unitary(rho, h, duration)
    if isinstance(seg, MwPulse):
        h = spin.build_driven_hamiltonian(params, seg.step, phase=seg.phase,
                                          include_transverse=include_transverse)
        return spin.propagate_unitary(rho, h, seg.duration * 1e-3)
    if isinstance(seg, FreeEvolution):
        h = spin.build_free_hamiltonian(params, frame, include_transverse)
        out = spin.propagate_unitary(rho, h, seg.tau)
        return spin.apply_dephasing(out, seg.tau, params.t2_star, dephasing)
    if isinstance(seg, Readout):
        return rho
    raise PulseError(f"malformed segment {seg!r}")


def run_sequence(seq: PulseSequence | Iterable[PulseSegment], params: PhysicalParams,
                 rho: spin.ComplexMatrix | None = None, **kwargs) -> spin.ComplexMatrix:
    """Execute a sequence and return the final density matrix."""
    if rho is None:
        rho = spin.initial_state(params.p0)
    frame = MWStep.MW1
    for seg in seq:
        if isinstance(seg, MwPulse):
            frame = seg.step
        rho = apply_segment(rho, seg, params, frame=frame, **kwargs)
    return rho


def ramsey_sequence(params: PhysicalParams, theta: float, step: MWStep | str, tau: float,
                    rf_mode: RfMode | str = RfMode.IDEAL) -> PulseSequence:
    half_pi = params.mw_pi(step) / 2
    return PulseSequence(
        (LaserInit(params.p0), RfRotation(theta, RfMode(rf_mode)), MwPulse(step, half_pi, 0.0),
         FreeEvolution(tau), MwPulse(step, half_pi, 0.0), Readout()),
        name=f"ramsey-{MWStep.parse(step).value}",
    )


# --- experiments ----------------------------------------------------------


def _prepared(params: PhysicalParams, theta: float, rf_mode: RfMode | str, p: float | None = None):
    rho = spin.initial_state(params.p0 if p is None else p)
    return apply_segment(rho, RfRotation(theta, RfMode(rf_mode)), params)


def _zero_population(rhos: NDArray[np.complex128]) -> NDArray[np.float64]:
    pop = np.real(rhos[..., 0, 0] + rhos[..., 1, 1])
    return np.clip(pop, 0.0, 1.0)


def run_ramsey(params: PhysicalParams, theta: float, mw_step: MWStep | str,
               tau_grid: Sequence[float], *, rf_mode: RfMode | str = RfMode.IDEAL,
               pulse_model: PulseModel | str = PulseModel.FINITE,
               include_transverse: bool = False,
               dephasing: spin.DephasingShape | str = spin.DephasingShape.EXPONENTIAL,
               p: float | None = None) -> TimeTrace:
    """Noiseless two-pulse Ramsey trace: population of ms=0 versus τ.

    ``p`` overrides the laser polarization (``params.p0``), e.g. for the fully
    polarized artifact calibration.
    """
    step = MWStep.parse(mw_step)
    tau = np.asarray(tau_grid, dtype=float)
    check_grid(tau)
    if tau[0] < 0:
        raise PulseError("negative τ in grid")

    rho = _prepared(params, theta, rf_mode, p)
    if PulseModel(pulse_model) is PulseModel.FINITE:
        h_mw = spin.build_driven_hamiltonian(params, step, include_transverse=include_transverse)
        u_half = spin.propagator(h_mw, params.mw_pi(step) / 2 * 1e-3)
    else:
        u_half = spin.selective_mw_rotation(math.pi / 2, 0 if step is MWStep.MW1 else 1)
    rho = u_half @ rho @ u_half.conj().T

    h_free = spin.build_free_hamiltonian(params, step, include_transverse)
    us = spin.propagators(h_free, tau)
    rhos = us @ rho @ us.conj().transpose(0, 2, 1)
    damp = spin.dephasing_factor(tau, params.t2_star, dephasing)
    mask = spin._ELECTRON_COHERENCE
    rhos = np.where(mask, rhos * damp[:, None, None], rhos)
    rhos = u_half @ rhos @ u_half.conj().T
    return TimeTrace(step, tau, _zero_population(rhos))


def run_rabi(params: PhysicalParams, mw_step: MWStep | str, duration_grid: Sequence[float], *,
             theta: float = 0.0, resonant: bool = True,
             rf_mode: RfMode | str = RfMode.IDEAL) -> TimeTrace:
    """Electron Rabi nutation; durations in ns.

    With ``resonant`` the drive sits exactly on f1 (MW1) or f2 (MW2), as in the
    π-duration calibration; otherwise the detection detuning is kept.
    """
    step = MWStep.parse(mw_step)
    durations = np.asarray(duration_grid, dtype=float)
    check_grid(durations)
    if durations[0] < 0:
        raise PulseError("negative duration in grid")
    p = params.replace(detune1=0.0, detune2=0.0) if resonant else params
    rho = _prepared(p, theta, rf_mode)
    h = spin.build_driven_hamiltonian(p, step)
    us = spin.propagators(h, durations * 1e-3)
    rhos = us @ rho @ us.conj().transpose(0, 2, 1)
    return TimeTrace(step, durations, _zero_population(rhos), axis="dur_ns")


def run_nuclear_rabi(params: PhysicalParams, rf_duration_grid: Sequence[float]) -> TimeTrace:
    """Nuclear nutation under a resonant RF drive; durations in µs.

    Values are the nuclear ↑ population (1 + P) / 2.
    """
    durations = np.asarray(rf_duration_grid, dtype=float)
    check_grid(durations)
    if durations[0] < 0:
        raise PulseError("negative duration in grid")
    rho = spin.initial_state(params.p0)
    h = spin.nuclear_drive_hamiltonian(params, phase=-math.pi / 2)
    us = spin.propagators(h, durations)
    rhos = us @ rho @ us.conj().transpose(0, 2, 1)
    up = np.real(rhos[:, 0, 0] + rhos[:, 2, 2])
    return TimeTrace(None, durations, np.clip(up, 0.0, 1.0), axis="rf_us")


def run_odmr(params: PhysicalParams, freq_grid: Sequence[float], theta: float = 0.0, *,
             rabi: float = 0.2, duration: float = 2.5,
             rf_mode: RfMode | str = RfMode.IDEAL) -> TimeTrace:
    """Pulsed ODMR: a long weak MW pulse (``duration`` µs, ``rabi`` MHz) swept in frequency."""
    freqs = np.asarray(freq_grid, dtype=float)
    check_grid(freqs)
    rho = _prepared(params, theta, rf_mode)
    pops = np.empty(freqs.size)
    for i, f in enumerate(freqs):
        h = spin.add_drive(spin.free_hamiltonian_at(params, f), rabi)
        pops[i] = _zero_population(spin.propagate_unitary(rho, h, duration))
    return TimeTrace(None, freqs, pops, axis="freq_mhz")
