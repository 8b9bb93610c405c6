"""From Ramsey traces to field distributions, moments and the symmetry indicator."""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import special
from scipy.optimize import curve_fit

from . import measurement, pulses
from .params import MWStep, PhysicalParams
from .pulses import PulseModel, RfMode, TimeTrace

DIVERGENT = "divergent"


class AnalysisError(ValueError):
    pass


class Window(str, enum.Enum):
    NONE = "none"
    HANN = "hann"


class VarianceVariant(str, enum.Enum):
    STANDARD = "standard"
    PAPER_FORMULA = "paper_formula"


class FieldAnchor(str, enum.Enum):
    """Reference used to turn transition frequencies into fields.

    ``a_zz`` pins each step's own transition to ±a_zz/(2γe); ``midpoint``
    measures from (f1 + f2) / 2.
    """

    A_ZZ = "a_zz"
    MIDPOINT = "midpoint"


class Baseline(str, enum.Enum):
    NONE = "none"
    MEDIAN = "median"
    RICE = "rice"
    RICIAN = "rician"


@dataclasses.dataclass(frozen=True)
class PipelineSettings:
    dt_us: float = 0.05
    tau_max_us: float = 6.0
    window: Window = Window.NONE
    pad_factor: int = 8
    b_th: float = 0.178
    resolution: float = 0.05
    variance_variant: VarianceVariant = VarianceVariant.STANDARD
    anchor: FieldAnchor = FieldAnchor.A_ZZ
    baseline: Baseline = Baseline.RICE  # only applied to shot-noise traces
    pulse_model: PulseModel = PulseModel.FINITE
    rf_mode: RfMode = RfMode.IDEAL
    groups: int = 3
    subtract_artifact: bool = True

    def __post_init__(self):
        for name, enum_type in (("window", Window), ("variance_variant", VarianceVariant),
                                ("anchor", FieldAnchor), ("baseline", Baseline),
                                ("pulse_model", PulseModel), ("rf_mode", RfMode)):
            object.__setattr__(self, name, enum_type(getattr(self, name)))
        if not self.dt_us > 0 or not self.tau_max_us > self.dt_us:
            raise AnalysisError("need 0 < dt_us < tau_max_us")
        if int(self.pad_factor) != self.pad_factor or self.pad_factor < 1:
            raise AnalysisError("pad_factor must be an integer >= 1")
        if not self.b_th > 0 or not self.resolution >= 0:
            raise AnalysisError("b_th must be positive and resolution non-negative")
        if self.groups < 2:
            raise AnalysisError("need at least two groups for error bars")

    def tau_grid(self) -> NDArray[np.float64]:
        return pulses.uniform_grid(self.dt_us, self.tau_max_us)

    def check_sampling(self, params: PhysicalParams) -> None:
        """The a_zz/2 + detuning fringe must lie below Nyquist."""
        fmax = params.a_zz / 2 + max(abs(params.detune1), abs(params.detune2))
        if self.dt_us > 1 / (2 * fmax):
            raise AnalysisError(
                f"dt_us = {self.dt_us} undersamples fringes up to {fmax:.2f} MHz "
                f"(need dt_us <= {1 / (2 * fmax):.4f})")

    def replace(self, **changes) -> "PipelineSettings":
        return dataclasses.replace(self, **changes)


# --- spectra --------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class FrequencySpectrum:
    freqs: NDArray[np.float64]  # MHz, 0 .. 1/(2 dt)
    magnitude: NDArray[np.float64]
    step: MWStep | None = None

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def to_csv(self) -> str:
        rows = [f"{f:.12g},{m:.12g}" for f, m in zip(self.freqs, self.magnitude)]
        return "freq_mhz,magnitude\n" + "\n".join(rows) + "\n"


@dataclasses.dataclass(frozen=True)
class FieldSpectrum:
    """Field distribution f(B) on a uniform grid (Gauss)."""

    field_bins: NDArray[np.float64]
    weights: NDArray[np.float64]
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        b = np.asarray(self.field_bins, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "field_bins", b)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "provenance", tuple(self.provenance))
        if b.shape != w.shape or b.ndim != 1:
            raise AnalysisError("field bins and weights must be 1-D arrays of equal length")
        if np.any(w < 0):
            raise AnalysisError("field weights must be non-negative")
        if b.size > 1:
            d = np.diff(b)
            if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * max(1.0, np.abs(b).max()):
                raise AnalysisError("field bins must be uniform and increasing")

    @property
    def bin_width(self) -> float:
        return float(self.field_bins[1] - self.field_bins[0])

    def domain_mask(self, b_center: float, b_th: float) -> NDArray[np.bool_]:
        b = self.field_bins
        tol = 1e-12
        return (np.abs(b - b_center) <= b_th + tol) | (np.abs(b + b_center) <= b_th + tol)

    def window_masses(self, b_center: float, b_th: float) -> tuple[float, float]:
        """(mass around +b_center, mass around -b_center)."""
        b, w = self.field_bins, self.weights
        tol = 1e-12
        plus = float(w[np.abs(b - b_center) <= b_th + tol].sum())
        minus = float(w[np.abs(b + b_center) <= b_th + tol].sum())
        return plus, minus

    def norm(self, b_center: float, b_th: float) -> float:
        return float(self.weights[self.domain_mask(b_center, b_th)].sum())

    def to_csv(self) -> str:
        rows = [f"{b:.12g},{w:.12g}" for b, w in zip(self.field_bins, self.weights)]
        return "field_gauss,weight\n" + "\n".join(rows) + "\n"


def fft_spectrum(trace: TimeTrace, window: Window | str = Window.NONE,
                 pad_factor: int = 8) -> FrequencySpectrum:
    """Mean-subtracted, optionally Hann-windowed, zero-padded magnitude spectrum.

    Magnitudes are scaled so a unit-amplitude cosine on a full-length trace
    peaks near 1.
    """
    if int(pad_factor) != pad_factor or pad_factor < 1:
        raise AnalysisError("pad_factor must be an integer >= 1")
    pulses.check_grid(trace.tau_grid)
    n = trace.values.size
    if n < 2:
        raise AnalysisError("need at least two samples")
    dt = trace.spacing
    x = trace.values - trace.values.mean()
    w = np.hanning(n) if Window(window) is Window.HANN else np.ones(n)
    nfft = int(pad_factor) * n
    mag = np.abs(np.fft.rfft(x * w, nfft)) * 2.0 / w.sum()
    return FrequencySpectrum(np.fft.rfftfreq(nfft, dt), mag, trace.step)


def subtract_baseline(spec: FrequencySpectrum, method: Baseline | str = Baseline.MEDIAN) -> FrequencySpectrum:
    """Remove the white-noise floor of a magnitude spectrum.

    ``median`` subtracts the median magnitude. ``rice`` removes the noise power
    bin by bin, sqrt(max(|X|^2 - s^2, 0)). ``rician`` maps each magnitude back
    through the inverse of the Rician mean E|S + N| as a function of |S|.
    The mean noise power s^2 is estimated as median(|X|^2) / ln 2
    (exponential law of complex white noise).
    """
    method = Baseline(method)
    mag = spec.magnitude
    if method is Baseline.NONE:
        return spec
    noise_power = np.median(mag ** 2) / math.log(2)
    if method is Baseline.MEDIAN:
        out = np.clip(mag - np.median(mag), 0.0, None)
    elif method is Baseline.RICE:
        out = np.sqrt(np.clip(mag ** 2 - noise_power, 0.0, None))
    else:
        sigma = math.sqrt(noise_power / 2)
        out = sigma * _rician_amplitude(mag / sigma) if sigma > 0 else mag.copy()
    return dataclasses.replace(spec, magnitude=out)


_RICE_B = np.linspace(0.0, 40.0, 4001)
_RICE_X = _RICE_B ** 2 / 2
# mean of a Rice(b, sigma=1) variable; i0e/i1e keep the large-b tail finite
_RICE_MEAN = np.sqrt(np.pi / 2) * ((1 + _RICE_X) * special.i0e(_RICE_X / 2) + _RICE_X * special.i1e(_RICE_X / 2))


def _rician_amplitude(y: NDArray[np.float64]) -> NDArray[np.float64]:
    """Invert the unit-sigma Rician mean; magnitudes below the noise mean map to 0."""
    out = np.interp(y, _RICE_MEAN, _RICE_B, left=0.0)
    big = y > _RICE_MEAN[-1]
    out[big] = np.sqrt(y[big] ** 2 - 1.0)
    return out


def frequency_to_field(nu: NDArray[np.float64], step: MWStep | str, params: PhysicalParams,
                       anchor: FieldAnchor | str = FieldAnchor.A_ZZ) -> NDArray[np.float64]:
    """Fringe frequency ν (MHz) -> field (G) for the given detection step."""
    step = MWStep.parse(step)
    nu = np.asarray(nu, dtype=float)
    f_drive = params.drive_frequency(step)
    if step is MWStep.MW1:
        f_t, ref, b_ref = f_drive - nu, params.f1, params.b_up
    else:
        f_t, ref, b_ref = f_drive + nu, params.f2, -params.b_up
    if FieldAnchor(anchor) is FieldAnchor.MIDPOINT:
        return (f_t - params.f_center) / params.gamma_e
    return (f_t - ref) / params.gamma_e + b_ref


def map_to_field(spec: FrequencySpectrum, mw_step: MWStep | str, params: PhysicalParams,
                 anchor: FieldAnchor | str = FieldAnchor.A_ZZ) -> FieldSpectrum:
    if spec.step is not None and MWStep.parse(mw_step) is not spec.step:
        raise AnalysisError(f"spectrum from {spec.step.value} mapped as {mw_step}")
    b = frequency_to_field(spec.freqs, mw_step, params, anchor)
    order = np.argsort(b)
    return FieldSpectrum(b[order], spec.magnitude[order], (MWStep.parse(mw_step).value,))


def stitch(spec_mw1: FieldSpectrum, spec_mw2: FieldSpectrum) -> FieldSpectrum:
    """Combine MW1 (B > 0) and MW2 (B < 0) onto one grid symmetric about zero.

    Both halves are linearly resampled onto ``j * δ``; the B = 0 bin is the
    average of the two steps.
    """
    d1, d2 = spec_mw1.bin_width, spec_mw2.bin_width
    if abs(d1 - d2) > 1e-9 * max(d1, d2):
        raise AnalysisError("incompatible field binning between steps")
    top = spec_mw1.field_bins.max()
    bottom = spec_mw2.field_bins.min()
    if top <= 0 or bottom >= 0:
        raise AnalysisError("steps do not cover both field signs")
    m = int(math.floor(min(top, -bottom) / d1 + 1e-9))
    grid = d1 * np.arange(-m, m + 1)
    w1 = np.interp(grid, spec_mw1.field_bins, spec_mw1.weights)
    w2 = np.interp(grid, spec_mw2.field_bins, spec_mw2.weights)
    weights = np.where(grid > 0, w1, np.where(grid < 0, w2, 0.5 * (w1 + w2)))
    return FieldSpectrum(grid, weights, spec_mw1.provenance + spec_mw2.provenance)


# --- moments and theory -------------------------------------------------------


def atmosphere_moments(spec: FieldSpectrum, b_th: float = 0.178,
                       b_center: float | None = None,
                       params: PhysicalParams | None = None) -> tuple[float, float]:
    """Mean field and fluctuation over two windows of half-width ``b_th`` at ±b_center."""
    if b_center is None:
        b_center = (params or PhysicalParams()).b_up
    mask = spec.domain_mask(b_center, b_th)
    b, w = spec.field_bins[mask], spec.weights[mask]
    norm = w.sum()
    if not norm > 0:
        raise AnalysisError("empty spectrum: no weight inside the integration domain")
    mean = float((b * w).sum() / norm)
    var = float((b * b * w).sum() / norm - mean * mean)
    return mean, var


def theory_moments(p: float, params: PhysicalParams | None = None,
                   variant: VarianceVariant | str = VarianceVariant.STANDARD) -> tuple[float, float]:
    if not math.isfinite(p) or abs(p) > 1:
        raise AnalysisError(f"invalid polarization {p!r}")
    b_up = (params or PhysicalParams()).b_up
    rho_up, rho_down = (1 + p) / 2, (1 - p) / 2
    mean = rho_up * b_up - rho_down * b_up
    if VarianceVariant(variant) is VarianceVariant.STANDARD:
        var = rho_up * b_up ** 2 + rho_down * b_up ** 2 - mean ** 2
    else:
        var = (rho_up * b_up) ** 2 + (rho_down * b_up) ** 2 - mean ** 2
    return mean, max(var, 0.0)


def symmetry_indicator(delta_b: float, delta_b2: float, resolution: float = 0.05) -> float | str:
    """Γ = δB² / (δB)², or ``DIVERGENT`` when |δB| is within ``resolution``."""
    if abs(delta_b) <= resolution:
        return DIVERGENT
    return delta_b2 / delta_b ** 2


def natural_polarization(b_exp: float, params: PhysicalParams | None = None) -> float:
    return b_exp / (params or PhysicalParams()).b_up


@dataclasses.dataclass(frozen=True)
class TheoryParams:
    a_zz: float = 13.56
    a0: float = 13.56
    p: float = 0.0


def free_energy_coefficients(tp: TheoryParams) -> tuple[float, float]:
    """Coefficients of I_z s_z and s_z s_z in the effective free energy."""
    if not tp.a0 > 0:
        raise AnalysisError("spin stiffness a0 must be positive")
    return tp.a_zz * tp.p, tp.a_zz ** 2 / (4 * tp.a0)


# --- pipeline -------------------------------------------------------------


def trace_to_field(trace: TimeTrace, params: PhysicalParams, settings: PipelineSettings) -> FieldSpectrum:
    spec = fft_spectrum(trace, settings.window, settings.pad_factor)
    if trace.shots > 0 and settings.baseline is not Baseline.NONE:
        spec = subtract_baseline(spec, settings.baseline)
    return map_to_field(spec, trace.step, params, settings.anchor)


def field_spectrum(trace_mw1: TimeTrace, trace_mw2: TimeTrace, params: PhysicalParams,
                   settings: PipelineSettings) -> FieldSpectrum:
    return stitch(trace_to_field(trace_mw1, params, settings),
                  trace_to_field(trace_mw2, params, settings))


def simulate_pair(params: PhysicalParams, theta: float, settings: PipelineSettings,
                  p: float | None = None) -> tuple[TimeTrace, TimeTrace]:
    tau = settings.tau_grid()
    return tuple(pulses.run_ramsey(params, theta, step, tau, rf_mode=settings.rf_mode,
                                   pulse_model=settings.pulse_model, p=p)
                 for step in (MWStep.MW1, MWStep.MW2))


@dataclasses.dataclass(frozen=True)
class ArtifactCalibration:
    eps_plus: float  # wrong-window fraction with p = +1
    eps_minus: float  # with p = -1

    @property
    def epsilon(self) -> float:
        return 0.5 * (self.eps_plus + self.eps_minus)


def calibrate_power_broadening_artifact(params: PhysicalParams,
                                        settings: PipelineSettings | None = None) -> ArtifactCalibration:
    """Wrong-sign window fraction for fully polarized targets, noiseless."""
    settings = settings or PipelineSettings()
    eps = []
    for p in (1.0, -1.0):
        spec = field_spectrum(*simulate_pair(params, 0.0, settings, p=p), params, settings)
        plus, minus = spec.window_masses(params.b_up, settings.b_th)
        wrong = minus if p > 0 else plus
        eps.append(wrong / (plus + minus))
    return ArtifactCalibration(*eps)


def subtract_artifact(spec: FieldSpectrum, epsilon: float, b_center: float | None = None,
                      b_th: float = 0.178) -> FieldSpectrum:
    """Remove MW cross-talk: each window loses ε times the other window's mass.

    Window weights are rescaled uniformly and floored at zero.
    """
    if not (0 <= epsilon < 0.5):
        raise AnalysisError(f"artifact fraction must lie in [0, 0.5), got {epsilon}")
    if epsilon == 0:
        return spec
    if b_center is None:
        b_center = PhysicalParams().b_up
    b, w = spec.field_bins, spec.weights.copy()
    plus_mask = np.abs(b - b_center) <= b_th + 1e-12
    minus_mask = np.abs(b + b_center) <= b_th + 1e-12
    plus, minus = w[plus_mask].sum(), w[minus_mask].sum()
    new_plus = max(plus - epsilon * minus, 0.0)
    new_minus = max(minus - epsilon * plus, 0.0)
    if plus > 0:
        w[plus_mask] *= new_plus / plus
    if minus > 0:
        w[minus_mask] *= new_minus / minus
    return FieldSpectrum(b, w, spec.provenance)


@dataclasses.dataclass(frozen=True)
class AtmosphereReport:
    theta: float
    p_nominal: float
    delta_b: float
    delta_b_err: float
    delta_b2: float
    delta_b2_err: float
    gamma: float | str
    shots: int
    seed: int | None

    CSV_HEADER = "theta,p_nominal,delta_b,delta_b_err,delta_b2,delta_b2_err,gamma"

    def csv_row(self) -> str:
        gamma = self.gamma if isinstance(self.gamma, str) else f"{self.gamma:.9g}"
        return ",".join([f"{self.theta:.9g}", f"{self.p_nominal:.9g}", f"{self.delta_b:.9g}",
                         f"{self.delta_b_err:.9g}", f"{self.delta_b2:.9g}",
                         f"{self.delta_b2_err:.9g}", gamma])

    def to_text(self) -> str:
        gamma = self.gamma if isinstance(self.gamma, str) else f"{self.gamma:.9g}"
        return "\n".join([
            f"theta: {self.theta:.9g}",
            f"p_nominal: {self.p_nominal:.9g}",
            f"delta_b: {self.delta_b:.9g}",
            f"delta_b_err: {self.delta_b_err:.9g}",
            f"delta_b2: {self.delta_b2:.9g}",
            f"delta_b2_err: {self.delta_b2_err:.9g}",
            f"gamma: {gamma}",
            f"shots: {self.shots}",
            f"seed: {self.seed}",
        ]) + "\n"


def phase_diagram_csv(reports: Iterable[AtmosphereReport]) -> str:
    return "\n".join([AtmosphereReport.CSV_HEADER] + [r.csv_row() for r in reports]) + "\n"


def default_thetas(states: int = 15) -> NDArray[np.float64]:
    """``states`` evenly spaced RF angles from 0 to π inclusive."""
    if states < 1:
        raise AnalysisError("need at least one state")
    if states == 1:
        return np.zeros(1)
    return np.pi * np.arange(states) / (states - 1)


def _group_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, key)]).generate_state(1)[0])


def atmosphere(params: PhysicalParams, theta: float, settings: PipelineSettings | None = None,
               readout: measurement.ReadoutModel | None = None, seed: int = 0,
               epsilon: float | None = None, index: int = 0,
               ) -> tuple[AtmosphereReport, FieldSpectrum]:
    """Full two-step pipeline for one RF angle.

    ``readout=None`` runs noiselessly. Otherwise the shots are split into
    ``settings.groups`` independently sampled groups; the reported values are
    the group means with standard-error bars.
    """
    settings = settings or PipelineSettings()
    settings.check_sampling(params)
    if epsilon is None:
        epsilon = (calibrate_power_broadening_artifact(params, settings).epsilon
                   if settings.subtract_artifact else 0.0)
    trace1, trace2 = simulate_pair(params, theta, settings)

    def estimate(t1: TimeTrace, t2: TimeTrace):
        spec = field_spectrum(t1, t2, params, settings)
        if epsilon:
            spec = subtract_artifact(spec, epsilon, params.b_up, settings.b_th)
        return spec, atmosphere_moments(spec, settings.b_th, params.b_up)

    if readout is None:
        spec, (db, db2) = estimate(trace1, trace2)
        db_err = db2_err = 0.0
        shots = 0
    else:
        group_model = readout.replace(shots=max(readout.shots // settings.groups, 1))
        results, specs = [], []
        for g in range(settings.groups):
            noisy = [measurement.normalize_counts(
                measurement.sample_counts(t, group_model, _group_seed(seed, index, g, s)), group_model)
                for s, t in enumerate((trace1, trace2))]
            spec_g, moments = estimate(*noisy)
            specs.append(spec_g.weights)
            results.append(moments)
        results = np.array(results)
        db, db_err = measurement.group_error_bars(results[:, 0], settings.groups)
        db2, db2_err = measurement.group_error_bars(results[:, 1], settings.groups)
        spec = FieldSpectrum(spec_g.field_bins, np.mean(specs, axis=0), spec_g.provenance)
        shots = readout.shots
    report = AtmosphereReport(
        theta=float(theta),
        p_nominal=float(params.p0 * math.cos(theta)),
        delta_b=db, delta_b_err=db_err, delta_b2=db2, delta_b2_err=db2_err,
        gamma=symmetry_indicator(db, db2, settings.resolution),
        shots=shots, seed=None if readout is None else int(seed),
    )
    return report, spec


def phase_diagram(params: PhysicalParams, thetas: Sequence[float] | None = None,
                  readout: measurement.ReadoutModel | None = None, seed: int = 0,
                  settings: PipelineSettings | None = None) -> list[AtmosphereReport]:
    settings = settings or PipelineSettings()
    thetas = default_thetas() if thetas is None else np.asarray(thetas, dtype=float)
    if len(thetas) == 0:
        raise AnalysisError("need at least one RF angle")
    eps = (calibrate_power_broadening_artifact(params, settings).epsilon
           if settings.subtract_artifact else 0.0)
    return [atmosphere(params, th, settings, readout, seed, eps, index=k)[0]
            for k, th in enumerate(sorted(thetas))]


# --- fits -----------------------------------------------------------------


def _damped_cosine(t, offset, amp, freq, phase, t2):
    return offset + amp * np.exp(-t / t2) * np.cos(2 * np.pi * freq * t + phase)


def fit_ramsey(trace: TimeTrace) -> dict[str, float]:
    """Fit offset + A exp(-τ/T2*) cos(2πfτ + φ); seeds the frequency from the FFT peak."""
    spec = fft_spectrum(trace, Window.NONE, 8)
    f0 = float(spec.freqs[np.argmax(spec.magnitude)])
    t, y = trace.tau_grid, trace.values
    amp0 = 0.5 * (y.max() - y.min())
    c = np.cos(2 * np.pi * f0 * t)
    s = np.sin(2 * np.pi * f0 * t)
    phase0 = math.atan2(-(y - y.mean()) @ s, (y - y.mean()) @ c)
    p0 = [float(y.mean()), amp0, f0, phase0, 0.3 * (t[-1] - t[0])]
    popt, pcov = curve_fit(_damped_cosine, t, y, p0=p0, maxfev=20000)
    offset, amp, freq, phase, t2 = popt
    if amp < 0:
        amp, phase = -amp, phase + math.pi
    return {"offset": offset, "amplitude": amp, "frequency": abs(freq),
            "phase": phase, "t2_star": abs(t2), "t2_star_err": float(np.sqrt(pcov[4, 4]))}
