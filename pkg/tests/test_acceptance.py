"""Acceptance criteria C1-C9, each evaluated at its stated tolerance.

Every test appends one PASS/FAIL line that is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from nvatmosphere import analysis, calibration, cli, dsl, pulses, spin
from nvatmosphere.measurement import ReadoutModel
from nvatmosphere.params import MWStep, PhysicalParams
from nvatmosphere.pulses import (FreeEvolution, LaserInit, MwPulse, PulseSequence, Readout, RfMode,
                                 RfRotation)

from conftest import ACCEPTANCE_LINES, random_density_matrix, rk4_propagate

SEEDS = range(10)


def record(tag: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} {tag}: {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


@pytest.fixture(scope="module")
def params():
    return PhysicalParams()


def _dominant_peak(spec):
    return float(spec.field_bins[np.argmax(spec.weights)])


def test_c1_peak_positions(params):
    start = time.perf_counter()
    found = []
    for theta, sign in ((0.0, 1), (math.pi, -1)):
        _, spec = analysis.atmosphere(params, theta)
        found.append((_dominant_peak(spec), sign))
    elapsed = time.perf_counter() - start
    err = max(abs(b - sign * params.b_up) for b, sign in found)
    record("C1 peak positions", err <= 0.05 and elapsed < 5.0,
           f"peaks {found[0][0]:+.3f} G (theta=0), {found[1][0]:+.3f} G (theta=pi), "
           f"max error {err:.3f} G, {elapsed:.2f} s")


def test_c2_natural_polarization(params):
    readout = ReadoutModel()
    estimates = []
    for seed in SEEDS:
        report, _ = analysis.atmosphere(params, 0.0, readout=readout, seed=seed)
        estimates.append(analysis.natural_polarization(report.delta_b, params))
    estimates = np.array(estimates)
    mean = estimates.mean()
    record("C2 natural polarization", abs(mean - 0.91) <= 0.02,
           f"P0 = {mean:.4f} (10-seed mean), per-seed {estimates.min():.3f}..{estimates.max():.3f}, "
           f"sd {estimates.std(ddof=1):.3f}")


def _slope(reports):
    p = np.array([r.p_nominal for r in reports])
    db = np.array([r.delta_b for r in reports])
    return np.polyfit(p, db, 1)[0]


def test_c3_phase_diagram_shape(params):
    clean = analysis.phase_diagram(params)
    slope = _slope(clean)
    noisy = np.array([_slope(analysis.phase_diagram(params, readout=ReadoutModel(), seed=s))
                      for s in SEEDS])
    rel_var = []
    for r in clean:
        theory = params.b_up ** 2 * (1 - r.p_nominal ** 2)
        rel_var.append(abs(r.delta_b2 - theory) / theory)
    ok = (abs(slope / params.b_up - 1) <= 0.02 and abs(noisy.mean() / params.b_up - 1) <= 0.05
          and max(rel_var) <= 0.10)
    record("C3 phase-diagram shape", ok,
           f"noiseless slope {slope:.4f} G ({slope / params.b_up - 1:+.2%}), noisy 10-seed mean "
           f"{noisy.mean():.4f} G ({noisy.mean() / params.b_up - 1:+.2%}, per-seed sd "
           f"{noisy.std(ddof=1):.3f}), max dB2 deviation {max(rel_var):.1%}")


def test_c4_gamma_spike(params):
    reports = analysis.phase_diagram(params)
    by_theta = {round(r.theta, 9): r for r in reports}
    half = by_theta[round(math.pi / 2, 9)].gamma
    zero = by_theta[0.0].gamma
    oracle = (1 - params.p0 ** 2) / params.p0 ** 2
    ok = half == analysis.DIVERGENT and isinstance(zero, float) and abs(zero - 0.21) <= 0.05
    record("C4 gamma spike", ok, f"gamma(pi/2) = {half}, gamma(0) = {zero:.4f} (oracle {oracle:.4f})")


def test_c5_calibration(params):
    res = calibration.calibrate(params, freq_step=0.1, dur_step_ns=2.0, rf_step_us=0.5)
    checks = [abs(res.f1 - 4320.0) <= 0.1 + 1e-9, abs(res.f2 - 4306.5) <= 0.1 + 1e-9,
              abs(res.mw_pi_f1 - 234) <= 2, abs(res.mw_pi_f2 - 154) <= 2, abs(res.rf_pi - 45) <= 0.5]
    record("C5 calibration", all(checks),
           f"f1 {res.f1:.1f} MHz, f2 {res.f2:.1f} MHz, pi {res.mw_pi_f1:.0f}/{res.mw_pi_f2:.0f} ns, "
           f"nuclear pi {res.rf_pi:.1f} us")


def test_c6_decoherence(params):
    trace = pulses.run_ramsey(params, 0.0, MWStep.MW1, pulses.uniform_grid(0.05, 6.0))
    fit = analysis.fit_ramsey(trace)
    record("C6 decoherence", abs(fit["t2_star"] / params.t2_star - 1) <= 0.05,
           f"T2* = {fit['t2_star']:.4f} us (target {params.t2_star} us)")


def test_c7_artifact(params):
    finite = analysis.calibrate_power_broadening_artifact(params)
    ideal = analysis.calibrate_power_broadening_artifact(
        params, analysis.PipelineSettings(pulse_model="ideal"))
    # fully polarized target: the only remaining minority mass is the artifact
    full, _ = analysis.atmosphere(params.replace(p0=1.0), 0.0, epsilon=finite.epsilon)
    raw, _ = analysis.atmosphere(params.replace(p0=1.0), 0.0, epsilon=0.0)
    natural, _ = analysis.atmosphere(params, 0.0)
    ok = (0 < finite.eps_plus < 0.05 and 0 < finite.eps_minus < 0.05 and ideal.epsilon < 1e-6
          and full.delta_b2 < 0.05)
    record("C7 artifact", ok,
           f"eps +{finite.eps_plus:.5f}/-{finite.eps_minus:.5f}, ideal {ideal.epsilon:.1e}, "
           f"p=1 dB2 {raw.delta_b2:.4f} -> {full.delta_b2:.4f} G^2 "
           f"(p0=0.91 gives {natural.delta_b2:.3f} G^2, theory 1.006)")


def _random_segment(rng, params):
    kind = rng.integers(4)
    if kind == 0:
        return LaserInit(float(rng.uniform(-1, 1)))
    if kind == 1:
        return RfRotation(float(rng.uniform(-2 * math.pi, 2 * math.pi)),
                          RfMode.DRIVEN if rng.random() < 0.1 else RfMode.IDEAL)
    if kind == 2:
        return MwPulse(rng.choice(["MW1", "MW2"]), float(rng.uniform(0, 500)),
                       float(rng.uniform(-math.pi, math.pi)))
    return FreeEvolution(float(rng.exponential(1.5)))


def test_c8_invariant_suite(params):
    rng = np.random.default_rng(8)
    n_seq, violations = 10_000, 0
    for _ in range(n_seq):
        rho = random_density_matrix(rng)
        transverse = bool(rng.random() < 0.5)
        frame = MWStep.MW1
        for _ in range(int(rng.integers(1, 7))):
            seg = _random_segment(rng, params)
            if isinstance(seg, MwPulse):
                frame = seg.step
            rho = pulses.apply_segment(rho, seg, params, include_transverse=transverse, frame=frame)
            try:
                spin.check_density_matrix(rho)
            except spin.SpinModelError:
                violations += 1
                break

    integ = 0.0
    for step in (MWStep.MW1, MWStep.MW2):
        for transverse in (False, True):
            h = spin.build_driven_hamiltonian(params, step, phase=0.7, include_transverse=transverse)
            rho = random_density_matrix(rng)
            integ = max(integ, np.max(np.abs(spin.propagate_unitary(rho, h, 0.2)
                                             - rk4_propagate(rho, h, 0.2, 1000))))

    bins = 0.01 * np.arange(-400, 401)
    b = bins[np.argmin(abs(bins - params.b_up))]
    moment_err = 0.0
    for p in np.linspace(-1, 1, 41):
        w = np.zeros(bins.size)
        w[np.argmin(abs(bins - b))] = (1 + p) / 2
        w[np.argmin(abs(bins + b))] = (1 - p) / 2
        got = analysis.atmosphere_moments(analysis.FieldSpectrum(bins, w), 0.178, b)
        want = analysis.theory_moments(p, params.replace(a_zz=2 * b * params.gamma_e))
        moment_err = max(moment_err, abs(got[0] - want[0]), abs(got[1] - want[1]))

    trips = 0
    for _ in range(1000):
        segs = [_random_segment(rng, params) for _ in range(int(rng.integers(0, 8)))]
        segs = [dsl.parse_sequence(dsl.serialize_segment(s)).segments[0] for s in segs]
        seq = PulseSequence(tuple(segs) + ((Readout(),) if rng.random() < 0.5 else ()))
        trips += dsl.parse_sequence(dsl.serialize_sequence(seq)) == seq

    ok = violations == 0 and integ < 1e-8 and moment_err < 1e-9 and trips == 1000
    record("C8 invariant suite", ok,
           f"{n_seq} random sequences, {violations} violations; integrator diff {integ:.1e}; "
           f"moment diff {moment_err:.1e}; {trips}/1000 round-trips")


def test_c9_determinism(tmp_path, capsys):
    texts = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli.main(["phase-diagram", "--seed", "42", "--out", str(out)]) == 0
        texts.append((out / "phase_diagram.csv").read_bytes())
    capsys.readouterr()
    record("C9 determinism", texts[0] == texts[1] and len(texts[0]) > 0,
           f"two seed-42 runs, {len(texts[0])} bytes each, identical={texts[0] == texts[1]}")
