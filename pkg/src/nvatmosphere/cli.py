"""Command-line front end: ``nvatmosphere <command> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

from . import analysis, calibration, dsl, measurement, pulses
from .config import CONFIG_ENV, RunConfig, load_config
from .params import ConfigError, MWStep

log = logging.getLogger("nvatmosphere")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def _readout(cfg: RunConfig, args) -> measurement.ReadoutModel | None:
    return None if args.noiseless else cfg.readout


def cmd_ramsey(cfg: RunConfig, args) -> None:
    step = MWStep.parse(args.step)
    s = cfg.settings
    trace = pulses.run_ramsey(cfg.params, args.theta, step, s.tau_grid(),
                              rf_mode=s.rf_mode, pulse_model=s.pulse_model)
    stem = f"ramsey_{step.value}"
    _write(cfg.output_dir / f"{stem}_prob.csv", trace.to_csv())
    if not args.noiseless:
        counts = measurement.sample_counts(trace, cfg.readout, cfg.seed)
        _write(cfg.output_dir / f"{stem}_counts.csv", counts.to_csv())
        trace = measurement.normalize_counts(counts, cfg.readout)
    spec = analysis.fft_spectrum(trace, s.window, s.pad_factor)
    if trace.shots > 0 and s.baseline is not analysis.Baseline.NONE:
        spec = analysis.subtract_baseline(spec, s.baseline)
    _write(cfg.output_dir / f"{stem}_spectrum.csv", spec.to_csv())


def cmd_rabi(cfg: RunConfig, args) -> None:
    step = MWStep.parse(args.step)
    grid = pulses.uniform_grid(args.dur_step, args.dur_max)
    trace = pulses.run_rabi(cfg.params, step, grid, theta=args.theta, resonant=not args.detuned)
    _write(cfg.output_dir / f"rabi_{step.value}.csv", trace.to_csv())


def cmd_nrabi(cfg: RunConfig, args) -> None:
    grid = pulses.uniform_grid(args.dur_step, args.dur_max)
    _write(cfg.output_dir / "nuclear_rabi.csv", pulses.run_nuclear_rabi(cfg.params, grid).to_csv())


def cmd_odmr(cfg: RunConfig, args) -> None:
    p = cfg.params
    grid = pulses.uniform_grid(args.freq_step, math.ceil(p.f1 + 10), start=math.floor(p.f2 - 10))
    _write(cfg.output_dir / "odmr.csv", pulses.run_odmr(p, grid, args.theta).to_csv())


def cmd_atmosphere(cfg: RunConfig, args) -> None:
    report, spec = analysis.atmosphere(cfg.params, args.theta, cfg.settings,
                                       _readout(cfg, args), cfg.seed)
    _write(cfg.output_dir / "field_spectrum.csv", spec.to_csv())
    _write(cfg.output_dir / "atmosphere_report.txt", report.to_text())
    print(report.to_text(), end="")


def cmd_phase_diagram(cfg: RunConfig, args) -> None:
    thetas = analysis.default_thetas(args.states)
    reports = analysis.phase_diagram(cfg.params, thetas, _readout(cfg, args), cfg.seed, cfg.settings)
    _write(cfg.output_dir / "phase_diagram.csv", analysis.phase_diagram_csv(reports))
    for k, r in enumerate(reports):
        _write(cfg.output_dir / f"state_{k:02d}.txt", r.to_text())


def cmd_calibrate(cfg: RunConfig, args) -> None:
    result = calibration.calibrate(cfg.params, cfg.settings)
    for name, trace in result.traces.items():
        _write(cfg.output_dir / f"{name}.csv", trace.to_csv())
    _write(cfg.output_dir / "calibration.txt", result.to_text())
    print(result.to_text(), end="")


def cmd_theory(cfg: RunConfig, args) -> None:
    p = args.p
    db, db2 = analysis.theory_moments(p, cfg.params, cfg.settings.variance_variant)
    gamma = analysis.symmetry_indicator(db, db2, cfg.settings.resolution)
    c1, c2 = analysis.free_energy_coefficients(
        analysis.TheoryParams(a_zz=cfg.params.a_zz, a0=args.a0, p=p))
    print(f"p: {p:.9g}")
    print(f"delta_b: {db:.9g}")
    print(f"delta_b2: {db2:.9g}")
    print(f"gamma: {gamma if isinstance(gamma, str) else format(gamma, '.9g')}")
    print(f"c_iz_sz: {c1:.9g}")
    print(f"c_sz_sz: {c2:.9g}")


def cmd_parse(cfg: RunConfig, args) -> int:
    data = Path(args.file).read_bytes()
    try:
        seq = dsl.parse_sequence(data, name=Path(args.file).stem)
    except dsl.SequenceParseError as exc:
        print(f"{args.file}:{exc.diagnostic}", file=sys.stderr)
        return 1
    sys.stdout.write(dsl.serialize_sequence(seq))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"YAML run configuration (default: ${CONFIG_ENV} or built-in)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--noiseless", action="store_true", help="skip photon shot noise")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nvatmosphere", description="NV / 13C atmosphere spectrometer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ramsey", parents=[common], help="one detection step")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--step", choices=[s.value for s in MWStep], default="MW1")
    p.set_defaults(func=cmd_ramsey)

    p = sub.add_parser("rabi", parents=[common], help="electron nutation")
    p.add_argument("--step", choices=[s.value for s in MWStep], default="MW1")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--dur-step", type=float, default=2.0, help="ns")
    p.add_argument("--dur-max", type=float, default=700.0, help="ns")
    p.add_argument("--detuned", action="store_true", help="keep the detection detuning")
    p.set_defaults(func=cmd_rabi)

    p = sub.add_parser("nrabi", parents=[common], help="nuclear nutation")
    p.add_argument("--dur-step", type=float, default=0.5, help="us")
    p.add_argument("--dur-max", type=float, default=120.0, help="us")
    p.set_defaults(func=cmd_nrabi)

    p = sub.add_parser("odmr", parents=[common], help="ODMR sweep")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--freq-step", type=float, default=0.1, help="MHz")
    p.set_defaults(func=cmd_odmr)

    p = sub.add_parser("atmosphere", parents=[common], help="field distribution for one RF angle")
    p.add_argument("--theta", type=float, default=0.0)
    p.set_defaults(func=cmd_atmosphere)

    p = sub.add_parser("phase-diagram", parents=[common], help="sweep of RF angles 0..π")
    p.add_argument("--states", type=int, default=15)
    p.set_defaults(func=cmd_phase_diagram)

    p = sub.add_parser("calibrate", parents=[common], help="ODMR, nutation and artifact calibration")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("theory", parents=[common], help="theoretical moments for a polarization")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--a0", type=float, default=13.56, help="spin stiffness, MHz")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("parse", parents=[common], help="check and canonicalize a .seq file")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.out is not None:
            changes["output_dir"] = Path(args.out)
        cfg = dataclasses.replace(cfg, **changes)
        rc = args.func(cfg, args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
