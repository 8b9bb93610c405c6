"""Physical constants of the NV electron / 13C nuclear spin pair.

All defaults are the measured values of the 515 G experiment. Frequencies
follow the MHz convention used throughout the package; fields that carry a
different unit say so in their name's documentation below.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from pathlib import Path
from typing import Any, Mapping

import yaml


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration values."""


class MWStep(str, enum.Enum):
    """Which of the two detection drives is active."""

    MW1 = "MW1"
    MW2 = "MW2"

    @classmethod
    def parse(cls, value: "MWStep | str") -> "MWStep":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ConfigError(f"unknown MW step {value!r}; expected MW1 or MW2") from None


@dataclasses.dataclass(frozen=True)
class PhysicalParams:
    """Measured constants of the sensor/target system.

    Units: ``d_zfs`` GHz, ``b_ext`` Gauss, ``gamma_e`` MHz/G, ``gamma_n`` kHz/G,
    ``a_zz``/``a_perp``/``f1``/``f2``/``detune*`` MHz, ``f_rf`` kHz,
    ``t2_star``/``rf_pi`` µs, ``mw_pi_*`` ns.
    """

    d_zfs: float = 2.87
    b_ext: float = 515.0
    gamma_e: float = 2.803
    gamma_n: float = 1.07
    a_zz: float = 13.56
    a_perp: float = 2.8
    t2_star: float = 1.8
    p0: float = 0.91
    f1: float = 4320.0
    f2: float = 4306.5
    f_rf: float = 496.0
    rf_pi: float = 45.0
    mw_pi_f1: float = 234.0
    mw_pi_f2: float = 154.0
    detune1: float = 1.0
    detune2: float = -1.0

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{f.name} must be a number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f"{f.name} must be finite")
        for name in ("d_zfs", "gamma_e", "t2_star", "f1", "f2", "f_rf", "rf_pi", "mw_pi_f1", "mw_pi_f2"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be strictly positive")
        if self.a_zz < 0 or self.a_perp < 0 or self.gamma_n < 0 or self.b_ext < 0:
            raise ConfigError("couplings and field must be non-negative")
        if abs(self.p0) > 1:
            raise ConfigError(f"p0 must lie in [-1, 1], got {self.p0}")
        if abs(self.f1 - self.f2 - self.a_zz) > 0.1:
            raise ConfigError(
                f"f1 - f2 = {self.f1 - self.f2:.4f} MHz inconsistent with a_zz = {self.a_zz} MHz"
            )

    # derived quantities

    @property
    def rabi_mw1(self) -> float:
        """Rabi frequency (MHz) implied by the measured f1 π duration."""
        return 1.0 / (2.0 * self.mw_pi_f1 * 1e-3)

    @property
    def rabi_mw2(self) -> float:
        return 1.0 / (2.0 * self.mw_pi_f2 * 1e-3)

    @property
    def rabi_rf(self) -> float:
        """Nuclear Rabi frequency in MHz."""
        return 1.0 / (2.0 * self.rf_pi)

    @property
    def f_rf_mhz(self) -> float:
        return self.f_rf * 1e-3

    @property
    def b_up(self) -> float:
        """Field (G) exerted on the sensor by the nuclear ↑ state."""
        return self.a_zz / (2.0 * self.gamma_e)

    @property
    def f_center(self) -> float:
        return 0.5 * (self.f1 + self.f2)

    def rabi(self, step: MWStep | str) -> float:
        return self.rabi_mw1 if MWStep.parse(step) is MWStep.MW1 else self.rabi_mw2

    def mw_pi(self, step: MWStep | str) -> float:
        """π duration in ns for the given step."""
        return self.mw_pi_f1 if MWStep.parse(step) is MWStep.MW1 else self.mw_pi_f2

    def drive_frequency(self, step: MWStep | str) -> float:
        if MWStep.parse(step) is MWStep.MW1:
            return self.f1 + self.detune1
        return self.f2 + self.detune2

    def replace(self, **changes: Any) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)

    # persistence

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "PhysicalParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown parameter key(s): {', '.join(unknown)}")
        return cls(**{k: float(v) if isinstance(v, int) and not isinstance(v, bool) else v
                      for k, v in data.items()})

    @classmethod
    def from_file(cls, path: str | Path) -> "PhysicalParams":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a flat key: value mapping")
        return cls.from_mapping(data)

    def to_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)
