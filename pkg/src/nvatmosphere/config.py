"""Run configuration: physical constants, readout model and pipeline knobs."""

from __future__ import annotations

import dataclasses
import os
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .analysis import PipelineSettings
from .measurement import ReadoutModel
from .params import ConfigError, PhysicalParams

CONFIG_ENV = "NVATMOSPHERE_CONFIG"

_SECTIONS = {
    "grid": ("dt_us", "tau_max_us"),
    "fft": ("window", "pad_factor"),
    "analysis": ("b_th", "resolution", "variance_variant", "baseline", "anchor"),
}
_TOP = {"params", "readout", "seed", "output_dir", *_SECTIONS}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams = PhysicalParams()
    readout: ReadoutModel = ReadoutModel()
    settings: PipelineSettings = PipelineSettings()
    seed: int = 42
    output_dir: Path = Path("out")

    def __post_init__(self):
        self.settings.check_sampling(self.params)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        unknown = sorted(set(data) - _TOP)
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
        params = PhysicalParams.from_mapping(data.get("params") or {})

        readout_data = dict(data.get("readout") or {})
        bad = sorted(set(readout_data) - {f.name for f in dataclasses.fields(ReadoutModel)})
        if bad:
            raise ConfigError(f"unknown readout key(s): {', '.join(bad)}")
        readout = ReadoutModel(**readout_data)

        flat: dict[str, Any] = {}
        for section, keys in _SECTIONS.items():
            values = dict(data.get(section) or {})
            bad = sorted(set(values) - set(keys))
            if bad:
                raise ConfigError(f"unknown {section} key(s): {', '.join(bad)}")
            flat.update(values)
        try:
            settings = PipelineSettings(**flat)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        try:
            return cls(params, readout, settings, int(data.get("seed", 42)),
                       Path(data.get("output_dir", "out")))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping at top level")
        return cls.from_mapping(data)


def default_config_text() -> str:
    return resources.files("nvatmosphere").joinpath("default_config.yaml").read_text(encoding="utf-8")


def load_config(path: str | Path | None = None) -> RunConfig:
    """Explicit path, else ``$NVATMOSPHERE_CONFIG``, else the packaged defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        return RunConfig.from_file(path)
    return RunConfig.from_mapping(yaml.safe_load(default_config_text()))
