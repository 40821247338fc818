"""Run configuration: sectioned TOML files, validation, presets.

A run config has six sections -- [neuron], [synapse], [stdp], [network],
[stimulus], [sim] -- whose keys map one-to-one onto the parameter
dataclasses.  Unknown sections or keys are rejected.  A run manifest
(JSON with a ``config`` object) is accepted anywhere a config file is,
so the resolved config echoed by ``simulate`` reproduces the same run.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .engine import SimConfig
from .hh import NeuronParams
from .plasticity import StdpParams
from .synapse import SynapseParams
from .topology import NetworkConfig, StimulusConfig


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "neuron": NeuronParams,
    "synapse": SynapseParams,
    "stdp": StdpParams,
    "network": NetworkConfig,
    "stimulus": StimulusConfig,
    "sim": SimConfig,
}

# internal fields not exposed as config keys
_HIDDEN = {"network": {"seed"}}


@dataclass(frozen=True)
class RunConfig:
    neuron: NeuronParams
    synapse: SynapseParams
    stdp: StdpParams
    network: NetworkConfig
    stimulus: StimulusConfig
    sim: SimConfig

    def to_dict(self) -> dict:
        out = {}
        for section, cls in _SECTIONS.items():
            d = dataclasses.asdict(getattr(self, section))
            for hidden in _HIDDEN.get(section, ()):
                d.pop(hidden, None)
            out[section] = d
        return out

    def replace(self, section: str, **changes) -> "RunConfig":
        return dataclasses.replace(
            self, **{section: dataclasses.replace(getattr(self, section), **changes)})


def from_dict(data: dict, source: str = "<dict>") -> RunConfig:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"{source}: unknown section(s): {sorted(unknown)}")
    parts = {}
    for section, cls in _SECTIONS.items():
        body = data.get(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"{source}: section [{section}] must be a table")
        allowed = {f.name for f in dataclasses.fields(cls)} - _HIDDEN.get(section, set())
        bad = set(body) - allowed
        if bad:
            raise ConfigError(f"{source}: unknown key(s) in [{section}]: {sorted(bad)}")
        try:
            parts[section] = cls(**body)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: invalid [{section}]: {exc}") from exc
    return RunConfig(**parts)


def load(path) -> RunConfig:
    """Load a RunConfig from a TOML config file or a JSON run manifest."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        with open(path) as f:
            doc = json.load(f)
        data = doc.get("config", doc)
    else:
        with open(path, "rb") as f:
            try:
                data = tomllib.load(f)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data, source=str(path))


def preset_path(name: str) -> Path:
    """Filesystem path of a shipped preset config (e.g. 'desk_60s')."""
    p = resources.files("hhnet").joinpath("presets", f"{name}.cfg")
    if not p.is_file():
        raise ConfigError(f"unknown preset: {name}")
    return Path(str(p))


def load_preset(name: str) -> RunConfig:
    return load(preset_path(name))


def default() -> RunConfig:
    return from_dict({})
