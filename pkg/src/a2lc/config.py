"""Run configuration: an INI-style key/value file with one section per module.

Example::

    [run]
    rounds = 5
    budget = 20
    lcm_enabled = true
    master_seed = 0

    [synth]
    num_classes = 10
    confused_pairs = 0-1, 2-3
    seed =

    [acquisition]
    scorer = abc

    [lcm]
    hidden_dims = 256, 128, 64

Omitted keys keep their defaults; unknown sections or keys are errors. An
empty ``seed`` in ``[synth]`` derives the dataset seed from ``master_seed``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .acquisition import SCORERS, AcquisitionConfig
from .dataset import CONFUSION_MODES, SynthConfig
from .lcm import LcmHyper, SelectionConfig
from .nn import ACTIVATIONS
from .proxy import ProxyHyper


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunSettings:
    rounds: int = 5
    budget: int = 20
    lcm_enabled: bool = True
    master_seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings = field(default_factory=RunSettings)
    synth: SynthConfig = field(default_factory=SynthConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    proxy: ProxyHyper = field(default_factory=ProxyHyper)
    lcm: LcmHyper = field(default_factory=LcmHyper)

    @property
    def rounds(self) -> int:
        return self.run.rounds

    @property
    def budget(self) -> int:
        return self.run.budget

    @property
    def lcm_enabled(self) -> bool:
        return self.run.lcm_enabled

    @property
    def master_seed(self) -> int:
        return self.run.master_seed

    def replace(self, **sections: dict[str, Any]) -> "RunConfig":
        """Copy with per-section field overrides, e.g. ``replace(run={"budget": 0})``."""
        updated = {name: dataclasses.replace(getattr(self, name), **values)
                   for name, values in sections.items()}
        return dataclasses.replace(self, **updated)

    def validate(self) -> None:
        validate(self)


SECTIONS = ("run", "synth", "acquisition", "selection", "proxy", "lcm")
_CHOICES = {
    ("acquisition", "scorer"): SCORERS,
    ("synth", "confusion_mode"): CONFUSION_MODES,
    ("proxy", "activation"): ACTIVATIONS,
    ("lcm", "activation"): ACTIVATIONS,
}
_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _parse_value(section: str, key: str, default: Any, raw: str) -> Any:
    text = raw.strip()
    where = f"{section}.{key}"
    try:
        if key == "confused_pairs":
            if not text:
                return ()
            pairs = []
            for item in text.split(","):
                a, b = item.strip().split("-")
                pairs.append((int(a), int(b)))
            return tuple(pairs)
        if key == "hidden_dims":
            return tuple(int(v) for v in text.split(","))
        if default is None:
            return None if not text else int(text)
        if isinstance(default, bool):
            if text.lower() not in _BOOL:
                raise ValueError(f"expected a boolean, got {text!r}")
            return _BOOL[text.lower()]
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from None


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(f"{a}-{b}" for a, b in value)
        return ", ".join(str(v) for v in value)
    return str(value)


def from_mapping(data: dict[str, dict[str, str]]) -> RunConfig:
    """Build a config from ``{section: {key: raw string}}``; validates."""
    base = RunConfig()
    parts = {}
    for section, values in data.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        current = getattr(base, section)
        names = {f.name: f for f in dataclasses.fields(current)}
        kwargs = {}
        for key, raw in values.items():
            if key not in names:
                raise ConfigError(f"{section}.{key}: unknown key")
            kwargs[key] = _parse_value(section, key, getattr(current, key), str(raw))
        parts[section] = dataclasses.replace(current, **kwargs)
    cfg = dataclasses.replace(base, **parts)
    validate(cfg)
    return cfg


def loads(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    return from_mapping({s: dict(parser[s]) for s in parser.sections()})


def load(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


def validate(cfg: RunConfig) -> None:
    for (section, key), allowed in _CHOICES.items():
        value = getattr(getattr(cfg, section), key)
        if value not in allowed:
            raise ConfigError(f"{section}.{key}: unknown value {value!r}; expected one of {list(allowed)}")
    if cfg.run.rounds < 1:
        raise ConfigError("run.rounds: must be >= 1")
    if cfg.run.budget < 0:
        raise ConfigError("run.budget: must be >= 0")
    for section in ("synth", "acquisition", "selection", "proxy", "lcm"):
        try:
            getattr(cfg, section).validate()
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}") from None


def to_dict(cfg: RunConfig) -> dict[str, dict[str, Any]]:
    out = {}
    for section in SECTIONS:
        part = getattr(cfg, section)
        out[section] = {f.name: _jsonable(getattr(part, f.name)) for f in dataclasses.fields(part)}
    return out


def _jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def dumps(cfg: RunConfig) -> str:
    """Normalized config text: every section and key, in declaration order."""
    lines = []
    for section in SECTIONS:
        part = getattr(cfg, section)
        lines.append(f"[{section}]")
        for f in dataclasses.fields(part):
            value = _format_value(getattr(part, f.name))
            lines.append(f"{f.name} = {value}" if value else f"{f.name} =")
        lines.append("")
    return "\n".join(lines)


def config_hash(config: RunConfig | dict[str, Any]) -> str:
    data = to_dict(config) if isinstance(config, RunConfig) else config
    blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
