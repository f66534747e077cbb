"""Experiment configuration: defaults < INI file < command-line overrides.

Sections map onto the component dataclasses::

    [experiment]  seed, iterations, runs, hidden, out
    [physics]     PhysicsConfig fields
    [missile]     MissileConfig fields
    [engagement]  EngagementConfig scalar fields
    [ppo]         PpoConfig fields
    [curriculum]  CurriculumConfig fields

Unknown sections or keys are errors, reported with their line number.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .curriculum import CurriculumConfig
from .engagement import EngagementConfig
from .flightdyn import PhysicsConfig
from .missile import MissileConfig
from .ppo import PpoConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSettings:
    seed: int = 0
    iterations: int = 40
    runs: int = 5
    hidden: tuple = (256, 256)
    out: str = "runs/default"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    missile: MissileConfig = field(default_factory=MissileConfig)
    engagement: EngagementConfig = field(default_factory=EngagementConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)

    def env(self) -> EngagementConfig:
        return replace(self.engagement, physics=self.physics, missile=self.missile)

    @property
    def seed(self) -> int:
        return self.experiment.seed

    @property
    def out(self) -> Path:
        return Path(self.experiment.out)


SECTIONS = ("experiment", "physics", "missile", "engagement", "ppo", "curriculum")
_NESTED = {"physics", "missile"}  # EngagementConfig fields owned by other sections


def _section_fields(section: str) -> dict[str, dataclasses.Field]:
    cls = {f.name: f for f in fields(ExperimentConfig)}[section].default_factory
    return {f.name: f for f in fields(cls) if not (section == "engagement" and f.name in _NESTED)}


def _convert(raw: str, default: Any, where: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            v = raw.lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(x) for x in raw.replace("x", ",").split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(default).__name__}") from None


def _line_of(text: str, section: str, key: Optional[str] = None) -> int:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if key is not None and cur == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.I):
            return i
    return 0


def bundled(name: str) -> Path:
    return Path(str(resources.files("aircombat") / "configs" / f"{name}.cfg"))


def resolve_path(path) -> Path:
    """A file path, or the name of a bundled preset such as ``desk``."""
    p = Path(path)
    if p.exists():
        return p
    b = bundled(str(path))
    if b.exists():
        return b
    raise ConfigError(f"config file not found: {path}")


def _defaults() -> dict[str, dict[str, Any]]:
    base = ExperimentConfig()
    return {s: {k: getattr(getattr(base, s), k) for k in _section_fields(s)} for s in SECTIONS}


def parse_config(path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Resolve defaults, then ``path`` (INI), then ``overrides`` keyed "section.key"."""
    values = _defaults()
    if path is not None:
        path = resolve_path(path)
        text = path.read_text()
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text, source=str(path))
        except configparser.Error as e:
            raise ConfigError(str(e)) from None
        for section in cp.sections():
            if section not in values:
                raise ConfigError(f"{path}:{_line_of(text, section)}: unknown section [{section}]")
            for key, raw in cp.items(section):
                where = f"{path}:{_line_of(text, section, key)}"
                if key not in values[section]:
                    raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
                values[section][key] = _convert(raw, values[section][key], where)
    for dotted, v in (overrides or {}).items():
        section, key = dotted.split(".", 1)
        if section not in values or key not in values[section]:
            raise ConfigError(f"unknown override {dotted!r}")
        values[section][key] = v
    try:
        parts = {s: type(getattr(ExperimentConfig(), s))(**values[s]) for s in SECTIONS}
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    return ExperimentConfig(**parts)


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Every resolved value as INI text; parses back to an equal config."""
    lines = []
    for s in SECTIONS:
        lines.append(f"[{s}]")
        obj = getattr(cfg, s)
        for k in _section_fields(s):
            lines.append(f"{k} = {_fmt(getattr(obj, k))}")
        lines.append("")
    return "\n".join(lines)
