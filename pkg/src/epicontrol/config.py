"""Scenario presets and key=value config-file loading."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError
from .world import WorldConfig

SCENARIO_NAMES = ("default", "larger", "changeable", "late")


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    n_areas: int
    population: int
    t_start: int
    changeable_mobility: bool = False
    commercial_visit_prob: float = 0.5


_PRESETS = {
    "default": ScenarioPreset("default", 11, 10000, 1),
    "larger": ScenarioPreset("larger", 98, 10000, 1),
    "changeable": ScenarioPreset("changeable", 11, 10000, 1, True, 0.8),
    "late": ScenarioPreset("late", 11, 10000, 5),
}


def scenario_preset(name: str) -> ScenarioPreset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {name!r}; valid: {', '.join(SCENARIO_NAMES)}"
        ) from None


def scenario_world_config(name: str, **overrides) -> WorldConfig:
    preset = scenario_preset(name)
    cfg = WorldConfig(
        n_areas=preset.n_areas,
        population=preset.population,
        t_start=preset.t_start,
        changeable_mobility=preset.changeable_mobility,
        commercial_visit_prob=preset.commercial_visit_prob,
    )
    return cfg.copy(**overrides) if overrides else cfg


_BOOL_VALUES = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _coerce(name: str, text: str, current) -> object:
    if isinstance(current, bool):
        try:
            return _BOOL_VALUES[text.lower()]
        except KeyError:
            raise ConfigurationError(f"{name} must be a boolean (got {text!r})") from None
    if isinstance(current, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigurationError(f"{name} must be an integer (got {text!r})") from None
    if isinstance(current, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigurationError(f"{name} must be a number (got {text!r})") from None
    return text


def load_world_config(path, base: WorldConfig | None = None) -> WorldConfig:
    """Overlay ``field = value`` lines from a text file onto ``base``."""
    base = base if base is not None else WorldConfig()
    text = Path(path).read_text()
    overrides = {}
    valid = set(WorldConfig.field_names())
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigurationError(f"{path}:{lineno}: expected 'field = value'")
        key = key.strip()
        if key not in valid:
            raise ConfigurationError(f"{path}:{lineno}: unknown field {key!r}")
        overrides[key] = _coerce(key, value.strip(), getattr(base, key))
    cfg = base.copy(**overrides)
    cfg.validate()
    return cfg


def config_description(cfg: WorldConfig) -> str:
    """Stable single-line rendering used in output-file headers."""
    parts = [f"{name}={getattr(cfg, name)}" for name in WorldConfig.field_names()]
    return " ".join(parts)
