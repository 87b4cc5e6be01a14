"""Scenario presets and the flat ``section.key = value`` config format.

Example file::

    # three CPU classes, desk scale
    run.name = three-cat
    run.seed = 7
    run.total_steps = 150
    market.ratios = 1, 2, 3
    market.cpus_per_provider = 1..30, 1..15, 1..10
    consumers.active = 200
    jobs.length = 2..10
    solver.norm_threshold = 80

Ranges are written ``lo..hi`` (inclusive); lists are comma separated.
Keys left out keep their defaults; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .engine import ScenarioConfig
from .solver import SolverConfig

# CPUs per provider, category 1 first. three-cat and six-cat follow the
# published parameter table; the others are sized to the same mean capacity
# (sum of mean CPU count times performance ratio = 48).
PRESET_CPUS = {
    "one-cat": ((1, 95),),
    "two-cat": ((1, 47), (1, 23)),
    "three-cat": ((1, 30), (1, 15), (1, 10)),
    "four-cat": ((1, 23), (1, 11), (1, 7), (1, 5)),
    "five-cat": ((1, 18), (1, 9), (1, 5), (1, 4), (1, 3)),
    "six-cat": ((1, 12), (1, 7), (1, 5), (1, 4), (1, 3), (1, 3)),
}
PRESET_NAMES = tuple(PRESET_CPUS)

FULL_POOLS = {"active_consumers": 2000, "potential_consumers": 2000,
               "active_providers": 1000, "potential_providers": 1000}
DESK_SCALE = 10


def preset_name(key) -> str:
    """Accept ``"three-cat"``, ``"three"``, ``"3"`` or ``3``."""
    key = str(key).strip().lower()
    if key in PRESET_CPUS:
        return key
    if key.isdigit() and 1 <= int(key) <= len(PRESET_NAMES):
        return PRESET_NAMES[int(key) - 1]
    if f"{key}-cat" in PRESET_CPUS:
        return f"{key}-cat"
    raise ValueError(f"unknown preset {key!r}; choose from {', '.join(PRESET_NAMES)}")


def preset(name, desk_scale: int = DESK_SCALE, **overrides) -> ScenarioConfig:
    """Published scenario parameters with pool sizes divided by ``desk_scale``."""
    name = preset_name(name)
    if desk_scale < 1:
        raise ValueError("desk_scale must be >= 1")
    cpus = PRESET_CPUS[name]
    pools = {k: v // desk_scale for k, v in FULL_POOLS.items()}
    fields = dict(name=name, ratios=tuple(float(i + 1) for i in range(len(cpus))),
                  cpus_per_provider=cpus, **pools)
    fields.update(overrides)
    return ScenarioConfig(**fields).validate()


# file key -> (attribute, kind); kinds: int, float, str, range_i, range_f, floats, ranges_i
_SCHEMA = {
    "run.name": ("name", "str"),
    "run.seed": ("seed", "int"),
    "run.total_steps": ("total_steps", "int"),
    "market.ratios": ("ratios", "floats"),
    "market.cpus_per_provider": ("cpus_per_provider", "ranges_i"),
    "consumers.active": ("active_consumers", "int"),
    "consumers.potential": ("potential_consumers", "int"),
    "consumers.departure_active": ("consumer_rate_active", "float"),
    "consumers.departure_potential": ("consumer_rate_potential", "float"),
    "consumers.valuation": ("valuation", "range_f"),
    "providers.active": ("active_providers", "int"),
    "providers.potential": ("potential_providers", "int"),
    "providers.departure_active": ("provider_rate_active", "float"),
    "providers.departure_potential": ("provider_rate_potential", "float"),
    "providers.mpr_window": ("mpr_window", "int"),
    "jobs.length": ("job_length", "range_i"),
    "jobs.injection_period": ("injection_period", "int"),
    "jobs.injection_batch": ("injection_batch", "range_i"),
    "jobs.background_probability": ("background_probability", "float"),
    "budget.initial": ("initial_budget", "range_f"),
    "budget.allowance_period": ("allowance_period", "int"),
    "budget.replenish_factor": ("replenish_factor", "float"),
}
_SOLVER_KINDS = {f.name: ("int" if f.type in ("int", "int | None") else "float")
                 for f in dataclasses.fields(SolverConfig)}


class ConfigError(ValueError):
    pass


def _parse_value(key, kind, text):
    def num(s, t):
        try:
            return t(s.strip())
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {s.strip()!r} as {t.__name__}") from None

    def rng(s, t):
        if ".." not in s:
            raise ConfigError(f"{key}: expected a range lo..hi, got {s.strip()!r}")
        lo, hi = s.split("..", 1)
        return (num(lo, t), num(hi, t))

    if kind == "str":
        return text
    if kind in ("int", "float"):
        if kind == "int" and text.lower() == "none":
            return None
        return num(text, int if kind == "int" else float)
    if kind == "range_i":
        return rng(text, int)
    if kind == "range_f":
        return rng(text, float)
    if kind == "floats":
        return tuple(num(s, float) for s in text.split(","))
    if kind == "ranges_i":
        return tuple(rng(s, int) for s in text.split(","))
    raise AssertionError(kind)


def _format_value(kind, value) -> str:
    if kind == "str":
        return str(value)
    if kind in ("int", "float"):
        return "none" if value is None else repr(value)
    if kind in ("range_i", "range_f"):
        return f"{value[0]!r}..{value[1]!r}"
    if kind == "floats":
        return ", ".join(repr(v) for v in value)
    if kind == "ranges_i":
        return ", ".join(f"{lo}..{hi}" for lo, hi in value)
    raise AssertionError(kind)


def loads(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse config text on top of ``base`` (defaults when omitted)."""
    base = base or ScenarioConfig()
    top, solver = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _SCHEMA:
            attr, kind = _SCHEMA[key]
            top[attr] = _parse_value(key, kind, value)
        elif key.startswith("solver.") and key[7:] in _SOLVER_KINDS:
            solver[key[7:]] = _parse_value(key, _SOLVER_KINDS[key[7:]], value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    try:
        if solver:
            top["solver"] = dataclasses.replace(base.solver, **solver)
        return dataclasses.replace(base, **top).validate()
    except ValueError as e:
        raise ConfigError(str(e)) from None


def dumps(cfg: ScenarioConfig) -> str:
    lines = []
    for key, (attr, kind) in _SCHEMA.items():
        lines.append(f"{key} = {_format_value(kind, getattr(cfg, attr))}")
    for f in dataclasses.fields(SolverConfig):
        lines.append(f"solver.{f.name} = {_format_value(_SOLVER_KINDS[f.name], getattr(cfg.solver, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config(source, desk_scale: int = DESK_SCALE) -> ScenarioConfig:
    """Load a config file path, or build a preset when ``source`` names one."""
    try:
        return preset(source, desk_scale)
    except ValueError:
        pass
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"{source!r} is neither a preset ({', '.join(PRESET_NAMES)}) nor a config file")
    return loads(path.read_text(encoding="utf-8"))


def write_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8", newline="\n")
