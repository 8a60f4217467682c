"""Filter configuration and the flat key=value config file format.

Every tunable lives in FilterParams with its default from the parameter
table; the config file maps leaf field names to values, one per line, with
'#' comments. Unknown keys are hard errors so a typo cannot silently fall
back to a default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .kalman import KfNoiseParams
from .likelihood import LateralParams, TargetSpeedParams


@dataclass(frozen=True)
class FilterParams:
    noise: KfNoiseParams = field(default_factory=KfNoiseParams)
    lateral: LateralParams = field(default_factory=LateralParams)
    tsp: TargetSpeedParams = field(default_factory=TargetSpeedParams)
    # Population ceiling; the low-weight cull applies above it and
    # resampling refills toward it from below.
    particle_threshold: int = 100
    # A particle is culled when its weight drops under weight_floor times
    # the uniform share 1/population (the table's 1/200, read scale-free).
    weight_floor: float = 1.0 / 200.0
    merge_dist: float = 20.0
    displacement_halfwidth: float = 100.0
    # Resampling instants are multiples of resample_period; the population
    # check (cull + resample trigger) runs every check_interval steps.
    # 0 disables the respective mechanism.
    resample_period: int = 100
    check_interval: int = 100
    rng_seed: int = 0
    # Two particles merge only when their filter means agree this tightly.
    merge_tol_theta: float = 1.0
    merge_tol_omega: float = 0.5
    merge_tol_sbar: float = 0.5

    def __post_init__(self):
        if self.particle_threshold < 1:
            raise ValueError("particle_threshold must be >= 1")
        if not (0 < self.weight_floor < 1):
            raise ValueError("weight_floor must be in (0, 1)")
        for name in ("merge_dist", "displacement_halfwidth"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


_SUB_SPECS = {
    "noise": KfNoiseParams,
    "lateral": LateralParams,
    "tsp": TargetSpeedParams,
}

_INT_KEYS = {"particle_threshold", "resample_period", "check_interval", "rng_seed", "lag_k"}


def config_keys() -> dict[str, str]:
    """Leaf key -> owning group ('' for top-level) for every config key."""
    keys = {}
    for group, cls in _SUB_SPECS.items():
        for f in dataclasses.fields(cls):
            keys[f.name] = group
    for f in dataclasses.fields(FilterParams):
        if f.name not in _SUB_SPECS:
            keys[f.name] = ""
    return keys


class ConfigError(Exception):
    pass


def parse_config(text: str) -> FilterParams:
    """Parse `key = value` lines into FilterParams. Unknown keys raise."""
    known = config_keys()
    top: dict[str, object] = {}
    subs: dict[str, dict[str, object]] = {g: {} for g in _SUB_SPECS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown config key '{key}'")
        try:
            parsed: object = int(value) if key in _INT_KEYS else float(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for '{key}': {value!r}") from exc
        group = known[key]
        if group:
            subs[group][key] = parsed
        else:
            top[key] = parsed
    try:
        return FilterParams(
            noise=KfNoiseParams(**subs["noise"]),
            lateral=LateralParams(**subs["lateral"]),
            tsp=TargetSpeedParams(**subs["tsp"]),
            **top,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> FilterParams:
    return parse_config(Path(path).read_text())


def default_config_text() -> str:
    """Render the defaults as a config file, one key per line."""
    lines = ["# Filter parameters (defaults)"]
    p = FilterParams()
    for group, cls in _SUB_SPECS.items():
        obj = getattr(p, group)
        for f in dataclasses.fields(cls):
            lines.append(f"{f.name} = {getattr(obj, f.name)}")
    for f in dataclasses.fields(FilterParams):
        if f.name not in _SUB_SPECS:
            lines.append(f"{f.name} = {getattr(p, f.name)}")
    return "\n".join(lines) + "\n"
