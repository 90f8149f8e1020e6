"""Run configuration: a strict, canonically serializable schema.

Configs are plain YAML mappings.  Unknown keys are rejected, values are type
checked, and the canonical serialization round-trips exactly, so a run is
fully reproducible from its echoed config file alone.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import yaml

__all__ = ["ConfigError", "ScenarioConfig", "SCENARIO_NAMES", "parse_range"]

SCENARIO_NAMES = (
    "benefit-surface",
    "auction-compare",
    "sensitivity",
    "discipline-compare",
    "misreport",
    "obstruction",
    "arterial",
)

SCENARIO_ALIASES = {
    "isolated-benefit": "benefit-surface",
}

FULL_SCALE_ARRIVALS = 54_000


class ConfigError(ValueError):
    """The configuration violates the schema."""


def parse_range(spec) -> list[float]:
    """Parse a volume list: '200..1800:200', '400,800,1200', or a list."""
    if isinstance(spec, (list, tuple)):
        return [float(x) for x in spec]
    text = str(spec).strip()
    if ".." in text:
        lo_part, _, rest = text.partition("..")
        hi_part, _, step_part = rest.partition(":")
        if not step_part:
            raise ConfigError(f"range {text!r} needs a step, e.g. 200..1800:200")
        lo, hi, step = float(lo_part), float(hi_part), float(step_part)
        if step <= 0 or hi < lo:
            raise ConfigError(f"bad range {text!r}")
        out = []
        v = lo
        while v <= hi + 1e-9:
            out.append(round(v, 9))
            v += step
        return out
    return [float(x) for x in text.split(",") if x.strip()]


@dataclass
class ScenarioConfig:
    """Everything a run needs; every field has a reproducible default."""

    scenario: str = "benefit-surface"
    seed: int = 7
    replications: int = 3
    parallel: int = 1
    full_scale: bool = False
    out_dir: str | None = None

    volumes: list[float] | None = None  # scenario defaults apply when None
    vot_mean: float = 14.1
    vot_sd: float = 9.0
    penetration: float = 1.0
    zone_radius_m: float = 150.0
    arrivals_per_cell: int | None = None
    warmup_s: float | None = None

    true_vots: list[float] = field(default_factory=lambda: [4.0, 12.0, 20.0, 28.0, 36.0])
    declared_vots: list[float] = field(default_factory=lambda: [4.0, 12.0, 20.0, 28.0, 36.0])
    probe_interval_s: float = 120.0

    obstruction_vots: list[float] = field(default_factory=lambda: [float(v) for v in range(1, 41)])
    obstruction_rates: list[float] = field(default_factory=lambda: [100.0, 300.0, 500.0, 700.0, 900.0])
    obstruction_horizon_s: float = 1320.0

    penetrations: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    zones: list[float] = field(default_factory=lambda: [75.0, 150.0])

    def __post_init__(self):
        name = SCENARIO_ALIASES.get(self.scenario, self.scenario)
        if name not in SCENARIO_NAMES:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIO_NAMES)}"
            )
        self.scenario = name
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.parallel < 1:
            raise ConfigError("parallel must be >= 1")
        if not 0.0 <= self.penetration <= 1.0:
            raise ConfigError("penetration must be in [0, 1]")
        if self.vot_mean <= 0 or self.vot_sd < 0:
            raise ConfigError("VOT moments must be positive (sd may be zero)")
        if self.zone_radius_m <= 0:
            raise ConfigError("zone radius must be positive")
        if self.volumes is not None:
            self.volumes = parse_range(self.volumes)

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(self.seed + k for k in range(self.replications))

    def arrivals(self, desk_default: int) -> int:
        if self.arrivals_per_cell is not None:
            return self.arrivals_per_cell
        return FULL_SCALE_ARRIVALS if self.full_scale else desk_default

    def warmup(self, desk_default: float) -> float:
        return self.warmup_s if self.warmup_s is not None else desk_default

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
        return cls.from_dict(data or {})

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)
