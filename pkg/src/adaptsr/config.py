"""Run configuration: JSON field names, defaults and validation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .controller import DtssConfig
from .injection import ModulationParams
from .metrics import DEFAULT_METRICS, FR, MetricSpec

DENOISERS = ("analytic", "shrinkage")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    input_path: str | None = None
    output_path: str | None = None
    report_path: str | None = None
    scale: int = 4
    tile_size: int = 64
    overlap: int | None = None  # tile_size // 4 when unset
    t_max: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    tau: float = 5e-3
    intervals: tuple[int, ...] = (5, 10, 15, 20)
    saturation_streak: int = 2
    uniform_interval: int | None = None
    eta: float = 0.0
    seed: int = 0
    denoiser: str = "shrinkage"
    gamma: float = 0.5
    metrics: tuple[MetricSpec, ...] = DEFAULT_METRICS
    pfj: ModulationParams = field(default_factory=ModulationParams)
    blend_sigma: float | None = None  # tile_size / 4 when unset

    def dtss(self) -> DtssConfig:
        return DtssConfig(self.tau, self.t_max, self.intervals, self.saturation_streak,
                          self.eta, self.uniform_interval)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["intervals"] = list(self.intervals)
        d["metrics"] = [dataclasses.asdict(m) for m in self.metrics]
        return d


_INT_FIELDS = ("scale", "tile_size", "overlap", "t_max", "saturation_streak", "uniform_interval", "seed")
_FLOAT_FIELDS = ("beta_start", "beta_end", "tau", "eta", "gamma", "blend_sigma")
_STR_FIELDS = ("input_path", "output_path", "report_path", "denoiser")


def parse_intervals(value) -> tuple[int, ...]:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        return tuple(int(p) for p in parts)
    return tuple(int(v) if float(v) == int(v) else v for v in value)


def _as_int(v):
    if isinstance(v, bool):
        raise ValueError("expected an integer")
    if isinstance(v, float) and v.is_integer():
        return int(v)
    if isinstance(v, int):
        return v
    if isinstance(v, str):
        return int(v)
    raise ValueError("expected an integer")


def validate_config(raw: Mapping[str, Any] | RunConfig | None = None) -> RunConfig:
    """Fill defaults and check every field; all problems are reported together."""
    if isinstance(raw, RunConfig):
        raw = raw.to_dict()
    raw = dict(raw or {})
    errors: list[str] = []
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for key in sorted(set(raw) - known):
        errors.append(f"{key}: unknown field")
    values: dict[str, Any] = {}

    for name in _INT_FIELDS:
        if raw.get(name) is not None:
            try:
                values[name] = _as_int(raw[name])
            except (TypeError, ValueError):
                errors.append(f"{name}: expected an integer, got {raw[name]!r}")
    for name in _FLOAT_FIELDS:
        if raw.get(name) is not None:
            try:
                if isinstance(raw[name], bool):
                    raise ValueError
                values[name] = float(raw[name])
            except (TypeError, ValueError):
                errors.append(f"{name}: expected a number, got {raw[name]!r}")
    for name in _STR_FIELDS:
        if raw.get(name) is not None:
            values[name] = str(raw[name])

    if raw.get("intervals") is not None:
        try:
            values["intervals"] = parse_intervals(raw["intervals"])
        except (TypeError, ValueError):
            errors.append(f"intervals: expected a comma list of integers, got {raw['intervals']!r}")

    if raw.get("metrics") is not None:
        specs = []
        for i, m in enumerate(raw["metrics"]):
            if isinstance(m, MetricSpec):
                spec = m
            else:
                try:
                    spec = MetricSpec(**m)
                except TypeError as exc:
                    errors.append(f"metrics[{i}]: {exc}")
                    continue
            errors.extend(f"metrics[{i}]: {p}" for p in spec.problems())
            specs.append(spec)
        values["metrics"] = tuple(specs)
    if raw.get("pfj") is not None:
        p = raw["pfj"]
        if isinstance(p, ModulationParams):
            values["pfj"] = p
        else:
            try:
                values["pfj"] = dataclasses.replace(ModulationParams(), **dict(p))
            except TypeError as exc:
                errors.append(f"pfj: {exc}")

    cfg = RunConfig(**values)
    tile = cfg.tile_size
    overlap = cfg.overlap if cfg.overlap is not None else tile // 4
    sigma = cfg.blend_sigma if cfg.blend_sigma is not None else tile / 4.0
    cfg = dataclasses.replace(cfg, overlap=overlap, blend_sigma=sigma)

    if cfg.scale < 1:
        errors.append("scale: must be >= 1")
    if tile < 16:
        errors.append("tile_size: must be >= 16 (smallest tile the metrics accept)")
    if not 0 <= overlap < tile:
        errors.append("overlap: overlap < tile_size required (and >= 0)")
    if not sigma > 0:
        errors.append("blend_sigma: must be > 0")
    if not 0.0 < cfg.beta_start <= cfg.beta_end < 1.0:
        errors.append("beta_start/beta_end: need 0 < beta_start <= beta_end < 1")
    if cfg.denoiser not in DENOISERS:
        errors.append(f"denoiser: must be one of {', '.join(DENOISERS)}")
    if not 0.0 <= cfg.gamma <= 1.0:
        errors.append("gamma: must lie in [0, 1]")
    for p in cfg.dtss().problems():
        errors.append(p.split(" ", 1)[0] + ": " + p)
    if not any(m.kind == FR and m.weight > 0 for m in cfg.metrics):
        errors.append("metrics: at least one full-reference metric with positive weight is required")
    errors.extend(f"pfj: {p}" for p in cfg.pfj.problems())
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path: str | Path) -> dict[str, Any]:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError(["<root>: config file must hold a JSON object"])
    return data
