"""Per-tile dynamic timestep selection.

Each tile walks down from its start timestep in skip-steps. After every
landing the tile is scored, the information gain against the previous
landing picks the next interval, and a run of significant no-reference
declines ends the tile early with its best no-reference snapshot.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .denoisers import DenoiserRequest
from .injection import ModulationParams, inject, modulation_coefficients
from .metrics import InfoGainReport, RepresentationScore, info_gain
from .schedule import DiffusionSchedule, transition


class Category(str, enum.Enum):
    BOOTSTRAP = "bootstrap"
    STABLE = "stable"
    GROWING = "growing"
    SATURATED = "saturated"
    UNIFORM = "uniform"
    DONE = "done"
    FAILED = "failed"


EXIT = "exit"


class ControllerError(RuntimeError):
    pass


@dataclass(frozen=True)
class DtssConfig:
    tau: float = 5e-3
    t_max: int = 1000
    intervals: tuple[int, ...] = (5, 10, 15, 20)
    saturation_streak: int = 2
    eta: float = 0.0
    # fixed stride baseline: no classification, no early exit
    uniform_interval: int | None = None

    def problems(self) -> list[str]:
        errs = []
        if not self.tau > 0:
            errs.append("tau must be > 0")
        if int(self.t_max) != self.t_max or self.t_max < 1:
            errs.append("t_max must be a positive integer")
        iv = tuple(self.intervals)
        if len(iv) != 4:
            errs.append("intervals must hold exactly four values")
        if any(int(v) != v or v < 1 for v in iv):
            errs.append("intervals must be positive integers")
        elif any(b <= a for a, b in zip(iv, iv[1:])):
            errs.append("intervals must be strictly increasing")
        elif iv and iv[-1] > self.t_max:
            errs.append("intervals must not exceed t_max")
        if int(self.saturation_streak) != self.saturation_streak or self.saturation_streak < 1:
            errs.append("saturation_streak must be a positive integer")
        if not 0.0 <= self.eta <= 1.0:
            errs.append("eta must lie in [0, 1]")
        u = self.uniform_interval
        if u is not None and (int(u) != u or not 1 <= u <= self.t_max):
            errs.append("uniform_interval must be an integer in [1, t_max]")
        return errs


@dataclass
class BestSnapshot:
    score: float
    timestep: int
    snapshot: np.ndarray


@dataclass
class TileState:
    tile_id: int
    origin: tuple[int, int]
    latent: np.ndarray
    reference: np.ndarray
    timestep: int
    start_timestep: int
    category: Category = Category.BOOTSTRAP
    history: list[RepresentationScore] = field(default_factory=list)
    best_nr: BestSnapshot | None = None
    nfe: int = 0
    decline_streak: int = 0
    last_report: InfoGainReport | None = None
    next_interval: int | None = None
    timeline: list[str] = field(default_factory=list)
    intervals_used: list[int] = field(default_factory=list)
    exit_reason: str | None = None

    @property
    def done(self) -> bool:
        return self.category is Category.DONE


class ScoreSource(Protocol):
    def score(self, latent, reference, timestep: int, nr_active: bool) -> RepresentationScore: ...


def nr_active_at(timestep: int, t_max: int) -> bool:
    """No-reference metrics count only in the second half of the trajectory."""
    return timestep < t_max / 2


def classify_region(report: InfoGainReport, nr_active: bool, decline_streak: int,
                    config: DtssConfig) -> tuple[Category, int | str]:
    tau = config.tau
    iv = config.intervals
    nr = report.nr_gain
    if nr_active and nr is not None:
        if nr <= -tau and decline_streak + 1 >= config.saturation_streak:
            return Category.SATURATED, EXIT
        if nr >= 2 * tau:
            return Category.GROWING, iv[0]
        if nr >= tau:
            return Category.GROWING, iv[1]
        if report.fr_gain >= tau:
            return Category.STABLE, iv[2]
        return Category.STABLE, iv[3]
    fr = report.fr_gain
    if fr >= 2 * tau:
        return Category.GROWING, iv[0]
    if fr >= tau:
        return Category.GROWING, iv[1]
    if fr >= 0:
        return Category.STABLE, iv[2]
    return Category.STABLE, iv[3]


def init_tile(tile_id: int, origin, latent, reference, metrics: ScoreSource,
              config: DtssConfig, timestep: int | None = None) -> TileState:
    """Create a tile at ``timestep`` (default ``t_max``) and record its initial score."""
    t = config.t_max if timestep is None else int(timestep)
    latent = np.asarray(latent, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    tile = TileState(tile_id, tuple(origin), latent, reference, t, t)
    nr_on = nr_active_at(t, config.t_max)
    score = metrics.score(latent, reference, t, nr_on)
    tile.history.append(score)
    # the starting latent is pure noise, so it is the only clean estimate on hand
    _track_best(tile, score, latent)
    if t == 0:
        tile.category = Category.DONE
        tile.exit_reason = "completed"
    return tile


def _track_best(tile: TileState, score: RepresentationScore, snapshot: np.ndarray) -> None:
    if score.nr_component is None:
        return
    if tile.best_nr is None or score.nr_component > tile.best_nr.score:
        tile.best_nr = BestSnapshot(score.nr_component, score.timestep, snapshot.copy())


def advance_tile(tile: TileState, denoiser: Callable[[DenoiserRequest], np.ndarray],
                 schedule: DiffusionSchedule, metrics: ScoreSource, config: DtssConfig,
                 rng: np.random.Generator | None = None,
                 pfj: ModulationParams = ModulationParams()) -> TileState:
    """Run one controller iteration (exactly one denoiser call) on ``tile``."""
    if tile.category in (Category.DONE, Category.FAILED):
        raise ControllerError(f"tile {tile.tile_id} is already {tile.category.value}")
    try:
        return _advance(tile, denoiser, schedule, metrics, config, rng, pfj)
    except Exception as exc:
        tile.category = Category.FAILED
        tile.exit_reason = f"failed: {type(exc).__name__}: {exc}"
        raise


def _advance(tile, denoiser, schedule, metrics, config, rng, pfj):
    if config.uniform_interval is not None:
        interval = config.uniform_interval
        tile.timeline.append(Category.UNIFORM.value)
    elif tile.next_interval is None:
        interval = config.intervals[0]
        tile.timeline.append(Category.BOOTSTRAP.value)
    else:
        interval = tile.next_interval
        tile.timeline.append(tile.category.value)
    t = tile.timestep
    s = max(t - interval, 0)
    tile.intervals_used.append(t - s)

    alpha, beta = modulation_coefficients(tile.reference, tile.last_report, pfj)
    cond = inject(tile.reference, alpha, beta)
    eps = denoiser(DenoiserRequest(tile.latent, t, cond, schedule))
    tile.nfe += 1
    entry = schedule.lookup(t, s, config.eta)
    noise = None
    if entry.sigma > 0.0:
        if rng is None:
            raise ControllerError("stochastic transitions need an rng stream")
        noise = rng.standard_normal(tile.latent.shape)
    x_t = tile.latent
    x_s = transition(x_t, eps, entry, noise)
    ab_t = float(schedule.alpha_bar[t])
    x0_hat = (x_t - math.sqrt(1.0 - ab_t) * eps) / math.sqrt(ab_t)
    tile.latent = x_s
    tile.timestep = s

    score = metrics.score(x_s, tile.reference, s, nr_active_at(s, config.t_max))
    report = info_gain(score, tile.history[-1])
    tile.history.append(score)
    tile.last_report = report
    _track_best(tile, score, x_s if s == 0 else x0_hat)

    declining = report.nr_gain is not None and report.nr_gain <= -config.tau
    if s == 0:
        tile.category = Category.DONE
        tile.exit_reason = "completed"
    elif config.uniform_interval is None:
        category, directive = classify_region(report, report.nr_gain is not None,
                                              tile.decline_streak, config)
        if directive == EXIT:
            tile.timeline.append(Category.SATURATED.value)
            tile.latent = tile.best_nr.snapshot.copy()
            tile.category = Category.DONE
            tile.exit_reason = "saturated"
        else:
            tile.category = category
            tile.next_interval = directive
    tile.decline_streak = tile.decline_streak + 1 if declining else 0
    return tile


def run_tile(tile: TileState, denoiser, schedule, metrics, config: DtssConfig,
             rng: np.random.Generator | None = None,
             pfj: ModulationParams = ModulationParams()) -> TileState:
    while tile.category not in (Category.DONE, Category.FAILED):
        advance_tile(tile, denoiser, schedule, metrics, config, rng, pfj)
    return tile


def equivalent_timesteps(tile: TileState) -> int:
    """Raw timesteps consumed before the tile finished."""
    if not tile.done:
        raise ControllerError(f"tile {tile.tile_id} is not done")
    return tile.start_timestep - tile.timestep


def max_iterations(t_max: int, intervals: Sequence[int]) -> int:
    return math.ceil(t_max / intervals[0])
