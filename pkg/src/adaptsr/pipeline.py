"""End-to-end adaptive super-resolution run: ingest, tile, sample, blend, report."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .config import RunConfig, validate_config
from .controller import Category, TileState, equivalent_timesteps, init_tile, run_tile
from .denoisers import make_denoiser
from .imageio import load_image, save_image, upsample_bicubic
from .metrics import MetricContext
from .schedule import build_schedule
from .tiling import TileLayout, integrate_regions, slice_canvas

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


@dataclass
class TileRecord:
    tile_id: int
    origin: tuple[int, int]
    nfe: int
    equivalent_timesteps: int
    exit_timestep: int
    exit_reason: str
    category_timeline: list[str]
    intervals: list[int]
    final_fr: float | None
    final_nr: float | None

    @property
    def mean_interval(self) -> float:
        return float(np.mean(self.intervals)) if self.intervals else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "tile_id": self.tile_id,
            "origin": list(self.origin),
            "nfe": self.nfe,
            "equivalent_timesteps": self.equivalent_timesteps,
            "exit_timestep": self.exit_timestep,
            "exit_reason": self.exit_reason,
            "category_timeline": list(self.category_timeline),
            "intervals": list(self.intervals),
            "mean_interval": self.mean_interval,
            "final_fr": self.final_fr,
            "final_nr": self.final_nr,
        }


@dataclass
class RunReport:
    tiles: list[TileRecord]
    canvas: tuple[int, ...]
    config: dict[str, Any]
    wall_time: float = 0.0
    # pre-quantization output in [0, 1]; not serialized
    image: np.ndarray | None = field(default=None, repr=False)

    @property
    def total_nfe(self) -> int:
        return sum(t.nfe for t in self.tiles)

    @property
    def mean_equivalent_timesteps(self) -> float:
        return float(np.mean([t.equivalent_timesteps for t in self.tiles]))

    @property
    def failed(self) -> int:
        return sum(1 for t in self.tiles if t.exit_reason.startswith("failed"))

    def to_dict(self, include_timing: bool = False) -> dict[str, Any]:
        agg = {
            "tile_count": len(self.tiles),
            "total_nfe": self.total_nfe,
            "mean_equivalent_timesteps": self.mean_equivalent_timesteps,
            "failed_tiles": self.failed,
            "canvas": list(self.canvas),
        }
        if include_timing:
            agg["wall_time_s"] = self.wall_time
        return {"tiles": [t.to_dict() for t in self.tiles], "aggregate": agg, "config": self.config}

    def to_json(self, include_timing: bool = False) -> str:
        return dumps(self.to_dict(include_timing)) + "\n"


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"cannot serialize non-finite float {v}")
        return format(v, ".17g")
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _record(tile: TileState) -> TileRecord:
    last = tile.history[-1] if tile.history else None
    failed = tile.category is Category.FAILED
    return TileRecord(
        tile_id=tile.tile_id,
        origin=tile.origin,
        nfe=tile.nfe,
        equivalent_timesteps=tile.start_timestep - tile.timestep if failed else equivalent_timesteps(tile),
        exit_timestep=tile.timestep,
        exit_reason=tile.exit_reason or "unknown",
        category_timeline=list(tile.timeline),
        intervals=list(tile.intervals_used),
        final_fr=None if last is None else last.fr_component,
        final_nr=None if last is None else last.nr_component,
    )


def sample_canvas(conditioning: np.ndarray, cfg: RunConfig, workers: int = 1
                  ) -> tuple[np.ndarray, list[TileState], TileLayout]:
    """Run the per-tile loops over a conditioning canvas (latent values in [-1, 1])."""
    cfg = validate_config(cfg)
    conditioning = np.asarray(conditioning, dtype=np.float64)
    layout = slice_canvas(conditioning.shape[:2], cfg.tile_size, cfg.overlap)
    schedule = build_schedule(cfg.t_max, cfg.beta_start, cfg.beta_end)
    denoiser = make_denoiser(cfg.denoiser, cfg.gamma)
    metrics = MetricContext(cfg.metrics)
    dtss = cfg.dtss()

    def job(idx: int) -> tuple[TileState, np.ndarray]:
        ref = conditioning[layout.window(idx)]
        # one independent stream per tile keeps results schedule-independent
        rng = np.random.default_rng([cfg.seed, idx])
        x_T = rng.standard_normal(ref.shape)
        tile = TileState(idx, layout.origins[idx], x_T, ref, dtss.t_max, dtss.t_max)
        try:
            tile = init_tile(idx, layout.origins[idx], x_T, ref, metrics, dtss)
            run_tile(tile, denoiser, schedule, metrics, dtss, rng, cfg.pfj)
            return tile, tile.latent
        except Exception as exc:
            log.error("tile %d failed: %s", idx, exc)
            tile.category = Category.FAILED
            if not tile.exit_reason:
                tile.exit_reason = f"failed: {type(exc).__name__}: {exc}"
            return tile, ref

    n = len(layout.origins)
    if workers <= 1:
        results = [job(i) for i in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(n)))
    tiles = [r[0] for r in results]
    # blending happens once, after every tile has finished
    canvas = integrate_regions([r[1] for r in results], layout, cfg.blend_sigma)
    return canvas, tiles, layout


def echo_config(cfg: RunConfig) -> dict[str, Any]:
    d = cfg.to_dict()
    d.pop("output_path")
    d.pop("report_path")
    return d


def run_adaptive_sr(config: RunConfig | dict, workers: int = 1, write: bool = True) -> RunReport:
    cfg = validate_config(config)
    if not cfg.input_path:
        raise PipelineError("input_path is required")
    start = time.perf_counter()
    img = load_image(cfg.input_path)
    cond = np.clip(upsample_bicubic(2.0 * img - 1.0, cfg.scale), -1.0, 1.0)
    if min(cond.shape[:2]) < cfg.tile_size:
        raise PipelineError(
            f"upsampled canvas {cond.shape[:2]} is smaller than tile_size {cfg.tile_size}"
        )
    latent, tiles, _ = sample_canvas(cond, cfg, workers)
    out = np.clip((latent + 1.0) / 2.0, 0.0, 1.0)
    report = RunReport([_record(t) for t in tiles], tuple(out.shape), echo_config(cfg),
                       time.perf_counter() - start, out)
    if write:
        if cfg.output_path:
            save_image(cfg.output_path, out)
        if cfg.report_path:
            Path(cfg.report_path).write_text(report.to_json())
    log.info("%d tiles, total NFE %d, %.2fs", len(tiles), report.total_nfe, report.wall_time)
    return report
