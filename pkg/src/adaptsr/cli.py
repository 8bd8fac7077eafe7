"""Command line entry point: ``adaptsr run ...`` and ``adaptsr validate ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, validate_config
from .pipeline import PipelineError, dumps, run_adaptive_sr

# CLI flag -> config field
FLAG_FIELDS = {
    "input": "input_path",
    "output": "output_path",
    "report": "report_path",
    "scale": "scale",
    "tile": "tile_size",
    "overlap": "overlap",
    "tmax": "t_max",
    "tau": "tau",
    "intervals": "intervals",
    "eta": "eta",
    "seed": "seed",
    "denoiser": "denoiser",
    "gamma": "gamma",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptsr", description="Tile-adaptive diffusion super-resolution")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="upsample an image and write the output PNG and JSON report")
    run.add_argument("--input", required=True, help="input PNG or PGM")
    run.add_argument("--output", required=True, help="output PNG")
    run.add_argument("--report", required=True, help="output JSON report")
    _add_common(run)
    run.add_argument("--workers", type=int, default=1, help="tile worker threads")
    run.add_argument("--timing", action="store_true", help="include wall time in the report")

    val = sub.add_parser("validate", help="print the fully defaulted configuration")
    _add_common(val)
    return parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--scale", type=int)
    p.add_argument("--tile", type=int)
    p.add_argument("--overlap", type=int)
    p.add_argument("--tmax", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--intervals", help="comma list, e.g. 5,10,15,20")
    p.add_argument("--eta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--denoiser", choices=("analytic", "shrinkage"))
    p.add_argument("--gamma", type=float)


def merged_config(args: argparse.Namespace) -> dict:
    raw = load_config(args.config) if args.config else {}
    for flag, name in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            raw[name] = value
    return raw


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = validate_config(merged_config(args))
        if args.command == "validate":
            print(dumps(cfg.to_dict()))
            return 0
        report = run_adaptive_sr(cfg, workers=args.workers, write=False)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    from .imageio import save_image

    save_image(cfg.output_path, report.image)
    Path(cfg.report_path).write_text(report.to_json(include_timing=args.timing))
    print(f"tiles={len(report.tiles)} total_nfe={report.total_nfe} "
          f"mean_equivalent_timesteps={report.mean_equivalent_timesteps:.1f} failed={report.failed}")
    return 1 if report.failed else 0


if __name__ == "__main__":
    sys.exit(main())
