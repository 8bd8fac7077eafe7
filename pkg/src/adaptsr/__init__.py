"""Tile-adaptive diffusion sampling for super-resolution.

Tiles are denoised with skip-step jumps whose length follows the information
gain of quality metrics between landings; finished tiles are blended with
Gaussian weights.
"""

from .config import ConfigError, RunConfig, validate_config
from .controller import (Category, DtssConfig, TileState, advance_tile, classify_region,
                         equivalent_timesteps, init_tile, run_tile)
from .denoisers import (AnalyticDenoiser, DenoiserRequest, ShrinkageDenoiser, analytic_epsilon,
                        shrinkage_denoise)
from .injection import ModulationParams, inject, modulation_coefficients
from .metrics import (InfoGainReport, MetricContext, MetricSpec, RepresentationScore, info_gain,
                      nlpd, normalize_metric, nr_detail, nr_naturalness, psnr,
                      representation_score, ssim)
from .pipeline import RunReport, run_adaptive_sr, sample_canvas
from .schedule import (DiffusionSchedule, SkipCodebookEntry, build_schedule, codebook_lookup,
                       transition)
from .tiling import (BlendMap, TileLayout, blend_map, gaussian_weight_map, integrate_regions,
                     slice_canvas)

__version__ = "0.1.0"
