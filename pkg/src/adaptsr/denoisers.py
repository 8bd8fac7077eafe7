"""Learned-free noise predictors sharing one request contract.

Both treat the conditioning tile as the best available estimate of the clean
content. ``AnalyticDenoiser`` returns the exact noise for on-manifold inputs
and is the verification oracle; ``ShrinkageDenoiser`` blends a smoothed
self-estimate with the conditioning so the pipeline produces real images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .schedule import DiffusionSchedule

MIN_NOISE_VAR = 1e-12
SMOOTH_SIZE = 5
SMOOTH_SIGMA = 1.0


class DenoiserError(ValueError):
    pass


@dataclass(frozen=True)
class DenoiserRequest:
    x_t: np.ndarray
    timestep: int
    conditioning: np.ndarray
    schedule: DiffusionSchedule

    def coefficients(self) -> tuple[float, float]:
        if not 0 < self.timestep <= self.schedule.t_max:
            raise DenoiserError(f"timestep {self.timestep} outside (0, {self.schedule.t_max}]")
        if np.shape(self.x_t) != np.shape(self.conditioning):
            raise DenoiserError(
                f"dimension mismatch: x_t {np.shape(self.x_t)} vs conditioning {np.shape(self.conditioning)}"
            )
        ab = float(self.schedule.alpha_bar[self.timestep])
        if 1.0 - ab < MIN_NOISE_VAR:
            raise DenoiserError(f"1 - alpha_bar[{self.timestep}] too small to divide by")
        return math.sqrt(ab), math.sqrt(1.0 - ab)


def analytic_epsilon(req: DenoiserRequest) -> np.ndarray:
    sa, sn = req.coefficients()
    return (np.asarray(req.x_t, dtype=np.float64) - sa * np.asarray(req.conditioning, dtype=np.float64)) / sn


def _smoothing_kernel() -> np.ndarray:
    r = np.arange(SMOOTH_SIZE, dtype=np.float64) - (SMOOTH_SIZE - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * SMOOTH_SIGMA**2))
    return k / k.sum()


def gaussian_smooth(x: np.ndarray) -> np.ndarray:
    k = _smoothing_kernel()
    y = ndimage.correlate1d(x, k, axis=0, mode="reflect")
    return ndimage.correlate1d(y, k, axis=1, mode="reflect")


def shrinkage_denoise(req: DenoiserRequest, gamma: float) -> np.ndarray:
    if not 0.0 <= gamma <= 1.0:
        raise DenoiserError(f"gamma must lie in [0, 1], got {gamma}")
    sa, sn = req.coefficients()
    x_t = np.asarray(req.x_t, dtype=np.float64)
    cond = np.asarray(req.conditioning, dtype=np.float64)
    x0 = (1.0 - gamma) * gaussian_smooth(x_t / sa) + gamma * cond
    x0 = np.clip(x0, -1.0, 1.0)
    return (x_t - sa * x0) / sn


class AnalyticDenoiser:
    name = "analytic"

    def __call__(self, req: DenoiserRequest) -> np.ndarray:
        return analytic_epsilon(req)


class ShrinkageDenoiser:
    name = "shrinkage"

    def __init__(self, gamma: float = 0.5):
        if not 0.0 <= gamma <= 1.0:
            raise DenoiserError(f"gamma must lie in [0, 1], got {gamma}")
        self.gamma = gamma

    def __call__(self, req: DenoiserRequest) -> np.ndarray:
        return shrinkage_denoise(req, self.gamma)


def make_denoiser(name: str, gamma: float = 0.5):
    if name == "analytic":
        return AnalyticDenoiser()
    if name == "shrinkage":
        return ShrinkageDenoiser(gamma)
    raise DenoiserError(f"unknown denoiser {name!r}")
