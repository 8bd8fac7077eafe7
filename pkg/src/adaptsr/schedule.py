"""Linear-beta diffusion schedule, skip-step codebook and latent transitions."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    """Invalid schedule parameters or timestep ordering."""


@dataclass(frozen=True)
class SkipCodebookEntry:
    """Coefficients for one jump ``x_from -> x_to``.

    ``x_to = c_x * x_from + c_eps * eps_hat + sigma * noise``
    """

    t_from: int
    t_to: int
    c_x: float
    c_eps: float
    sigma: float


class DiffusionSchedule:
    """Noise variances ``beta[1..t_max]`` and cumulative ``alpha_bar[0..t_max]``.

    ``beta`` is stored zero-based (``beta[k - 1]`` is the variance of step k);
    ``alpha_bar`` is indexed directly by timestep with ``alpha_bar[0] == 1``.
    Jump coefficients are memoized per ``(t_from, t_to, eta)``; the cache is
    guarded by a lock so lookups may come from several threads.
    """

    def __init__(self, beta: np.ndarray):
        beta = np.asarray(beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size < 1:
            raise ScheduleError("beta must be a non-empty 1-D sequence")
        if not np.all((beta > 0.0) & (beta < 1.0)):
            raise ScheduleError("beta values must lie strictly inside (0, 1)")
        self.beta = beta
        self.beta.setflags(write=False)
        alpha_bar = np.empty(beta.size + 1)
        alpha_bar[0] = 1.0
        alpha_bar[1:] = np.cumprod(1.0 - beta)
        self.alpha_bar = alpha_bar
        self.alpha_bar.setflags(write=False)
        self._cache: dict[tuple[int, int, float], SkipCodebookEntry] = {}
        self._lock = threading.Lock()

    @property
    def t_max(self) -> int:
        return int(self.beta.size)

    def __repr__(self) -> str:
        return f"DiffusionSchedule(t_max={self.t_max})"

    def lookup(self, t_from: int, t_to: int, eta: float = 0.0) -> SkipCodebookEntry:
        key = (int(t_from), int(t_to), float(eta))
        entry = self._cache.get(key)
        if entry is not None:
            return entry
        entry = self._compute(*key)
        with self._lock:
            # first writer wins so every caller sees the same object
            return self._cache.setdefault(key, entry)

    def _compute(self, t: int, s: int, eta: float) -> SkipCodebookEntry:
        if not 0 <= s < t <= self.t_max:
            raise ScheduleError(
                f"jump must satisfy 0 <= t_to < t_from <= {self.t_max}, got {t} -> {s}"
            )
        if not 0.0 <= eta <= 1.0:
            raise ScheduleError(f"eta must lie in [0, 1], got {eta}")
        ab_t = float(self.alpha_bar[t])
        ab_s = float(self.alpha_bar[s])
        if eta == 0.0:
            sigma = 0.0
        else:
            sigma = eta * math.sqrt((1.0 - ab_s) / (1.0 - ab_t)) * math.sqrt(1.0 - ab_t / ab_s)
        c_x = math.sqrt(ab_s / ab_t)
        c_eps = math.sqrt(max(1.0 - ab_s - sigma * sigma, 0.0)) - c_x * math.sqrt(1.0 - ab_t)
        return SkipCodebookEntry(t_from=t, t_to=s, c_x=c_x, c_eps=c_eps, sigma=sigma)

    # the lock and memo are process-local
    def __getstate__(self):
        return {"beta": self.beta}

    def __setstate__(self, state):
        self.__init__(state["beta"])


def build_schedule(t_max: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    """Linear beta schedule over timesteps 1..t_max."""
    if int(t_max) != t_max or t_max < 1:
        raise ScheduleError(f"t_max must be a positive integer, got {t_max}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ScheduleError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    return DiffusionSchedule(np.linspace(beta_start, beta_end, int(t_max), dtype=np.float64))


def codebook_lookup(schedule: DiffusionSchedule, t_from: int, t_to: int, eta: float = 0.0) -> SkipCodebookEntry:
    return schedule.lookup(t_from, t_to, eta)


def transition(x: np.ndarray, eps_hat: np.ndarray, entry: SkipCodebookEntry, noise: np.ndarray | None = None) -> np.ndarray:
    """Apply one codebook jump elementwise. ``noise`` is ignored when sigma is 0."""
    x = np.asarray(x, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x.shape != eps_hat.shape:
        raise ValueError(f"dimension mismatch: x {x.shape} vs eps_hat {eps_hat.shape}")
    out = entry.c_x * x + entry.c_eps * eps_hat
    if entry.sigma > 0.0:
        if noise is None:
            raise ValueError("stochastic jump (sigma > 0) needs a noise tile")
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != x.shape:
            raise ValueError(f"dimension mismatch: x {x.shape} vs noise {noise.shape}")
        out = out + entry.sigma * noise
    elif noise is not None and np.shape(noise) != x.shape:
        raise ValueError(f"dimension mismatch: x {x.shape} vs noise {np.shape(noise)}")
    return out
