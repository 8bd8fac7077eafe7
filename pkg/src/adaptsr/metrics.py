"""Full- and no-reference quality metrics, score aggregation and information gain.

All metrics take images in [0, 1] (2-D, or H x W x C where per-channel values
are averaged). Latent tiles live in [-1, 1]; :class:`MetricContext` maps them
before scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage, optimize, special

PSNR_CAP = 100.0

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

NLPD_MAX_LEVELS = 4
NLPD_C0 = 0.05
# 5-tap binomial used for pyramid blur/expand
BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

# local statistics leave the center pixel out; with the center included,
# white noise comes out markedly platykurtic at this tile size
MSCN_WIN = 15
MSCN_SIGMA = 3.0
MSCN_C = 1e-3
GGD_SHAPE_RANGE = (0.05, 20.0)
NATURAL_SHAPE = 2.0

DETAIL_BLOCK = 8
DETAIL_BINS = 32
DETAIL_RANGE = (0.0, 0.5)

NR_MIN_SIDE = 16


class MetricError(ValueError):
    pass


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def _planes(x: np.ndarray):
    if x.ndim == 2:
        return [x]
    if x.ndim == 3:
        return [x[..., c] for c in range(x.shape[-1])]
    raise MetricError(f"expected a 2-D or 3-D tile, got shape {x.shape}")


def gaussian_kernel1d(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return k / k.sum()


def _sep_filter(x: np.ndarray, k: np.ndarray, mode: str) -> np.ndarray:
    y = ndimage.correlate1d(x, k, axis=0, mode=mode)
    return ndimage.correlate1d(y, k, axis=1, mode=mode)


# ---------------------------------------------------------------- FR metrics


def psnr(a, b, peak: float = 1.0) -> float:
    a, b = _check_pair(a, b)
    if peak <= 0:
        raise MetricError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def _ssim_plane(a: np.ndarray, b: np.ndarray) -> float:
    k = gaussian_kernel1d(SSIM_WIN, SSIM_SIGMA)
    h = SSIM_WIN // 2

    def filt(x):
        # 'valid' region of the separable window
        return _sep_filter(x, k, "constant")[h:-h, h:-h]

    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    mu_a = filt(a)
    mu_b = filt(b)
    s_aa = filt(a * a) - mu_a * mu_a
    s_bb = filt(b * b) - mu_b * mu_b
    s_ab = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * s_ab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (s_aa + s_bb + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Mean SSIM over 11x11 Gaussian windows (sigma 1.5), dynamic range 1."""
    a, b = _check_pair(a, b)
    if min(a.shape[:2]) < SSIM_WIN:
        raise MetricError(f"ssim needs tiles of at least {SSIM_WIN}x{SSIM_WIN}")
    if np.array_equal(a, b):
        return 1.0
    return float(np.mean([_ssim_plane(pa, pb) for pa, pb in zip(_planes(a), _planes(b))]))


def nlpd_levels(shape) -> int:
    side = min(shape[:2])
    return min(NLPD_MAX_LEVELS, int(math.floor(math.log2(side))) - 2)


def _blur(x: np.ndarray) -> np.ndarray:
    return _sep_filter(x, BINOMIAL5, "reflect")


def laplacian_pyramid(x: np.ndarray, levels: int) -> list[np.ndarray]:
    """Band-pass levels only; the low-pass residual is dropped."""
    bands = []
    cur = x
    for _ in range(levels):
        low = _blur(cur)[::2, ::2]
        up = np.repeat(np.repeat(low, 2, axis=0), 2, axis=1)[: cur.shape[0], : cur.shape[1]]
        bands.append(cur - _blur(up))
        cur = low
    return bands


def _normalized_bands(x: np.ndarray, levels: int) -> list[np.ndarray]:
    out = []
    for band in laplacian_pyramid(x, levels):
        activity = ndimage.uniform_filter(np.abs(band), size=3, mode="reflect")
        out.append(band / (activity + NLPD_C0))
    return out


def nlpd(a, b, levels: int | None = None) -> float:
    """Normalized Laplacian pyramid distance (lower is better)."""
    a, b = _check_pair(a, b)
    if levels is None:
        levels = nlpd_levels(a.shape)
    if levels < 1 or min(a.shape[:2]) < 2**levels:
        raise MetricError(f"tile {a.shape[:2]} too small for {levels} pyramid levels")
    if np.array_equal(a, b):
        return 0.0
    vals = []
    for pa, pb in zip(_planes(a), _planes(b)):
        na = _normalized_bands(pa, levels)
        nb = _normalized_bands(pb, levels)
        vals.append(np.mean([math.sqrt(float(np.mean((x - y) ** 2))) for x, y in zip(na, nb)]))
    return float(np.mean(vals))


# ---------------------------------------------------------------- NR metrics


def mscn(x: np.ndarray) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients, center excluded."""
    k = gaussian_kernel1d(MSCN_WIN, MSCN_SIGMA)
    w0 = k[MSCN_WIN // 2] ** 2
    mu = (_sep_filter(x, k, "reflect") - w0 * x) / (1.0 - w0)
    m2 = (_sep_filter(x * x, k, "reflect") - w0 * x * x) / (1.0 - w0)
    var = np.abs(m2 - mu * mu)
    return (x - mu) / (np.sqrt(var) + MSCN_C)


def _ggd_ratio(shape):
    # Gamma(1/s) Gamma(3/s) / Gamma(2/s)^2, decreasing in s
    return np.exp(special.gammaln(1.0 / shape) + special.gammaln(3.0 / shape) - 2.0 * special.gammaln(2.0 / shape))


def ggd_shape(coeffs: np.ndarray) -> float:
    """Moment-matched generalized-Gaussian shape, clamped to the search range."""
    mean_abs = float(np.mean(np.abs(coeffs)))
    if mean_abs == 0.0:
        return float("nan")
    rho = float(np.mean(coeffs * coeffs)) / (mean_abs * mean_abs)
    lo, hi = GGD_SHAPE_RANGE
    if rho >= _ggd_ratio(lo):
        return lo
    if rho <= _ggd_ratio(hi):
        return hi
    return float(optimize.brentq(lambda s: math.log(_ggd_ratio(s)) - math.log(rho), lo, hi, xtol=1e-14, rtol=1e-15))


def _nr_plane_naturalness(x: np.ndarray) -> float:
    if np.ptp(x) == 0.0:
        return 0.0
    shape = ggd_shape(mscn(x))
    return math.exp(-abs(shape - NATURAL_SHAPE))


def nr_naturalness(a) -> float:
    """MSCN generalized-Gaussian shape compared to the natural-image value 2."""
    a = np.asarray(a, dtype=np.float64)
    if min(a.shape[:2]) < NR_MIN_SIDE:
        raise MetricError(f"no-reference metrics need tiles of at least {NR_MIN_SIDE} px")
    return float(np.mean([_nr_plane_naturalness(p) for p in _planes(a)]))


def block_std(x: np.ndarray, block: int = DETAIL_BLOCK) -> np.ndarray:
    h = (x.shape[0] // block) * block
    w = (x.shape[1] // block) * block
    blocks = x[:h, :w].reshape(h // block, block, w // block, block)
    return blocks.std(axis=(1, 3)).ravel()


def _nr_plane_detail(x: np.ndarray) -> float:
    stds = np.clip(block_std(x), *DETAIL_RANGE)
    counts, _ = np.histogram(stds, bins=DETAIL_BINS, range=DETAIL_RANGE)
    p = counts[counts > 0] / stds.size
    return float(-(p * np.log(p)).sum() / math.log(DETAIL_BINS))


def nr_detail(a) -> float:
    """Normalized entropy of the 8x8 block standard-deviation histogram."""
    a = np.asarray(a, dtype=np.float64)
    if min(a.shape[:2]) < NR_MIN_SIDE:
        raise MetricError(f"no-reference metrics need tiles of at least {NR_MIN_SIDE} px")
    return float(np.mean([_nr_plane_detail(p) for p in _planes(a)]))


# ---------------------------------------------------------------- aggregation


FR, NR = "FR", "NR"
HIGHER, LOWER = "higher-better", "lower-better"

FR_METRICS: dict[str, Callable[[np.ndarray, np.ndarray], float]] = {
    "psnr": psnr,
    "ssim": ssim,
    "nlpd": nlpd,
}
NR_METRICS: dict[str, Callable[[np.ndarray], float]] = {
    "nr_naturalness": nr_naturalness,
    "nr_detail": nr_detail,
}


def register_metric(name: str, kind: str, fn: Callable) -> None:
    """Plug in an extra metric, e.g. a learned one, under ``name``."""
    if kind == FR:
        FR_METRICS[name] = fn
    elif kind == NR:
        NR_METRICS[name] = fn
    else:
        raise MetricError(f"unknown metric kind {kind!r}")


@dataclass(frozen=True)
class MetricSpec:
    id: str
    kind: str
    weight: float = 1.0
    norm_lo: float = 0.0
    norm_hi: float = 1.0
    orientation: str = HIGHER

    def problems(self) -> list[str]:
        errs = []
        if self.kind not in (FR, NR):
            errs.append(f"kind must be FR or NR, got {self.kind!r}")
        elif self.id not in (FR_METRICS if self.kind == FR else NR_METRICS):
            errs.append(f"unknown {self.kind} metric {self.id!r}")
        if not self.weight >= 0:
            errs.append("weight must be >= 0")
        if not self.norm_lo < self.norm_hi:
            errs.append("norm_lo must be < norm_hi")
        if self.orientation not in (HIGHER, LOWER):
            errs.append(f"orientation must be {HIGHER!r} or {LOWER!r}")
        return errs


DEFAULT_METRICS: tuple[MetricSpec, ...] = (
    MetricSpec("psnr", FR, 1.0, 10.0, 50.0, HIGHER),
    MetricSpec("ssim", FR, 1.0, 0.0, 1.0, HIGHER),
    MetricSpec("nlpd", FR, 1.0, 0.0, 1.0, LOWER),
    MetricSpec("nr_naturalness", NR, 1.0, 0.0, 1.0, HIGHER),
    MetricSpec("nr_detail", NR, 1.0, 0.0, 1.0, HIGHER),
)


def normalize_metric(raw: float, spec: MetricSpec) -> float:
    v = (raw - spec.norm_lo) / (spec.norm_hi - spec.norm_lo)
    v = min(max(v, 0.0), 1.0)
    return 1.0 - v if spec.orientation == LOWER else v


@dataclass(frozen=True)
class RepresentationScore:
    value: float
    fr_component: float
    nr_component: float | None
    timestep: int


@dataclass(frozen=True)
class InfoGainReport:
    gain: float
    fr_gain: float
    nr_gain: float | None
    timestep_from: int
    timestep_to: int


def _weighted(pairs):
    total = math.fsum(w for w, _ in pairs)
    if total <= 0.0:
        return None
    return math.fsum(w * v for w, v in pairs) / total


def representation_score(f_i, o, specs: Sequence[MetricSpec] = DEFAULT_METRICS,
                         nr_active: bool = False, timestep: int = 0) -> RepresentationScore:
    """Weighted sum of normalized metric values of ``f_i`` against reference ``o``.

    NR metrics only take part when ``nr_active``. Weights are renormalized over
    the active subset, and within each kind for the component sub-scores.
    """
    f_i, o = _check_pair(f_i, o)
    fr, nr = [], []
    for spec in specs:
        if spec.kind == FR:
            fr.append((spec.weight, normalize_metric(FR_METRICS[spec.id](f_i, o), spec)))
        elif nr_active:
            nr.append((spec.weight, normalize_metric(NR_METRICS[spec.id](f_i), spec)))
    value = _weighted(fr + nr)
    if value is None:
        raise MetricError("active metric set is empty or carries zero total weight")
    fr_c = _weighted(fr)
    nr_c = _weighted(nr) if nr_active else None
    if fr_c is None:
        raise MetricError("no weighted full-reference metric in the active set")
    clip = lambda v: min(max(v, 0.0), 1.0)  # noqa: E731
    return RepresentationScore(
        value=clip(value),
        fr_component=clip(fr_c),
        nr_component=None if nr_c is None else clip(nr_c),
        timestep=int(timestep),
    )


def info_gain(current: RepresentationScore, previous: RepresentationScore) -> InfoGainReport:
    if not previous.timestep > current.timestep:
        raise MetricError(
            f"previous timestep {previous.timestep} must exceed current {current.timestep}"
        )
    nr_gain = None
    if current.nr_component is not None and previous.nr_component is not None:
        nr_gain = math.tanh(current.nr_component - previous.nr_component)
    return InfoGainReport(
        gain=math.tanh(current.value - previous.value),
        fr_gain=math.tanh(current.fr_component - previous.fr_component),
        nr_gain=nr_gain,
        timestep_from=previous.timestep,
        timestep_to=current.timestep,
    )


@dataclass
class MetricContext:
    """Scores latent tiles (values in [-1, 1]) against their reference tile."""

    specs: Sequence[MetricSpec] = field(default_factory=lambda: DEFAULT_METRICS)

    def score(self, latent, reference, timestep: int, nr_active: bool) -> RepresentationScore:
        f = (np.asarray(latent, dtype=np.float64) + 1.0) / 2.0
        o = (np.asarray(reference, dtype=np.float64) + 1.0) / 2.0
        return representation_score(f, o, self.specs, nr_active, timestep)
