"""Progressive feature injection: gain-driven affine modulation of the conditioning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import InfoGainReport


@dataclass(frozen=True)
class ModulationParams:
    alpha0: float = 1.0
    k_alpha: float = 0.5
    alpha_max: float = 1.5
    beta0: float = 0.0

    def problems(self) -> list[str]:
        errs = []
        if not self.alpha0 > 0:
            errs.append("alpha0 must be > 0")
        if not self.alpha_max >= self.alpha0:
            errs.append("alpha_max must be >= alpha0")
        if not np.isfinite(self.k_alpha) or self.k_alpha < 0:
            errs.append("k_alpha must be finite and >= 0")
        if not np.isfinite(self.beta0):
            errs.append("beta0 must be finite")
        return errs


def modulation_coefficients(o, report: InfoGainReport | None, params: ModulationParams = ModulationParams()) -> tuple[float, float]:
    """Scale grows with positive no-reference gain, capped at ``alpha_max``.

    ``o`` is accepted so other modulation rules can look at the features; the
    closed-form rule here does not use it.
    """
    alpha = params.alpha0
    if report is not None and report.nr_gain is not None:
        alpha = min(params.alpha_max, params.alpha0 + params.k_alpha * max(report.nr_gain, 0.0))
    return float(alpha), float(params.beta0)


def inject(o, alpha: float, beta: float) -> np.ndarray:
    if not (np.isfinite(alpha) and np.isfinite(beta)):
        raise ValueError("modulation coefficients must be finite")
    o = np.asarray(o, dtype=np.float64)
    if alpha == 1.0 and beta == 0.0:
        return o.copy()
    return alpha * o + beta
