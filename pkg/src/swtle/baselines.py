"""Comparison estimators: target-only, pooled, and averaged N-W fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from swtle.adjust import BandwidthPair
from swtle.bandwidth import _loo_weights
from swtle.errors import ParameterError
from swtle.kernel_core import CurveEstimate, Kernel, RandomDesignSample, nw_estimate, pooled

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class SimplexWeights:
    w: FloatArray

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if w.size == 0 or np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"weights must lie on the simplex, got {w}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


def q_nw(target: RandomDesignSample, kernel: Kernel, h: float) -> CurveEstimate:
    """N-W fit on the target sample alone."""
    curve = nw_estimate(target, kernel, h)
    return CurveEstimate(curve.func, curve.domain, curve.bandwidths, "q-nw")


def f_nw(source: RandomDesignSample, target: RandomDesignSample, kernel: Kernel, h: float
         ) -> CurveEstimate:
    """N-W fit on the pooled source and target samples."""
    if source.n == 0:
        return q_nw(target, kernel, h)
    curve = nw_estimate(pooled(source, target), kernel, h)
    return CurveEstimate(curve.func, target.domain, curve.bandwidths, "f-nw")


def sa_weights(n_p: int, n_q: int, bw: BandwidthPair) -> tuple[float, float]:
    a = np.sqrt(n_p * bw.h_p)
    b = np.sqrt(n_q * bw.h_q)
    return float(a / (a + b)), float(b / (a + b))


def sa_estimate(source: RandomDesignSample, target: RandomDesignSample, kernel: Kernel,
                bw: BandwidthPair) -> CurveEstimate:
    """``sqrt(n h)``-weighted average of the source and target N-W fits."""
    if source.n == 0 or target.n == 0:
        raise ParameterError("simple average needs non-empty source and target")
    w_p, w_q = sa_weights(source.n, target.n, bw)
    fp = nw_estimate(source, kernel, bw.h_p)
    fq = nw_estimate(target, kernel, bw.h_q)

    def evaluate(x: FloatArray) -> FloatArray:
        return w_p * fp.func(x) + w_q * fq.func(x)

    return CurveEstimate(evaluate, target.domain, {"h_p": bw.h_p, "h_q": bw.h_q}, "sa")


def wa_criterion(source_at_targets: FloatArray, target_loo: FloatArray, y: FloatArray,
                 step: float) -> tuple[FloatArray, FloatArray]:
    """LOO criterion over the grid ``w_p in {0, step, ..., 1}``."""
    units = int(round(1.0 / step))
    if units < 1 or abs(units * step - 1.0) > 1e-9:
        raise ParameterError(f"weight grid step must divide 1, got {step}")
    w_p = np.arange(units + 1) / units
    resid = y[None, :] - (w_p[:, None] * source_at_targets[None, :]
                          + (1.0 - w_p)[:, None] * target_loo[None, :])
    return w_p, np.sum(resid * resid, axis=1)


def pick_wa_weight(w_p: FloatArray, crit: FloatArray, rel_tol: float = 1e-12) -> float:
    """Smallest ``w_p`` attaining the minimum (ties favour the target)."""
    best = crit.min()
    return float(w_p[np.flatnonzero(crit <= best + rel_tol * (1.0 + abs(best)))[0]])


def wa_estimate(
    source: RandomDesignSample,
    target: RandomDesignSample,
    kernel: Kernel,
    bw: BandwidthPair,
    grid_step: float = 0.01,
) -> tuple[CurveEstimate, SimplexWeights]:
    """Data-driven weighted average ``w_p * fit_P + w_q * fit_Q``.

    The weights minimise the leave-one-out squared error on the target, where
    only the target fit is recomputed per fold.
    """
    if target.n < 2:
        raise ParameterError("weighted average needs at least 2 target observations")
    fp = nw_estimate(source, kernel, bw.h_p)
    fq = nw_estimate(target, kernel, bw.h_q)
    w = _loo_weights(kernel, target.x, bw.h_q)
    target_loo = (w @ target.y) / w.sum(axis=1)
    grid, crit = wa_criterion(fp.func(target.x), target_loo, target.y, grid_step)
    w_p = pick_wa_weight(grid, crit)
    weights = SimplexWeights(np.array([w_p, 1.0 - w_p]))

    def evaluate(x: FloatArray) -> FloatArray:
        return w_p * fp.func(x) + (1.0 - w_p) * fq.func(x)

    curve = CurveEstimate(evaluate, target.domain, {"h_p": bw.h_p, "h_q": bw.h_q}, "wa")
    return curve, weights
