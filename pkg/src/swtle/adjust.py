"""Source-function weighted transfer-learning estimators (sw-TLE).

A source fit ``r_P`` is carried over to the target by a locally estimated
multiplier: at each point ``x`` the factor minimises the kernel-localised
squared error between the target responses and ``factor * r_P``.  The
estimate is ``r_P(x) * factor(x)``, or ``sum_j coef_j(x) * r_P(x)**j`` in the
basis-function variants.

Fixed-design integrals are evaluated with the composite midpoint rule on a
single global grid of ``grid_size`` cells over ``[0, 1]``; every cell is
credited to the target segment containing its midpoint, so numerator,
denominator and Gram entries all share one discretisation.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from swtle.errors import ConvergenceError, DegenerateBasisError, OrthogonalAtXError, ParameterError
from swtle.kernel_core import (
    CurveEstimate,
    FixedDesignSample,
    Kernel,
    RandomDesignSample,
    _check_bandwidth,
    gm_estimate,
    nw_estimate,
)
from swtle.nls import FitResult, ParametricModel, fit_ls

FloatArray = NDArray[np.float64]

DEFAULT_GRID_SIZE = 2048
MAX_BASIS_K = 8
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class BandwidthPair:
    """Source bandwidth ``h_p`` and adjustment bandwidth ``h_q``.

    ``h_p`` is ``None`` where no source smoothing happens (parametric
    sources).
    """

    h_p: float | None
    h_q: float

    def __post_init__(self):
        _check_bandwidth(self.h_q)
        if self.h_p is not None:
            _check_bandwidth(self.h_p)


@dataclass(frozen=True)
class BasisSpec:
    """Monomial basis ``phi_j(u) = u**j`` for ``j = 1..k``.

    Every ``phi_j`` vanishes at zero, so the adjusted curve carries no
    intercept.
    """

    k: int = 2
    family: str = "monomial"

    def __post_init__(self):
        if not 1 <= int(self.k) <= MAX_BASIS_K:
            raise ParameterError(f"basis size k must be in [1, {MAX_BASIS_K}], got {self.k}")
        if self.family != "monomial":
            raise ParameterError(f"unknown basis family {self.family!r}")

    def evaluate(self, u: ArrayLike) -> FloatArray:
        """Basis values with a trailing axis of length ``k``."""
        u = np.asarray(u, dtype=float)
        return u[..., None] ** np.arange(1, self.k + 1)


@dataclass(frozen=True)
class GuardPolicy:
    """Numerical guards for the adjustment step.

    ``eps_den`` is the denominator floor relative to the local kernel mass.
    ``shift_a`` is added to the source responses before the source is fitted;
    a nonzero shift keeps the source curve away from zero.
    """

    eps_den: float = 1e-10
    shift_a: float = 0.0

    def __post_init__(self):
        if not self.eps_den > 0:
            raise ParameterError(f"eps_den must be positive, got {self.eps_den}")


class Variant(str, enum.Enum):
    FIXED_LINEAR = "fixed_linear"
    FIXED_BASIS = "fixed_basis"
    RANDOM_LINEAR = "random_linear"
    RANDOM_BASIS = "random_basis"
    SEMIPARAMETRIC = "semiparametric"
    MULTI_SOURCE = "multi_source"


@dataclass(frozen=True)
class AdjustedEstimate:
    """Source curve, adjustment factor and their combination.

    For the basis variants ``factor`` is vector-valued (one coefficient per
    basis function).  For the multi-source variant ``source_curve`` and
    ``factor`` are vector-valued with one column per source and ``weights``
    holds the combination weights.
    """

    source_curve: CurveEstimate
    factor: CurveEstimate
    final: CurveEstimate
    variant: Variant
    basis: BasisSpec | None = None
    weights: FloatArray | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    def value(self, x: ArrayLike):
        return self.final.value(x)

    __call__ = value


DEFAULT_GUARD = GuardPolicy()


# ---------------------------------------------------------------------------
# fixed design


@dataclass(frozen=True)
class _Grid:
    t: FloatArray
    width: float

    @classmethod
    def uniform(cls, size: int) -> _Grid:
        if size < 1:
            raise ParameterError(f"grid size must be positive, got {size}")
        return cls((np.arange(size) + 0.5) / size, 1.0 / size)

    def segment_of(self, s: FloatArray) -> np.ndarray:
        """Index of the target segment ``[s_{i-1}, s_i)`` holding each cell."""
        idx = np.searchsorted(s, self.t, side="right") - 1
        return np.clip(idx, 0, s.size - 2)


def _fixed_moments(
    rp_grid: FloatArray,
    y_cells: FloatArray,
    grid: _Grid,
    kernel: Kernel,
    h_q: float,
    x: FloatArray,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """(numerator, denominator, kernel mass) at each ``x``, common scaling."""
    w = kernel.ratio_weights(grid.t[None, :] - x[:, None], h_q)
    return w @ (y_cells * rp_grid), w @ (rp_grid * rp_grid), w.sum(axis=1)


def _ratio_or_raise(num, den, mass, x, guard: GuardPolicy) -> FloatArray:
    floor = guard.eps_den * mass
    bad = ~(den >= floor) | (mass <= 0.0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise OrthogonalAtXError(x[i], den[i] / mass[i] if mass[i] > 0 else 0.0, guard.eps_den)
    return num / den


def xi_hat_fixed(
    source_curve: CurveEstimate,
    target: FixedDesignSample,
    kernel: Kernel,
    h_q: float,
    x: ArrayLike,
    guard: GuardPolicy = DEFAULT_GUARD,
    grid_size: int = DEFAULT_GRID_SIZE,
):
    """Fixed-design adjustment factor at ``x`` (scalar or array)."""
    _check_bandwidth(h_q)
    grid = _Grid.uniform(grid_size)
    rp = np.asarray(source_curve.value(grid.t), dtype=float)
    y_cells = target.y[grid.segment_of(target.s)]
    xs = np.asarray(x, dtype=float)
    flat = xs.reshape(-1)
    num, den, mass = _fixed_moments(rp, y_cells, grid, kernel, h_q, flat)
    out = _ratio_or_raise(num, den, mass, flat, guard).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def _shifted(sample, shift: float):
    if shift == 0.0:
        return sample
    return sample.with_responses(sample.y + shift)


def sw_tle_fixed(
    source: FixedDesignSample,
    target: FixedDesignSample,
    kernel: Kernel,
    bw: BandwidthPair,
    guard: GuardPolicy = DEFAULT_GUARD,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> AdjustedEstimate:
    """Fixed-design sw-TLE: G-M source fit times the projected factor."""
    if bw.h_p is None:
        raise ParameterError("fixed-design sw-TLE needs a source bandwidth h_p")
    source_curve = gm_estimate(_shifted(source, guard.shift_a), kernel, bw.h_p)
    grid = _Grid.uniform(grid_size)
    rp_grid = source_curve.value(grid.t)
    y_cells = target.y[grid.segment_of(target.s)]

    def factor_at(x: FloatArray) -> FloatArray:
        num, den, mass = _fixed_moments(rp_grid, y_cells, grid, kernel, bw.h_q, x)
        return _ratio_or_raise(num, den, mass, x, guard)

    def final_at(x: FloatArray) -> FloatArray:
        return source_curve.func(x) * factor_at(x)

    bands = {"h_p": bw.h_p, "h_q": bw.h_q}
    return AdjustedEstimate(
        source_curve,
        CurveEstimate(factor_at, (0.0, 1.0), bands, "xi_hat"),
        CurveEstimate(final_at, (0.0, 1.0), bands, "sw-tle-fixed"),
        Variant.FIXED_LINEAR,
    )


def _solve_local(gram: FloatArray, rhs: FloatArray, mass: FloatArray, x: FloatArray,
                 guard: GuardPolicy) -> FloatArray:
    """Solve the ``k x k`` local systems stacked along the first axis."""
    k = gram.shape[-1]
    sv = np.linalg.svd(gram, compute_uv=False)
    for i in range(gram.shape[0]):
        if mass[i] <= 0.0 or sv[i, 0] < guard.eps_den * mass[i]:
            raise OrthogonalAtXError(x[i], sv[i, 0] / mass[i] if mass[i] > 0 else 0.0,
                                     guard.eps_den)
        cond = sv[i, 0] / sv[i, -1] if sv[i, -1] > 0 else np.inf
        if cond > MAX_CONDITION:
            raise DegenerateBasisError(x[i], cond, k)
    return np.linalg.solve(gram, rhs[..., None])[..., 0]


def basis_coefficients_fixed(
    source_curve: CurveEstimate,
    target: FixedDesignSample,
    kernel: Kernel,
    h_q: float,
    basis: BasisSpec,
    x: ArrayLike,
    guard: GuardPolicy = DEFAULT_GUARD,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> FloatArray:
    """Local coefficient vectors at ``x``, shape ``(len(x), k)``."""
    grid = _Grid.uniform(grid_size)
    phi = basis.evaluate(source_curve.value(grid.t))
    y_cells = target.y[grid.segment_of(target.s)]
    return _fixed_basis_coefs(phi, y_cells, grid, kernel, h_q,
                              np.atleast_1d(np.asarray(x, dtype=float)), guard)


def _fixed_basis_coefs(phi, y_cells, grid, kernel, h_q, x, guard):
    w = kernel.ratio_weights(grid.t[None, :] - x[:, None], h_q)
    gram = np.einsum("mg,gj,gk->mjk", w, phi, phi)
    rhs = w @ (y_cells[:, None] * phi)
    return _solve_local(gram, rhs, w.sum(axis=1), x, guard)


def basis_adjust_fixed(
    source: FixedDesignSample,
    target: FixedDesignSample,
    kernel: Kernel,
    bw: BandwidthPair,
    basis: BasisSpec = BasisSpec(),
    guard: GuardPolicy = DEFAULT_GUARD,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> AdjustedEstimate:
    """Fixed-design sw-TLE with ``f(r, x) = sum_j coef_j(x) * r**j``."""
    if bw.h_p is None:
        raise ParameterError("fixed-design sw-TLE needs a source bandwidth h_p")
    source_curve = gm_estimate(_shifted(source, guard.shift_a), kernel, bw.h_p)
    grid = _Grid.uniform(grid_size)
    phi = basis.evaluate(source_curve.value(grid.t))
    y_cells = target.y[grid.segment_of(target.s)]

    def coefs_at(x: FloatArray) -> FloatArray:
        return _fixed_basis_coefs(phi, y_cells, grid, kernel, bw.h_q, x, guard)

    def final_at(x: FloatArray) -> FloatArray:
        return np.sum(coefs_at(x) * basis.evaluate(source_curve.func(x)), axis=-1)

    bands = {"h_p": bw.h_p, "h_q": bw.h_q}
    return AdjustedEstimate(
        source_curve,
        CurveEstimate(coefs_at, (0.0, 1.0), bands, "xi_hat_k"),
        CurveEstimate(final_at, (0.0, 1.0), bands, "sw-tle-fixed-basis"),
        Variant.FIXED_BASIS,
        basis=basis,
    )


# ---------------------------------------------------------------------------
# random design


def _nearest_fallback(w: FloatArray, u: FloatArray) -> FloatArray:
    """Replace all-zero weight rows (compact kernels) by a one-hot nearest row."""
    empty = w.sum(axis=1) <= 0.0
    if np.any(empty):
        w = w.copy()
        rows = np.flatnonzero(empty)
        w[rows] = 0.0
        w[rows, np.abs(u[rows]).argmin(axis=1)] = 1.0
    return w


def random_factor(
    rp_at_targets: FloatArray,
    target: RandomDesignSample,
    kernel: Kernel,
    h_q: float,
    x: FloatArray,
    guard: GuardPolicy = DEFAULT_GUARD,
) -> FloatArray:
    """Finite-sum adjustment factor (eta or alpha) at each ``x``."""
    u = target.x[None, :] - x[:, None]
    w = _nearest_fallback(kernel.ratio_weights(u, h_q), u)
    num = w @ (target.y * rp_at_targets)
    den = w @ (rp_at_targets * rp_at_targets)
    return _ratio_or_raise(num, den, w.sum(axis=1), x, guard)


def eta_hat_random(
    source_curve: CurveEstimate,
    target: RandomDesignSample,
    kernel: Kernel,
    h_q: float,
    x: ArrayLike,
    guard: GuardPolicy = DEFAULT_GUARD,
):
    """Random-design adjustment factor at ``x`` (scalar or array)."""
    _check_bandwidth(h_q)
    xs = np.asarray(x, dtype=float)
    rp = np.asarray(source_curve.value(target.x), dtype=float)
    out = random_factor(rp, target, kernel, h_q, xs.reshape(-1), guard).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def _adjusted_random(source_curve, target, kernel, h_q, guard, variant, bands, label):
    _check_bandwidth(h_q)
    rp_targets = np.asarray(source_curve.value(target.x), dtype=float)

    def factor_at(x: FloatArray) -> FloatArray:
        return random_factor(rp_targets, target, kernel, h_q, x, guard)

    def final_at(x: FloatArray) -> FloatArray:
        return source_curve.func(x) * factor_at(x)

    return AdjustedEstimate(
        source_curve,
        CurveEstimate(factor_at, target.domain, bands, "factor"),
        CurveEstimate(final_at, target.domain, bands, label),
        variant,
    )


def sw_tle_random(
    source: RandomDesignSample,
    target: RandomDesignSample,
    kernel: Kernel,
    bw: BandwidthPair,
    guard: GuardPolicy = DEFAULT_GUARD,
) -> AdjustedEstimate:
    """Random-design sw-TLE: N-W source fit times the finite-sum factor."""
    if bw.h_p is None:
        raise ParameterError("random-design sw-TLE needs a source bandwidth h_p")
    source_curve = nw_estimate(_shifted(source, guard.shift_a), kernel, bw.h_p)
    return _adjusted_random(source_curve, target, kernel, bw.h_q, guard, Variant.RANDOM_LINEAR,
                            {"h_p": bw.h_p, "h_q": bw.h_q}, "sw-tle-random")


def _random_basis_coefs(phi_t, target, kernel, h_q, x, guard):
    u = target.x[None, :] - x[:, None]
    w = _nearest_fallback(kernel.ratio_weights(u, h_q), u)
    gram = np.einsum("mi,ij,ik->mjk", w, phi_t, phi_t)
    rhs = w @ (target.y[:, None] * phi_t)
    return _solve_local(gram, rhs, w.sum(axis=1), x, guard)


def basis_coefficients_random(
    source_curve: CurveEstimate,
    target: RandomDesignSample,
    kernel: Kernel,
    h_q: float,
    basis: BasisSpec,
    x: ArrayLike,
    guard: GuardPolicy = DEFAULT_GUARD,
) -> FloatArray:
    """Local coefficient vectors at ``x``, shape ``(len(x), k)``."""
    phi_t = basis.evaluate(source_curve.value(target.x))
    return _random_basis_coefs(phi_t, target, kernel, h_q,
                               np.atleast_1d(np.asarray(x, dtype=float)), guard)


def basis_adjust_random(
    source: RandomDesignSample,
    target: RandomDesignSample,
    kernel: Kernel,
    bw: BandwidthPair,
    basis: BasisSpec = BasisSpec(),
    guard: GuardPolicy = DEFAULT_GUARD,
) -> AdjustedEstimate:
    """Random-design sw-TLE with ``f(r, x) = sum_j coef_j(x) * r**j``."""
    if bw.h_p is None:
        raise ParameterError("random-design sw-TLE needs a source bandwidth h_p")
    source_curve = nw_estimate(_shifted(source, guard.shift_a), kernel, bw.h_p)
    phi_t = basis.evaluate(source_curve.value(target.x))

    def coefs_at(x: FloatArray) -> FloatArray:
        return _random_basis_coefs(phi_t, target, kernel, bw.h_q, x, guard)

    def final_at(x: FloatArray) -> FloatArray:
        return np.sum(coefs_at(x) * basis.evaluate(source_curve.func(x)), axis=-1)

    bands = {"h_p": bw.h_p, "h_q": bw.h_q}
    return AdjustedEstimate(
        source_curve,
        CurveEstimate(coefs_at, target.domain, bands, "eta_hat_k"),
        CurveEstimate(final_at, target.domain, bands, "sw-tle-random-basis"),
        Variant.RANDOM_BASIS,
        basis=basis,
    )


# ---------------------------------------------------------------------------
# semiparametric and multi-source


def parametric_curve(model: ParametricModel, theta: ArrayLike, domain, shift: float = 0.0
                     ) -> CurveEstimate:
    theta = np.array(theta, dtype=float)
    theta.setflags(write=False)

    def evaluate(x: FloatArray) -> FloatArray:
        return model.value(x, theta) + shift

    return CurveEstimate(evaluate, domain, {}, model.name)


def alpha_hat_semiparam(
    theta_hat: ArrayLike,
    model: ParametricModel,
    target: RandomDesignSample,
    kernel: Kernel,
    h_q: float,
    x: ArrayLike,
    guard: GuardPolicy = DEFAULT_GUARD,
):
    """Adjustment factor for a parametric source curve ``model(., theta_hat)``."""
    curve = parametric_curve(model, theta_hat, target.domain)
    return eta_hat_random(curve, target, kernel, h_q, x, guard)


def fit_parametric_source(
    source: RandomDesignSample,
    model: ParametricModel,
    theta0: ArrayLike,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> FitResult:
    """Least-squares fit of the source model; raises on non-convergence."""
    fit = fit_ls(model, source, theta0, max_iter=max_iter, tol=tol)
    if not fit.converged:
        raise ConvergenceError(
            f"least-squares fit of {model.name!r} did not converge after "
            f"{fit.iterations} iterations (rss={fit.rss:.6g})",
            fit,
        )
    if model.looks_linear(source.x, fit.theta_hat):
        warnings.warn(
            f"model {model.name!r} appears linear in theta; the adjusted estimate "
            "then does not depend on the fitted parameters",
            UserWarning,
            stacklevel=3,
        )
    return fit


def sw_tle_semiparam(
    source: RandomDesignSample,
    model: ParametricModel,
    target: RandomDesignSample,
    kernel: Kernel,
    h_q: float,
    guard: GuardPolicy = DEFAULT_GUARD,
    theta0: ArrayLike | None = None,
    fit: FitResult | None = None,
) -> AdjustedEstimate:
    """Semiparametric sw-TLE: ``model(x, theta_hat) * alpha_hat(x)``.

    ``theta_hat`` comes from a least-squares fit on ``source`` started at
    ``theta0`` (ones when omitted), unless a finished ``fit`` is passed in.
    ``guard.shift_a`` is added to the fitted source curve.
    """
    if fit is None:
        start = np.ones(model.dim) if theta0 is None else theta0
        fit = fit_parametric_source(source, model, start)
    curve = parametric_curve(model, fit.theta_hat, target.domain, guard.shift_a)
    est = _adjusted_random(curve, target, kernel, h_q, guard, Variant.SEMIPARAMETRIC,
                           {"h_q": h_q}, "sw-tle-semiparametric")
    est.extras["fit"] = fit
    return est


@dataclass(frozen=True)
class SourceSpec:
    """One source for :func:`sw_tle_multi`.

    A source with a ``model`` is fitted parametrically (``theta0`` is the LM
    start); otherwise it is smoothed by N-W with bandwidth ``h_p``.  ``h_q``
    overrides the common adjustment bandwidth for this source.
    """

    sample: RandomDesignSample
    model: ParametricModel | None = None
    theta0: Sequence[float] | None = None
    h_p: float | None = None
    h_q: float | None = None


def simplex_grid(m: int, step: float) -> FloatArray:
    """All weight vectors of length ``m`` on the simplex with spacing ``step``."""
    if m < 1:
        raise ParameterError("simplex needs at least one coordinate")
    units = int(round(1.0 / step))
    if units < 1 or abs(units * step - 1.0) > 1e-9:
        raise ParameterError(f"weight grid step must divide 1, got {step}")

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    return np.array(list(compositions(units, m)), dtype=float) / units


def select_simplex_weights(
    predictions: FloatArray, y: FloatArray, step: float, rel_tol: float = 1e-12
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Grid-search simplex weights minimising ``||y - predictions @ w||^2``.

    Returns ``(weights, grid, criterion)``.  Candidates within ``rel_tol`` of
    the minimum are tied; the tie goes to the vector nearest uniform.
    """
    m = predictions.shape[1]
    grid = simplex_grid(m, step)
    resid = y[:, None] - predictions @ grid.T
    crit = np.einsum("ij,ij->j", resid, resid)
    best = crit.min()
    tied = np.flatnonzero(crit <= best + rel_tol * (1.0 + abs(best)))
    dist = np.sum((grid[tied] - 1.0 / m) ** 2, axis=1)
    choice = tied[int(np.argmin(dist))]
    return grid[choice].copy(), grid, crit


def sw_tle_multi(
    sources: Sequence[SourceSpec | tuple],
    target: RandomDesignSample,
    kernel: Kernel,
    h_q: float,
    guard: GuardPolicy = DEFAULT_GUARD,
    weight_grid_step: float = 0.01,
    weighting: str = "grid",
) -> AdjustedEstimate:
    """Weighted combination of per-source adjusted curves.

    ``weighting="grid"`` searches the simplex for the weights minimising the
    in-sample residual sum of squares on the target; ``"size"`` uses weights
    proportional to the source sample sizes.
    """
    specs = [s if isinstance(s, SourceSpec) else SourceSpec(*s) for s in sources]
    if len(specs) < 2:
        raise ParameterError(f"multi-source estimation needs >= 2 sources, got {len(specs)}")
    parts: list[AdjustedEstimate] = []
    for spec in specs:
        hq = spec.h_q if spec.h_q is not None else h_q
        if spec.model is not None:
            parts.append(sw_tle_semiparam(spec.sample, spec.model, target, kernel, hq, guard,
                                          theta0=spec.theta0))
        else:
            if spec.h_p is None:
                raise ParameterError("nonparametric source needs h_p")
            parts.append(sw_tle_random(spec.sample, target, kernel, BandwidthPair(spec.h_p, hq),
                                       guard))
    at_targets = np.column_stack([p.final.func(target.x) for p in parts])
    if weighting == "grid":
        weights, grid, crit = select_simplex_weights(at_targets, target.y, weight_grid_step)
        extras = {"weight_grid": grid, "criterion": crit}
    elif weighting == "size":
        sizes = np.array([s.sample.n for s in specs], dtype=float)
        weights, extras = sizes / sizes.sum(), {}
    else:
        raise ParameterError(f"unknown weighting {weighting!r}")
    weights.setflags(write=False)
    extras["components"] = parts

    def sources_at(x: FloatArray) -> FloatArray:
        return np.column_stack([p.source_curve.func(x) for p in parts])

    def factors_at(x: FloatArray) -> FloatArray:
        return np.column_stack([p.factor.func(x) for p in parts])

    def final_at(x: FloatArray) -> FloatArray:
        return np.column_stack([p.final.func(x) for p in parts]) @ weights

    bands = {"h_q": h_q}
    return AdjustedEstimate(
        CurveEstimate(sources_at, target.domain, bands, "sources"),
        CurveEstimate(factors_at, target.domain, bands, "factors"),
        CurveEstimate(final_at, target.domain, bands, "sw-tle-multi"),
        Variant.MULTI_SOURCE,
        weights=weights,
        extras=extras,
    )
