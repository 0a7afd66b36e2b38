"""Leave-one-out cross-validation for the bandwidths of every sw-TLE variant.

Only the target sample is resampled: the source fit at a given ``h_p`` is
computed once and shared by all folds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from swtle.adjust import (
    DEFAULT_GRID_SIZE,
    DEFAULT_GUARD,
    MAX_CONDITION,
    BandwidthPair,
    BasisSpec,
    GuardPolicy,
    _Grid,
    _shifted,
    fit_parametric_source,
    parametric_curve,
)
from swtle.errors import ParameterError, SelectionError
from swtle.kernel_core import (
    GAUSSIAN,
    FixedDesignSample,
    Kernel,
    KernelFamily,
    RandomDesignSample,
    gm_estimate,
    nw_smooth,
)
from swtle.nls import ParametricModel

FloatArray = NDArray[np.float64]

METHODS = ("sw-tle-fixed", "sw-tle-random", "basis-fixed", "basis-random", "semiparametric")

_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class FitRecipe:
    """How to build the estimator whose bandwidths are being chosen."""

    method: str = "sw-tle-random"
    kernel: Kernel = GAUSSIAN
    guard: GuardPolicy = DEFAULT_GUARD
    basis: BasisSpec | None = None
    model: ParametricModel | None = None
    theta0: tuple[float, ...] | None = None
    grid_size: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method.startswith("basis") and self.basis is None:
            object.__setattr__(self, "basis", BasisSpec())
        if self.method == "semiparametric" and self.model is None:
            raise ParameterError("semiparametric recipe needs a model")

    @property
    def fixed_design(self) -> bool:
        return self.method.endswith("fixed")

    @property
    def uses_source_bandwidth(self) -> bool:
        return self.method != "semiparametric"


@dataclass(frozen=True)
class BandwidthGrid:
    h_p_values: tuple[float, ...]
    h_q_values: tuple[float, ...]

    def __post_init__(self):
        for name in ("h_p_values", "h_q_values"):
            vals = np.asarray(getattr(self, name), dtype=float)
            if vals.ndim != 1 or vals.size == 0:
                raise ParameterError(f"{name} must be a non-empty sequence")
            if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
                raise ParameterError(f"{name} must be positive")
            if np.any(np.diff(vals) <= 0):
                raise ParameterError(f"{name} must be strictly ascending")
            object.__setattr__(self, name, tuple(float(v) for v in vals))


def log_grid(domain: tuple[float, float], count: int = 20, lo: float = 0.02, hi: float = 0.5
             ) -> tuple[float, ...]:
    width = domain[1] - domain[0]
    return tuple(np.geomspace(lo * width, hi * width, count))


def default_grid(domain: tuple[float, float], count: int = 20) -> BandwidthGrid:
    """Log-spaced bandwidths from 2% to 50% of the domain width."""
    values = log_grid(domain, count)
    return BandwidthGrid(values, values)


@dataclass(frozen=True)
class CVScore:
    value: float
    penalized: int
    residuals: FloatArray


@dataclass(frozen=True)
class BandwidthSelection:
    bandwidths: BandwidthPair
    cv_surface: FloatArray  # rows: h_p values, columns: h_q values
    penalized: NDArray[np.int64]
    grid: BandwidthGrid
    score: float

    def __iter__(self):
        # allows ``pair, surface = select_bandwidths(...)``
        return iter((self.bandwidths, self.cv_surface))


# ---------------------------------------------------------------------------
# leave-one-out predictions


class _GaussianLoo:
    """Squared distances shifted by their off-diagonal row minimum.

    ``exp(-d / (2 h^2))`` on these is the rescaled Gaussian LOO weight matrix
    for any ``h``, so the distance work is shared across a bandwidth grid.
    """

    def __init__(self, x: FloatArray):
        d = x[None, :] - x[:, None]
        d2 = d * d
        np.fill_diagonal(d2, np.inf)
        d2 -= d2.min(axis=1, keepdims=True)
        self._d2 = d2
        self._buf = np.empty_like(d2)

    def weights(self, h: float) -> FloatArray:
        np.multiply(self._d2, -0.5 / (h * h), out=self._buf)
        return np.exp(self._buf)


def _loo_weights(kernel: Kernel, x: FloatArray, h: float) -> FloatArray:
    """Kernel weights between sample points with the diagonal removed."""
    if kernel.family is KernelFamily.GAUSSIAN and x.size > 1:
        return _GaussianLoo(x).weights(h)
    u = x[None, :] - x[:, None]
    np.fill_diagonal(u, np.inf)
    w = kernel.ratio_weights(u, h)
    np.fill_diagonal(w, 0.0)
    empty = w.sum(axis=1) <= 0.0
    if np.any(empty):
        # compact kernel with no neighbour in range: use the nearest other point
        rows = np.flatnonzero(empty)
        w[rows, np.abs(u[rows]).argmin(axis=1)] = 1.0
    return w


def _loo_linear(rp: FloatArray, y: FloatArray, w: FloatArray, eps: float):
    """LOO predictions ``rp_i * eta_{-i}(x_i)`` for one or many source curves.

    ``rp`` may be 1-d (one curve) or 2-d with one curve per row.
    """
    num = (rp * y) @ w.T
    den = (rp * rp) @ w.T
    mass = w.sum(axis=1)
    ok = den >= eps * mass
    with np.errstate(invalid="ignore", divide="ignore"):
        pred = rp * np.where(ok, num / np.where(ok, den, 1.0), 0.0)
    return pred, ~ok


def _loo_basis(phi: FloatArray, y: FloatArray, w: FloatArray, eps: float):
    gram = np.einsum("ij,jk,jl->ikl", w, phi, phi)
    rhs = w @ (y[:, None] * phi)
    mass = w.sum(axis=1)
    sv = np.linalg.svd(gram, compute_uv=False)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(sv[:, -1] > 0, sv[:, 0] / sv[:, -1], np.inf)
    bad = (sv[:, 0] < eps * mass) | ~(cond <= MAX_CONDITION)
    pred = np.zeros(y.size)
    good = np.flatnonzero(~bad)
    if good.size:
        coefs = np.linalg.solve(gram[good], rhs[good][..., None])[..., 0]
        pred[good] = np.sum(coefs * phi[good], axis=1)
    return pred, bad


def _fixed_loo(recipe: FitRecipe, rp_grid: FloatArray, rp_targets: FloatArray,
               target: FixedDesignSample, h_q: float):
    """Fold-by-fold refits: the left-out segment is merged into its neighbours."""
    grid = _Grid.uniform(recipe.grid_size)
    eps = recipe.guard.eps_den
    n = target.n
    pred = np.zeros(n)
    bad = np.zeros(n, dtype=bool)
    phi = recipe.basis.evaluate(rp_grid) if recipe.basis is not None else None
    w_all = recipe.kernel.ratio_weights(grid.t[None, :] - target.x[:, None], h_q)
    mass = w_all.sum(axis=1)
    for i in range(n):
        reduced = target.without(i)
        y_cells = reduced.y[grid.segment_of(reduced.s)]
        w = w_all[i]
        if phi is None:
            den = w @ (rp_grid * rp_grid)
            if not den >= eps * mass[i]:
                bad[i] = True
                continue
            pred[i] = rp_targets[i] * (w @ (y_cells * rp_grid)) / den
        else:
            gram = np.einsum("g,gj,gk->jk", w, phi, phi)
            sv = np.linalg.svd(gram, compute_uv=False)
            if sv[0] < eps * mass[i] or not (sv[-1] > 0 and sv[0] / sv[-1] <= MAX_CONDITION):
                bad[i] = True
                continue
            coefs = np.linalg.solve(gram, w @ (y_cells[:, None] * phi))
            pred[i] = coefs @ recipe.basis.evaluate(rp_targets[i])
    return pred, bad


@dataclass
class _SourceState:
    """Source fit evaluated where the CV folds need it."""

    rp_targets: FloatArray
    rp_grid: FloatArray | None = None


def _source_state(recipe: FitRecipe, source, target, h_p: float | None,
                  theta_hat: FloatArray | None = None) -> _SourceState:
    shift = recipe.guard.shift_a
    if recipe.method == "semiparametric":
        curve = parametric_curve(recipe.model, theta_hat, target.domain, shift)
        return _SourceState(curve.func(target.x))
    if recipe.fixed_design:
        curve = gm_estimate(_shifted(source, shift), recipe.kernel, h_p)
        grid = _Grid.uniform(recipe.grid_size)
        return _SourceState(curve.func(target.x), curve.func(grid.t))
    rp = nw_smooth(recipe.kernel, source.x, source.y + shift, h_p, target.x)
    return _SourceState(rp)


def _loo_from_state(recipe: FitRecipe, state: _SourceState, target, h_q: float,
                    w: FloatArray | None = None):
    if recipe.fixed_design:
        return _fixed_loo(recipe, state.rp_grid, state.rp_targets, target, h_q)
    if w is None:
        w = _loo_weights(recipe.kernel, target.x, h_q)
    if recipe.basis is not None:
        return _loo_basis(recipe.basis.evaluate(state.rp_targets), target.y, w,
                          recipe.guard.eps_den)
    return _loo_linear(state.rp_targets, target.y, w, recipe.guard.eps_den)


def _score(pred: FloatArray, bad: FloatArray, y: FloatArray) -> CVScore:
    resid = np.where(bad, y, y - pred)
    return CVScore(float(np.mean(resid * resid)), int(np.count_nonzero(bad)), resid)


def _fit_theta(recipe: FitRecipe, source) -> FloatArray:
    start = recipe.theta0 if recipe.theta0 is not None else np.ones(recipe.model.dim)
    return fit_parametric_source(source, recipe.model, start).theta_hat


def _check_target(target) -> None:
    if target.n < 2:
        raise ParameterError("cross-validation needs at least 2 target observations")


def cv_score(recipe: FitRecipe, source, target, bw: BandwidthPair) -> CVScore:
    """Leave-one-out CV criterion at one bandwidth pair.

    A fold whose refit is orthogonal or degenerate at the left-out point gets
    residual ``y_i`` (prediction 0); the number of such folds is reported.
    """
    _check_target(target)
    theta = _fit_theta(recipe, source) if recipe.method == "semiparametric" else None
    if recipe.uses_source_bandwidth and bw.h_p is None:
        raise ParameterError(f"{recipe.method} needs a source bandwidth")
    state = _source_state(recipe, source, target, bw.h_p, theta)
    pred, bad = _loo_from_state(recipe, state, target, bw.h_q)
    return _score(pred, bad, target.y)


def _argmin_smooth(surface: FloatArray, tol: float = _TIE_RTOL) -> tuple[int, int]:
    """Minimum cell; ties go to the larger ``h_q`` and then the larger ``h_p``."""
    best = np.nanmin(surface)
    n_p, n_q = surface.shape
    for j in range(n_q - 1, -1, -1):
        for i in range(n_p - 1, -1, -1):
            if surface[i, j] <= best + tol * (1.0 + abs(best)):
                return i, j
    raise SelectionError("no finite cross-validation score")


def select_bandwidths(
    recipe: FitRecipe,
    source,
    target,
    grid: BandwidthGrid | None = None,
) -> BandwidthSelection:
    """Exhaustive search of the CV criterion over ``grid``.

    For the semiparametric recipe only ``h_q`` is searched and the returned
    pair has ``h_p=None``.
    """
    _check_target(target)
    if grid is None:
        grid = default_grid(target.domain)
    h_ps = grid.h_p_values if recipe.uses_source_bandwidth else (np.nan,)
    h_qs = grid.h_q_values
    n = target.n
    surface = np.empty((len(h_ps), len(h_qs)))
    penalized = np.zeros(surface.shape, dtype=np.int64)

    theta = _fit_theta(recipe, source) if recipe.method == "semiparametric" else None
    states = [_source_state(recipe, source, target, None if np.isnan(hp) else hp, theta)
              for hp in h_ps]
    random_linear = not recipe.fixed_design and recipe.basis is None
    for j, h_q in enumerate(h_qs):
        w = None if recipe.fixed_design else _loo_weights(recipe.kernel, target.x, h_q)
        if random_linear:
            rp = np.vstack([s.rp_targets for s in states])
            pred, bad = _loo_linear(rp, target.y, w, recipe.guard.eps_den)
            resid = np.where(bad, target.y, target.y - pred)
            surface[:, j] = np.mean(resid * resid, axis=1)
            penalized[:, j] = bad.sum(axis=1)
            continue
        for i, state in enumerate(states):
            sc = _score(*_loo_from_state(recipe, state, target, h_q, w), target.y)
            surface[i, j] = sc.value
            penalized[i, j] = sc.penalized

    if np.all(penalized == n):
        raise SelectionError(
            f"every bandwidth pair was fully penalised (guard eps_den="
            f"{recipe.guard.eps_den:g}, shift_a={recipe.guard.shift_a:g}); the source "
            "curve is orthogonal to the target, retry with a nonzero shift_a"
        )
    masked = np.where(penalized == n, np.inf, surface)
    i, j = _argmin_smooth(masked)
    pair = BandwidthPair(None if np.isnan(h_ps[i]) else float(h_ps[i]), float(h_qs[j]))
    return BandwidthSelection(pair, surface, penalized, grid, float(surface[i, j]))


# ---------------------------------------------------------------------------
# plain N-W cross-validation (baselines)


def nw_loo_scores(sample: RandomDesignSample, kernel: Kernel, h_values: Sequence[float]
                  ) -> FloatArray:
    """LOO CV score of the N-W smoother at each bandwidth."""
    if sample.n < 2:
        raise ParameterError("cross-validation needs at least 2 observations")
    scores = np.empty(len(h_values))
    fast = _GaussianLoo(sample.x) if kernel.family is KernelFamily.GAUSSIAN else None
    for j, h in enumerate(h_values):
        w = fast.weights(h) if fast is not None else _loo_weights(kernel, sample.x, h)
        resid = sample.y - (w @ sample.y) / w.sum(axis=1)
        scores[j] = np.mean(resid * resid)
    return scores


def select_nw_bandwidth(sample: RandomDesignSample, kernel: Kernel = GAUSSIAN,
                        h_values: ArrayLike | None = None) -> float:
    """CV-optimal N-W bandwidth; ties go to the larger bandwidth."""
    if h_values is None:
        h_values = log_grid(sample.domain)
    h_values = np.asarray(h_values, dtype=float)
    scores = nw_loo_scores(sample, kernel, h_values)
    i, _ = _argmin_smooth(scores[:, None])
    return float(h_values[i])


def select_basis_k(
    recipe: FitRecipe,
    source,
    target,
    k_values: Sequence[int] = (1, 2, 3),
    grid: BandwidthGrid | None = None,
) -> tuple[int, BandwidthSelection]:
    """Pick the basis size by the same CV criterion; ties go to the smaller k."""
    if not recipe.method.startswith("basis"):
        raise ParameterError("basis size selection needs a basis recipe")
    best: tuple[int, BandwidthSelection] | None = None
    for k in sorted(k_values):
        trial = FitRecipe(recipe.method, recipe.kernel, recipe.guard, BasisSpec(k),
                          grid_size=recipe.grid_size)
        try:
            sel = select_bandwidths(trial, source, target, grid)
        except SelectionError:
            continue
        if best is None or sel.score < best[1].score * (1 - _TIE_RTOL):
            best = (k, sel)
    if best is None:
        raise SelectionError("no basis size produced a usable CV score")
    return best
