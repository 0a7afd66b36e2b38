"""Kernels and the two base smoothers (Gasser-Mueller and Nadaraya-Watson).

Every estimator in the package is built from the pieces defined here:

* :class:`Kernel` -- a symmetric second-order kernel with an exact
  antiderivative, so segment integrals never need quadrature.
* :class:`FixedDesignSample` / :class:`RandomDesignSample` -- validated data.
* :class:`CurveEstimate` -- an immutable, vectorised fitted function.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr

from swtle.errors import ParameterError

FloatArray = NDArray[np.float64]

# N-W denominator floor, relative to the sample size.
NW_WEIGHT_FLOOR = 1e-12

# Upper bound on the number of matrix cells materialised per evaluation chunk.
_CHUNK_CELLS = 1 << 21


class KernelFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"
    EPANECHNIKOV = "epanechnikov"


@dataclass(frozen=True)
class Kernel:
    """Symmetric kernel ``K`` with ``K_h(u) = K(u / h) / h``."""

    family: KernelFamily = KernelFamily.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))

    @property
    def support(self) -> float:
        """Half-width of the support in standardised units."""
        return np.inf if self.family is KernelFamily.GAUSSIAN else 1.0

    def density(self, t: ArrayLike) -> FloatArray:
        t = np.asarray(t, dtype=float)
        if self.family is KernelFamily.GAUSSIAN:
            return np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)
        return np.where(np.abs(t) <= 1.0, 0.75 * (1.0 - t * t), 0.0)

    def scaled(self, u: ArrayLike, h: float) -> FloatArray:
        """``K_h(u)``."""
        _check_bandwidth(h)
        return self.density(np.asarray(u, dtype=float) / h) / h

    def cdf(self, t: ArrayLike) -> FloatArray:
        """``int_{-inf}^t K``."""
        t = np.asarray(t, dtype=float)
        if self.family is KernelFamily.GAUSSIAN:
            return ndtr(t)
        tc = np.clip(t, -1.0, 1.0)
        return 0.5 + 0.75 * tc - 0.25 * tc**3

    def mass_between(self, lo: ArrayLike, hi: ArrayLike) -> FloatArray:
        """``int_lo^hi K`` for standardised limits, ``lo <= hi`` elementwise.

        For the Gaussian both tails are used so that intervals deep in the
        upper tail do not cancel catastrophically.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.family is KernelFamily.GAUSSIAN:
            upper = ndtr(-lo) - ndtr(-hi)
            lower = ndtr(hi) - ndtr(lo)
            return np.clip(np.where(lo > 0.0, upper, lower), 0.0, 1.0)
        return np.clip(self.cdf(hi) - self.cdf(lo), 0.0, 1.0)

    def segment_integral(self, a: float, b: float, x: float, h: float) -> float:
        return segment_integral(self, a, b, x, h)

    def ratio_weights(self, u: FloatArray, h: float) -> FloatArray:
        """Kernel weights ``K(u / h)`` rescaled per row for ratio estimators.

        Each row of ``u`` holds the offsets from one evaluation point.  For the
        Gaussian the row is multiplied by ``exp(min z^2 / 2)`` so that its
        largest weight is 1; any ratio of weighted sums over a row is unchanged
        while far-tail rows no longer underflow to 0/0.
        """
        z = np.asarray(u, dtype=float) / h
        if self.family is KernelFamily.GAUSSIAN:
            z2 = z * z
            zmin = z2.min(axis=-1, keepdims=True) if z2.size else z2
            return np.exp(-0.5 * (z2 - zmin))
        return self.density(z)


GAUSSIAN = Kernel(KernelFamily.GAUSSIAN)
EPANECHNIKOV = Kernel(KernelFamily.EPANECHNIKOV)


def _check_bandwidth(h: float) -> None:
    if not (np.isfinite(h) and h > 0):
        raise ParameterError(f"bandwidth must be positive and finite, got {h!r}")


def _as_vector(values: ArrayLike, name: str) -> FloatArray:
    arr = np.array(values, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


def segment_integral(kernel: Kernel, a: float, b: float, x: float, h: float) -> float:
    """Exact ``int_a^b K_h(t - x) dt``."""
    _check_bandwidth(h)
    if a > b:
        raise ParameterError(f"segment bounds reversed: a={a} > b={b}")
    return float(kernel.mass_between((a - x) / h, (b - x) / h))


@dataclass(frozen=True)
class FixedDesignSample:
    """Ordered design on ``[0, 1]`` with its midpoint partition.

    ``s`` has length ``n + 1``: ``s[0] = 0``, ``s[i] = (x[i-1] + x[i]) / 2``
    and ``s[n] = 1``, so each design point owns exactly one segment.
    """

    x: FloatArray
    y: FloatArray
    s: FloatArray = field(init=False, repr=False)

    def __post_init__(self):
        x = _as_vector(self.x, "x")
        y = _as_vector(self.y, "y")
        if x.size == 0:
            raise ParameterError("empty sample")
        if x.size != y.size:
            raise ParameterError(f"x and y lengths differ: {x.size} != {y.size}")
        if x[0] < 0.0 or x[-1] > 1.0:
            raise ParameterError("fixed design covariates must lie in [0, 1]")
        if np.any(np.diff(x) <= 0.0):
            raise ParameterError("fixed design covariates must be strictly ascending")
        s = np.empty(x.size + 1)
        s[0] = 0.0
        s[1:-1] = 0.5 * (x[:-1] + x[1:])
        s[-1] = 1.0
        s.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def domain(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def without(self, index: int) -> FixedDesignSample:
        """Copy with observation ``index`` removed (partition rebuilt)."""
        keep = np.arange(self.n) != index
        return FixedDesignSample(self.x[keep], self.y[keep])

    def with_responses(self, y: ArrayLike) -> FixedDesignSample:
        return FixedDesignSample(self.x, y)


@dataclass(frozen=True)
class RandomDesignSample:
    """Unordered covariate/response pairs on a domain ``[L, U]``.

    If ``domain`` is omitted the hull of ``x`` is used.
    """

    x: FloatArray
    y: FloatArray
    domain: tuple[float, float] | None = None

    def __post_init__(self):
        x = _as_vector(self.x, "x")
        y = _as_vector(self.y, "y")
        if x.size != y.size:
            raise ParameterError(f"x and y lengths differ: {x.size} != {y.size}")
        if self.domain is None:
            domain = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
        else:
            lo, hi = (float(v) for v in self.domain)
            if not lo < hi:
                raise ParameterError(f"invalid domain {self.domain!r}")
            if x.size and (x.min() < lo or x.max() > hi):
                raise ParameterError(f"covariates fall outside the domain {self.domain!r}")
            domain = (lo, hi)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "domain", domain)

    @property
    def n(self) -> int:
        return self.x.size

    def with_responses(self, y: ArrayLike) -> RandomDesignSample:
        return RandomDesignSample(self.x, y, self.domain)

    def subset(self, index: ArrayLike) -> RandomDesignSample:
        return RandomDesignSample(self.x[index], self.y[index], self.domain)


def pooled(*samples: RandomDesignSample) -> RandomDesignSample:
    """Concatenate random-design samples over the union of their domains."""
    lo = min(s.domain[0] for s in samples)
    hi = max(s.domain[1] for s in samples)
    x = np.concatenate([s.x for s in samples])
    y = np.concatenate([s.y for s in samples])
    return RandomDesignSample(x, y, (lo, hi))


@dataclass(frozen=True)
class CurveEstimate:
    """A fitted regression function.

    ``func`` maps a 1-d array of ``m`` evaluation points to an array whose
    first axis has length ``m`` (vector-valued curves carry trailing axes).
    ``value`` accepts scalars or arrays of any shape.
    """

    func: Callable[[FloatArray], FloatArray]
    domain: tuple[float, float]
    bandwidths: Mapping[str, float] = field(default_factory=dict)
    label: str = ""

    def value(self, x: ArrayLike):
        arr = np.asarray(x, dtype=float)
        out = np.asarray(self.func(arr.reshape(-1)), dtype=float)
        out = out.reshape(arr.shape + out.shape[1:])
        return float(out) if out.ndim == 0 else out

    __call__ = value


def _chunks(m: int, n: int):
    step = max(1, _CHUNK_CELLS // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def gm_weights(sample: FixedDesignSample, kernel: Kernel, h: float, x: FloatArray) -> FloatArray:
    """Matrix of segment integrals, shape ``(len(x), n)``."""
    z = (sample.s[None, :] - x[:, None]) / h
    return kernel.mass_between(z[:, :-1], z[:, 1:])


def gm_estimate(sample: FixedDesignSample, kernel: Kernel, h: float) -> CurveEstimate:
    """Gasser-Mueller estimate ``sum_i y_i int_{s_{i-1}}^{s_i} K_h(t - x) dt``."""
    _check_bandwidth(h)
    if sample.n == 0:
        raise ParameterError("empty sample")

    def evaluate(x: FloatArray) -> FloatArray:
        out = np.empty(x.size)
        for sl in _chunks(x.size, sample.n + 1):
            out[sl] = gm_weights(sample, kernel, h, x[sl]) @ sample.y
        return out

    return CurveEstimate(evaluate, (0.0, 1.0), {"h": h}, "gasser-mueller")


def nw_smooth(
    kernel: Kernel, x_data: FloatArray, y_data: FloatArray, h: float, x: FloatArray
) -> FloatArray:
    """Vectorised N-W values at ``x`` with nearest-neighbour fallback."""
    n = x_data.size
    out = np.empty(x.size)
    for sl in _chunks(x.size, n):
        u = x_data[None, :] - x[sl, None]
        w = kernel.ratio_weights(u, h)
        den = w.sum(axis=1)
        num = w @ y_data
        low = den <= NW_WEIGHT_FLOOR * n
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = num / den
        if np.any(low):
            nearest = np.abs(u[low]).argmin(axis=1)
            vals[low] = y_data[nearest]
        out[sl] = vals
    return out


def nw_estimate(sample: RandomDesignSample, kernel: Kernel, h: float) -> CurveEstimate:
    """Nadaraya-Watson estimate ``sum y_i K_h(X_i - x) / sum K_h(X_i - x)``."""
    _check_bandwidth(h)
    if sample.n == 0:
        raise ParameterError("empty sample")
    x_data, y_data = sample.x, sample.y

    def evaluate(x: FloatArray) -> FloatArray:
        return nw_smooth(kernel, x_data, y_data, h, x)

    return CurveEstimate(evaluate, sample.domain, {"h": h}, "nadaraya-watson")


def function_curve(
    func: Callable[[FloatArray], FloatArray],
    domain: tuple[float, float] = (0.0, 1.0),
    label: str = "function",
) -> CurveEstimate:
    """Wrap a vectorised callable as a :class:`CurveEstimate`."""

    def evaluate(x: FloatArray) -> FloatArray:
        return np.broadcast_to(np.asarray(func(x), dtype=float), x.shape).copy()

    return CurveEstimate(evaluate, domain, {}, label)
