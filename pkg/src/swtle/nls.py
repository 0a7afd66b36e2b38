"""Levenberg-Marquardt least squares for parametric source models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from swtle.errors import ParameterError
from swtle.kernel_core import RandomDesignSample

FloatArray = NDArray[np.float64]

_LAMBDA_INIT = 1e-3
_LAMBDA_MAX = 1e16


@dataclass(frozen=True)
class ParametricModel:
    """Regression function ``r(x, theta)`` known up to a ``dim``-vector.

    ``func(x, theta)`` must be vectorised over ``x``.  ``jac(x, theta)``, when
    given, returns the ``(len(x), dim)`` matrix of partial derivatives;
    otherwise forward differences with step ``1e-6 * (1 + |theta_j|)`` are
    used.
    """

    func: Callable[[FloatArray, FloatArray], FloatArray]
    dim: int
    jac: Callable[[FloatArray, FloatArray], FloatArray] | None = None
    name: str = "model"

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ParameterError(f"parameter dimension must be >= 1, got {self.dim}")

    def value(self, x: ArrayLike, theta: ArrayLike) -> FloatArray:
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x, theta), dtype=float), x.shape)

    def jacobian(self, x: ArrayLike, theta: ArrayLike) -> FloatArray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        theta = np.asarray(theta, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(x, theta), dtype=float).reshape(x.size, self.dim)
        return self.finite_difference_jacobian(x, theta)

    def finite_difference_jacobian(self, x: ArrayLike, theta: ArrayLike) -> FloatArray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        theta = np.asarray(theta, dtype=float)
        base = self.value(x, theta)
        out = np.empty((x.size, self.dim))
        for j in range(self.dim):
            step = 1e-6 * (1.0 + abs(theta[j]))
            shifted = theta.copy()
            shifted[j] += step
            out[:, j] = (self.value(x, shifted) - base) / step
        return out

    def looks_linear(self, x: ArrayLike, theta: ArrayLike, rtol: float = 1e-6) -> bool:
        """True when the Jacobian does not change as ``theta`` moves."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        theta = np.asarray(theta, dtype=float)
        j0 = self.jacobian(x, theta)
        scale = max(1.0, float(np.abs(j0).max()))
        for shift in (0.5, -0.75):
            j1 = self.jacobian(x, theta + shift * (1.0 + np.abs(theta)))
            if not np.all(np.isfinite(j1)) or np.abs(j1 - j0).max() > rtol * scale:
                return False
        return True


@dataclass(frozen=True)
class FitResult:
    theta_hat: FloatArray
    rss: float
    iterations: int
    converged: bool
    gradient_norm: float
    rss_history: tuple[float, ...] = ()


def fit_ls(
    model: ParametricModel,
    sample: RandomDesignSample,
    theta0: ArrayLike,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> FitResult:
    """Least-squares fit of ``model`` to ``sample`` by Levenberg-Marquardt.

    Steps solve ``(J'J + lam * diag(J'J)) delta = J'r``.  ``lam`` is divided
    by 10 after an accepted step and multiplied by 10 after a rejected one.
    Iteration stops when an accepted step lowers the RSS by a relative amount
    below ``tol`` or the RSS gradient norm drops below ``tol``.

    Running out of iterations is not an error: the best parameters found are
    returned with ``converged=False``.
    """
    theta = np.array(theta0, dtype=float).ravel()
    if theta.size != model.dim:
        raise ParameterError(f"theta0 has {theta.size} entries, model expects {model.dim}")
    if sample.n < model.dim:
        raise ParameterError(
            f"sample size {sample.n} smaller than parameter dimension {model.dim}"
        )
    x, y = sample.x, sample.y

    resid = y - model.value(x, theta)
    rss = float(resid @ resid)
    if not np.isfinite(rss):
        raise ParameterError("model is not finite at theta0")
    history = [rss]
    lam = _LAMBDA_INIT
    converged = False
    iterations = 0
    jac = model.jacobian(x, theta)
    grad = jac.T @ resid

    while iterations < max_iter:
        iterations += 1
        if 2.0 * np.abs(grad).max() < tol:
            converged = True
            break
        jtj = jac.T @ jac
        damping = np.diag(np.maximum(np.diag(jtj), 1e-12))
        try:
            delta = np.linalg.solve(jtj + lam * damping, grad)
        except np.linalg.LinAlgError:
            lam *= 10.0
            if lam > _LAMBDA_MAX:
                break
            continue
        candidate = theta + delta
        cand_resid = y - model.value(x, candidate)
        cand_rss = float(cand_resid @ cand_resid)
        if np.isfinite(cand_rss) and cand_rss <= rss:
            decrease = rss - cand_rss
            theta, resid, rss = candidate, cand_resid, cand_rss
            history.append(rss)
            lam = max(lam / 10.0, 1e-12)
            jac = model.jacobian(x, theta)
            grad = jac.T @ resid
            if decrease <= tol * max(rss, np.finfo(float).tiny) or rss == 0.0:
                converged = True
                break
        else:
            lam *= 10.0
            if lam > _LAMBDA_MAX:
                # No descent direction left at working precision.
                converged = bool(2.0 * np.abs(grad).max() < np.sqrt(tol) * (1.0 + rss))
                break

    return FitResult(
        theta_hat=theta,
        rss=rss,
        iterations=iterations,
        converged=converged,
        gradient_norm=float(2.0 * np.linalg.norm(grad)),
        rss_history=tuple(history),
    )
