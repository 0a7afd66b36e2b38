"""Exception types raised by the estimators."""

from __future__ import annotations


class ParameterError(ValueError):
    """Invalid argument: non-positive bandwidth, empty sample, bad shapes."""


class OrthogonalAtXError(ArithmeticError):
    """The local inner product of the source curve with itself vanished at ``x``.

    The usual remedy is to shift the source responses by a nonzero constant
    so the source curve stays away from zero (``GuardPolicy.shift_a``).
    """

    def __init__(self, x: float, denominator: float, floor: float):
        self.x = float(x)
        self.denominator = float(denominator)
        self.floor = float(floor)
        super().__init__(
            f"adjustment denominator {denominator:.3e} below floor {floor:.3e} "
            f"at x={x:.6g}: source curve is (locally) orthogonal to the target; "
            "retry with a nonzero GuardPolicy.shift_a so the source curve "
            "stays away from zero"
        )


class DegenerateBasisError(ArithmeticError):
    """Local Gram matrix of the basis functions is numerically singular."""

    def __init__(self, x: float, condition: float, k: int):
        self.x = float(x)
        self.condition = float(condition)
        self.k = int(k)
        super().__init__(
            f"degenerate basis at x={x:.6g}: Gram condition number "
            f"{condition:.3e} with k={k}; use a smaller k"
        )


class SelectionError(RuntimeError):
    """Every bandwidth candidate was penalised during cross-validation."""


class ConvergenceError(RuntimeError):
    """The least-squares fit of a parametric source did not converge."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
