"""Shared exception types.

Every error raised on a violated precondition is a UsageError carrying the
named quantity that failed, so CLI handlers can render machine-readable
messages without string parsing.
"""

from __future__ import annotations


class UsageError(ValueError):
    """A caller violated a documented precondition."""


class SingularPointError(ArithmeticError):
    """Gradient norm at the query point is below the singularity floor."""

    def __init__(self, point, grad_norm: float, floor: float):
        self.point = point
        self.grad_norm = grad_norm
        self.floor = floor
        super().__init__(
            f"singular point: |grad| = {grad_norm:.3e} < floor {floor:.3e} at {point}"
        )


class PerturbationFailed(RuntimeError):
    """No random shift produced a polynomial non-singular on its zero-set sample."""

    def __init__(self, tries: int, best_grad: float, floor: float):
        self.tries = tries
        self.best_grad = best_grad
        self.floor = floor
        super().__init__(
            f"perturbation failed after {tries} tries: best min |grad| {best_grad:.3e}"
            f" < floor {floor:.3e}"
        )


class BisectionNotFound(RuntimeError):
    """Optimizer could not reach the imbalance tolerance; carries best achieved."""

    def __init__(self, best_imbalance: float, tol: float):
        self.best_imbalance = best_imbalance
        self.tol = tol
        super().__init__(
            f"no bisecting polynomial found: best imbalance {best_imbalance:.4f}"
            f" > tol {tol:.4f}"
        )


class ContainedInVariety(Exception):
    """Signal: the queried line lies inside the zero set of a partition factor.

    Not a failure for callers that route such lines separately (the incidence
    recursion sends them to the wall branch).
    """

    def __init__(self, factor_index: int):
        self.factor_index = factor_index
        super().__init__(f"line contained in zero set of factor {factor_index}")


class SingularOnlyError(RuntimeError):
    """Every zero-set sample near the tube was singular; no witness exists."""
