"""Damped successive substitution for the coupled rate / success-probability system."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DIVERGENCE_STREAK = 50


class DivergenceError(RuntimeError):
    """Carries the last iterate so callers can still report where the solve went."""

    def __init__(self, message: str, last: np.ndarray | None = None, iterations: int = 0):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


@dataclass
class FixedPointResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    scale = np.maximum(np.abs(new), np.abs(old))
    diff = np.abs(new - old)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, diff / scale, 0.0)
    return float(rel.max()) if rel.size else 0.0


def solve(update_fn: Callable[[np.ndarray], np.ndarray], x0, *, damping: float = 0.5,
          tol: float = 1e-9, max_iter: int = 100_000) -> FixedPointResult:
    """Iterate x <- (1-a) x + a f(x) until the largest relative change drops below ``tol``.

    Raises DivergenceError when the residual grows for 50 consecutive steps.
    Exceptions raised by ``update_fn`` propagate unchanged.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must be in (0, 1]")
    x = np.asarray(x0, dtype=float).copy()
    residual = float("inf")
    streak = 0
    for it in range(1, max_iter + 1):
        fx = np.asarray(update_fn(x), dtype=float)
        new = (1.0 - damping) * x + damping * fx
        res = relative_change(new, x)
        if not np.all(np.isfinite(new)):
            raise DivergenceError(f"non-finite iterate at step {it}", x, it)
        streak = streak + 1 if res > residual else 0
        if streak >= DIVERGENCE_STREAK:
            raise DivergenceError(f"residual grew for {streak} consecutive steps", new, it)
        x, residual = new, res
        if res < tol:
            return FixedPointResult(x, res, it, True)
    return FixedPointResult(x, residual, max_iter, False)
