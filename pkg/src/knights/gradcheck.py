"""Central finite-difference gradient checking for the hand-derived backprop."""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["central_difference_gradient", "max_relative_error"]


def central_difference_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Numerical gradient of a scalar function via central differences.

    Perturbs one entry of ``x`` at a time by ``+-step`` and evaluates
    ``(f(x+h) - f(x-h)) / (2h)``. Quadratic truncation error; meant for
    float64 and the default step of 1e-5.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += step
        xm[idx] -= step
        grad[idx] = (f(xp) - f(xm)) / (2.0 * step)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst-case elementwise relative disagreement between two gradients.

    The denominator is clamped at 1 so near-zero entries are compared
    absolutely instead of amplifying finite-difference noise.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise ValueError(
            f"gradient shapes differ: {analytic.shape} vs {numeric.shape}"
        )
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))
