"""Whittaker-Eilers smoothing and numerical differentiation of the smoothed curve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded
from scipy.special import comb


@dataclass(frozen=True)
class SmootherConfig:
    lam: float = 10.0
    order: int = 2
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.order not in (1, 2, 3):
            raise ValueError("order must be 1, 2 or 3")
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if any(v < 0 or not np.isfinite(v) for v in w):
                raise ValueError("weights must be finite and non-negative")
            object.__setattr__(self, "weights", w)

    def with_weights(self, weights) -> "SmootherConfig":
        return SmootherConfig(self.lam, self.order, None if weights is None else tuple(weights))


def difference_matrix(n: int, order: int) -> np.ndarray:
    """``(n - order, n)`` forward-difference operator."""
    return np.diff(np.eye(n), order, axis=0)


def _penalty_bands(n: int, d: int, lam: float) -> np.ndarray:
    """Upper banded storage of ``lam * D.T @ D`` (``d + 1`` rows)."""
    k = (-1.0) ** (d - np.arange(d + 1)) * comb(d, np.arange(d + 1))
    ab = np.zeros((d + 1, n))
    # each row of D is k placed at columns r..r+d; accumulate its outer product
    for r in range(n - d):
        for a in range(d + 1):
            for b in range(a, d + 1):
                ab[d - (b - a), r + b] += lam * k[a] * k[b]
    return ab


def system_matrix(n: int, config: SmootherConfig) -> np.ndarray:
    w = np.ones(n) if config.weights is None else np.asarray(config.weights)
    D = difference_matrix(n, config.order)
    return np.diag(w) + config.lam * D.T @ D


def whittaker_smooth(y, config: SmootherConfig = SmootherConfig()) -> np.ndarray:
    """Minimize ``sum w (z - y)**2 + lam * sum (diff(z, d))**2``.

    Solves ``(W + lam D^T D) z = W y`` with a banded Cholesky factorization.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    d = config.order
    if n <= d:
        raise ValueError(f"need more than {d} points, got {n}")
    w = np.ones(n) if config.weights is None else np.asarray(config.weights)
    if w.size != n:
        raise ValueError("weights length does not match data")
    if config.lam == 0 and np.all(w > 0):
        return y.copy()
    ab = _penalty_bands(n, d, config.lam)
    ab[d] += w
    try:
        return solveh_banded(ab, w * y)
    except LinAlgError as exc:
        raise ValueError("smoothing system is singular; check the weights") from exc


def smoothed_derivative(x_grid, y, config: SmootherConfig = SmootherConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Smooth on the index grid, then differentiate against the physical ``x``.

    Returns ``(z, dz/dx)``; the derivative is second-order central in the
    interior of a (possibly non-uniform) grid and one-sided at the ends.
    """
    x = np.asarray(x_grid, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 points to differentiate")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x_grid must be strictly increasing")
    if np.size(y) != x.size:
        raise ValueError("x_grid and y are not aligned")
    z = whittaker_smooth(y, config)
    return z, np.gradient(z, x)


def inverse_variance_weights(std_errors, floor: float | None = None) -> np.ndarray | None:
    """``1 / se**2``, or ``None`` (uniform) when no errors are available.

    Zero errors are clipped to ``floor`` (default: the smallest positive error).
    """
    se = np.asarray(std_errors, dtype=float)
    if se.size == 0 or np.all(se == 0):
        return None
    if floor is None:
        floor = se[se > 0].min()
    return 1.0 / np.maximum(se, floor) ** 2
