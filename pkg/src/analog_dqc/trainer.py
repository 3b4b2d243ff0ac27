"""Physics-informed loss over collocation points and gradient-free selection of theta."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .gpsr import DerivativeEstimate
from .problem import PolynomialDE, analytic_solution
from .sampling import MagnetizationEstimate


@dataclass(frozen=True)
class OutputScaling:
    """Affine map from total magnetization to the model value ``f``."""

    multiplier: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.multiplier) and math.isfinite(self.offset)):
            raise ValueError("scaling must be finite")

    def value(self, raw):
        return self.multiplier * raw + self.offset

    def derivative(self, raw_derivative):
        return self.multiplier * raw_derivative


def scale_model_output(raw_magnetization, scaling: OutputScaling = OutputScaling()):
    return scaling.value(raw_magnetization)


def fit_output_scaling(magnetizations, targets) -> OutputScaling:
    """Least-squares ``(multiplier, offset)`` taking ``magnetizations`` onto ``targets``."""
    m = np.asarray(magnetizations, dtype=float)
    A = np.column_stack([m, np.ones_like(m)])
    (a, b), *_ = np.linalg.lstsq(A, np.asarray(targets, dtype=float), rcond=None)
    return OutputScaling(float(a), float(b))


def fit_scaling_to_solution(sweep_x, sweep_magnetization, de: PolynomialDE) -> OutputScaling:
    return fit_output_scaling(sweep_magnetization, analytic_solution(de, np.asarray(sweep_x)))


def _value(v) -> tuple[float, float]:
    if isinstance(v, MagnetizationEstimate):
        return v.value, v.std_error
    return float(v), 0.0


def value_at(outputs: Mapping[float, MagnetizationEstimate | float], x: float, tol: float = 1e-9) -> tuple[float, float]:
    """Model output at ``x``: the stored point within ``tol``, else linear interpolation.

    Returns ``(value, std_error)``; interpolation propagates the two bracketing
    errors with the interpolation weights.
    """
    xs = sorted(outputs)
    if not xs:
        raise KeyError("no model outputs available")
    i = bisect.bisect_left(xs, x)
    for j in (i - 1, i):
        if 0 <= j < len(xs) and abs(xs[j] - x) <= tol:
            return _value(outputs[xs[j]])
    if i == 0 or i == len(xs):
        raise KeyError(f"x = {x} outside the evaluated range [{xs[0]}, {xs[-1]}]")
    x0, x1 = xs[i - 1], xs[i]
    (v0, e0), (v1, e1) = _value(outputs[x0]), _value(outputs[x1])
    t = (x - x0) / (x1 - x0)
    return (1 - t) * v0 + t * v1, math.hypot((1 - t) * e0, t * e1)


@dataclass(frozen=True)
class LossReport:
    theta: float
    l_d: float
    l_b: float
    residuals: tuple[float, ...] = field(default=())
    total: float = 0.0

    @property
    def sqrt_l_d(self) -> float:
        return math.sqrt(self.l_d)


def evaluate_loss(
    theta: float,
    model_outputs: Mapping[float, MagnetizationEstimate | float],
    derivatives: Mapping[float, DerivativeEstimate | float],
    de: PolynomialDE,
    collocation,
    scaling: OutputScaling = OutputScaling(),
    boundary_weight: float = 1.0,
    tol: float = 1e-9,
) -> LossReport:
    """Sum of squared residuals ``f'(x_i) - g(f(x_i), x_i)`` plus the boundary mismatch.

    ``model_outputs`` and ``derivatives`` hold raw magnetization quantities;
    ``scaling`` maps them to ``f``. Outputs at the collocation points are only
    consulted when the right-hand side depends on ``f``.
    """
    residuals = []
    for x in collocation:
        d = _match(derivatives, x, tol)
        if d is None:
            raise KeyError(f"missing derivative at collocation point {x}")
        df = scaling.derivative(d.value if isinstance(d, DerivativeEstimate) else float(d))
        f = scaling.value(value_at(model_outputs, x, tol)[0]) if de.uses_value else None
        residuals.append(float(df - de.g(f, x)))
    fb = scaling.value(value_at(model_outputs, de.boundary_x, tol)[0])
    l_d = float(sum(r * r for r in residuals))
    l_b = abs(fb - de.boundary_value)
    total = l_d + boundary_weight * l_b**2
    if not all(math.isfinite(v) for v in (l_d, l_b, total)):
        raise ValueError(f"non-finite loss at theta = {theta}")
    return LossReport(theta, l_d, l_b, tuple(residuals), total)


def _match(mapping, x, tol):
    for k, v in mapping.items():
        if abs(k - x) <= tol:
            return v
    return None


def grid_search(reports: list[LossReport]) -> tuple[float, list[LossReport]]:
    """Theta with the smallest total loss; ties go to the smaller theta."""
    if not reports:
        raise ValueError("empty theta grid")
    ordered = sorted(reports, key=lambda r: r.theta)
    best = min(ordered, key=lambda r: (r.total, r.theta))
    return best.theta, ordered
