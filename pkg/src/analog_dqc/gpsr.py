"""Generalized parameter-shift differentiation with respect to the encoded feature.

For ``U_f(x) = exp(-i (x/2) G)`` the expectation is a trigonometric polynomial

    f(x) = a_0 + sum_j [a_j cos(D_j x) + b_j sin(D_j x)]

whose frequencies ``D_j`` are the distinct positive half-differences of the
eigenvalues of ``G``. With ``F_k = f(x + s_k) - f(x - s_k)`` one has
``F_k = sum_j 2 sin(D_j s_k) c_j`` and ``f'(x) = sum_j D_j c_j``, so one linear
solve per point gives the derivative from ``2 * len(shifts)`` evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quantum import SIGMA_X, HermitianOperator, StateVector, total_operator
from .sampling import MagnetizationEstimate

BENCHMARK_SHIFTS = (0.90, 2.47)
MAX_CONDITION = 1e8
_DISTINCT_TOL = 1e-9


class IllConditionedShiftRule(ValueError):
    pass


def _sorted_positive(values, what) -> tuple[float, ...]:
    vals = tuple(sorted(float(v) for v in values))
    if not vals:
        raise ValueError(f"{what} must not be empty")
    if vals[0] <= 0:
        raise ValueError(f"{what} must be strictly positive")
    if any(b - a <= _DISTINCT_TOL for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{what} must be distinct")
    return vals


@dataclass(frozen=True)
class GapSet:
    gaps: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gaps", _sorted_positive(self.gaps, "gaps"))

    def __len__(self):
        return len(self.gaps)


@dataclass(frozen=True)
class ShiftSet:
    shifts: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "shifts", _sorted_positive(self.shifts, "shifts"))

    def __len__(self):
        return len(self.shifts)


@dataclass(frozen=True)
class DerivativeEstimate:
    """``evaluations`` holds ``(x + s_k, f)`` then ``(x - s_k, f)`` for each shift in order."""

    x: float
    value: float
    std_error: float
    evaluations: tuple[tuple[float, MagnetizationEstimate], ...] = field(default=(), repr=False)
    condition_number: float = 1.0

    def scaled(self, multiplier: float) -> "DerivativeEstimate":
        return DerivativeEstimate(
            self.x,
            multiplier * self.value,
            abs(multiplier) * self.std_error,
            self.evaluations,
            self.condition_number,
        )


def _gap_pairs(G: HermitianOperator):
    w, v = G.eigh()
    for a in range(w.size):
        for b in range(a + 1, w.size):
            yield abs(w[b] - w[a]) / 2.0, a, b, v


def _merge(values_weights, tol):
    merged: list[list[float]] = []
    for g, wt in sorted(values_weights):
        if merged and g - merged[-1][0] <= tol:
            # keep the first representative, accumulate weight
            merged[-1][1] += wt
        else:
            merged.append([g, wt])
    return merged


def spectral_gaps_of_generator(G: HermitianOperator, tol: float = 1e-6) -> GapSet:
    """Distinct positive ``(l_a - l_b) / 2`` of the eigenvalues of ``G``."""
    gaps = [(g, 1.0) for g, *_ in _gap_pairs(G) if g > tol]
    return GapSet(tuple(g for g, _ in _merge(gaps, tol)))


def weighted_gaps(G: HermitianOperator, state: StateVector, tol: float = 1e-6) -> list[tuple[float, float]]:
    """Gaps reachable from ``state`` with weight ``|<a|psi>| |<b|psi>|`` summed over degenerate pairs."""
    psi = state.amplitudes
    out = []
    for g, a, b, v in _gap_pairs(G):
        wt = abs(np.vdot(v[:, a], psi)) * abs(np.vdot(v[:, b], psi))
        if g > tol and wt > 1e-12:
            out.append((g, wt))
    return [(g, wt) for g, wt in _merge(out, tol)]


def effective_gaps(G: HermitianOperator, state: StateVector, k: int = 2, tol: float = 1e-6) -> GapSet:
    """Reduce the reachable spectrum of ``G`` to ``k`` effective gaps.

    The weighted gaps are split into ``k`` contiguous clusters minimizing the
    weighted within-cluster variance (exact dynamic program on the sorted
    list); each cluster is represented by its weighted mean.
    """
    gw = weighted_gaps(G, state, tol)
    if len(gw) <= k:
        return GapSet(tuple(g for g, _ in gw))
    g = np.array([p[0] for p in gw])
    w = np.array([p[1] for p in gw])
    n = g.size

    def cost(i, j):  # cluster g[i:j]
        ww, gg = w[i:j], g[i:j]
        mu = ww @ gg / ww.sum()
        return float(ww @ (gg - mu) ** 2)

    best = np.full((k + 1, n + 1), np.inf)
    cut = np.zeros((k + 1, n + 1), dtype=int)
    best[0, 0] = 0.0
    for m in range(1, k + 1):
        for j in range(m, n + 1):
            for i in range(m - 1, j):
                c = best[m - 1, i] + cost(i, j)
                if c < best[m, j]:
                    best[m, j], cut[m, j] = c, i
    bounds, j = [], n
    for m in range(k, 0, -1):
        i = cut[m, j]
        bounds.append((i, j))
        j = i
    centers = [float(w[i:j] @ g[i:j] / w[i:j].sum()) for i, j in reversed(bounds)]
    return GapSet(tuple(centers))


def shift_rule_weights(gaps: GapSet, shifts: ShiftSet, max_condition: float = MAX_CONDITION) -> tuple[np.ndarray, float]:
    """Weights ``w_k`` with ``f'(x) = sum_k w_k [f(x + s_k) - f(x - s_k)]``, and cond(M)."""
    if len(gaps) != len(shifts):
        raise ValueError(f"need as many shifts as gaps ({len(shifts)} vs {len(gaps)})")
    D = np.array(gaps.gaps)
    M = 2.0 * np.sin(np.outer(shifts.shifts, D))
    sv = np.linalg.svd(M, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    # entries are bounded by 2, so a tiny smallest singular value is ill-conditioned even if the ratio is not
    if not math.isfinite(cond) or cond > max_condition or sv[-1] < 2.0 / max_condition:
        raise IllConditionedShiftRule(
            f"shift matrix is ill-conditioned (cond {cond:.3g}, smallest singular value {sv[-1]:.3g})"
        )
    # f' = D . c,  M c = F  =>  f' = (M^-T D) . F
    return np.linalg.solve(M.T, D), cond


Evaluator = Callable[[float], "MagnetizationEstimate | float"]


def _as_estimate(v) -> MagnetizationEstimate:
    return v if isinstance(v, MagnetizationEstimate) else MagnetizationEstimate(float(v))


def gpsr_derivative(
    f: Evaluator,
    x: float,
    gaps: GapSet,
    shifts: ShiftSet,
    max_condition: float = MAX_CONDITION,
) -> DerivativeEstimate:
    """Derivative of ``f`` at ``x`` from shifted evaluations.

    ``f`` may return plain floats (noiseless) or ``MagnetizationEstimate``;
    standard errors propagate linearly through the shift-rule weights.
    """
    weights, cond = shift_rule_weights(gaps, shifts, max_condition)
    value, var, evals = 0.0, 0.0, []
    for wk, s in zip(weights, shifts.shifts):
        plus, minus = _as_estimate(f(x + s)), _as_estimate(f(x - s))
        value += wk * (plus.value - minus.value)
        var += wk**2 * (plus.std_error**2 + minus.std_error**2)
        evals += [(x + s, plus), (x - s, minus)]
    return DerivativeEstimate(x, float(value), math.sqrt(var), tuple(evals), cond)


def agpsr_derivative(
    f: Evaluator,
    x: float,
    effective: GapSet,
    shifts: ShiftSet,
    max_condition: float = MAX_CONDITION,
) -> DerivativeEstimate:
    """Same linear solve as :func:`gpsr_derivative`, with a reduced set of effective gaps.

    Exact only when the spectrum of ``f`` lies inside ``effective``; otherwise
    a biased approximation whose quality depends on how well the effective
    gaps summarize the true spectral weight.
    """
    return gpsr_derivative(f, x, effective, shifts, max_condition)


def feature_generator(omega: float, interaction: HermitianOperator, n: int) -> HermitianOperator:
    """``(2/omega) * H_drive`` for a square pulse at zero detuning and phase.

    Applying the drive for ``x / omega`` us equals ``exp(-i (x/2) G)``.
    """
    return total_operator(SIGMA_X, n) + (2.0 / omega) * interaction


def derivative_table(
    f: Evaluator, xs: Sequence[float], gaps: GapSet, shifts: ShiftSet
) -> dict[float, DerivativeEstimate]:
    return {float(x): agpsr_derivative(f, x, gaps, shifts) for x in xs}
