"""Extremization of a trained model from its feature derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .gpsr import DerivativeEstimate
from .trainer import value_at

GRID_ARGMIN = "grid-argmin"
INTERPOLATION = "sign-change-interpolation"
MINIMUM, MAXIMUM, INFLECTION = "minimum", "maximum", "inflection"


@dataclass(frozen=True)
class Candidate:
    x: float
    derivative: float
    value: float
    classification: str


@dataclass(frozen=True)
class ExtremizationResult:
    x_opt: float
    f_at_opt: float
    method: str
    candidates: tuple[Candidate, ...] = field(default=())
    at_boundary: bool = False

    def to_dict(self) -> dict:
        return {
            "x_opt": self.x_opt,
            "f_at_opt": self.f_at_opt,
            "method": self.method,
            "at_boundary": self.at_boundary,
            "candidates": [
                {"x": c.x, "df_dx": c.derivative, "f": c.value, "classification": c.classification}
                for c in self.candidates
            ],
        }


def _d(v) -> float:
    return v.value if isinstance(v, DerivativeEstimate) else float(v)


def find_extremum(
    derivatives: Mapping[float, DerivativeEstimate | float],
    values: Mapping[float, float],
    mode: str = GRID_ARGMIN,
) -> ExtremizationResult:
    """Locate the minimum of the model from sign changes of its derivative.

    A ``-`` to ``+`` crossing between neighbours is a minimum, ``+`` to ``-`` a
    maximum, and a touching zero without sign change an inflection. Among the
    minima the one with the smallest model value wins. ``grid-argmin`` returns
    whichever bracketing grid point has the smaller ``|df/dx|``;
    ``sign-change-interpolation`` returns the linear zero crossing. Without any
    minimum crossing the grid endpoint with the smaller value is returned and
    flagged ``at_boundary``.

    ``values`` maps x to model values (already scaled); it is interpolated
    linearly where a candidate falls between its keys.
    """
    if mode not in (GRID_ARGMIN, INTERPOLATION):
        raise ValueError(f"unknown mode {mode!r}")
    xs = sorted(derivatives)
    if len(xs) < 3:
        raise ValueError("need at least 3 derivative points")
    ds = [_d(derivatives[x]) for x in xs]

    def f(x):
        return value_at(values, x)[0]

    candidates: list[Candidate] = []
    for i in range(len(xs) - 1):
        x0, x1, d0, d1 = xs[i], xs[i + 1], ds[i], ds[i + 1]
        if d0 == 0.0:
            continue
        if d0 * d1 < 0 or d1 == 0.0:
            if d1 == 0.0:
                nxt = ds[i + 2] if i + 2 < len(ds) else -d0
                if nxt * d0 > 0:
                    candidates.append(Candidate(x1, 0.0, f(x1), INFLECTION))
                    continue
            kind = MINIMUM if d0 < 0 else MAXIMUM
            if mode == GRID_ARGMIN:
                x, d = (x0, d0) if abs(d0) < abs(d1) else (x1, d1)
            else:
                x, d = x0 - d0 * (x1 - x0) / (d1 - d0), 0.0
            candidates.append(Candidate(x, d, f(x), kind))
    candidates.sort(key=lambda c: c.x)
    minima = [c for c in candidates if c.classification == MINIMUM]
    if minima:
        best = min(minima, key=lambda c: (c.value, c.x))
        return ExtremizationResult(best.x, best.value, mode, tuple(candidates))
    lo, hi = xs[0], xs[-1]
    x_end = lo if f(lo) <= f(hi) else hi
    end = Candidate(x_end, _d(derivatives[x_end]), f(x_end), MINIMUM)
    candidates = sorted(candidates + [end], key=lambda c: c.x)
    return ExtremizationResult(end.x, end.value, mode, tuple(candidates), at_boundary=True)


def extend_derivative_grid(
    prior: Mapping[float, DerivativeEstimate],
    extra_points: Iterable[float],
    compute: Callable[[float], DerivativeEstimate],
    domain: tuple[float, float] | None = None,
    tol: float = 1e-9,
) -> tuple[dict[float, DerivativeEstimate], list[float]]:
    """Merge stored derivatives with new ones at ``extra_points``.

    Points already present (within ``tol``) are reused, never recomputed.
    Returns the merged, x-sorted map and the list of newly computed points.
    """
    merged = dict(prior)
    new = []
    for x in sorted(set(float(p) for p in extra_points)):
        if domain is not None and not domain[0] < x < domain[1]:
            raise ValueError(f"extra point {x} outside domain {domain}")
        if any(abs(k - x) <= tol for k in merged):
            continue
        merged[x] = compute(x)
        new.append(x)
    return dict(sorted(merged.items())), new
