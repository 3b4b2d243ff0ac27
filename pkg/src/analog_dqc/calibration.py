"""Fit a constant detuning offset that aligns simulated magnetization with measured data."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .circuit import CircuitSpec, run_circuit
from .rydberg import RegisterGeometry
from .sampling import MagnetizationEstimate

log = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
# hardware detuning accuracy, ~2pi x 100 kHz
DETUNING_ACCURACY = TWO_PI * 0.1
DEFAULT_INTERVAL = (-TWO_PI * 0.5, TWO_PI * 0.5)
DEFAULT_TOLERANCE = TWO_PI * 1e-3
INV_PHI = (math.sqrt(5) - 1) / 2

Key = tuple[float, float]


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationResult:
    delta_offset: float
    weighted_rmsd_before: float
    weighted_rmsd_after: float
    scan: tuple[tuple[float, float], ...] = field(default=(), repr=False)
    theta: float | None = None

    def to_dict(self) -> dict:
        return {
            "delta_offset": self.delta_offset,
            "delta_offset_khz": self.delta_offset / TWO_PI * 1e3,
            "weighted_rmsd_before": self.weighted_rmsd_before,
            "weighted_rmsd_after": self.weighted_rmsd_after,
            "theta": self.theta,
        }


def _key(x: float, theta: float) -> Key:
    return (round(float(x), 9), round(float(theta), 9))


def weighted_rmsd(data: Mapping[Key, MagnetizationEstimate], sim: Mapping[Key, float]) -> float:
    """``sqrt(sum w (d - s)**2 / sum w)`` with ``w = 1 / se**2`` over shared keys."""
    d = {_key(*k): v for k, v in data.items()}
    s = {_key(*k): v for k, v in sim.items()}
    keys = sorted(d.keys() & s.keys())
    if not keys:
        raise CalibrationError("data and simulation share no (x, theta) points")
    usable = [k for k in keys if d[k].std_error > 0]
    if len(usable) < len(keys):
        log.warning("ignoring %d points with zero standard error", len(keys) - len(usable))
    if not usable:
        raise CalibrationError("no data point has a positive standard error")
    w = np.array([d[k].std_error ** -2 for k in usable])
    r = np.array([d[k].value - s[k] for k in usable])
    return float(math.sqrt(w @ r**2 / w.sum()))


def golden_section_minimize(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    """Golden-section search for a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def simulate(keys, spec: CircuitSpec, geometry: RegisterGeometry) -> dict[Key, float]:
    return {k: run_circuit(k[0], k[1], spec, geometry).value for k in keys}


def fit_detuning_offset(
    data: Mapping[Key, MagnetizationEstimate],
    spec: CircuitSpec,
    geometry: RegisterGeometry,
    search_interval: tuple[float, float] = DEFAULT_INTERVAL,
    tolerance: float = DEFAULT_TOLERANCE,
    scan_points: int = 41,
) -> CalibrationResult:
    """Scan ``delta_offset`` over the interval, then golden-section refine.

    The offset is added to the detuning of every segment of every sequence.
    Raises :class:`CalibrationError` if the scan minimum sits on the interval
    edge (not bracketed) or the objective is flat.
    """
    data = {_key(*k): v for k, v in data.items()}
    if not data:
        raise CalibrationError("no data")
    keys = sorted(data)

    def objective(offset: float) -> float:
        return weighted_rmsd(data, simulate(keys, spec.with_offset(spec.detuning_offset + offset), geometry))

    lo, hi = search_interval
    if not lo < hi:
        raise CalibrationError(f"empty search interval {search_interval}")
    grid = np.linspace(lo, hi, scan_points)
    values = np.array([objective(g) for g in grid])
    if not np.all(np.isfinite(values)):
        raise CalibrationError("objective is not finite over the scan")
    if values.max() - values.min() < 1e-12:
        raise CalibrationError("objective is flat over the search interval")
    i = int(np.argmin(values))
    if i in (0, scan_points - 1):
        raise CalibrationError(f"scan minimum at interval edge {grid[i]:.4f}; widen the search interval")
    best, best_val = golden_section_minimize(objective, grid[i - 1], grid[i + 1], tolerance)
    before = objective(0.0)
    if best_val > values[i]:
        best, best_val = float(grid[i]), float(values[i])
    if best_val > before:
        best, best_val = 0.0, before
    if abs(best) > DETUNING_ACCURACY:
        log.warning(
            "fitted offset 2pi x %.0f kHz exceeds the nominal detuning accuracy of 2pi x 100 kHz",
            best / TWO_PI * 1e3,
        )
    scan = tuple(zip(grid.tolist(), values.tolist()))
    return CalibrationResult(float(best), before, best_val, scan)


def fit_detuning_offset_per_theta(data, spec, geometry, **kwargs) -> dict[float, CalibrationResult]:
    """Independent fits for each theta present in ``data``."""
    data = {_key(*k): v for k, v in data.items()}
    out = {}
    for theta in sorted({k[1] for k in data}):
        sub = {k: v for k, v in data.items() if k[1] == theta}
        r = fit_detuning_offset(sub, spec, geometry, **kwargs)
        out[theta] = CalibrationResult(r.delta_offset, r.weighted_rmsd_before, r.weighted_rmsd_after, r.scan, theta)
    return out
