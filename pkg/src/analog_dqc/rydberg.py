"""Neutral-atom register geometry and the global-drive Rydberg Hamiltonian."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np

from .quantum import (
    RYDBERG_PROJECTOR,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    HermitianOperator,
    StateVector,
    embed_single_qubit,
    evolve_stepped,
    total_operator,
)

# 2pi x 138 GHz um^6 expressed in rad/us um^6 (1 GHz = 1e3 / us)
C6_DEFAULT = 2 * math.pi * 138e3
OMEGA_DEFAULT = 9.0
SPACING_DEFAULT = 8.7
COPY_SEPARATION_DEFAULT = 50.0
CROSSTALK_THRESHOLD = 1e-3


def interaction_strength(r: float, c6: float = C6_DEFAULT) -> float:
    """Van der Waals shift ``c6 / r**6`` in rad/us for atoms ``r`` um apart."""
    if r <= 0:
        raise ValueError(f"interatomic distance must be positive, got {r}")
    if math.isinf(r):
        return 0.0
    return c6 / r**6


@dataclass(frozen=True)
class DriveSample:
    omega: float = 0.0
    delta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError(f"omega must be non-negative, got {self.omega}")


@dataclass(frozen=True)
class RegisterGeometry:
    """Atom positions in um, an optional copy label per atom, and C6."""

    positions: tuple[tuple[float, float], ...]
    c6: float = C6_DEFAULT
    groups: tuple[int, ...] = field(default=())

    def __post_init__(self):
        positions = tuple((float(x), float(y)) for x, y in self.positions)
        object.__setattr__(self, "positions", positions)
        groups = tuple(int(g) for g in self.groups) or (0,) * len(positions)
        object.__setattr__(self, "groups", groups)
        if not positions:
            raise ValueError("geometry needs at least one atom")
        if len(groups) != len(positions):
            raise ValueError("one group label per atom required")
        if self.c6 <= 0:
            raise ValueError(f"c6 must be positive, got {self.c6}")
        for (i, a), (j, b) in combinations(enumerate(positions), 2):
            if math.dist(a, b) <= 0:
                raise ValueError(f"atoms {i} and {j} coincide at {a}")

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    def distance(self, i: int, j: int) -> float:
        return math.dist(self.positions[i], self.positions[j])

    def group_ids(self) -> list[int]:
        return sorted(set(self.groups))

    def copy(self, group: int) -> "RegisterGeometry":
        """Sub-register holding only the atoms of ``group``."""
        pos = tuple(p for p, g in zip(self.positions, self.groups) if g == group)
        if not pos:
            raise KeyError(f"no atoms in group {group}")
        return RegisterGeometry(pos, self.c6)

    def center(self, group: int) -> tuple[float, float]:
        pos = np.array(self.copy(group).positions)
        return tuple(pos.mean(axis=0))

    @classmethod
    def from_dict(cls, doc: dict) -> "RegisterGeometry":
        atoms = doc["atoms"]
        return cls(
            positions=tuple((a["x"], a["y"]) for a in atoms),
            c6=float(doc.get("c6", C6_DEFAULT)),
            groups=tuple(int(a.get("group", 0)) for a in atoms),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "RegisterGeometry":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "c6": self.c6,
            "atoms": [
                {"x": x, "y": y, "group": g} for (x, y), g in zip(self.positions, self.groups)
            ],
        }


def pair_geometry(r: float = SPACING_DEFAULT, c6: float = C6_DEFAULT) -> RegisterGeometry:
    return RegisterGeometry(((0.0, 0.0), (r, 0.0)), c6)


def multiplexed_geometry(
    r: float = SPACING_DEFAULT,
    separation: float = COPY_SEPARATION_DEFAULT,
    copies: int = 2,
    c6: float = C6_DEFAULT,
) -> RegisterGeometry:
    """``copies`` identical atom pairs whose centers sit ``separation`` um apart."""
    positions, groups = [], []
    for k in range(copies):
        x0 = k * separation
        positions += [(x0 - r / 2, 0.0), (x0 + r / 2, 0.0)]
        groups += [k, k]
    return RegisterGeometry(tuple(positions), c6, tuple(groups))


@dataclass(frozen=True)
class _Terms:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    interaction: np.ndarray


@lru_cache(maxsize=64)
def _terms(geometry: RegisterGeometry) -> _Terms:
    n = geometry.n_atoms
    dim = 2**n
    interaction = np.zeros((dim, dim), dtype=complex)
    for i, j in combinations(range(n), 2):
        v = interaction_strength(geometry.distance(i, j), geometry.c6)
        ni = embed_single_qubit(RYDBERG_PROJECTOR, i, n).matrix
        nj = embed_single_qubit(RYDBERG_PROJECTOR, j, n).matrix
        interaction += v * (ni @ nj)
    return _Terms(
        sx=total_operator(SIGMA_X, n).matrix,
        sy=total_operator(SIGMA_Y, n).matrix,
        sz=total_operator(SIGMA_Z, n).matrix,
        interaction=interaction,
    )


def _hamiltonian_matrix(terms: _Terms, omega, delta, phi):
    return (
        0.5 * omega * (math.cos(phi) * terms.sx - math.sin(phi) * terms.sy)
        - 0.5 * delta * terms.sz
        + terms.interaction
    )


def build_hamiltonian(drive: DriveSample, geometry: RegisterGeometry) -> HermitianOperator:
    """Global-drive Hamiltonian.

    ``(omega/2)(cos(phi) sum X - sin(phi) sum Y) - (delta/2) sum Z
    + sum_{i<j} c6 / r_ij**6 N_i N_j``
    """
    terms = _terms(geometry)
    return HermitianOperator(_hamiltonian_matrix(terms, drive.omega, drive.delta, drive.phi))


def interaction_operator(geometry: RegisterGeometry) -> HermitianOperator:
    return HermitianOperator(_terms(geometry).interaction)


@dataclass(frozen=True)
class DriveWaveform:
    """Sampled controls.

    Either node samples (1-D arrays of length ``m + 1``, uniform scalar
    ``dt``) or per-step ``(start, mid, end)`` samples (arrays of shape
    ``(m, 3)``, ``dt`` scalar or one length per step).
    """

    omega: np.ndarray
    delta: np.ndarray
    phi: np.ndarray
    dt: float | np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.omega, self.delta, self.phi)]
        shape = arrays[0].shape
        if len({a.shape for a in arrays}) != 1 or not (len(shape) == 1 or (len(shape) == 2 and shape[1] == 3)):
            raise ValueError("omega, delta and phi must share a shape of (m + 1,) or (m, 3)")
        steps = np.asarray(self.dt, dtype=float)
        if np.any(steps <= 0):
            raise ValueError("dt must be positive")
        if steps.ndim and (len(shape) == 1 or steps.shape != (shape[0],)):
            raise ValueError("per-step dt needs (m, 3) samples and one length per step")
        if np.any(arrays[0] < 0):
            raise ValueError("omega must be non-negative")
        for name, a in zip(("omega", "delta", "phi"), arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if steps.ndim:
            steps.setflags(write=False)
            object.__setattr__(self, "dt", steps)

    @property
    def per_step(self) -> bool:
        return self.omega.ndim == 2

    @property
    def duration(self) -> float:
        if self.per_step:
            return float(np.sum(np.broadcast_to(self.dt, (self.omega.shape[0],))))
        return (self.omega.size - 1) * self.dt


def waveform_hamiltonians(waveform: DriveWaveform, geometry: RegisterGeometry) -> np.ndarray:
    """``H`` at every sample; shape ``waveform.omega.shape + (d, d)``."""
    terms = _terms(geometry)
    w = waveform
    ox = (0.5 * w.omega * np.cos(w.phi))[..., None, None]
    oy = (0.5 * w.omega * np.sin(w.phi))[..., None, None]
    dz = (0.5 * w.delta)[..., None, None]
    return ox * terms.sx - oy * terms.sy - dz * terms.sz + terms.interaction


def evolve_waveform(
    state: StateVector, waveform: DriveWaveform, geometry: RegisterGeometry
) -> StateVector:
    """Stepped evolution under a sampled, time-dependent drive."""
    return evolve_stepped(state, waveform_hamiltonians(waveform, geometry), waveform.dt)


@dataclass(frozen=True)
class CrosstalkReport:
    ratio: float
    separation: float
    passed: bool


def multiplex_crosstalk_check(
    geometry: RegisterGeometry, omega: float, threshold: float = CROSSTALK_THRESHOLD
) -> CrosstalkReport:
    """Compare the inter-copy interaction at the closest pair of copy centers to ``omega``."""
    groups = geometry.group_ids()
    if len(groups) < 2:
        raise ValueError("cross-talk check needs at least two copies")
    centers = [geometry.center(g) for g in groups]
    d = min(math.dist(a, b) for a, b in combinations(centers, 2))
    ratio = interaction_strength(d, geometry.c6) / omega
    return CrosstalkReport(ratio=ratio, separation=d, passed=ratio < threshold)
