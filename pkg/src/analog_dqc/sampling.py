"""Finite-shot measurement: Born-rule sampling, dropped shots, multiplexed pooling.

Bitstrings list qubit 0 first; character ``"1"`` is the Rydberg outcome and
contributes ``z = +1`` to the magnetization, ``"0"`` contributes ``z = -1``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .quantum import StateVector

DEFAULT_SHOTS = 200
_NORM_TOL = 1e-8


@dataclass(frozen=True)
class MagnetizationEstimate:
    """Estimate of the total magnetization; ``shots=None`` marks an exact value."""

    value: float
    std_error: float = 0.0
    shots: int | None = None

    def __post_init__(self):
        if self.std_error < 0 or not math.isfinite(self.std_error):
            raise ValueError(f"std_error must be finite and >= 0, got {self.std_error}")

    @property
    def exact(self) -> bool:
        return self.shots is None


@dataclass(frozen=True)
class ShotRecord:
    counts: dict[str, int] = field(default_factory=dict)
    requested_shots: int = 0
    valid_shots: int = 0

    def __post_init__(self):
        counts = {k: int(v) for k, v in sorted(self.counts.items()) if v}
        if any(v < 0 for v in counts.values()):
            raise ValueError("counts must be non-negative")
        if len({len(k) for k in counts}) > 1:
            raise ValueError("bitstrings of mixed length in one record")
        if sum(counts.values()) != self.valid_shots:
            raise ValueError("valid_shots must equal the sum of counts")
        if self.valid_shots > self.requested_shots:
            raise ValueError("valid_shots cannot exceed requested_shots")
        object.__setattr__(self, "counts", counts)

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "requested": self.requested_shots, "valid": self.valid_shots}

    @classmethod
    def from_dict(cls, doc: dict) -> "ShotRecord":
        return cls(dict(doc["counts"]), int(doc["requested"]), int(doc["valid"]))


def sample(state: StateVector, shots: int, seed=None) -> ShotRecord:
    """Draw ``shots`` bitstrings from ``|amplitude|**2``."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = state.probabilities()
    total = probs.sum()
    if abs(total - 1.0) > _NORM_TOL:
        raise ValueError(f"state is not normalized (sum of probabilities {total})")
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, probs / total)
    n = state.n_qubits
    counts = {format(i, f"0{n}b"): int(c) for i, c in enumerate(draws) if c}
    return ShotRecord(counts, shots, shots)


def apply_prep_failure(record: ShotRecord, failure_rate: float, seed=None) -> ShotRecord:
    """Drop each shot independently with probability ``failure_rate``."""
    if not 0 <= failure_rate < 1:
        raise ValueError(f"failure_rate must be in [0, 1), got {failure_rate}")
    if failure_rate == 0:
        return record
    rng = np.random.default_rng(seed)
    kept = {k: int(rng.binomial(c, 1.0 - failure_rate)) for k, c in record.counts.items()}
    return ShotRecord(kept, record.requested_shots, sum(kept.values()))


def aggregate_multiplex(records: list[ShotRecord]) -> ShotRecord:
    """Pool the shots of copies that ran the same sequence."""
    if not records:
        raise ValueError("nothing to aggregate")
    widths = {len(k) for r in records for k in r.counts}
    if len(widths) > 1:
        raise ValueError(f"mismatched bitstring lengths {sorted(widths)}")
    pooled = Counter()
    for r in records:
        pooled.update(r.counts)
    return ShotRecord(
        dict(pooled),
        sum(r.requested_shots for r in records),
        sum(r.valid_shots for r in records),
    )


def magnetization_estimate(record: ShotRecord) -> MagnetizationEstimate:
    """Sample mean of ``sum_i z_i`` and its standard error (ddof = 1)."""
    n = record.valid_shots
    if n == 0:
        raise ValueError("no valid shots to estimate from")
    z = np.array([2 * k.count("1") - len(k) for k in record.counts], dtype=float)
    c = np.array(list(record.counts.values()), dtype=float)
    mean = float(c @ z / n)
    if n < 2:
        return MagnetizationEstimate(mean, 0.0, n)
    var = float(c @ (z - mean) ** 2 / (n - 1))
    return MagnetizationEstimate(mean, math.sqrt(var / n), n)
