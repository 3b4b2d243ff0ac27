"""Feature-map + ansatz pulse sequences, their execution, and experiment planning."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable

import numpy as np

from .quantum import StateVector, evolve_constant, expectation, magnetization_operator
from .rydberg import (
    OMEGA_DEFAULT,
    DriveSample,
    DriveWaveform,
    RegisterGeometry,
    build_hamiltonian,
    evolve_waveform,
)
from .sampling import (
    MagnetizationEstimate,
    aggregate_multiplex,
    apply_prep_failure,
    magnetization_estimate,
    sample,
)

DRIVE = "drive"
DELAY = "delay"


@dataclass(frozen=True)
class PulseSegment:
    kind: str
    duration: float
    omega: float = 0.0
    delta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in (DRIVE, DELAY):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.duration < 0:
            raise ValueError(f"segment duration must be >= 0, got {self.duration}")
        if self.kind == DELAY and self.omega != 0:
            raise ValueError("delay segments carry no drive amplitude")
        if self.omega < 0:
            raise ValueError("omega must be non-negative")


@dataclass(frozen=True)
class CircuitSpec:
    """Pulse-level settings shared by every sequence of one experiment.

    ``ansatz_duration=None`` selects a pi-area pulse, ``pi / ansatz_omega``.
    ``modulation_bandwidth`` (MHz) switches from ideal square pulses to a
    first-order low-pass response of the amplitude, integrated with RK4 on a
    ``dt`` grid; ``None`` means ideal. ``detuning_offset`` is added to the
    detuning of every segment, drives and delays alike.
    """

    fm_omega: float = OMEGA_DEFAULT
    ansatz_omega: float = OMEGA_DEFAULT
    ansatz_duration: float | None = None
    inter_pulse_delay: float = 0.0
    delay_detuning: float = 0.0
    modulation_bandwidth: float | None = None
    detuning_offset: float = 0.0
    max_duration: float = 4.0
    dt: float = 1e-3

    def __post_init__(self):
        if not self.fm_omega > 0:
            raise ValueError("fm_omega must be positive")
        if not self.ansatz_omega > 0:
            raise ValueError("ansatz_omega must be positive")
        if self.ansatz_duration is not None and self.ansatz_duration < 0:
            raise ValueError("ansatz_duration must be >= 0")
        if self.inter_pulse_delay < 0:
            raise ValueError("inter_pulse_delay must be >= 0")
        if self.modulation_bandwidth is not None and not self.modulation_bandwidth > 0:
            raise ValueError("modulation_bandwidth must be positive")

    @property
    def ansatz_time(self) -> float:
        if self.ansatz_duration is None:
            return math.pi / self.ansatz_omega
        return self.ansatz_duration

    @property
    def smoothed(self) -> bool:
        return self.modulation_bandwidth is not None

    def with_offset(self, delta_offset: float) -> "CircuitSpec":
        return replace(self, detuning_offset=delta_offset)

    def to_dict(self) -> dict:
        return asdict(self)


def build_sequence(x: float, theta: float, spec: CircuitSpec) -> list[PulseSegment]:
    """Square feature pulse of duration ``x / fm_omega``, optional delay, ansatz pulse at phase ``theta``."""
    if not x > 0:
        raise ValueError(f"feature value must be positive, got {x}")
    fm_time = x / spec.fm_omega
    total = fm_time + spec.inter_pulse_delay + spec.ansatz_time
    if total > spec.max_duration:
        raise ValueError(f"sequence lasts {total:.4f} us, above max_duration {spec.max_duration} us")
    segments = [PulseSegment(DRIVE, fm_time, spec.fm_omega, 0.0, 0.0)]
    if spec.inter_pulse_delay > 0:
        segments.append(PulseSegment(DELAY, spec.inter_pulse_delay, 0.0, spec.delay_detuning, 0.0))
    segments.append(PulseSegment(DRIVE, spec.ansatz_time, spec.ansatz_omega, 0.0, theta))
    return segments


def _evolve_ideal(state, segments, spec, geometry):
    for seg in segments:
        drive = DriveSample(seg.omega, seg.delta + spec.detuning_offset, seg.phi)
        state = evolve_constant(state, build_hamiltonian(drive, geometry), seg.duration)
    return state


TRANSIENT_SPAN = 8.0  # filter time constants resolved finely after every edge
TRANSIENT_STEPS = 8  # steps per time constant inside that span


def sequence_waveform(segments: list[PulseSegment], spec: CircuitSpec) -> DriveWaveform:
    """Per-step samples of a sequence with the amplitude passed through a first-order low-pass.

    Steps never straddle a segment boundary, so detuning and phase switch
    exactly on time while the amplitude follows the exact filter response.
    The first few time constants of each segment, where the amplitude is still
    settling, are stepped finely; the rest uses ``spec.dt``. A trailing buffer
    of five time constants at the delay detuning lets the amplitude ring down.
    """
    tau = 1.0 / (2 * math.pi * spec.modulation_bandwidth)
    tail_phi = segments[-1].phi if segments else 0.0
    buffer = PulseSegment(DELAY, 5 * tau, 0.0, spec.delay_detuning, tail_phi)
    rel = np.array([0.0, 0.5, 1.0])
    omega, delta, phi, steps = [], [], [], []
    level = 0.0
    for seg in [*segments, buffer]:
        transient = min(seg.duration, TRANSIENT_SPAN * tau)
        for span, h_max in ((transient, min(spec.dt, tau / TRANSIENT_STEPS)), (seg.duration - transient, spec.dt)):
            if span <= 0:
                continue
            n = max(1, math.ceil(span / h_max - 1e-9))
            h = span / n
            for _ in range(n):
                samples = seg.omega + (level - seg.omega) * np.exp(-rel * h / tau)
                omega.append(samples)
                level = samples[-1]
            delta += [[seg.delta + spec.detuning_offset] * 3] * n
            phi += [[seg.phi] * 3] * n
            steps += [h] * n
    return DriveWaveform(np.array(omega), np.array(delta), np.array(phi), np.array(steps))


def final_state(segments: list[PulseSegment], spec: CircuitSpec, geometry: RegisterGeometry) -> StateVector:
    state = StateVector.ground(geometry.n_atoms)
    if not segments:
        return state
    if spec.smoothed:
        return evolve_waveform(state, sequence_waveform(segments, spec), geometry)
    return _evolve_ideal(state, segments, spec, geometry)


def derived_seed(master_seed: int, *key) -> int:
    """Stable per-sequence seed from the master seed and a hashable key."""
    text = "|".join([str(int(master_seed))] + [f"{k:.9f}" if isinstance(k, float) else str(k) for k in key])
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def run_sequence(
    segments: list[PulseSegment],
    spec: CircuitSpec,
    geometry: RegisterGeometry,
    shots: int | None = None,
    seed: int | None = None,
    copies: int = 1,
    failure_rate: float = 0.0,
) -> MagnetizationEstimate:
    """Execute a sequence on ``geometry`` (one copy) and read out the magnetization.

    With ``shots=None`` the exact expectation is returned. Otherwise ``copies``
    multiplexed copies each run ``ceil(shots / copies)`` times, every copy gets
    its own sampling and dropout stream, and the shots are pooled.
    """
    state = final_state(segments, spec, geometry)
    if shots is None:
        return MagnetizationEstimate(expectation(state, magnetization_operator(state.n_qubits)))
    if shots < 1 or copies < 1:
        raise ValueError("shots and copies must be >= 1")
    executions = -(-shots // copies)
    root = np.random.SeedSequence(seed)
    records = []
    for child in root.spawn(copies):
        s_sample, s_fail = child.spawn(2)
        rec = sample(state, executions, np.random.default_rng(s_sample))
        records.append(apply_prep_failure(rec, failure_rate, np.random.default_rng(s_fail)))
    return magnetization_estimate(aggregate_multiplex(records))


def run_circuit(
    x: float,
    theta: float,
    spec: CircuitSpec,
    geometry: RegisterGeometry,
    shots: int | None = None,
    seed: int | None = None,
    copies: int = 1,
    failure_rate: float = 0.0,
) -> MagnetizationEstimate:
    return run_sequence(build_sequence(x, theta, spec), spec, geometry, shots, seed, copies, failure_rate)


# --- experiment planning -----------------------------------------------------

SHIFT = "shift"
BOUNDARY = "boundary"
QEL = "qel"
COLLOCATION = "collocation"


@dataclass(frozen=True)
class PlannedSequence:
    x: float
    theta: float
    role: str
    origin: float
    shift: float = 0.0
    covers_boundary: bool = False

    def to_dict(self) -> dict:
        return {
            "x": round(self.x, 12),
            "theta": self.theta,
            "role": self.role,
            "origin": self.origin,
            "shift": self.shift,
            "covers_boundary": self.covers_boundary,
        }


@dataclass(frozen=True)
class SequencePlan:
    entries: tuple[PlannedSequence, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    def counts_per_theta(self) -> dict[float, int]:
        out: dict[float, int] = {}
        for e in self.entries:
            out[e.theta] = out.get(e.theta, 0) + 1
        return dict(sorted(out.items()))

    def for_theta(self, theta: float) -> list[PlannedSequence]:
        return [e for e in self.entries if e.theta == theta]

    def to_json(self) -> str:
        doc = {
            "sequences": len(self),
            "counts_per_theta": {f"{k:g}": v for k, v in self.counts_per_theta().items()},
            "entries": [e.to_dict() for e in self.entries],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SequencePlan":
        doc = json.loads(text)
        return cls(tuple(PlannedSequence(**e) for e in doc["entries"]))


def plan_experiment(
    collocation: Iterable[float],
    theta_grid: Iterable[float],
    shifts: Iterable[float],
    boundary_x: float | None = None,
    qel_theta: float | None = None,
    qel_points: Iterable[float] = (),
    tol: float = 1e-3,
) -> SequencePlan:
    """Enumerate the distinct (x, theta) executions of a closed-loop run.

    Every collocation point is evaluated at ``x +- s`` for each shift. The
    boundary point gets its own sequence only when no planned point already
    lies within ``tol`` of it. The extra points, shifted the same way, are
    added for ``qel_theta`` only. Entries are sorted by (theta, x) so the plan
    does not depend on input ordering.
    """
    collocation = sorted(set(float(c) for c in collocation))
    thetas = sorted(set(float(t) for t in theta_grid))
    shifts = sorted(set(float(s) for s in shifts))
    qel_points = sorted(set(float(q) for q in qel_points))
    entries: list[PlannedSequence] = []
    for theta in thetas:
        xs: list[PlannedSequence] = []

        def add(x, role, origin, shift):
            if any(abs(e.x - x) <= tol for e in xs):
                return
            xs.append(PlannedSequence(x, theta, role, origin, shift))

        for c in collocation:
            for s in shifts:
                add(c + s, SHIFT, c, s)
                add(c - s, SHIFT, c, -s)
        if qel_theta is not None and math.isclose(theta, qel_theta, abs_tol=1e-9):
            for q in qel_points:
                if any(abs(q - c) <= tol for c in collocation):
                    continue
                for s in shifts:
                    add(q + s, QEL, q, s)
                    add(q - s, QEL, q, -s)
        if boundary_x is not None:
            hits = [i for i, e in enumerate(xs) if abs(e.x - boundary_x) <= tol]
            if hits:
                xs[hits[0]] = replace(xs[hits[0]], covers_boundary=True)
            else:
                xs.append(PlannedSequence(boundary_x, theta, BOUNDARY, boundary_x, 0.0, True))
        entries += sorted(xs, key=lambda e: e.x)
    return SequencePlan(tuple(entries))
