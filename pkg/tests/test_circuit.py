import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from analog_dqc.circuit import (
    BOUNDARY,
    DELAY,
    DRIVE,
    CircuitSpec,
    PulseSegment,
    SequencePlan,
    build_sequence,
    derived_seed,
    plan_experiment,
    run_circuit,
    run_sequence,
    sequence_waveform,
)
from analog_dqc.problem import BENCHMARK_COLLOCATION, BENCHMARK_QEL_POINTS, BENCHMARK_THETAS
from analog_dqc.quantum import SIGMA_X, SIGMA_Y, magnetization_operator, total_operator
from analog_dqc.rydberg import interaction_operator, pair_geometry

GEO = pair_geometry()
IDEAL = CircuitSpec()
SHIFTS = (0.90, 2.47)


def direct_magnetization(x, theta, omega=9.0):
    """<0|Uf^dag Ua^dag M Ua Uf|0> by explicit matrix products (zero delay, ideal pulses)."""
    V = interaction_operator(GEO).matrix
    X, Y = total_operator(SIGMA_X, 2).matrix, total_operator(SIGMA_Y, 2).matrix
    Hf = omega / 2 * X + V
    Ha = omega / 2 * (math.cos(theta) * X - math.sin(theta) * Y) + V
    psi = expm(-1j * Ha * math.pi / omega) @ expm(-1j * Hf * x / omega) @ np.eye(4)[:, 0]
    return float(np.real(np.vdot(psi, magnetization_operator(2).matrix @ psi)))


class TestBuildSequence:
    def test_feature_duration(self):
        seq = build_sequence(4.5, 1.0, IDEAL)
        assert seq[0].duration == pytest.approx(0.5)
        assert (seq[0].kind, seq[-1].kind) == (DRIVE, DRIVE)
        assert seq[-1].phi == 1.0

    def test_default_ansatz_is_pi_area(self):
        assert build_sequence(1.0, 0.0, IDEAL)[-1].duration == pytest.approx(math.pi / 9)

    def test_delay_segment(self):
        spec = CircuitSpec(inter_pulse_delay=0.25, delay_detuning=-3.0)
        seq = build_sequence(1.0, 0.0, spec)
        assert [s.kind for s in seq] == [DRIVE, DELAY, DRIVE]
        assert seq[1].delta == -3.0

    def test_zero_phase_merges_into_one_pulse(self):
        x = 2.3
        merged = [PulseSegment(DRIVE, (x + math.pi) / 9, 9.0)]
        a = run_circuit(x, 0.0, IDEAL, GEO).value
        b = run_sequence(merged, IDEAL, GEO).value
        assert a == pytest.approx(b, abs=1e-12)

    def test_longest_benchmark_sequence(self):
        plan = plan_experiment(BENCHMARK_COLLOCATION, BENCHMARK_THETAS, SHIFTS)
        longest = max(plan.entries, key=lambda e: (e.x, e.theta))
        assert longest.x == pytest.approx(7.614 + 2.47)
        assert longest.theta == 6.28

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_non_positive_feature(self, x):
        with pytest.raises(ValueError):
            build_sequence(x, 0.0, IDEAL)

    def test_max_duration(self):
        with pytest.raises(ValueError):
            build_sequence(50.0, 0.0, IDEAL)

    def test_delay_without_drive(self):
        with pytest.raises(ValueError):
            PulseSegment(DELAY, 1.0, omega=1.0)


class TestRunCircuit:
    def test_empty_sequence_is_ground(self):
        est = run_sequence([], IDEAL, GEO)
        assert (est.value, est.std_error) == (-2.0, 0.0)

    @pytest.mark.parametrize("x,theta", [(0.5, 0.0), (2.614, 2.79), (6.516, 4.19), (10.084, 6.28)])
    def test_matches_direct_matrix_products(self, x, theta):
        assert run_circuit(x, theta, IDEAL, GEO).value == pytest.approx(direct_magnetization(x, theta), abs=1e-10)

    @settings(max_examples=30)
    @given(x=st.floats(0.1, 10), theta=st.floats(-7, 7))
    def test_phase_periodic(self, x, theta):
        a = run_circuit(x, theta, IDEAL, GEO).value
        b = run_circuit(x, theta + 2 * math.pi, IDEAL, GEO).value
        assert a == pytest.approx(b, abs=1e-9)

    def test_sampled_within_four_sigma(self):
        exact = run_circuit(3.3, 2.79, IDEAL, GEO).value
        hits = sum(
            abs((e := run_circuit(3.3, 2.79, IDEAL, GEO, shots=200, seed=s)).value - exact) <= 4 * e.std_error
            for s in range(100)
        )
        assert hits >= 99

    def test_multiplexed_shot_pooling(self):
        est = run_circuit(3.3, 2.79, IDEAL, GEO, shots=201, seed=0, copies=2)
        assert est.shots == 202

    def test_sampled_is_seed_deterministic(self):
        a = run_circuit(3.3, 1.0, IDEAL, GEO, shots=200, seed=4, copies=2, failure_rate=0.05)
        b = run_circuit(3.3, 1.0, IDEAL, GEO, shots=200, seed=4, copies=2, failure_rate=0.05)
        assert a == b

    def test_detuning_offset_changes_output(self):
        a = run_circuit(3.3, 1.0, IDEAL, GEO).value
        b = run_circuit(3.3, 1.0, IDEAL.with_offset(-1.0), GEO).value
        assert abs(a - b) > 1e-3


class TestSmoothedMode:
    @pytest.mark.parametrize("x", [1.0, 4.0, 8.0])
    def test_converges_to_ideal_with_bandwidth(self, x):
        ideal = run_circuit(x, 2.0, IDEAL, GEO).value
        err = [abs(run_circuit(x, 2.0, CircuitSpec(modulation_bandwidth=b), GEO).value - ideal) for b in (1e3, 1e4)]
        assert err[1] < 1e-3
        # filter lag is first order in 1 / bandwidth
        assert err[0] / err[1] == pytest.approx(10, rel=0.1)

    def test_independent_of_step_below_time_constant(self):
        a = run_circuit(4.0, 2.0, CircuitSpec(modulation_bandwidth=20.0, dt=1e-3), GEO).value
        b = run_circuit(4.0, 2.0, CircuitSpec(modulation_bandwidth=20.0, dt=2.5e-4), GEO).value
        assert a == pytest.approx(b, abs=1e-7)

    def test_slow_modulation_differs(self):
        slow = CircuitSpec(modulation_bandwidth=5.0)
        assert abs(run_circuit(4.0, 2.0, slow, GEO).value - run_circuit(4.0, 2.0, IDEAL, GEO).value) > 1e-2

    def test_waveform_rises_and_rings_down(self):
        spec = CircuitSpec(modulation_bandwidth=20.0)
        seq = build_sequence(4.5, 0.0, spec)
        wf = sequence_waveform(seq, spec)
        tau = 1 / (2 * math.pi * 20.0)
        assert wf.omega[0, 0] == 0.0
        assert wf.omega.max() == pytest.approx(9.0, rel=1e-3)
        assert wf.omega[-1, -1] < 9.0 * math.exp(-4.9)
        assert wf.duration == pytest.approx(sum(s.duration for s in seq) + 5 * tau)

    def test_offset_reaches_every_sample(self):
        spec = CircuitSpec(modulation_bandwidth=20.0, detuning_offset=0.7)
        wf = sequence_waveform(build_sequence(4.5, 0.0, spec), spec)
        assert np.all(wf.delta == 0.7)

    def test_bandwidth_must_be_positive(self):
        with pytest.raises(ValueError):
            CircuitSpec(modulation_bandwidth=0.0)


class TestDerivedSeed:
    def test_stable(self):
        assert derived_seed(0, 1.5, 2.79) == derived_seed(0, 1.5, 2.79)

    def test_distinct(self):
        seeds = {derived_seed(m, x, t) for m in range(3) for x in (1.0, 2.0) for t in (0.7, 1.4)}
        assert len(seeds) == 12


class TestPlan:
    def test_benchmark_total(self):
        plan = plan_experiment(BENCHMARK_COLLOCATION, BENCHMARK_THETAS, SHIFTS, 6.516, 2.79, BENCHMARK_QEL_POINTS, tol=0.005)
        counts = plan.counts_per_theta()
        assert len(plan) == 8 * 32 + 52 == 308
        assert counts[2.79] == 52
        assert all(n == 32 for t, n in counts.items() if t != 2.79)

    def test_boundary_is_covered_by_shift_point(self):
        plan = plan_experiment(BENCHMARK_COLLOCATION, [2.79], SHIFTS, 6.516, tol=0.005)
        covering = [e for e in plan.entries if e.covers_boundary]
        assert len(covering) == 1 and covering[0].x == pytest.approx(4.042 + 2.47)

    def test_strict_tolerance_adds_boundary_sequence(self):
        plan = plan_experiment(BENCHMARK_COLLOCATION, [2.79], SHIFTS, 6.516, tol=1e-3)
        assert len(plan) == 33
        assert any(e.role == BOUNDARY for e in plan.entries)

    def test_reduced(self):
        plan = plan_experiment([3.0], [1.0], [0.9])
        assert [e.x for e in plan.entries] == pytest.approx([2.1, 3.9])

    def test_qel_points_only_at_their_theta(self):
        plan = plan_experiment([3.0], [1.0, 2.0], [0.5], qel_theta=2.0, qel_points=[5.0])
        assert plan.counts_per_theta() == {1.0: 2, 2.0: 4}

    @settings(max_examples=20)
    @given(seed=st.integers(0, 1000))
    def test_ordering_invariant(self, seed):
        rng = random.Random(seed)
        c, t, s, q = list(BENCHMARK_COLLOCATION), list(BENCHMARK_THETAS), list(SHIFTS), list(BENCHMARK_QEL_POINTS)
        for v in (c, t, s, q):
            rng.shuffle(v)
        a = plan_experiment(c, t, s, 6.516, 2.79, q, tol=0.005)
        b = plan_experiment(BENCHMARK_COLLOCATION, BENCHMARK_THETAS, SHIFTS, 6.516, 2.79, BENCHMARK_QEL_POINTS, tol=0.005)
        assert a == b

    def test_json_roundtrip(self):
        plan = plan_experiment(BENCHMARK_COLLOCATION, BENCHMARK_THETAS, SHIFTS, 6.516, 2.79, BENCHMARK_QEL_POINTS, tol=0.005)
        text = plan.to_json()
        again = SequencePlan.from_json(text)
        assert len(again) == 308
        assert again.to_json() == text
