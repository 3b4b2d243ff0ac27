import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from analog_dqc.quantum import StateVector, expectation, magnetization_operator
from analog_dqc.sampling import (
    MagnetizationEstimate,
    ShotRecord,
    aggregate_multiplex,
    apply_prep_failure,
    magnetization_estimate,
    sample,
)

UNIFORM = StateVector(2, np.full(4, 0.5))


def bell_like(p):
    return StateVector(2, np.array([math.sqrt(1 - p), 0, 0, math.sqrt(p)]))


class TestSample:
    def test_deterministic_state(self):
        assert sample(StateVector.ground(2), 100, seed=1).counts == {"00": 100}

    def test_uniform_frequencies(self):
        n = 100_000
        rec = sample(UNIFORM, n, seed=2)
        sigma = math.sqrt(0.25 * 0.75 / n)
        for b in ("00", "01", "10", "11"):
            assert abs(rec.counts[b] / n - 0.25) < 4 * sigma

    def test_bit_order(self):
        rec = sample(StateVector.basis("10"), 5, seed=0)
        assert rec.counts == {"10": 5}

    def test_seed_determinism(self):
        assert sample(UNIFORM, 500, seed=9) == sample(UNIFORM, 500, seed=9)

    def test_zero_shots(self):
        with pytest.raises(ValueError):
            sample(UNIFORM, 0)


class TestPrepFailure:
    def test_zero_rate_unchanged(self):
        rec = sample(UNIFORM, 100, seed=0)
        assert apply_prep_failure(rec, 0.0, seed=1) is rec

    def test_half_rate(self):
        n = 100_000
        rec = apply_prep_failure(sample(UNIFORM, n, seed=0), 0.5, seed=1)
        assert rec.requested_shots == n
        assert abs(rec.valid_shots - n / 2) < 4 * math.sqrt(n * 0.25)

    @pytest.mark.parametrize("rate", [-0.1, 1.0])
    def test_rate_bounds(self, rate):
        with pytest.raises(ValueError):
            apply_prep_failure(sample(UNIFORM, 10, seed=0), rate)


class TestRecord:
    def test_valid_must_match_counts(self):
        with pytest.raises(ValueError):
            ShotRecord({"00": 3}, 5, 4)

    def test_valid_not_above_requested(self):
        with pytest.raises(ValueError):
            ShotRecord({"00": 5}, 4, 5)

    def test_mixed_widths(self):
        with pytest.raises(ValueError):
            ShotRecord({"0": 1, "00": 1}, 2, 2)

    def test_dict_roundtrip(self):
        rec = ShotRecord({"01": 3, "11": 2}, 6, 5)
        assert rec.to_dict() == {"counts": {"01": 3, "11": 2}, "requested": 6, "valid": 5}
        assert ShotRecord.from_dict(rec.to_dict()) == rec


class TestAggregate:
    def test_two_copies(self):
        rec = aggregate_multiplex([ShotRecord({"00": 50}, 50, 50)] * 2)
        assert rec == ShotRecord({"00": 100}, 100, 100)

    def test_mismatched_width(self):
        with pytest.raises(ValueError):
            aggregate_multiplex([ShotRecord({"00": 1}, 1, 1), ShotRecord({"000": 1}, 1, 1)])

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate_multiplex([])

    @given(a=st.dictionaries(st.sampled_from(["00", "01", "10", "11"]), st.integers(1, 50), min_size=1),
           b=st.dictionaries(st.sampled_from(["00", "01", "10", "11"]), st.integers(1, 50), min_size=1))
    def test_pooling_then_estimate_equals_pooled_estimate(self, a, b):
        ra = ShotRecord(a, sum(a.values()), sum(a.values()))
        rb = ShotRecord(b, sum(b.values()), sum(b.values()))
        pooled = {k: a.get(k, 0) + b.get(k, 0) for k in set(a) | set(b)}
        n = sum(pooled.values())
        assert magnetization_estimate(aggregate_multiplex([ra, rb])) == magnetization_estimate(ShotRecord(pooled, n, n))


class TestEstimate:
    def test_all_ground(self):
        est = magnetization_estimate(ShotRecord({"00": 200}, 200, 200))
        assert (est.value, est.std_error, est.shots) == (-2.0, 0.0, 200)

    def test_half_and_half(self):
        # z = -2 or +2 with equal counts: ddof=1 sample variance 4 * 200/199
        est = magnetization_estimate(ShotRecord({"00": 100, "11": 100}, 200, 200))
        assert est.value == 0.0
        assert est.std_error == pytest.approx(math.sqrt(4 * 200 / 199 / 200), rel=1e-12)
        assert est.std_error == pytest.approx(2 / math.sqrt(200), rel=0.01)

    def test_single_flip_states(self):
        est = magnetization_estimate(ShotRecord({"01": 50, "10": 50}, 100, 100))
        assert (est.value, est.std_error) == (0.0, 0.0)

    def test_no_valid_shots(self):
        with pytest.raises(ValueError):
            magnetization_estimate(ShotRecord({}, 10, 0))

    def test_negative_error_rejected(self):
        with pytest.raises(ValueError):
            MagnetizationEstimate(0.0, -1.0)

    def test_consistency_over_seeds(self):
        state = bell_like(0.3)
        exact = expectation(state, magnetization_operator(2))
        hits = 0
        for seed in range(1000):
            est = magnetization_estimate(sample(state, 200, seed=seed))
            hits += abs(est.value - exact) < 5 * est.std_error
        assert hits >= 995

    def test_doubling_shots_shrinks_error(self):
        state = bell_like(0.3)
        med = {
            n: np.median([magnetization_estimate(sample(state, n, seed=s)).std_error for s in range(200)])
            for n in (400, 800)
        }
        assert med[400] / med[800] == pytest.approx(math.sqrt(2), rel=0.1)
