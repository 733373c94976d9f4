import math

import numpy as np
import pytest

from rsarand import numtheory, skipgen
from rsarand.skipgen import (MULTIPLIER_TABLE, Q_DEFAULT, WEAK_MULTIPLIERS,
                             SkipParams, SkipState, lane_offset_seeds,
                             next_skip, next_skip_array, skip_power)


@pytest.fixture(scope="module")
def q13_a3():
    # a=3 is not a primitive root mod 13 (3^3 = 1); built directly to
    # exercise the two-word decomposition arithmetic alone
    return SkipParams(q=13, a=3, q1=4, q2=1)


@pytest.fixture(scope="module")
def q13_a2():
    return SkipParams.create(2, q=13, allow_weak=True)


class TestCreate:
    def test_precomputed_constants(self, q13_a3):
        assert (q13_a3.q1, q13_a3.q2) == (4, 1)
        made = SkipParams.create(2, q=13, allow_weak=True)
        assert (made.q1, made.q2) == (6, 1)

    def test_rejects_non_prime_modulus(self):
        with pytest.raises(ValueError, match="not prime"):
            SkipParams.create(3, q=15, allow_weak=True)

    def test_rejects_large_multiplier(self):
        with pytest.raises(ValueError, match="a\\*a"):
            SkipParams.create(5, q=13, allow_weak=True)

    def test_rejects_non_primitive_root(self):
        with pytest.raises(ValueError, match="primitive root"):
            SkipParams.create(2, q=7, allow_weak=True)  # 2^3 = 1 mod 7

    def test_weak_multiplier_gate(self):
        with pytest.raises(ValueError, match="allow_weak"):
            SkipParams.create(3)
        params = SkipParams.create(3, allow_weak=True)
        assert params.a == 3 and params.q == Q_DEFAULT

    def test_weak_set_members_are_roots(self):
        for a in WEAK_MULTIPLIERS:
            params = SkipParams.create(a, allow_weak=True)
            assert params.q1 == Q_DEFAULT // a


class TestMultiplierTable:
    """CI verification of the shipped multipliers."""

    def test_all_entries_valid(self):
        sqrt_q = math.isqrt(Q_DEFAULT)
        for a in MULTIPLIER_TABLE:
            assert (1 << 31) < a <= sqrt_q
            assert a * a <= Q_DEFAULT
            assert numtheory.is_primitive_root(a, Q_DEFAULT,
                                               skipgen.Q_DEFAULT_FACTORS)

    def test_entries_distinct(self):
        assert len(set(MULTIPLIER_TABLE)) == len(MULTIPLIER_TABLE)


class TestNextSkip:
    def test_worked_example(self, q13_a3):
        # 3*7 mod 13 via the decomposition: 3*(7 mod 4) - 1*(7 div 4) = 9 - 1
        state = SkipState(7)
        assert next_skip(state, q13_a3) == 8
        assert state.s == 8

    def test_unit_start(self, q13_a3):
        assert next_skip(SkipState(1), q13_a3) == 3

    def test_matches_mulmod_exhaustive_q13(self, q13_a2, q13_a3):
        for params in (q13_a2, q13_a3):
            for s in range(1, 13):
                assert next_skip(SkipState(s), params) == \
                    numtheory.mulmod(params.a, s, 13)

    def test_full_period_q13(self, q13_a2):
        state = SkipState(1)
        seen = []
        for _ in range(12):
            seen.append(next_skip(state, q13_a2))
        assert sorted(seen) == list(range(1, 13))
        assert seen[-1] == 1  # back to the start after q-1 steps

    def test_matches_mulmod_production_sample(self):
        params = skipgen.default_skip_params()
        rng = np.random.default_rng(11)
        for s in rng.integers(1, Q_DEFAULT, size=20_000, dtype=np.uint64).tolist():
            state = SkipState(s)
            assert next_skip(state, params) == numtheory.mulmod(params.a, s, Q_DEFAULT)

    def test_intermediates_below_q(self):
        # a*a <= q guarantees both Schrage intermediates stay below q
        rng = np.random.default_rng(12)
        for index in range(len(MULTIPLIER_TABLE)):
            params = skipgen.default_skip_params(index)
            for s in rng.integers(1, Q_DEFAULT, size=500, dtype=np.uint64).tolist():
                s1 = params.a * (s % params.q1)
                s2 = params.q2 * (s // params.q1)
                assert s1 < Q_DEFAULT and s2 < Q_DEFAULT


class TestNextSkipArray:
    def test_matches_scalar(self):
        params = skipgen.default_skip_params(3)
        rng = np.random.default_rng(13)
        values = rng.integers(1, Q_DEFAULT, size=50_000, dtype=np.uint64)
        vec = next_skip_array(values, params)
        for s, v in zip(values[:2000].tolist(), vec[:2000].tolist()):
            assert next_skip(SkipState(s), params) == v
        # and the whole batch against exact integer arithmetic
        a = params.a
        expect = [(a * s) % Q_DEFAULT for s in values.tolist()]
        assert vec.tolist() == expect


class TestSkipPower:
    def test_examples(self, q13_a2):
        assert skip_power(q13_a2, 0) == 1
        assert skip_power(q13_a2, 12) == 1  # Fermat, full order
        assert skip_power(q13_a2, 5) == 6   # 32 mod 13

    def test_jump_consistency(self):
        params = skipgen.default_skip_params()
        state = SkipState(1)
        for _ in range(1000):
            next_skip(state, params)
        assert state.s == skip_power(params, 1000)


class TestLaneOffsetSeeds:
    def test_single_lane(self, q13_a2):
        assert lane_offset_seeds(q13_a2, 5, 1) == [5]

    def test_worked_example(self, q13_a2):
        # stride = floor(12/4) = 3: powers 2^0, 2^3, 2^6, 2^9 mod 13
        assert lane_offset_seeds(q13_a2, 1, 4) == [1, 8, 12, 5]

    def test_no_collisions_up_to_q_minus_one(self, q13_a2):
        for mv in range(1, 13):
            seeds = lane_offset_seeds(q13_a2, 1, mv)
            assert len(set(seeds)) == mv

    def test_element_zero_is_s0(self):
        params = skipgen.default_skip_params()
        seeds = lane_offset_seeds(params, 12345, 8)
        assert seeds[0] == 12345
        stride = (Q_DEFAULT - 1) // 8
        for g, s in enumerate(seeds):
            assert s == 12345 * pow(params.a, g * stride, Q_DEFAULT) % Q_DEFAULT

    def test_rejects_bad_inputs(self, q13_a2):
        with pytest.raises(ValueError):
            lane_offset_seeds(q13_a2, 0, 4)
        with pytest.raises(ValueError):
            lane_offset_seeds(q13_a2, 1, 0)
