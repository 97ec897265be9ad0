from __future__ import annotations

import itertools
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cplab import subset_comm as sc


@st.composite
def instance(draw):
    w = draw(st.sampled_from((8, 16, 32)))
    B = sorted(draw(st.sets(st.integers(0, (1 << w) - 1), min_size=1, max_size=200)))
    A = draw(st.sets(st.sampled_from(B), max_size=min(len(B), 64)))
    return sorted(A), B, w


@given(instance(), st.integers(0, 10**6))
def test_protocol_recovers_A_within_budget(inst, seed):
    A, B, w = inst
    decoded, t = sc.run_protocol(A, B, w, seed=seed)
    assert decoded == frozenset(A)
    assert t.tallies["alice"] <= sc.alice_budget(len(A), len(B))
    assert t.tallies["bob"] <= sc.bob_budget(len(A), w)
    assert len(t) == t.tallies["alice"] + t.tallies["bob"]


def test_exhaustive_small_universe():
    for mask in range(1, 1 << 5):
        B = [x for x in range(5) if mask >> x & 1]
        for r in range(len(B) + 1):
            for A in itertools.combinations(B, r):
                assert sc.run_protocol(A, B, 16, seed=mask)[0] == frozenset(A)


def test_trivial_cases():
    assert sc.run_protocol([], [7], 16)[0] == frozenset()
    assert sc.run_protocol([7], [7], 16)[0] == {7}
    B = list(range(100))
    decoded, t = sc.run_protocol(B, B, 16)
    assert decoded == set(B)


def test_invalid_instances():
    with pytest.raises(ValueError):
        sc.run_protocol([1], [2], 8)
    with pytest.raises(ValueError):
        sc.run_protocol([], [], 8)
    with pytest.raises(ValueError):
        sc.run_protocol([], [256], 8)


def test_hash_params_validation():
    with pytest.raises(ValueError):
        sc.HashParams(2, 8, 4)
    with pytest.raises(ValueError):
        sc.HashParams(3, 8, 9)
    h = sc.HashParams(3, 8, 4)
    assert sc.mult_hash(h, 100) == ((300 % 256) >> 4)


def test_colliding_pairs_oracle():
    rng = random.Random(4)
    B = rng.sample(range(1 << 12), 40)
    h = sc.HashParams(rng.randrange(1, 1 << 12, 2), 12, 5)
    vals = [sc.mult_hash(h, x) for x in B]
    expect = sum(1 for i, j in itertools.permutations(range(len(B)), 2) if vals[i] == vals[j])
    assert sc.colliding_pairs(B, h) == expect


def test_level1_seed_meets_square_sum_criterion():
    rng = random.Random(0)
    for S in (1, 2, 17, 300):
        B = rng.sample(range(1 << 16), S)
        a = sc.find_level1_seed(B, 16, seed=S)
        M = sc.level1_width(S)
        assert sc.colliding_pairs(B, sc.HashParams(a, 16, M)) <= 2 * S


def test_level2_seed_is_injective():
    rng = random.Random(1)
    for b in (2, 3, 9, 20):
        bucket = rng.sample(range(1 << 16), b)
        M = sc.level2_width(b, 16)
        a = sc.find_level2_seed(bucket, 16, M, seed=b)
        assert len({sc.mult_hash(sc.HashParams(a, 16, M), x) for x in bucket}) == b
    assert sc.level2_width(1, 16) == 0
    assert sc.loose_level2_width(4) == math.ceil(math.log2(8 * 16))


def test_odd_candidates_cover_all_odd_multipliers():
    got = list(sc.odd_candidates(6, seed=11))
    assert sorted(got) == list(range(1, 64, 2))


def test_transcript_determinism():
    A, B = [3, 9], [1, 3, 5, 9, 200]
    t1 = sc.run_protocol(A, B, 16, seed=5)[1]
    t2 = sc.run_protocol(A, B, 16, seed=5)[1]
    assert t1.bits == t2.bits
