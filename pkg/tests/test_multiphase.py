from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cplab import multiphase as mp


def all_sets(n):
    return [frozenset(c) for r in range(n + 1) for c in itertools.combinations(range(n), r)]


@pytest.mark.parametrize("kind", sorted(mp.DS_KINDS))
@pytest.mark.parametrize("w", (4, 8))
def test_structures_answer_exhaustively(kind, w):
    k, n = 2, 3
    sets = all_sets(n)
    for X in itertools.product(sets, repeat=k):
        for Y in sets:
            ds = mp.make_ds(kind, k, n, w)
            for i in range(k):
                inst = mp.MultiphaseInstance(k, n, tuple(X), Y, i)
                got, logs = mp.solve_multiphase(ds, inst)
                assert got == mp.brute_force_disjoint(X[i], Y)
                assert len(logs["query"]) == ds.t_q
                assert len(logs["update"]) <= ds.t_u


def test_declared_probe_counts():
    assert mp.make_ds("naive", 3, 20, 8).t_q == 2 * 3
    assert mp.make_ds("lookup", 3, 20, 8).t_q == 1


def test_pack_bits():
    assert mp.pack_bits([0, 9], 10, 8) == [1, 2]


def test_params_validation_suggests_nearest():
    with pytest.raises(ValueError, match="nearest valid n: 3, 6"):
        mp.ReductionParams(2, 4, 8, 2, 3)
    with pytest.raises(ValueError):
        mp.ReductionParams(2, 4, 8, 2, 0)


@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.data())
def test_lsd_map_equivalence(k, B, ell, data):
    N = k * ell
    W = frozenset(data.draw(st.sets(st.tuples(st.integers(0, N - 1), st.integers(0, B - 1)))))
    V = tuple(data.draw(st.lists(st.integers(0, B - 1), min_size=N, max_size=N)))
    inst = mp.BlockedLsdInstance(N, B, V, W)
    params = mp.ReductionParams(k, ell * B, 8, 1, ell)
    X, Y = mp.lsd_map(inst, params)
    assert inst.disjoint() == all(not (x & y) for x, y in zip(X, Y))
    assert all(len(y) == ell for y in Y)


@pytest.mark.parametrize("kind", sorted(mp.DS_KINDS))
def test_reduction_exhaustive_tiny(kind):
    k, ell, B = 2, 1, 2
    N = k * ell
    ds = mp.make_ds(kind, k, ell * B, 8)
    params = mp.ReductionParams(k, ell * B, 8, ds.t_q, ell)
    cells = [(j, h) for j in range(N) for h in range(B)]
    for mask in range(1 << len(cells)):
        W = frozenset(c for i, c in enumerate(cells) if mask >> i & 1)
        session = mp.ReductionSession(W, ds, params)
        for V in itertools.product(range(B), repeat=N):
            res = session.run(V)
            assert res.answer == mp.BlockedLsdInstance(N, B, V, W).disjoint()
            assert all(len(log) == ds.t_q for log in res.query_logs)
            assert sum(res.step_bits["step3"].values()) == sum(
                r.alice_bits + r.bob_bits for r in res.rounds
            )


def test_reduction_transcript_accounting():
    rng = random.Random(3)
    ds = mp.make_ds("naive", 2, 4, 8)
    params = mp.ReductionParams(2, 4, 8, ds.t_q, 2)
    W = frozenset((j, h) for j in range(4) for h in range(2) if rng.random() < 0.4)
    answer, t, res = mp.run_reduction(mp.BlockedLsdInstance(4, 2, (0, 1, 0, 1), W), ds, params, seed=1)
    total = {p: res.step_bits["step2"][p] + res.step_bits["step3"][p] for p in ("alice", "bob")}
    assert total == {p: t.tallies[p] for p in ("alice", "bob")}


def test_instance_shape_mismatch():
    ds = mp.make_ds("naive", 2, 4, 8)
    params = mp.ReductionParams(2, 4, 8, ds.t_q, 2)
    with pytest.raises(ValueError):
        mp.run_reduction(mp.BlockedLsdInstance(3, 2, (0, 0, 0), frozenset()), ds, params)


def test_valid_configs_respect_cap():
    for c in mp.valid_configs(8, 4, max_subsets=64):
        assert c.N % c.ell == 0
