from __future__ import annotations

import itertools
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cplab import dynomv as dm
from cplab import wellspread as ws
from cplab.gf import FieldSpec, FieldVector, IndexSet, lex_vectors, rank

GF2, GF3 = FieldSpec(2), FieldSpec(3)


def valued(n, field, seed):
    rng = random.Random(seed)
    seq = ws.random_sequence(n, rng)
    return seq.with_values([rng.randrange(field.p) for _ in range(n * n)])


@pytest.mark.parametrize("kind", ("verbatim", "answer-table"))
@pytest.mark.parametrize("field", (GF2, GF3))
def test_structures_answer_correctly(kind, field):
    seq = valued(3, field, 1)
    ds = dm.make_ds(kind, 3, field, 8)
    run = dm.run_dynamic(ds, seq, 3)
    assert all(run.correct.values())
    assert all(len(P) <= ds.t_q for P in run.probes.values())
    assert max(len(log) for log in run.update_logs) <= ds.t_u
    assert dm.check_epoch_bookkeeping(run, ds.t_u) == []


def test_make_ds_rejects():
    with pytest.raises(ValueError):
        dm.make_ds("lookup", 3, GF2, 8)
    with pytest.raises(ValueError):
        dm.make_ds("verbatim", 5, GF2, 4)


def test_bookkeeping_flags_violations():
    seq = valued(3, GF2, 2)
    ds = dm.make_ds("answer-table", 3, GF2, 8)
    run = dm.run_dynamic(ds, seq, 4)
    assert any("t_u" in v for v in dm.check_epoch_bookkeeping(run, 1))
    bad = dict(run.cells)
    bad[1] = bad[1] | bad[2]
    run.cells = bad
    msgs = dm.check_epoch_bookkeeping(run, ds.t_u)
    assert any("share" in m for m in msgs) and any("partition" in m for m in msgs)


def test_epoch_config_validation():
    with pytest.raises(ValueError):
        dm.EpochConfig(3, GF2, 8, 2, 1)
    with pytest.raises(ValueError):
        dm.EpochConfig(3, GF2, 8, 4, 3)
    cfg = dm.EpochConfig(3, GF2, 8, 4, 2)
    assert cfg.k == 5 and cfg.k_integral and cfg.top == 9 and cfg.budget() == 16
    assert not dm.EpochConfig(4, GF2, 8, 4, 2).k_integral
    for n, beta, ell in dm.valid_triples(6, 9):
        assert (beta**ell - 1) % n == 0 and beta ** (ell - 1) <= n * n


def test_row_update_sets_and_rank_sum_oracle():
    seq = valued(4, GF2, 3)
    R = dm.row_update_sets(seq, 7)
    assert sum(map(len, R)) == 7
    for i, Ri in enumerate(R):
        assert set(Ri) == {j for (a, j) in seq.recent(7) if a == i}
    rng = random.Random(0)
    for _ in range(20):
        vs = [GF2.random_vector(4, rng) for _ in range(3)]
        expect = sum(rank([FieldVector(tuple(v[j] for j in Ri), GF2) for v in vs]) for Ri in R if Ri)
        assert dm.rank_sum_epoch(vs, R) == expect
    assert dm.rank_sum_epoch([GF2.zero(4)] * 2, R) == 0


def test_gamma_lists_deterministic_and_distinct():
    a = dm.gamma_lists(3, GF2, 5, 4, seed=1)
    assert a == dm.gamma_lists(3, GF2, 5, 4, seed=1)
    assert all(len(set(map(tuple, g))) == 5 for g in a)
    with pytest.raises(ValueError):
        dm.gamma_lists(2, GF2, 5, 1, seed=0)


def test_find_epoch_cellset_answer_table_picks_answer_cells():
    seq = valued(3, GF2, 4)
    ds = dm.make_ds("answer-table", 3, GF2, 8)
    run = dm.run_dynamic(ds, seq, 4)
    choice = dm.find_epoch_cellset(run, 1, delta=2)
    assert choice.exhaustive
    for v in choice.qualifying:
        assert run.epoch_probes(v, 1) <= set(choice.cells)
    # a query whose probe misses epoch 1 entirely qualifies for any cell set
    free = [v for v in lex_vectors(GF2, 3) if not run.epoch_probes(v, 1)]
    assert all(v in choice.qualifying for v in free)


PRESET = dm.EpochConfig(3, GF2, 8, 4, 2)


@pytest.mark.parametrize("seed", range(10))
def test_epoch_roundtrip_explicit(seed):
    seq = ws.random_sequence(3, random.Random(f"indices/{seed}"))
    row = dm.epoch_session("verbatim", PRESET, seq, seed, "explicit")
    assert row["branch"] == 1 and row["roundtrip_ok"] and row["violations"] == []
    assert row["measured_bits"] == sum(row["breakdown"].values())
    assert row["entropy_bits"] == 9


@pytest.mark.parametrize("seed", range(3))
def test_epoch_roundtrip_shared(seed):
    cfg = dm.EpochConfig(3, GF2, 8, 4, 2, m=4)
    seq = ws.random_sequence(3, random.Random(seed))
    row = dm.epoch_session("verbatim", cfg, seq, seed, "shared")
    assert row["roundtrip_ok"]


def test_epoch_zero_branch_is_verbatim():
    seq = valued(3, GF2, 7)
    ds = dm.make_ds("verbatim", 3, GF2, 8)
    enc = dm.epoch_encode(ds, seq, PRESET, [])
    assert enc.branch == 0 and enc.measured_bits == 1 + 9
    split = 9 - PRESET.top
    got = dm.epoch_decode(enc.bits, ds, PRESET, ws.UpdateSequence(3, seq.pairs), list(seq.values[:split]), [])
    assert got == list(seq.values[split:])


def test_epoch_roundtrip_answer_table_single_epoch():
    cfg = dm.EpochConfig(3, GF2, 8, 4, 1)
    seq = ws.random_sequence(3, random.Random(11))
    row = dm.epoch_session("answer-table", cfg, seq, 3, "explicit")
    assert row["roundtrip_ok"] and row["violations"] == []


def test_epoch_mode_rejected():
    with pytest.raises(ValueError):
        dm.epoch_session("verbatim", PRESET, ws.random_sequence(3, random.Random(0)), 0, "lottery")


def test_rs_threshold():
    assert dm.rs_threshold(3, 5) == 1 and dm.rs_threshold(8, 4) == 1 and dm.rs_threshold(32, 2) == 2


# low rank sum encoder


def premise_family(n, k, field, seed):
    """Vectors vanishing on every recently updated column: rank sum 0."""
    rng = random.Random(seed)
    seq = ws.random_sequence(n, rng)
    R = dm.row_update_sets(seq, n * k)
    hit = set().union(*map(set, R))
    vs = [FieldVector(tuple(0 if j in hit else rng.randrange(field.p) for j in range(n)), field) for _ in range(k)]
    return vs, R


def test_lowrank_all_zero():
    vs, R = [GF2.zero(8)] * 4, dm.row_update_sets(ws.random_sequence(8, random.Random(0)), 32)
    enc = dm.lowrank_encode(vs, R)
    assert enc.rank_sum == 0 and enc.stats["dims"] and not any(enc.stats["dims"])
    assert dm.lowrank_decode(enc.bits, R, 4, GF2) == vs


@pytest.mark.parametrize("field", (GF2, GF3))
@pytest.mark.parametrize("seed", range(5))
def test_lowrank_premise_family_roundtrip(field, seed):
    vs, R = premise_family(8, 4, field, seed)
    enc = dm.lowrank_encode(vs, R)
    assert dm.lowrank_decode(enc.bits, R, 4, field) == vs
    assert enc.measured_bits == sum(enc.breakdown.values())


@given(st.integers(0, 10**6), st.sampled_from((2, 3)))
def test_lowrank_roundtrip_relaxed(seed, p):
    F = FieldSpec(p)
    rng = random.Random(seed)
    n, k = 8, 4
    R = dm.row_update_sets(ws.random_sequence(n, rng), n * k)
    # k vectors drawn from a low dimensional space
    gens = [F.random_vector(n, rng) for _ in range(2)]
    vs = []
    for _ in range(k):
        v = F.zero(n)
        for g in gens:
            v = v + g.scale(rng.randrange(p))
        vs.append(v)
    enc = dm.lowrank_encode(vs, R, enforce_premise=False, dim_cap=k)
    assert dm.lowrank_decode(enc.bits, R, k, F) == vs


def test_lowrank_premise_gate_refuses_at_equality():
    # n=8, k=4: nk/32 = 1, so rank sum 1 must be refused and 0 accepted
    R = [IndexSet.of([j]) for j in range(8)]
    vs = [GF2.unit(8, 0)] + [GF2.zero(8)] * 3
    assert dm.rank_sum_epoch(vs, R) == 1
    with pytest.raises(dm.PremiseError):
        dm.lowrank_encode(vs, R)
    dm.lowrank_encode([GF2.zero(8)] * 4, R)


def test_lowrank_cover_failure_is_reported():
    # every update in row 0: no small row set covers n/4 columns outside it
    R = [IndexSet.of([0])] + [IndexSet()] * 7
    with pytest.raises(ValueError, match="well-spread"):
        dm.lowrank_encode([GF2.zero(8)] * 4, R)


def test_find_cover_rows_smallest_first():
    R = [IndexSet.of([0]), IndexSet.of([0, 1, 2]), IndexSet.of([3])]
    assert dm.find_cover_rows(R, [0, 1, 2], 3, 3) == (1,)
    assert dm.find_cover_rows(R, [0, 2], 3, 3) is None


def test_ranksum_count_oracle_small():
    # RS < nk/32 forces rank sum 0: every vector vanishes on the updated columns
    for R in ([IndexSet.of([0]), IndexSet(), IndexSet()], [IndexSet.of([0, 1]), IndexSet.of([1]), IndexSet()]):
        hit = set().union(*map(set, R))
        res = dm.ranksum_count(3, GF2, 2, R)
        assert res["sets"] == math.comb(8, 2)
        assert res["low_rank_sum_sets"] == math.comb(2 ** (3 - len(hit)), 2)


def test_ranksum_count_fixture_frozen(fixtures):
    seq = ws.load_sequence(fixtures / "wellspread_n4.json")
    R = dm.row_update_sets(seq, 8)
    res = dm.ranksum_count(4, GF2, 2, R)
    # [DERIVED] frozen from the exhaustive enumeration above
    assert res["sets"] == 120 and res["low_rank_sum_sets"] == 0 and res["within_bound"]
    assert res["bound"] == pytest.approx(2 ** (27 * 8 / 32))
