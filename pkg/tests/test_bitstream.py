from __future__ import annotations

import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cplab.bitstream import (
    Transcript,
    TranscriptError,
    binomial_width,
    range_union_width,
    read_range_union,
    read_subset,
    split_picks,
    flatten_picks,
    subset_rank,
    subset_unrank,
    width_for,
    write_range_union,
    write_subset,
)


def test_width_for():
    assert [width_for(c) for c in (1, 2, 3, 4, 5, 8, 9)] == [0, 1, 2, 2, 3, 3, 4]
    with pytest.raises(ValueError):
        width_for(0)
    assert binomial_width(10, 3) == math.ceil(math.log2(120))


@given(st.lists(st.tuples(st.integers(0, 2**20), st.integers(0, 24)), max_size=20))
def test_uint_roundtrip_and_tallies(items):
    t = Transcript()
    vals = []
    for v, w in items:
        v &= (1 << w) - 1
        t.write_uint("alice" if w % 2 else "bob", v, w)
        vals.append((v, w))
    assert len(t) == sum(w for _, w in vals) == sum(t.tallies.values())
    assert [t.read_uint(w) for _, w in vals] == [v for v, _ in vals]


def test_overflow_and_overread():
    t = Transcript()
    with pytest.raises(OverflowError):
        t.write_uint("alice", 4, 2)
    with pytest.raises(ValueError):
        t.write_uint("carol", 0, 1)
    t.write_uint("bob", 1, 1)
    t.read_uint(1)
    with pytest.raises(TranscriptError):
        t.read_uint(1)


@given(st.lists(st.integers(1, 10**6), max_size=20))
def test_gamma_roundtrip(vals):
    t = Transcript()
    for v in vals:
        t.write_gamma("bob", v)
    assert len(t) == sum(2 * v.bit_length() - 1 for v in vals)
    assert [t.read_gamma() for _ in vals] == vals


@pytest.mark.parametrize("U,k", [(6, 0), (6, 2), (7, 3), (9, 9)])
def test_colex_rank_is_a_bijection(U, k):
    # colex: compare by largest element first
    subsets = sorted(itertools.combinations(range(U), k), key=lambda s: tuple(reversed(s)))
    for r, s in enumerate(subsets):
        assert subset_rank(U, s) == r
        assert tuple(subset_unrank(U, k, r)) == s


@given(st.integers(1, 200), st.data())
def test_subset_codec_roundtrip(U, data):
    S = sorted(data.draw(st.sets(st.integers(0, U - 1), max_size=U)))
    t = Transcript()
    write_subset(t, "alice", U, S)
    assert len(t) == binomial_width(U, len(S))
    assert list(read_subset(t, U, len(S))) == S


@given(st.lists(st.integers(0, 9), min_size=1, max_size=6), st.data())
def test_range_union_roundtrip(sizes, data):
    picks = [sorted(data.draw(st.sets(st.integers(0, s - 1), max_size=s))) if s else [] for s in sizes]
    t = Transcript()
    write_range_union(t, "alice", sizes, picks)
    k = sum(map(len, picks))
    assert len(t) == range_union_width(sizes, k)
    assert [list(p) for p in read_range_union(t, sizes)] == picks
    assert [list(p) for p in split_picks(sizes, flatten_picks(sizes, picks))] == picks


def test_dict_roundtrip():
    t = Transcript()
    t.write_uint("alice", 5, 3)
    t.write_uint("encoder", 1, 9)
    back = Transcript.from_dict(t.to_dict())
    assert back.bits == t.bits and back.tallies == t.tallies
    bad = t.to_dict()
    bad["tallies"]["alice"] += 1
    with pytest.raises(TranscriptError):
        Transcript.from_dict(bad)
