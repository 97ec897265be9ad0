"""Two-party subset communication via two levels of multiply-shift hashing.

Bob holds B, a set of S words of w bits; Alice holds A, a subset of B with k
elements.  After the exchange Bob knows A.  Alice's messages cost about
k lg(S/k) bits and Bob's about k w bits.

Message order on the shared transcript:

1. Bob: level-1 multiplier a* (w bits).
2. Alice: |h(A)| and the set h(A) as a subset of [2^M].
3. Bob: for each bucket i in h(A), its level-2 output width M_i (gamma code)
   and, when the bucket has more than one element, its multiplier a_i*
   (w - 1 bits, the low bit is always 1).
4. Alice: the level-2 hash values of every A_i in a non-singleton bucket, as
   one subset of the concatenated ranges [2^M_i].
"""

from __future__ import annotations

import math
import random
from collections import Counter, defaultdict
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field

from .bitstream import (
    Transcript,
    read_range_union,
    read_subset,
    write_range_union,
    write_subset,
)


@dataclass(frozen=True)
class HashParams:
    a: int
    w: int
    M: int

    def __post_init__(self) -> None:
        if not 0 <= self.M <= self.w:
            raise ValueError(f"output bits M={self.M} must lie in [0, w={self.w}]")
        if self.a % 2 == 0 or not 0 < self.a < 1 << self.w:
            raise ValueError(f"multiplier {self.a} must be odd and in [1, 2^w)")


def mult_hash(params: HashParams, x: int) -> int:
    """floor((a x mod 2^w) / 2^(w-M))"""
    w = params.w
    return ((params.a * x) & ((1 << w) - 1)) >> (w - params.M)


def _hash_all(a: int, w: int, M: int, xs: Iterable[int]) -> list[int]:
    mask = (1 << w) - 1
    shift = w - M
    return [((a * x) & mask) >> shift for x in xs]


def colliding_pairs(B: Iterable[int], params: HashParams) -> int:
    """Number of ordered pairs (b1, b2), b1 != b2, with equal hash values."""
    counts = Counter(_hash_all(params.a, params.w, params.M, B))
    return sum(c * (c - 1) for c in counts.values())


def odd_candidates(w: int, seed: int = 0) -> Iterator[int]:
    """Every odd multiplier in [1, 2^w) exactly once, in a seeded order."""
    half = 1 << (w - 1)
    rng = random.Random(f"odd-candidates/{w}/{seed}")
    start = rng.randrange(half)
    step = rng.randrange(half) | 1
    for j in range(half):
        yield (((start + j * step) % half) << 1) | 1


def level1_width(S: int) -> int:
    """M = ceil(lg S)."""
    return (S - 1).bit_length()


def find_level1_seed(B: Iterable[int], w: int, seed: int = 0) -> int:
    """Odd a* whose multiply-shift hash into [2^ceil(lg S)] has at most 2S colliding ordered pairs."""
    B = list(B)
    S = len(B)
    if S < 1:
        raise ValueError("B must be non-empty")
    M = level1_width(S)
    if M > w:
        raise ValueError("set larger than the universe")
    for a in odd_candidates(w, seed):
        if colliding_pairs(B, HashParams(a, w, M)) <= 2 * S:
            return a
    raise AssertionError("no level-1 multiplier found; the averaging bound guarantees one")


def loose_level2_width(size: int) -> int:
    """ceil(lg(8 size^2)), the width with at most 1/8 expected collisions."""
    return (8 * size * size - 1).bit_length()


def level2_width(size: int, w: int) -> int:
    """Smallest width whose expected collision count is below one.

    Singletons need no hashing (width 0).  For b >= 2 elements, 2^M > b(b-1)
    makes the expected number of colliding unordered pairs under a random odd
    multiplier less than 1, so an injective multiplier exists.  Capped at w,
    where the identity multiplier is injective on all of [2^w].
    """
    if size <= 1:
        return 0
    return min(w, (size * (size - 1)).bit_length())


def find_level2_seed(bucket: Iterable[int], w: int, M: int, seed: int = 0) -> int:
    """Odd multiplier whose width-M hash is injective on ``bucket``."""
    bucket = list(bucket)
    if len(bucket) <= 1:
        return 1
    if M == w:
        return 1
    for a in odd_candidates(w, seed + 1):
        if len(set(_hash_all(a, w, M, bucket))) == len(bucket):
            return a
    raise AssertionError("no injective level-2 multiplier; expected collisions < 1 guarantees one")


@dataclass
class BucketTable:
    """Bob's view after level 1: members, widths and seeds per occupied bucket."""

    a_star: int
    w: int
    M: int
    members: dict[int, list[int]] = field(default_factory=dict)
    widths: dict[int, int] = field(default_factory=dict)
    seeds: dict[int, int] = field(default_factory=dict)

    @classmethod
    def build(cls, B: Iterable[int], w: int, a_star: int, M: int) -> BucketTable:
        table = cls(a_star, w, M)
        members: dict[int, list[int]] = defaultdict(list)
        B = sorted(B)
        for b, h in zip(B, _hash_all(a_star, w, M, B)):
            members[h].append(b)
        table.members = dict(members)
        return table

    def square_sum(self, buckets: Iterable[int]) -> int:
        return sum(len(self.members.get(i, ())) ** 2 for i in buckets)

    def prepare(self, i: int, seed: int = 0) -> tuple[int, int]:
        if i not in self.widths:
            bucket = self.members.get(i, [])
            M_i = level2_width(len(bucket), self.w)
            self.widths[i] = M_i
            self.seeds[i] = find_level2_seed(bucket, self.w, M_i, seed) if M_i else 1
        return self.widths[i], self.seeds[i]


def check_instance(A: Iterable[int], B: Iterable[int], w: int) -> tuple[set[int], set[int]]:
    A, B = set(A), set(B)
    if not A <= B:
        raise ValueError("A must be a subset of B")
    if not B:
        raise ValueError("B must be non-empty")
    if min(B) < 0 or max(B) >= 1 << w:
        raise ValueError(f"elements must lie in [0, 2^{w})")
    return A, B


def run_protocol(
    A: Iterable[int],
    B: Iterable[int],
    w: int,
    seed: int = 0,
    transcript: Transcript | None = None,
) -> tuple[frozenset[int], Transcript]:
    """Run both parties; returns the set Bob decodes and the transcript.

    Each party reads the other's messages back off the transcript, so Bob's
    answer depends only on B and the bits Alice actually sent.  Pass an
    existing transcript to append to it.
    """
    A, B = check_instance(A, B, w)
    t = transcript if transcript is not None else Transcript()
    t.cursor = len(t)
    S = len(B)
    M = level1_width(S)

    # Bob: a*
    a_star = find_level1_seed(B, w, seed)
    table = BucketTable.build(B, w, a_star, M)
    t.write_uint("bob", a_star, w)

    # Alice: h(A) as a subset of [2^M], preceded by its size
    a_seen = t.read_uint(w)
    hA_of = dict(zip(sorted(A), _hash_all(a_seen, w, M, sorted(A))))
    hA = sorted(set(hA_of.values()))
    t.write_uint("alice", len(hA), (1 << M).bit_length())
    write_subset(t, "alice", 1 << M, hA)

    # Bob: widths and level-2 seeds for each named bucket
    k1 = t.read_uint((1 << M).bit_length())
    buckets = list(read_subset(t, 1 << M, k1))
    for i in buckets:
        M_i, a_i = table.prepare(i, seed)
        t.write_gamma("bob", M_i + 1)
        if M_i:
            t.write_uint("bob", a_i >> 1, w - 1)

    # Alice: level-2 values for every bucket that needs them
    params: dict[int, HashParams] = {}
    for i in hA:
        M_i = t.read_gamma() - 1
        if M_i:
            params[i] = HashParams((t.read_uint(w - 1) << 1) | 1, w, M_i)
    hashed = sorted(params)
    picks: list[list[int]] = [[] for _ in hashed]
    pos = {i: j for j, i in enumerate(hashed)}
    for x, i in hA_of.items():
        if i in params:
            picks[pos[i]].append(mult_hash(params[i], x))
    sizes = [1 << params[i].M for i in hashed]
    write_range_union(t, "alice", sizes, [sorted(set(p)) for p in picks])

    # Bob: invert the level-2 hashes inside each bucket
    bob_sizes = [1 << table.widths[i] for i in buckets if table.widths[i]]
    values = read_range_union(t, bob_sizes)
    decoded: set[int] = set()
    j = 0
    for i in buckets:
        members = table.members[i]
        if not table.widths[i]:
            decoded.update(members)
            continue
        hp = HashParams(table.seeds[i], w, table.widths[i])
        inverse = {mult_hash(hp, b): b for b in members}
        decoded.update(inverse[v] for v in values[j])
        j += 1
    return frozenset(decoded), t


def alice_budget(k: int, S: int) -> float:
    """3 k lg(2S/k) + 64: the per-trial ceiling on Alice's bits."""
    if k == 0:
        return 64.0
    return 3 * k * math.log2(2 * S / k) + 64


def bob_budget(k: int, w: int) -> int:
    return (k + 2) * w + 64


def alice_bound(k: int, S: int) -> int:
    """2 ceil(lg C(2^(M+1), k)) + ceil(lg(2S+1)) + 64 with M = ceil(lg S)."""
    M = level1_width(S)
    return 2 * (math.comb(1 << (M + 1), k) - 1).bit_length() + (2 * S).bit_length() + 64
