"""Bit-exact transcripts and the subset codecs used for communication costs.

A :class:`Transcript` is an append-only bit sequence with a read cursor and a
tally of bits written per party.  Subsets are written with the colexicographic
combinatorial number system so a k-subset of [U] costs exactly
ceil(lg C(U, k)) bits.
"""

from __future__ import annotations

import base64
import math
from collections.abc import Iterable, Sequence

from .gf import IndexSet

PARTIES = ("alice", "bob", "encoder")


def width_for(count: int) -> int:
    """Bits needed to write any value in [0, count)."""
    if count < 1:
        raise ValueError("empty range")
    return (count - 1).bit_length()


def binomial_width(universe: int, k: int) -> int:
    return width_for(math.comb(universe, k))


class TranscriptError(Exception):
    pass


class Transcript:
    def __init__(self) -> None:
        self._bits = bytearray()
        self.cursor = 0
        self.tallies = {p: 0 for p in PARTIES}

    def __len__(self) -> int:
        return len(self._bits)

    @property
    def bits(self) -> bytes:
        return bytes(self._bits)

    def write_uint(self, party: str, value: int, width: int) -> None:
        if party not in self.tallies:
            raise ValueError(f"unknown party {party!r}")
        if width < 0 or value < 0 or value >> width:
            raise OverflowError(f"value {value} does not fit in {width} bits")
        for shift in range(width - 1, -1, -1):
            self._bits.append((value >> shift) & 1)
        self.tallies[party] += width

    def read_uint(self, width: int) -> int:
        if self.cursor + width > len(self._bits):
            raise TranscriptError("read past end of transcript")
        value = 0
        for b in self._bits[self.cursor : self.cursor + width]:
            value = (value << 1) | b
        self.cursor += width
        return value

    def write_bool(self, party: str, flag: bool) -> None:
        self.write_uint(party, int(bool(flag)), 1)

    def read_bool(self) -> bool:
        return bool(self.read_uint(1))

    def write_gamma(self, party: str, value: int) -> None:
        """Elias gamma code for value >= 1."""
        if value < 1:
            raise ValueError("gamma code needs a positive integer")
        n = value.bit_length()
        self.write_uint(party, 0, n - 1)
        self.write_uint(party, value, n)

    def read_gamma(self) -> int:
        zeros = 0
        while self.read_uint(1) == 0:
            zeros += 1
        rest = self.read_uint(zeros)
        return (1 << zeros) | rest

    def checkpoint(self) -> dict[str, int]:
        return dict(self.tallies)

    def since(self, mark: dict[str, int]) -> dict[str, int]:
        return {p: self.tallies[p] - mark.get(p, 0) for p in self.tallies}

    def extend(self, other: Transcript) -> None:
        """Append another transcript's bits and tallies."""
        self._bits.extend(other._bits)
        for p, n in other.tallies.items():
            self.tallies[p] += n

    def to_dict(self) -> dict:
        packed = bytearray((len(self._bits) + 7) // 8)
        for i, b in enumerate(self._bits):
            if b:
                packed[i >> 3] |= 0x80 >> (i & 7)
        return {
            "length": len(self._bits),
            "bits": base64.b64encode(bytes(packed)).decode("ascii"),
            "tallies": dict(self.tallies),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Transcript:
        t = cls()
        packed = base64.b64decode(data["bits"])
        n = data["length"]
        t._bits = bytearray((packed[i >> 3] >> (7 - (i & 7))) & 1 for i in range(n))
        for p, v in data.get("tallies", {}).items():
            t.tallies[p] = v
        if sum(t.tallies.values()) != n:
            raise TranscriptError("tallies do not sum to transcript length")
        return t


def subset_rank(universe: int, S: Iterable[int]) -> int:
    """Colex rank of a subset of [universe]."""
    S = S if isinstance(S, IndexSet) else IndexSet.of(S)
    if S and S[-1] >= universe:
        raise ValueError(f"element {S[-1]} outside [0, {universe})")
    return sum(math.comb(s, i + 1) for i, s in enumerate(S))


def subset_unrank(universe: int, k: int, rank: int) -> IndexSet:
    total = math.comb(universe, k)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} outside [0, C({universe},{k}))")
    out = []
    hi = universe
    for i in range(k, 0, -1):
        # largest c < hi with C(c, i) <= rank
        lo_c, hi_c = i - 1, hi - 1
        while lo_c < hi_c:
            mid = (lo_c + hi_c + 1) // 2
            if math.comb(mid, i) <= rank:
                lo_c = mid
            else:
                hi_c = mid - 1
        out.append(lo_c)
        rank -= math.comb(lo_c, i)
        hi = lo_c
    return IndexSet(tuple(reversed(out)))


def write_subset(t: Transcript, party: str, universe: int, S: Sequence[int]) -> None:
    """Write a subset whose size the reader already knows."""
    t.write_uint(party, subset_rank(universe, S), binomial_width(universe, len(S)))


def read_subset(t: Transcript, universe: int, k: int) -> IndexSet:
    return subset_unrank(universe, k, t.read_uint(binomial_width(universe, k)))


def flatten_picks(sizes: Sequence[int], picks: Sequence[Iterable[int]]) -> IndexSet:
    """Offset each range's picks by the sizes of the ranges before it."""
    if len(sizes) != len(picks):
        raise ValueError("one pick set per range required")
    flat = []
    offset = 0
    for size, pick in zip(sizes, picks):
        for x in pick:
            if not 0 <= x < size:
                raise ValueError(f"pick {x} outside its range of size {size}")
            flat.append(offset + x)
        offset += size
    return IndexSet.of(flat)


def split_picks(sizes: Sequence[int], flat: Iterable[int]) -> list[IndexSet]:
    bounds = []
    offset = 0
    for size in sizes:
        bounds.append(offset)
        offset += size
    out: list[list[int]] = [[] for _ in sizes]
    j = 0
    for x in sorted(flat):
        if x >= offset:
            raise ValueError(f"flat position {x} outside [0, {offset})")
        while j + 1 < len(sizes) and x >= bounds[j + 1]:
            j += 1
        out[j].append(x - bounds[j])
    return [IndexSet(tuple(o)) for o in out]


def range_union_width(sizes: Sequence[int], k: int) -> int:
    total = sum(sizes)
    return (total).bit_length() + binomial_width(total, k)


def write_range_union(t: Transcript, party: str, sizes: Sequence[int], picks: Sequence[Iterable[int]]) -> None:
    """Total pick count (ceil(lg(sum+1)) bits), then the flattened subset's rank."""
    flat = flatten_picks(sizes, picks)
    total = sum(sizes)
    t.write_uint(party, len(flat), total.bit_length())
    write_subset(t, party, total, flat)


def read_range_union(t: Transcript, sizes: Sequence[int]) -> list[IndexSet]:
    total = sum(sizes)
    k = t.read_uint(total.bit_length())
    return split_picks(sizes, read_subset(t, total, k))
