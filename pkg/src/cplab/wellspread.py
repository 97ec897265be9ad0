"""Update index sequences and the well-spread property.

Updates are numbered n^2 (first executed) down to 1 (last executed).  The
sequence is well-spread when, for every r in [ceil(n^(4/3)), n^2] and every
set S of n/2 rows, some S* within S of at most 8n^2/r rows has its most
recent r updates touching at least n/4 distinct columns.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class UpdateSequence:
    """Index pairs in execution order, with optional field values."""

    n: int
    pairs: tuple[tuple[int, int], ...]
    values: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if any(not (0 <= i < self.n and 0 <= j < self.n) for i, j in self.pairs):
            raise ValueError(f"index pair outside [0, {self.n})^2")
        if self.values is not None and len(self.values) != len(self.pairs):
            raise ValueError("need one value per update")

    def __len__(self) -> int:
        return len(self.pairs)

    def distinct(self) -> bool:
        return len(set(self.pairs)) == len(self.pairs)

    def position(self, number: int) -> int:
        """Execution position (0-based) of the update numbered ``number``."""
        if not 1 <= number <= len(self.pairs):
            raise ValueError(f"update number {number} outside [1, {len(self.pairs)}]")
        return len(self.pairs) - number

    def pair(self, number: int) -> tuple[int, int]:
        return self.pairs[self.position(number)]

    def recent(self, r: int) -> tuple[tuple[int, int], ...]:
        """Pairs of updates numbered r..1, i.e. the last r executed."""
        r = min(r, len(self.pairs))
        return self.pairs[len(self.pairs) - r :]

    def row_sets(self, r: int) -> list[frozenset[int]]:
        """For each row, the columns updated among the last r updates."""
        rows: list[set[int]] = [set() for _ in range(self.n)]
        for i, j in self.recent(r):
            rows[i].add(j)
        return [frozenset(s) for s in rows]

    def with_values(self, values: Sequence[int]) -> UpdateSequence:
        return UpdateSequence(self.n, self.pairs, tuple(values))

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "pairs": [list(p) for p in self.pairs]})

    @classmethod
    def from_json(cls, text: str) -> UpdateSequence:
        data = json.loads(text)
        return cls(data["n"], tuple((i, j) for i, j in data["pairs"]))


def r_range(n: int) -> range:
    """r from ceil(n^(4/3)) to n^2."""
    lo = math.ceil(round(n ** (4 / 3), 9))
    return range(lo, n * n + 1)


def coverage_target(n: int) -> int:
    return math.ceil(n / 4)


def max_cover_size(n: int, r: int) -> int:
    return (8 * n * n) // r


def _covers(rows: Sequence[frozenset[int]], chosen: Iterable[int]) -> int:
    cols: set[int] = set()
    for i in chosen:
        cols |= rows[i]
    return len(cols)


def find_cover(rows: Sequence[frozenset[int]], S: Sequence[int], limit: int, target: int) -> tuple[int, ...] | None:
    """A subset of S of at most ``limit`` rows covering ``target`` columns.

    Greedy by largest column gain first; if that fails, every subset of the
    largest allowed size is tried (coverage only grows with the subset, so
    smaller sizes cannot succeed where the largest fails).
    """
    limit = min(limit, len(S))
    chosen: list[int] = []
    cols: set[int] = set()
    pool = list(S)
    while len(cols) < target and len(chosen) < limit and pool:
        best = max(pool, key=lambda i: (len(rows[i] - cols), -i))
        if not rows[best] - cols:
            break
        chosen.append(best)
        cols |= rows[best]
        pool.remove(best)
    if len(cols) >= target:
        return tuple(sorted(chosen))
    for combo in itertools.combinations(S, limit):
        if _covers(rows, combo) >= target:
            return combo
    return None


@dataclass
class WellSpreadWitness:
    covers: dict[tuple[int, tuple[int, ...]], tuple[int, ...]] = field(default_factory=dict)
    failure: tuple[int, tuple[int, ...]] | None = None
    reason: str = ""


def verify_wellspread(seq: UpdateSequence) -> tuple[bool, WellSpreadWitness]:
    """Exhaustive check over every r in range and every n/2-row set."""
    n = seq.n
    if n % 2:
        raise ValueError(f"n={n} is odd, so n/2-row sets are undefined")
    wit = WellSpreadWitness()
    if not seq.distinct():
        wit.reason = "index pairs repeat"
        return False, wit
    if len(seq) != n * n:
        wit.reason = f"need {n * n} updates, got {len(seq)}"
        return False, wit
    target = coverage_target(n)
    for r in r_range(n):
        rows = seq.row_sets(r)
        limit = max_cover_size(n, r)
        for S in itertools.combinations(range(n), n // 2):
            found = find_cover(rows, S, limit, target)
            if found is None:
                wit.failure = (r, S)
                wit.reason = f"no subset of at most {limit} rows of {S} covers {target} columns in the last {r} updates"
                return False, wit
            wit.covers[(r, S)] = found
    return True, wit


def random_sequence(n: int, rng: random.Random) -> UpdateSequence:
    pairs = [(i, j) for i in range(n) for j in range(n)]
    rng.shuffle(pairs)
    return UpdateSequence(n, tuple(pairs))


def gen_wellspread(n: int, seed: int = 0, max_tries: int = 1000) -> tuple[UpdateSequence, int]:
    """Random permutations until one verifies; returns it and the number of tries."""
    if n % 2:
        raise ValueError(f"n={n} is odd, so n/2-row sets are undefined")
    rng = random.Random(f"wellspread/{n}/{seed}")
    for tries in range(1, max_tries + 1):
        seq = random_sequence(n, rng)
        if verify_wellspread(seq)[0]:
            return seq, tries
    raise RuntimeError(f"no well-spread sequence for n={n} after {max_tries} tries")


def concentrated_sequence(n: int) -> UpdateSequence:
    """Most recent n^2/2 updates all land in rows [0, n/2): the other half sees none."""
    half = n // 2
    late = [(i, j) for i in range(half) for j in range(n)]
    early = [(i, j) for i in range(half, n) for j in range(n)]
    return UpdateSequence(n, tuple(early + late))


def save_sequence(seq: UpdateSequence, path: str | Path) -> None:
    Path(path).write_text(seq.to_json() + "\n")


def load_sequence(path: str | Path) -> UpdateSequence:
    return UpdateSequence.from_json(Path(path).read_text())
