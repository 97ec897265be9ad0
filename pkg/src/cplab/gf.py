"""Dense linear algebra over prime fields GF(p).

Vectors and matrices hold plain Python ints in ``[0, p)``.  Everything here
is exact; elimination uses a deterministic pivot rule so that two parties
running the same procedure on the same inputs get the same basis.

The lexicographic order on GF(p)^n used by :func:`lex_vectors` and
:func:`greedy_complete` treats coordinate 0 as most significant with residues
ascending.  Encoders and decoders elsewhere in the package rely on it.
"""

from __future__ import annotations

import itertools
import math
import random
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass

ENUMERATION_LIMIT = 1 << 24


class DimensionError(ValueError):
    pass


class EnumerationGuardError(ValueError):
    pass


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    d = 3
    while d * d <= p:
        if p % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class FieldSpec:
    """The prime field GF(p)."""

    p: int

    def __post_init__(self) -> None:
        if not isinstance(self.p, int) or not 2 <= self.p < 2**31:
            raise ValueError(f"field modulus must be an int in [2, 2^31), got {self.p!r}")
        if not _is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")

    @property
    def bits(self) -> int:
        """Bits needed to write one element: ceil(lg p)."""
        return (self.p - 1).bit_length()

    @property
    def lg(self) -> float:
        return math.log2(self.p)

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.p

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.p

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.p

    def neg(self, a: int) -> int:
        return (-a) % self.p

    def inv(self, a: int) -> int:
        if a % self.p == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(a, self.p - 2, self.p)

    def vector(self, entries: Iterable[int]) -> FieldVector:
        return FieldVector(tuple(entries), self)

    def zero(self, n: int) -> FieldVector:
        return FieldVector((0,) * n, self)

    def unit(self, n: int, i: int) -> FieldVector:
        return FieldVector(tuple(1 if j == i else 0 for j in range(n)), self)

    def random_vector(self, n: int, rng: random.Random) -> FieldVector:
        return FieldVector(tuple(rng.randrange(self.p) for _ in range(n)), self)

    def space_size(self, n: int) -> int:
        return self.p**n


def field_arith(field: FieldSpec, a: int, b: int, op: str) -> int:
    """Apply ``op`` in {add, mul, inv, neg}.  Unary ops act on ``b``."""
    for x in (a, b):
        if not 0 <= x < field.p:
            raise ValueError(f"residue {x} outside [0, {field.p})")
    if op == "add":
        return field.add(a, b)
    if op == "mul":
        return field.mul(a, b)
    if op == "inv":
        return field.inv(b)
    if op == "neg":
        return field.neg(b)
    raise ValueError(f"unknown op {op!r}")


@dataclass(frozen=True)
class FieldVector(Sequence):
    entries: tuple[int, ...]
    field: FieldSpec

    def __post_init__(self) -> None:
        p = self.field.p
        if not isinstance(self.entries, tuple):
            object.__setattr__(self, "entries", tuple(self.entries))
        for x in self.entries:
            if not 0 <= x < p:
                raise ValueError(f"entry {x} outside [0, {p})")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self) -> Iterator[int]:
        return iter(self.entries)

    def __repr__(self) -> str:
        return f"FieldVector({list(self.entries)}, p={self.field.p})"

    def _check(self, other: FieldVector) -> None:
        if len(other) != len(self) or other.field != self.field:
            raise DimensionError("vectors differ in length or field")

    def __add__(self, other: FieldVector) -> FieldVector:
        self._check(other)
        p = self.field.p
        return FieldVector(tuple((a + b) % p for a, b in zip(self, other)), self.field)

    def __sub__(self, other: FieldVector) -> FieldVector:
        self._check(other)
        p = self.field.p
        return FieldVector(tuple((a - b) % p for a, b in zip(self, other)), self.field)

    def scale(self, c: int) -> FieldVector:
        p = self.field.p
        return FieldVector(tuple((c * a) % p for a in self), self.field)

    def dot(self, other: Sequence[int]) -> int:
        if len(other) != len(self):
            raise DimensionError("dot product of vectors with different lengths")
        return sum(a * b for a, b in zip(self.entries, other)) % self.field.p

    def is_zero(self) -> bool:
        return not any(self.entries)

    def restrict(self, S: IndexSet | Iterable[int]) -> FieldVector:
        return restrict(self, S)


@dataclass(frozen=True)
class FieldMatrix:
    rows: tuple[FieldVector, ...]
    field: FieldSpec

    def __post_init__(self) -> None:
        rows = tuple(r if isinstance(r, FieldVector) else FieldVector(tuple(r), self.field) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if rows and any(len(r) != len(rows[0]) for r in rows):
            raise DimensionError("matrix rows have different lengths")
        if any(r.field != self.field for r in rows):
            raise DimensionError("matrix rows over a different field")

    @classmethod
    def from_lists(cls, rows: Iterable[Iterable[int]], field: FieldSpec) -> FieldMatrix:
        return cls(tuple(FieldVector(tuple(r), field) for r in rows), field)

    @classmethod
    def zeros(cls, n: int, field: FieldSpec, m: int | None = None) -> FieldMatrix:
        return cls(tuple(field.zero(n if m is None else m) for _ in range(n)), field)

    @classmethod
    def random(cls, n: int, field: FieldSpec, rng: random.Random) -> FieldMatrix:
        return cls(tuple(field.random_vector(n, rng) for _ in range(n)), field)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), (len(self.rows[0]) if self.rows else 0)

    def __getitem__(self, i: int) -> FieldVector:
        return self.rows[i]

    def matvec(self, v: Sequence[int]) -> FieldVector:
        return FieldVector(tuple(r.dot(v) for r in self.rows), self.field)

    def to_lists(self) -> list[list[int]]:
        return [list(r) for r in self.rows]


@dataclass(frozen=True)
class IndexSet(Sequence):
    """Strictly increasing tuple of non-negative indices."""

    indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        idx = tuple(self.indices)
        object.__setattr__(self, "indices", idx)
        for a, b in zip(idx, idx[1:]):
            if a >= b:
                raise ValueError(f"index set not strictly increasing: {idx}")
        if idx and idx[0] < 0:
            raise ValueError("negative index")

    @classmethod
    def of(cls, items: Iterable[int]) -> IndexSet:
        items = list(items)
        if len(set(items)) != len(items):
            raise ValueError("duplicate indices")
        return cls(tuple(sorted(items)))

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, i):
        return self.indices[i]

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, x) -> bool:
        return x in set(self.indices)


def restrict(v: Sequence[int], S: IndexSet | Iterable[int]) -> FieldVector:
    """Keep only the coordinates of ``v`` listed in ``S`` (in sorted order)."""
    if not isinstance(S, IndexSet):
        S = IndexSet.of(S)
    if S and S[-1] >= len(v):
        raise IndexError(f"index {S[-1]} out of range for vector of length {len(v)}")
    return FieldVector(tuple(v[i] for i in S), v.field)


class Echelon:
    """Incrementally maintained reduced row echelon basis.

    Each stored row is normalised to a leading 1 and is zero in every other
    row's pivot column, so reduction can subtract rows in any order.  Every
    stored row also carries its expression in terms of the vectors that were
    accepted by :meth:`insert`, which gives coordinates for free.
    """

    def __init__(self, field: FieldSpec, n: int) -> None:
        self.field = field
        self.n = n
        self._rows: dict[int, tuple[list[int], list[int]]] = {}
        self.accepted: list[FieldVector] = []

    @property
    def rank(self) -> int:
        return len(self._rows)

    def _reduce(self, v: Sequence[int]) -> tuple[list[int], list[int]]:
        if len(v) != self.n:
            raise DimensionError(f"expected length {self.n}, got {len(v)}")
        p = self.field.p
        r = list(v)
        combo = [0] * len(self.accepted)
        for c, (row, rc) in self._rows.items():
            f = r[c]
            if f:
                for j in range(self.n):
                    if row[j]:
                        r[j] = (r[j] - f * row[j]) % p
                for j, x in enumerate(rc):
                    if x:
                        combo[j] = (combo[j] + f * x) % p
        return r, combo

    def contains(self, v: Sequence[int]) -> bool:
        r, _ = self._reduce(v)
        return not any(r)

    def coordinates(self, v: Sequence[int]) -> list[int] | None:
        """Coefficients c with v = sum c_j * accepted[j], or None if v is outside the span."""
        r, combo = self._reduce(v)
        if any(r):
            return None
        return combo

    def insert(self, v: FieldVector) -> bool:
        p = self.field.p
        r, combo = self._reduce(v)
        pivot = next((j for j, x in enumerate(r) if x), None)
        if pivot is None:
            return False
        idx = len(self.accepted)
        self.accepted.append(v)
        for row_c in self._rows.values():
            row_c[1].append(0)
        # r = v - sum combo_j * accepted_j
        rc = [(-x) % p for x in combo] + [1]
        s = self.field.inv(r[pivot])
        r = [(x * s) % p for x in r]
        rc = [(x * s) % p for x in rc]
        for c, (row, rowc) in self._rows.items():
            f = row[pivot]
            if f:
                for j in range(self.n):
                    if r[j]:
                        row[j] = (row[j] - f * r[j]) % p
                for j in range(idx + 1):
                    if rc[j]:
                        rowc[j] = (rowc[j] - f * rc[j]) % p
        self._rows[pivot] = (r, rc)
        self._rows = dict(sorted(self._rows.items()))
        return True


def _common(vs: Sequence[FieldVector]) -> tuple[FieldSpec | None, int | None]:
    if not vs:
        return None, None
    field, n = vs[0].field, len(vs[0])
    for v in vs:
        if len(v) != n or v.field != field:
            raise DimensionError("vectors differ in length or field")
    return field, n


def rank_and_basis(vs: Sequence[FieldVector]) -> tuple[int, list[FieldVector]]:
    """Rank of ``vs`` and the greedy left-to-right independent subset spanning it."""
    field, n = _common(vs)
    if field is None:
        return 0, []
    ech = Echelon(field, n)
    for v in vs:
        ech.insert(v)
    return ech.rank, list(ech.accepted)


def rank(vs: Sequence[FieldVector]) -> int:
    return rank_and_basis(vs)[0]


def in_span(v: FieldVector, basis: Sequence[FieldVector]) -> bool:
    if not basis:
        return v.is_zero()
    field, n = _common(list(basis) + [v])
    ech = Echelon(field, n)
    for b in basis:
        ech.insert(b)
    return ech.contains(v)


def lex_vectors(field: FieldSpec, n: int) -> Iterator[FieldVector]:
    """All of GF(p)^n, coordinate 0 most significant, residues ascending."""
    check_enumerable(field, n)
    for t in itertools.product(range(field.p), repeat=n):
        yield FieldVector(t, field)


def check_enumerable(field: FieldSpec, n: int, limit: int = ENUMERATION_LIMIT) -> None:
    if field.p**n > limit:
        raise EnumerationGuardError(f"|F|^n = {field.p}^{n} exceeds enumeration limit {limit}")


def greedy_complete(U: Sequence[FieldVector], n: int, field: FieldSpec) -> list[FieldVector]:
    """Extend span(U) to all of GF(p)^n by a lexicographic scan.

    Returns the vectors X added by the scan; dim span(U + X) == n afterwards.
    The scan stops as soon as the span is full, which does not change X.
    """
    check_enumerable(field, n)
    ech = Echelon(field, n)
    for u in U:
        if len(u) != n:
            raise DimensionError("vector length differs from n")
        ech.insert(u)
    X: list[FieldVector] = []
    if ech.rank == n:
        return X
    for x in lex_vectors(field, n):
        if ech.insert(x):
            X.append(x)
            if ech.rank == n:
                break
    return X


def rank_sum(index_sets: Sequence[IndexSet | Iterable[int]], vs: Sequence[FieldVector]) -> int:
    """Sum over the index sets S_i of dim span(v_1|S_i, ..., v_k|S_i)."""
    _common(vs)
    total = 0
    for S in index_sets:
        S = S if isinstance(S, IndexSet) else IndexSet.of(S)
        if not S or not vs:
            continue
        total += rank([restrict(v, S) for v in vs])
    return total


def solve(rows: Sequence[FieldVector], rhs: Sequence[Sequence[int]]) -> list[FieldVector]:
    """Solve <rows[j], x> = b[j] for every right-hand side b in ``rhs``.

    ``rows`` must have full column rank; extra consistent equations are fine.
    Raises ValueError on a singular or inconsistent system.
    """
    field, n = _common(rows)
    if field is None:
        raise DimensionError("empty system")
    p = field.p
    m = len(rows)
    aug = [list(rows[j]) + [b[j] % p for b in rhs] for j in range(m)]
    width = n + len(rhs)
    r = 0
    pivots = []
    for c in range(n):
        piv = next((i for i in range(r, m) if aug[i][c]), None)
        if piv is None:
            raise ValueError("system is singular")
        aug[r], aug[piv] = aug[piv], aug[r]
        s = field.inv(aug[r][c])
        aug[r] = [(x * s) % p for x in aug[r]]
        for i in range(m):
            if i != r and aug[i][c]:
                f = aug[i][c]
                aug[i] = [(a - f * b) % p for a, b in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
    for i in range(r, m):
        if any(aug[i][n:width]):
            raise ValueError("system is inconsistent")
    return [FieldVector(tuple(aug[i][n + k] for i in range(n)), field) for k in range(len(rhs))]
