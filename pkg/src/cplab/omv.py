"""Matrix recovery from a static matrix-vector structure.

The encoder takes a deterministic structure answering v -> Mv and writes a
bit string from which :func:`decode_matrix` rebuilds M using the same
structure program.  The string holds a shift a* that selects the window
W0_a* of query vectors, the addresses and contents of a cell set C*, a set U
of independent correct queries answerable from C* alone (as indices into the
window), and the inner products of every row with a lexicographic
completion X of U.  When no such U exists the encoder writes the raw matrix
behind a 0 flag bit.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .bitstream import Transcript, width_for
from .cellprobe import (
    CellMemory,
    ConsistencyError,
    DSProgram,
    MachineConfig,
    Probe,
    run_phase,
)
from .gf import (
    Echelon,
    FieldMatrix,
    FieldSpec,
    FieldVector,
    check_enumerable,
    greedy_complete,
    lex_vectors,
    rank,
    solve,
)

SUBSET_CAP = 1 << 20


@dataclass(frozen=True)
class OmvConfig:
    n: int
    field: FieldSpec
    w: int
    delta: int
    shift_den: int = 8
    c_delta: int = 1024
    c_cells: int = 512

    def __post_init__(self) -> None:
        if self.n < 1 or self.n % self.shift_den:
            raise ValueError(f"n={self.n} must be a positive multiple of {self.shift_den}")
        check_enumerable(self.field, self.n)
        if self.delta < 1:
            raise ValueError("delta must be at least 1")
        if self.w < self.field.bits or 1 << self.w < self.n:
            raise ValueError("w must be at least lg n and lg |F|")

    @property
    def shift_exp(self) -> int:
        return self.n // self.shift_den

    @property
    def window_exp(self) -> int:
        return self.n - self.shift_exp

    @property
    def shift_modulus(self) -> int:
        return self.field.p**self.shift_exp

    @property
    def window_size(self) -> int:
        return self.field.p**self.window_exp

    @classmethod
    def asymptotic_delta(cls, n: int, field: FieldSpec, w: int, c_delta: int = 1024) -> float:
        """n^2 lg|F| / (c_delta w); below 1 at desk scale."""
        return n * n * field.lg / (c_delta * w)


def vector_index(v: Sequence[int], p: int) -> int:
    """f(v) = sum_i v(i) p^i: coordinate 0 is the least significant digit."""
    f = 0
    for x in reversed(v):
        f = f * p + x
    return f


def vector_from_index(f: int, n: int, field: FieldSpec) -> FieldVector:
    digits = []
    for _ in range(n):
        f, d = divmod(f, field.p)
        digits.append(d)
    if f:
        raise ValueError("index too large for the dimension")
    return FieldVector(tuple(digits), field)


def in_window(v: Sequence[int], a: int, cfg: OmvConfig) -> bool:
    return (vector_index(v, cfg.field.p) + a) % cfg.shift_modulus == 0


def shift_window(a: int, cfg: OmvConfig) -> list[FieldVector]:
    """W0_a in increasing f order."""
    q = cfg.shift_modulus
    if not 0 <= a < q:
        raise ValueError(f"shift {a} outside [0, {q})")
    r = (-a) % q
    return [vector_from_index(idx * q + r, cfg.n, cfg.field) for idx in range(cfg.window_size)]


def window_position(v: Sequence[int], cfg: OmvConfig) -> int:
    return vector_index(v, cfg.field.p) // cfg.shift_modulus


def window_vector(idx: int, a: int, cfg: OmvConfig) -> FieldVector:
    q = cfg.shift_modulus
    return vector_from_index(idx * q + (-a) % q, cfg.n, cfg.field)


# reference structures


class VerbatimOMV(DSProgram):
    """Stores entries packed w // ceil(lg p) per cell in row-major order; a query reads every cell."""

    name = "verbatim"
    t_u = None

    def __init__(self, n: int, field: FieldSpec, w: int) -> None:
        if w < field.bits:
            raise ValueError("a cell must hold at least one field element")
        self.n, self.field, self.w = n, field, w
        self.per_cell = w // field.bits
        self.cells = -(-(n * n) // self.per_cell)
        self.t_q = self.cells

    def machine(self) -> MachineConfig:
        if self.cells > 1 << self.w:
            raise ValueError("matrix does not fit in the address space")
        return MachineConfig(self.w)

    def preprocess(self, probe: Probe, M: FieldMatrix) -> None:
        flat = [x for row in M.rows for x in row]
        b = self.field.bits
        for c in range(self.cells):
            word = 0
            for s, x in enumerate(flat[c * self.per_cell : (c + 1) * self.per_cell]):
                word |= x << (s * b)
            probe.write(c, word)

    def read_matrix(self, probe: Probe) -> list[list[int]]:
        b, mask = self.field.bits, (1 << self.field.bits) - 1
        flat = []
        for c in range(self.cells):
            word = probe.read(c)
            flat.extend((word >> (s * b)) & mask for s in range(self.per_cell))
        n = self.n
        return [flat[i * n : (i + 1) * n] for i in range(n)]

    def query(self, probe: Probe, v: FieldVector) -> FieldVector:
        rows = self.read_matrix(probe)
        return FieldVector(tuple(sum(a * x for a, x in zip(r, v)) % self.field.p for r in rows), self.field)


class ZeroAnswer(DSProgram):
    """Stores nothing and answers the zero vector with no probes."""

    name = "zero"
    t_q = 0

    def __init__(self, n: int, field: FieldSpec, w: int) -> None:
        self.n, self.field, self.w = n, field, w

    def machine(self) -> MachineConfig:
        return MachineConfig(self.w)

    def preprocess(self, probe: Probe, M: FieldMatrix) -> None:
        return None

    def query(self, probe: Probe, v: FieldVector) -> FieldVector:
        return self.field.zero(self.n)


class ErrorInjecting(DSProgram):
    """Wraps a structure and corrupts the answers for some queries.

    With ``wrong`` given, exactly those queries are corrupted.  Otherwise a
    query is answered correctly with probability ``keep`` by a hash of the
    probed cell contents and the query, so the choice depends only on memory.
    """

    name = "error-injecting"

    def __init__(self, base: DSProgram, keep: float | None = None, wrong: Iterable[Sequence[int]] = (), salt: str = "") -> None:
        self.base = base
        self.n, self.field, self.w = base.n, base.field, base.w
        self.t_q = base.t_q
        self.keep = keep
        self.wrong = {tuple(v) for v in wrong}
        self.salt = salt

    def machine(self) -> MachineConfig:
        return self.base.machine()

    def preprocess(self, probe: Probe, M: FieldMatrix) -> None:
        return self.base.preprocess(probe, M)

    def query(self, probe: Probe, v: FieldVector) -> FieldVector:
        ans = self.base.query(probe, v)
        if self.keep is None:
            bad = tuple(v) in self.wrong
        else:
            seen = ",".join(str(r.after) for r in probe.log)
            digest = hashlib.blake2b(f"{self.salt}|{seen}|{tuple(v)}".encode(), digest_size=8).digest()
            bad = int.from_bytes(digest, "big") >= self.keep * 2**64
        if bad:
            ans = FieldVector(((ans[0] + 1) % self.field.p,) + tuple(ans[1:]), self.field)
        return ans


# encoder pieces


@dataclass
class QueryStats:
    memory: CellMemory
    written: frozenset[int]
    correct: list[FieldVector]
    probes: dict[tuple[int, ...], frozenset[int]]


def correct_query_set(ds: DSProgram, M: FieldMatrix, cfg: OmvConfig) -> QueryStats:
    """Build ds on M and run every query; keeps the correct ones (lex order) and all probe sets."""
    check_enumerable(cfg.field, cfg.n)
    memory = CellMemory(ds.machine())
    _, log = run_phase(ds, "preprocess", M, memory)
    correct, probes = [], {}
    for v in lex_vectors(cfg.field, cfg.n):
        ans, qlog = run_phase(ds, "query", v, memory)
        probes[tuple(v)] = frozenset(qlog.addresses())
        if ans == M.matvec(v):
            correct.append(v)
    return QueryStats(memory, frozenset(log.written()), correct, probes)


def find_shift(V: Iterable[Sequence[int]], cfg: OmvConfig) -> tuple[int, int]:
    """a* maximizing |W0_a cap V|, smallest on ties; returns (a*, intersection size)."""
    q, p = cfg.shift_modulus, cfg.field.p
    counts = Counter((-vector_index(v, p)) % q for v in V)
    best = max(range(q), key=lambda a: (counts.get(a, 0), -a))
    return best, counts.get(best, 0)


@dataclass
class CellChoice:
    cells: tuple[int, ...]
    covered: int
    exhaustive: bool


def find_best_cellset(
    probes: dict[tuple[int, ...], frozenset[int]],
    queries: Sequence[Sequence[int]],
    written: Iterable[int],
    delta: int,
    cap: int = SUBSET_CAP,
) -> CellChoice:
    """Delta cells of ``written`` that fully contain the most query probe sets.

    Exhaustive (ties to the lexicographically smallest set) when the number of
    candidate sets is at most ``cap``; otherwise greedy by largest gain in
    covered queries, then by most appearances among uncovered probe sets.
    """
    written = sorted(set(written))
    sets = [probes[tuple(v)] for v in queries]
    if delta >= len(written):
        C = frozenset(written)
        return CellChoice(tuple(written), sum(1 for s in sets if s <= C), True)
    # only queries probing written cells alone can ever qualify
    live = [s for s in sets if s <= set(written)]
    if math.comb(len(written), delta) <= cap:
        best, best_n = None, -1
        for combo in itertools.combinations(written, delta):
            C = set(combo)
            got = sum(1 for s in live if s <= C)
            if got > best_n:
                best, best_n = combo, got
        return CellChoice(tuple(best), best_n, True)
    chosen: set[int] = set()
    for _ in range(delta):
        def gain(c: int) -> tuple[int, int, int]:
            C = chosen | {c}
            full = sum(1 for s in live if s <= C)
            touch = sum(1 for s in live if c in s and not s <= chosen)
            return (full, touch, -c)

        chosen.add(max((c for c in written if c not in chosen), key=gain))
    return CellChoice(tuple(sorted(chosen)), sum(1 for s in live if s <= chosen), False)


def int_log(x: int, p: int) -> int:
    """Largest u with p^u <= x (x >= 1)."""
    u = 0
    while p ** (u + 1) <= x:
        u += 1
    return u


def extract_independent(vs: Sequence[FieldVector], count: int, cfg: OmvConfig) -> list[FieldVector]:
    """First ``count`` vectors of ``vs`` (in f order) independent of those kept before them."""
    ech = Echelon(cfg.field, cfg.n)
    out = []
    for v in sorted(vs, key=lambda v: vector_index(v, cfg.field.p)):
        if len(out) == count:
            break
        if ech.insert(v):
            out.append(v)
    return out


# encoding


STEPS = ("flag", "shift", "cells", "u_count", "u_indices", "products", "raw")


@dataclass
class OmvEncoding:
    bits: Transcript
    breakdown: dict[str, int]
    branch: int
    a_star: int | None = None
    cells: tuple[tuple[int, int], ...] = ()
    U: tuple[FieldVector, ...] = ()
    X: tuple[FieldVector, ...] = ()
    stats: dict = field(default_factory=dict)

    @property
    def measured_bits(self) -> int:
        return len(self.bits)


def _widths(cfg: OmvConfig) -> dict[str, int]:
    return {
        "shift": width_for(cfg.shift_modulus),
        "count": cfg.delta.bit_length(),
        "u_count": cfg.n.bit_length(),
        "index": width_for(cfg.window_size),
        "entry": cfg.field.bits,
    }


def omv_budget(cfg: OmvConfig, v_star: int, x_size: int) -> float:
    """3n lg|F|/8 + 2 Delta w + 7n lg|V*|/8 + n |X| lg|F|."""
    lgf = cfg.field.lg
    lgv = math.log2(v_star) if v_star else 0.0
    return 3 * cfg.n * lgf / 8 + 2 * cfg.delta * cfg.w + 7 * cfg.n * lgv / 8 + cfg.n * x_size * lgf


def encode_matrix(ds: DSProgram, M: FieldMatrix, cfg: OmvConfig) -> OmvEncoding:
    if M.shape != (cfg.n, cfg.n) or M.field != cfg.field:
        raise ValueError("matrix does not match the configuration")
    widths = _widths(cfg)
    t = Transcript()
    parts = {s: 0 for s in STEPS}

    def put(step: str, value: int, width: int) -> None:
        t.write_uint("encoder", value, width)
        parts[step] += width

    qs = correct_query_set(ds, M, cfg)
    a_star, hit = find_shift(qs.correct, cfg)
    window_correct = [v for v in qs.correct if in_window(v, a_star, cfg)]
    choice = find_best_cellset(qs.probes, window_correct, qs.written, cfg.delta)
    C = set(choice.cells)
    V_star = [v for v in window_correct if qs.probes[tuple(v)] <= C]
    u_count = int_log(len(V_star), cfg.field.p) if V_star else 0
    stats = {
        "V_size": len(qs.correct),
        "W0_size": cfg.window_size,
        "window_hits": hit,
        "V_star_size": len(V_star),
        "cellset_exhaustive": choice.exhaustive,
    }
    if V_star:
        stats["V_star_rank"] = rank(V_star)
        if stats["V_star_rank"] < u_count:
            raise AssertionError("span of V* smaller than log_|F| |V*|")

    if u_count == 0:
        put("flag", 0, 1)
        for row in M.rows:
            for x in row:
                put("raw", x, widths["entry"])
        stats["U_size"] = 0
        return OmvEncoding(t, parts, 0, stats=stats)

    U = extract_independent(V_star, u_count, cfg)
    X = greedy_complete(U, cfg.n, cfg.field)
    put("flag", 1, 1)
    put("shift", a_star, widths["shift"])
    cells = tuple((a, qs.memory.read(a)) for a in sorted(C))
    put("cells", len(cells), widths["count"])
    for a, word in cells:
        put("cells", a, cfg.w)
        put("cells", word, cfg.w)
    put("u_count", len(U), widths["u_count"])
    for u in U:
        if not in_window(u, a_star, cfg):
            raise AssertionError("query vector outside the shift window")
        put("u_indices", window_position(u, cfg), widths["index"])
    for row in M.rows:
        for x in X:
            put("products", row.dot(x), widths["entry"])
    stats["U_size"] = len(U)
    stats["X_size"] = len(X)
    return OmvEncoding(t, parts, 1, a_star, cells, tuple(U), tuple(X), stats)


class RestrictedMemory:
    """Read-only view of the cells in C*; anything else is a consistency error."""

    def __init__(self, config: MachineConfig, cells: dict[int, int]) -> None:
        self.config = config
        self.cells = cells

    def read(self, address: int) -> int:
        if address not in self.cells:
            raise ConsistencyError(f"replay probed cell {address} outside the encoded cell set")
        return self.cells[address]

    def write(self, address: int, word: int) -> None:
        raise ConsistencyError("replay attempted a write")


def decode_matrix(bits: Transcript, ds: DSProgram, cfg: OmvConfig) -> FieldMatrix:
    widths = _widths(cfg)
    t = Transcript.from_dict(bits.to_dict())
    t.cursor = 0
    n, F = cfg.n, cfg.field
    if not t.read_bool():
        rows = [[t.read_uint(widths["entry"]) for _ in range(n)] for _ in range(n)]
        return FieldMatrix.from_lists(rows, F)
    a_star = t.read_uint(widths["shift"])
    count = t.read_uint(widths["count"])
    cells = {}
    for _ in range(count):
        a = t.read_uint(cfg.w)
        cells[a] = t.read_uint(cfg.w)
    U = [window_vector(t.read_uint(widths["index"]), a_star, cfg) for _ in range(t.read_uint(widths["u_count"]))]
    view = RestrictedMemory(ds.machine(), cells)
    answers = [run_phase(ds, "query", u, view)[0] for u in U]
    X = greedy_complete(U, n, F)
    products = [[t.read_uint(widths["entry"]) for _ in X] for _ in range(n)]
    rhs = [[answers[j][i] for j in range(len(U))] + products[i] for i in range(n)]
    rows = solve(list(U) + list(X), rhs)
    return FieldMatrix.from_lists([list(r) for r in rows], F)


def desk_config(n: int, p: int, w: int, delta: int | None = None) -> OmvConfig:
    """Preset for verbatim storage: Delta defaults to the verbatim cell count."""
    F = FieldSpec(p)
    if delta is None:
        delta = -(-(n * n) // (w // F.bits))
    return OmvConfig(n, F, w, delta)


def make_ds(kind: str, cfg: OmvConfig) -> DSProgram:
    if kind == "verbatim":
        return VerbatimOMV(cfg.n, cfg.field, cfg.w)
    if kind == "zero":
        return ZeroAnswer(cfg.n, cfg.field, cfg.w)
    raise ValueError(f"unknown structure {kind!r}; choose verbatim or zero")
