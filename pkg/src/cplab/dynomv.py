"""Dynamic matrix-vector structures: epochs, epoch encoding, and low-rank-sum encoding.

The matrix starts at zero and receives n^2 entry updates at distinct index
pairs; update number n^2 comes first.  Epoch l holds updates numbered
[beta^(l-1), beta^l).  :func:`epoch_encode` writes the values of updates
numbered beta^l - 1 down to 1 using the cells a structure keeps for epoch l
and later, and :func:`epoch_decode` recovers them given the earlier values.
:func:`lowrank_encode` compresses k query vectors whose rank sum over the
recently updated columns is small.
"""

from __future__ import annotations

import itertools
import math
import random
from collections.abc import Sequence
from dataclasses import dataclass, field

from .bitstream import Transcript, binomial_width, subset_rank, subset_unrank, width_for
from .cellprobe import (
    CellMemory,
    ConsistencyError,
    DSProgram,
    EpochPartition,
    MachineConfig,
    Probe,
    ProbeLog,
    cell_sets,
    run_phase,
)
from .gf import (
    Echelon,
    FieldSpec,
    FieldVector,
    IndexSet,
    check_enumerable,
    greedy_complete,
    lex_vectors,
    rank,
    rank_and_basis,
    rank_sum,
    restrict,
    solve,
)
from .omv import find_best_cellset, vector_index
from .wellspread import UpdateSequence

# reference structures


class DynamicDS(DSProgram):
    def __init__(self, n: int, field: FieldSpec, w: int) -> None:
        if w < field.bits:
            raise ValueError("a cell must hold at least one field element")
        self.n, self.field, self.w = n, field, w

    def machine(self) -> MachineConfig:
        return MachineConfig(self.w)


class VerbatimDynamic(DynamicDS):
    """One cell per entry; an update writes its cell, a query reads all n^2 cells."""

    name = "verbatim"
    t_u = 1

    def __init__(self, n: int, field: FieldSpec, w: int) -> None:
        super().__init__(n, field, w)
        if n * n > 1 << w:
            raise ValueError("n^2 cells exceed the address space")
        self.t_q = n * n

    def update(self, probe: Probe, upd: tuple[int, int, int]) -> None:
        i, j, x = upd
        probe.write(i * self.n + j, x)

    def query(self, probe: Probe, v: FieldVector) -> FieldVector:
        n, p = self.n, self.field.p
        out = []
        for i in range(n):
            out.append(sum(probe.read(i * n + j) * v[j] for j in range(n)) % p)
        return FieldVector(tuple(out), self.field)


class AnswerTableDynamic(DynamicDS):
    """Keeps Mv for every v in its own cell; a query reads that one cell.

    Cells [0, n^2) hold the entries; cell n^2 + f(v) holds Mv packed
    ceil(lg p) bits per coordinate.  An update reads the old entry and
    patches the answer of every v with v(j) != 0.
    """

    name = "answer-table"
    t_q = 1

    def __init__(self, n: int, field: FieldSpec, w: int) -> None:
        super().__init__(n, field, w)
        check_enumerable(field, n)
        if n * field.bits > w:
            raise ValueError("an answer vector must fit in one cell")
        size = field.p**n
        if n * n + size > 1 << w:
            raise ValueError("answer table exceeds the address space")
        self.t_u = 2 + 2 * (size - field.p ** (n - 1))
        self.vectors = list(lex_vectors(field, n))

    def answer_cell(self, v: Sequence[int]) -> int:
        return self.n * self.n + vector_index(v, self.field.p)

    def _unpack(self, word: int) -> list[int]:
        b = self.field.bits
        return [(word >> (b * i)) & ((1 << b) - 1) for i in range(self.n)]

    def _pack(self, coords: Sequence[int]) -> int:
        b = self.field.bits
        return sum(x << (b * i) for i, x in enumerate(coords))

    def update(self, probe: Probe, upd: tuple[int, int, int]) -> None:
        i, j, x = upd
        p = self.field.p
        old = probe.read(i * self.n + j)
        probe.write(i * self.n + j, x)
        delta = (x - old) % p
        for v in self.vectors:
            if v[j]:
                cell = self.answer_cell(v)
                coords = self._unpack(probe.read(cell))
                coords[i] = (coords[i] + delta * v[j]) % p
                probe.write(cell, self._pack(coords))

    def query(self, probe: Probe, v: FieldVector) -> FieldVector:
        return FieldVector(tuple(self._unpack(probe.read(self.answer_cell(v)))), self.field)


def make_ds(kind: str, n: int, field: FieldSpec, w: int) -> DynamicDS:
    if kind == "verbatim":
        return VerbatimDynamic(n, field, w)
    if kind == "answer-table":
        return AnswerTableDynamic(n, field, w)
    raise ValueError(f"unknown structure {kind!r}; choose verbatim or answer-table")


# running a sequence


def final_matrix(seq: UpdateSequence, field: FieldSpec) -> list[list[int]]:
    M = [[0] * seq.n for _ in range(seq.n)]
    for (i, j), x in zip(seq.pairs, seq.values):
        M[i][j] = x
    return M


@dataclass
class DynRun:
    seq: UpdateSequence
    field: FieldSpec
    partition: EpochPartition
    memory: CellMemory
    update_logs: list[ProbeLog]
    cells: dict[int, frozenset[int]]
    matrix: list[list[int]]
    correct: dict[tuple[int, ...], bool] = field(default_factory=dict)
    probes: dict[tuple[int, ...], frozenset[int]] = field(default_factory=dict)

    def epoch_probes(self, v: Sequence[int], ell: int) -> frozenset[int]:
        return self.probes[tuple(v)] & self.cells.get(ell, frozenset())


def run_dynamic(ds: DynamicDS, seq: UpdateSequence, beta: int, queries: bool = True) -> DynRun:
    """Apply every update to fresh memory, then (optionally) run every query."""
    if seq.values is None:
        raise ValueError("sequence has no values")
    F = ds.field
    memory = CellMemory(ds.machine())
    logs = []
    for pos, ((i, j), x) in enumerate(zip(seq.pairs, seq.values)):
        _, log = run_phase(ds, "update", (i, j, x), memory, tag=f"update:{len(seq) - pos}")
        logs.append(log)
    partition = EpochPartition(beta, len(seq))
    run = DynRun(seq, F, partition, memory, logs, cell_sets(logs, partition), final_matrix(seq, F))
    if queries:
        check_enumerable(F, seq.n)
        for v in lex_vectors(F, seq.n):
            ans, log = run_phase(ds, "query", v, memory)
            expect = tuple(sum(a * b for a, b in zip(row, v)) % F.p for row in run.matrix)
            run.correct[tuple(v)] = tuple(ans) == expect
            run.probes[tuple(v)] = frozenset(log.addresses())
    return run


def check_epoch_bookkeeping(run: DynRun, t_u: int | None) -> list[str]:
    """Every epoch invariant that must hold on any run; returns the violations found."""
    out = []
    part = run.partition
    sets = run.cells
    ells = sorted(sets)
    for a, b in itertools.combinations(ells, 2):
        if sets[a] & sets[b]:
            out.append(f"C_{a} and C_{b} share cells {sorted(sets[a] & sets[b])}")
    last: dict[int, int] = {}
    for pos, log in enumerate(run.update_logs):
        for rec in log:
            if rec.kind == "write":
                last[rec.address] = pos
        if t_u is not None and len(log) > t_u:
            out.append(f"update at position {pos} made {len(log)} probes > t_u={t_u}")
    for addr, pos in last.items():
        owner = part.epoch_of(part.number_at(pos))
        if addr not in sets.get(owner, ()):
            out.append(f"cell {addr} last written in epoch {owner} but not in C_{owner}")
    if sum(len(s) for s in sets.values()) != len(last):
        out.append("cell sets do not partition the written cells")
    for ell, s in sets.items():
        if t_u is not None and len(s) > part.beta**ell * t_u:
            out.append(f"|C_{ell}| = {len(s)} > beta^{ell} t_u")
    for v, P in run.probes.items():
        if sum(len(P & s) for s in sets.values()) > len(P):
            out.append(f"query {v}: epoch probe counts exceed |P|")
    return out


# epoch parameters


@dataclass(frozen=True)
class EpochConfig:
    n: int
    field: FieldSpec
    w: int
    beta: int
    ell: int
    delta: int | None = None
    m: int = 1

    def __post_init__(self) -> None:
        if self.beta <= 2:
            raise ValueError("beta must exceed 2")
        if self.ell < 1 or self.beta ** (self.ell - 1) > self.n * self.n:
            raise ValueError(f"epoch {self.ell} is empty for n={self.n}, beta={self.beta}")
        if self.m < 1:
            raise ValueError("need at least one shared set")

    @property
    def top(self) -> int:
        """Largest update number in epochs l..1 that exists."""
        return min(self.n * self.n, self.beta**self.ell - 1)

    @property
    def k(self) -> int:
        return (self.beta**self.ell - 1) // self.n

    @property
    def k_integral(self) -> bool:
        return (self.beta**self.ell - 1) % self.n == 0

    @property
    def in_epoch_range(self) -> bool:
        """(4/6) log_beta n^2 <= l <= log_beta n^2 + 1 (base beta; see the notes)."""
        return 4 * math.log(self.n * self.n, self.beta) / 6 <= self.ell

    def budget(self) -> float:
        return self.beta**self.ell * self.field.lg


def valid_triples(max_n: int, max_beta: int) -> list[tuple[int, int, int]]:
    """(n, beta, l) with beta > 2, a non-empty epoch l and n | beta^l - 1."""
    out = []
    for n in range(2, max_n + 1):
        for beta in range(3, max_beta + 1):
            ell = 1
            while beta ** (ell - 1) <= n * n:
                if (beta**ell - 1) % n == 0:
                    out.append((n, beta, ell))
                ell += 1
    return out


def row_update_sets(seq: UpdateSequence, top: int) -> list[IndexSet]:
    """R_i: columns updated in row i by updates numbered top..1."""
    return [IndexSet.of(s) for s in seq.row_sets(top)]


def rank_sum_epoch(vs: Sequence[FieldVector], R: Sequence[IndexSet]) -> int:
    return rank_sum(R, vs)


def gamma_lists(n: int, field: FieldSpec, k: int, m: int, seed: int) -> list[tuple[FieldVector, ...]]:
    """m independent uniform sets of k distinct vectors, ordered by f."""
    total = field.p**n
    if k > total:
        raise ValueError("k exceeds the number of vectors")
    rng = random.Random(f"gamma/{n}/{field.p}/{k}/{seed}")
    out = []
    for _ in range(m):
        idx = sorted(rng.sample(range(total), k))
        out.append(tuple(_from_index(f, n, field) for f in idx))
    return out


def _from_index(f: int, n: int, field: FieldSpec) -> FieldVector:
    digits = []
    for _ in range(n):
        f, d = divmod(f, field.p)
        digits.append(d)
    return FieldVector(tuple(digits), field)


# cell set search


@dataclass
class EpochCellChoice:
    cells: tuple[int, ...]
    qualifying: list[FieldVector]
    exhaustive: bool
    error_rate: float
    mean_epoch_probes: float

    @property
    def good_error(self) -> bool:
        return self.error_rate <= 2 / 3


def find_epoch_cellset(run: DynRun, ell: int, delta: int | None = None) -> EpochCellChoice:
    """The delta cells of C_l containing the epoch-l probes of the most correct queries."""
    C = sorted(run.cells.get(ell, ()))
    delta = len(C) if delta is None else delta
    correct = [FieldVector(v, run.field) for v, ok in run.correct.items() if ok]
    restricted = {v: P & frozenset(C) for v, P in run.probes.items()}
    choice = find_best_cellset(restricted, correct, C, delta)
    chosen = frozenset(choice.cells)
    qualifying = [v for v in correct if restricted[tuple(v)] <= chosen]
    total = len(run.probes)
    return EpochCellChoice(
        choice.cells,
        sorted(qualifying, key=lambda v: vector_index(v, run.field.p)),
        choice.exhaustive,
        1 - len(correct) / total if total else 0.0,
        sum(len(P) for P in restricted.values()) / total if total else 0.0,
    )


def pick_gammas(run: DynRun, ell: int, k: int, rs_min: int, delta: int | None, rng: random.Random, tries: int = 2000):
    """k distinct qualifying queries with rank sum >= rs_min and epoch-l probes within delta cells."""
    R = row_update_sets(run.seq, min(len(run.seq), run.partition.beta**ell - 1))
    choice = find_epoch_cellset(run, ell, delta)
    pool = choice.qualifying
    if len(pool) < k:
        return None
    for _ in range(tries):
        cand = sorted(rng.sample(pool, k), key=lambda v: vector_index(v, run.field.p))
        if rank_sum(R, cand) >= rs_min:
            return tuple(cand)
    return None


# epoch encoder / decoder


@dataclass
class EpochEncoding:
    bits: Transcript
    breakdown: dict[str, int]
    branch: int
    budget: float
    stats: dict = field(default_factory=dict)

    @property
    def measured_bits(self) -> int:
        return len(self.bits)


EPOCH_STEPS = ("flag", "raw", "gamma_index", "cellset", "later_epochs", "products")


def rs_threshold(n: int, k: int) -> int:
    """Smallest integer rank sum meeting RS >= nk/32."""
    return math.ceil(n * k / 32)


def _epoch_count_width(cfg: EpochConfig, j: int, t_u: int) -> int:
    return (cfg.beta**j * t_u).bit_length()


def _cellset_count_width(cfg: EpochConfig, t_u: int) -> int:
    """C* has at most delta cells, or at most |C_l| <= beta^l t_u when delta is unset."""
    return cfg.delta.bit_length() if cfg.delta is not None else _epoch_count_width(cfg, cfg.ell, t_u)


def epoch_encode(
    ds: DynamicDS,
    seq: UpdateSequence,
    cfg: EpochConfig,
    gammas: Sequence[Sequence[FieldVector]],
    run: DynRun | None = None,
    explicit: bool = False,
) -> EpochEncoding:
    """Encode the values of updates numbered top..1.

    ``gammas`` is the shared list Gamma_1..Gamma_m.  With ``explicit`` the
    list holds one caller-chosen set (its index costs zero bits) and C* is
    built around that set's epoch-l probes instead of maximized up front.
    """
    F, n, w = cfg.field, cfg.n, cfg.w
    run = run or run_dynamic(ds, seq, cfg.beta)
    t = Transcript()
    parts = {s: 0 for s in EPOCH_STEPS}

    def put(step: str, value: int, width: int) -> None:
        t.write_uint("encoder", value, width)
        parts[step] += width

    top = cfg.top
    R = row_update_sets(seq, top)
    C_ell = run.cells.get(cfg.ell, frozenset())
    delta = len(C_ell) if cfg.delta is None else cfg.delta
    stats: dict = {"C_ell_size": len(C_ell), "delta": delta, "m": len(gammas)}

    def naive(reason: str) -> EpochEncoding:
        put("flag", 0, 1)
        for number in range(top, 0, -1):
            put("raw", seq.values[seq.position(number)], F.bits)
        stats["reason"] = reason
        return EpochEncoding(t, parts, 0, cfg.budget(), stats)

    choice = None if explicit else find_epoch_cellset(run, cfg.ell, cfg.delta)
    chosen: tuple[int, ...] | None = None
    i_star = None
    for idx, gam in enumerate(gammas):
        if not gam:
            continue
        if not all(run.correct.get(tuple(g), False) for g in gam):
            continue
        if rank_sum(R, list(gam)) < rs_threshold(n, len(gam)):
            continue
        need = frozenset().union(*(run.epoch_probes(g, cfg.ell) for g in gam))
        if choice is not None:
            if need <= frozenset(choice.cells):
                chosen, i_star = choice.cells, idx
                break
        elif len(need) <= delta:
            pad = sorted(C_ell - need)[: delta - len(need)]
            chosen, i_star = tuple(sorted(need | frozenset(pad))), idx
            break
    if i_star is None:
        return naive("no shared set qualifies")

    gam = list(gammas[i_star])
    put("flag", 1, 1)
    put("gamma_index", i_star, width_for(len(gammas)))
    put("cellset", len(chosen), _cellset_count_width(cfg, ds.t_u))
    for a in chosen:
        put("cellset", a, w)
        put("cellset", run.memory.read(a), w)
    t_u = ds.t_u
    for j in range(cfg.ell - 1, 0, -1):
        cells = sorted(run.cells.get(j, ()))
        put("later_epochs", len(cells), _epoch_count_width(cfg, j, t_u))
        for a in cells:
            put("later_epochs", a, w)
            put("later_epochs", run.memory.read(a), w)
    for i in range(n):
        if not R[i]:
            continue
        restricted = [restrict(g, R[i]) for g in gam]
        X_i = greedy_complete(restricted, len(R[i]), F)
        m_i = restrict(FieldVector(tuple(run.matrix[i]), F), R[i])
        for x in X_i:
            put("products", m_i.dot(x), F.bits)
    stats.update(gamma_index=i_star, k=len(gam), rank_sum=rank_sum(R, gam), cells=len(chosen))
    return EpochEncoding(t, parts, 1, cfg.budget(), stats)


class _DecoderView:
    """Later-epoch cells, then C*, then memory as it was before epoch l."""

    def __init__(self, config: MachineConfig, later: dict[int, int], star: dict[int, int], before: CellMemory) -> None:
        self.config = config
        self.later, self.star, self.before = later, star, before

    def read(self, address: int) -> int:
        if address in self.later:
            return self.later[address]
        if address in self.star:
            return self.star[address]
        return self.before.read(address)

    def write(self, address: int, word: int) -> None:
        raise ConsistencyError("query replay attempted a write")


def epoch_decode(
    bits: Transcript,
    ds: DynamicDS,
    cfg: EpochConfig,
    seq_indices: UpdateSequence,
    earlier_values: Sequence[int],
    gammas: Sequence[Sequence[FieldVector]],
) -> list[int]:
    """Values of updates numbered top..1 in execution order.

    ``earlier_values`` are the values of updates numbered n^2 .. top+1 in
    execution order (shared with the encoder).
    """
    F, n, w = cfg.field, cfg.n, cfg.w
    top = cfg.top
    total = n * n
    if len(earlier_values) != total - top:
        raise ValueError(f"need {total - top} earlier values")
    t = Transcript.from_dict(bits.to_dict())
    t.cursor = 0
    if not t.read_bool():
        return [t.read_uint(F.bits) for _ in range(top)]
    i_star = t.read_uint(width_for(len(gammas)))
    gam = list(gammas[i_star])
    count = t.read_uint(_cellset_count_width(cfg, ds.t_u))
    star = {}
    for _ in range(count):
        a = t.read_uint(w)
        star[a] = t.read_uint(w)
    later: dict[int, int] = {}
    for j in range(cfg.ell - 1, 0, -1):
        for _ in range(t.read_uint(_epoch_count_width(cfg, j, ds.t_u))):
            a = t.read_uint(w)
            later[a] = t.read_uint(w)

    before = CellMemory(ds.machine())
    for (i, j), x in zip(seq_indices.pairs[: total - top], earlier_values):
        run_phase(ds, "update", (i, j, x), before)
    view = _DecoderView(before.config, later, star, before)
    answers = [run_phase(ds, "query", g, view)[0] for g in gam]

    R = row_update_sets(seq_indices, top)
    known = [[None] * n for _ in range(n)]
    for (i, j), x in zip(seq_indices.pairs[: total - top], earlier_values):
        known[i][j] = x
    for i in range(n):
        if not R[i]:
            continue
        restricted = [restrict(g, R[i]) for g in gam]
        X_i = greedy_complete(restricted, len(R[i]), F)
        if rank(restricted + X_i) != len(R[i]):
            raise AssertionError(f"row {i}: completion does not span F^|R_i|")
        outside = [j for j in range(n) if j not in R[i]]
        rhs = []
        for h, g in enumerate(gam):
            rest = sum(known[i][j] * g[j] for j in outside) % F.p
            rhs.append((answers[h][i] - rest) % F.p)
        rhs += [t.read_uint(F.bits) for _ in X_i]
        (sol,) = solve(restricted + X_i, [rhs])
        for j, x in zip(R[i], sol):
            known[i][j] = x
    return [known[i][j] for (i, j) in seq_indices.pairs[total - top :]]


def epoch_session(
    ds_kind: str,
    cfg: EpochConfig,
    seq: UpdateSequence,
    seed: int,
    gamma_mode: str = "explicit",
) -> dict:
    """Draw values, encode, decode and compare; returns a report row."""
    F = cfg.field
    rng = random.Random(f"values/{seed}")
    values = [rng.randrange(F.p) for _ in range(len(seq))]
    seq = seq.with_values(values)
    ds = make_ds(ds_kind, cfg.n, F, cfg.w)
    run = run_dynamic(ds, seq, cfg.beta)
    k = cfg.k
    if gamma_mode == "explicit":
        gam = pick_gammas(run, cfg.ell, k, rs_threshold(cfg.n, k), cfg.delta, random.Random(f"pick/{seed}"))
        gammas = [gam] if gam is not None else []
    elif gamma_mode == "shared":
        gammas = gamma_lists(cfg.n, F, k, cfg.m, seed)
    else:
        raise ValueError(f"unknown gamma mode {gamma_mode!r}")
    enc = epoch_encode(ds, seq, cfg, gammas, run, explicit=gamma_mode == "explicit")
    split = len(seq) - cfg.top
    got = epoch_decode(enc.bits, ds, cfg, UpdateSequence(seq.n, seq.pairs), values[:split], gammas)
    return {
        "seed": seed,
        "branch": enc.branch,
        "measured_bits": enc.measured_bits,
        "budget_bits": enc.budget,
        "entropy_bits": cfg.top * F.lg,
        "breakdown": enc.breakdown,
        "roundtrip_ok": got == values[split:],
        "violations": check_epoch_bookkeeping(run, ds.t_u),
        "stats": enc.stats,
    }


# low rank sum encoder / decoder


@dataclass
class LowRankEncoding:
    bits: Transcript
    breakdown: dict[str, int]
    I_star: tuple[int, ...]
    rank_sum: int
    stats: dict = field(default_factory=dict)

    @property
    def measured_bits(self) -> int:
        return len(self.bits)


class PremiseError(ValueError):
    pass


def find_cover_rows(R: Sequence[IndexSet], I: Sequence[int], limit: int, target: int) -> tuple[int, ...] | None:
    """Smallest-first, then lexicographic, subset of I covering ``target`` columns."""
    for size in range(0, min(limit, len(I)) + 1):
        for combo in itertools.combinations(I, size):
            cols = set()
            for i in combo:
                cols.update(R[i])
            if len(cols) >= target:
                return combo
    return None


def _tilde(R: Sequence[IndexSet], I_star: Sequence[int]) -> list[tuple[int, IndexSet]]:
    seen: set[int] = set()
    out = []
    for i in sorted(I_star):
        out.append((i, IndexSet.of(set(R[i]) - seen)))
        seen |= set(R[i])
    return out


def lowrank_budget(n: int, k: int, field: FieldSpec, tilde_total: int, x_size: int) -> float:
    lgf = field.lg
    return 16 * n * math.log2(n) / k + (k / 16) * lgf * tilde_total + n * k * lgf / 16 + k * x_size * lgf


def lowrank_encode(
    vs: Sequence[FieldVector],
    R: Sequence[IndexSet],
    enforce_premise: bool = True,
    dim_cap: float | None = None,
) -> LowRankEncoding:
    """Encode k vectors of length n given the row update sets R_1..R_n.

    Rows whose restricted span has dimension at most ``dim_cap`` (k/16 by
    default) form I; a small subset I* of I covering n/4 columns is written,
    then a basis of each newly covered column block and the coefficients of
    every vector in that basis, then the uncovered columns verbatim.
    """
    k = len(vs)
    if k == 0:
        raise ValueError("need at least one vector")
    n = len(vs[0])
    F = vs[0].field
    if len(R) != n:
        raise ValueError("need one update set per row")
    rs = rank_sum(R, vs)
    if enforce_premise and 32 * rs >= n * k:
        raise PremiseError(f"rank sum {rs} is not below nk/32 = {n * k / 32}")
    cap = k / 16 if dim_cap is None else dim_cap
    I = [i for i in range(n) if (rank([restrict(v, R[i]) for v in vs]) if R[i] else 0) <= cap]
    limit = (8 * n) // k
    I_star = find_cover_rows(R, I, limit, math.ceil(n / 4))
    if I_star is None:
        raise ValueError(f"no {limit} rows of I={I} cover n/4 columns; the update indices are not well-spread")

    t = Transcript()
    parts = {"rows": 0, "bases": 0, "coefficients": 0, "tail": 0}

    def put(step: str, value: int, width: int) -> None:
        t.write_uint("encoder", value, width)
        parts[step] += width

    put("rows", len(I_star), n.bit_length())
    put("rows", subset_rank(n, I_star), binomial_width(n, len(I_star)))
    tilde = _tilde(R, I_star)
    dims = []
    for _, Rt in tilde:
        if not Rt:
            continue
        restricted = [restrict(v, Rt) for v in vs]
        d, basis = rank_and_basis(restricted)
        dims.append(d)
        put("bases", d, n.bit_length())
        for b in basis:
            for x in b:
                put("bases", x, F.bits)
        if d:
            ech = Echelon(F, len(Rt))
            for b in basis:
                ech.insert(b)
            for r in restricted:
                for c in ech.coordinates(r):
                    put("coefficients", c, F.bits)
    covered = set().union(*(set(R[i]) for i in I_star))
    X = [c for c in range(n) if c not in covered]
    for v in vs:
        for c in X:
            put("tail", v[c], F.bits)
    tilde_total = sum(len(Rt) for _, Rt in tilde)
    stats = {
        "I_size": len(I),
        "dims": dims,
        "X_size": len(X),
        "budget_bits": lowrank_budget(n, k, F, tilde_total, len(X)),
        "final_bound_bits": 54 * n * k * F.lg / 64,
    }
    return LowRankEncoding(t, parts, tuple(I_star), rs, stats)


def lowrank_decode(bits: Transcript, R: Sequence[IndexSet], k: int, field: FieldSpec) -> list[FieldVector]:
    n = len(R)
    t = Transcript.from_dict(bits.to_dict())
    t.cursor = 0
    size = t.read_uint(n.bit_length())
    I_star = subset_unrank(n, size, t.read_uint(binomial_width(n, size)))
    coords = [[0] * n for _ in range(k)]
    for _, Rt in _tilde(R, I_star):
        if not Rt:
            continue
        d = t.read_uint(n.bit_length())
        basis = [[t.read_uint(field.bits) for _ in Rt] for _ in range(d)]
        for h in range(k):
            coef = [t.read_uint(field.bits) for _ in range(d)] if d else []
            for pos, c in enumerate(Rt):
                coords[h][c] = sum(coef[j] * basis[j][pos] for j in range(d)) % field.p
    covered = set().union(*(set(R[i]) for i in I_star))
    X = [c for c in range(n) if c not in covered]
    for h in range(k):
        for c in X:
            coords[h][c] = t.read_uint(field.bits)
    return [FieldVector(tuple(row), field) for row in coords]


def ranksum_count(n: int, field: FieldSpec, k: int, R: Sequence[IndexSet]) -> dict:
    """Exhaustively count sets of k distinct vectors with rank sum below nk/32."""
    vectors = list(lex_vectors(field, n))
    total = math.comb(len(vectors), k)
    if total > 1 << 24:
        raise ValueError(f"C({len(vectors)},{k}) sets is too many to enumerate")
    low = 0
    for combo in itertools.combinations(vectors, k):
        if 32 * rank_sum(R, list(combo)) < n * k:
            low += 1
    bound = 2 ** (27 * n * k * field.lg / 32)
    return {"sets": total, "low_rank_sum_sets": low, "bound": bound, "within_bound": low <= bound}
