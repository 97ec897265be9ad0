"""The Multiphase Problem, two reference structures, and the Blocked-LSD reduction.

Multiphase: preprocess sets X_1..X_k of [n]; update with one set Y; query
an index i and report whether X_i and Y are disjoint.

:func:`run_reduction` drives any Multiphase structure as a two-party protocol
for Blocked-LSD.  Bob builds Phase I from his set W.  Alice simulates Phase
II for every l-subset of [n] by asking Bob for cells she has not
overwritten.  She then runs all k queries in lockstep, one probe per round,
and fetches each round's unknown cells in bulk through the subset protocol.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .bitstream import Transcript
from .cellprobe import (
    CellMemory,
    DSProgram,
    MachineConfig,
    ModelViolation,
    Probe,
    ProbeLog,
    run_phase,
)
from .subset_comm import run_protocol

ENUMERATION_CAP = 1 << 20


def brute_force_disjoint(X: Iterable[int], Y: Iterable[int]) -> bool:
    return not (set(X) & set(Y))


@dataclass(frozen=True)
class MultiphaseInstance:
    k: int
    n: int
    X: tuple[frozenset[int], ...]
    Y: frozenset[int]
    i: int = 0

    def __post_init__(self) -> None:
        if len(self.X) != self.k:
            raise ValueError(f"need {self.k} sets, got {len(self.X)}")
        for s in (*self.X, self.Y):
            if any(not 0 <= e < self.n for e in s):
                raise ValueError(f"set element outside [0, {self.n})")
        if not 0 <= self.i < self.k:
            raise ValueError(f"query index {self.i} outside [0, {self.k})")

    def answer(self) -> bool:
        return brute_force_disjoint(self.X[self.i], self.Y)


def pack_bits(elements: Iterable[int], n: int, w: int) -> list[int]:
    """Bitvector of a subset of [n] split into ceil(n/w) words; element e is bit e % w of word e // w."""
    words = [0] * -(-n // w)
    for e in elements:
        words[e // w] |= 1 << (e % w)
    return words


class MultiphaseDS(DSProgram):
    """Shared layout: X_i's bitvector at cells [i c, (i+1) c), c = ceil(n/w)."""

    def __init__(self, k: int, n: int, w: int) -> None:
        if k < 1 or n < 1:
            raise ValueError("need k >= 1 and n >= 1")
        self.k, self.n, self.w = k, n, w
        self.c = -(-n // w)

    def cells_needed(self) -> int:
        raise NotImplementedError

    def machine(self) -> MachineConfig:
        needed = self.cells_needed()
        if needed > 1 << self.w:
            raise ValueError(f"{self.name} needs {needed} cells but w={self.w} addresses only {1 << self.w}")
        return MachineConfig(self.w)

    def preprocess(self, probe: Probe, sets: Sequence[Iterable[int]]) -> None:
        if len(sets) != self.k:
            raise ValueError(f"need {self.k} sets")
        for i, X in enumerate(sets):
            for j, word in enumerate(pack_bits(X, self.n, self.w)):
                probe.write(i * self.c + j, word)

    def _read_set(self, probe: Probe, base: int) -> list[int]:
        return [probe.read(base + j) for j in range(self.c)]


class NaiveBitvector(MultiphaseDS):
    """Fast updates: Y is stored as a bitvector, queries intersect two bitvectors."""

    name = "naive"

    def __init__(self, k: int, n: int, w: int) -> None:
        super().__init__(k, n, w)
        self.t_u = self.c
        self.t_q = 2 * self.c

    def cells_needed(self) -> int:
        return (self.k + 1) * self.c

    def update(self, probe: Probe, Y: Iterable[int]) -> None:
        for j, word in enumerate(pack_bits(Y, self.n, self.w)):
            probe.write(self.k * self.c + j, word)

    def query(self, probe: Probe, i: int) -> bool:
        xs = self._read_set(probe, i * self.c)
        ys = self._read_set(probe, self.k * self.c)
        return not any(x & y for x, y in zip(xs, ys))


class LookupTable(MultiphaseDS):
    """Fast queries: the update computes all k answers and packs them w per cell."""

    name = "lookup"

    def __init__(self, k: int, n: int, w: int) -> None:
        super().__init__(k, n, w)
        self.answer_cells = -(-k // w)
        self.t_u = k * self.c + self.answer_cells
        self.t_q = 1

    def cells_needed(self) -> int:
        return self.k * self.c + self.answer_cells

    def update(self, probe: Probe, Y: Iterable[int]) -> None:
        ys = pack_bits(Y, self.n, self.w)
        packed = [0] * self.answer_cells
        for i in range(self.k):
            xs = self._read_set(probe, i * self.c)
            if not any(x & y for x, y in zip(xs, ys)):
                packed[i // self.w] |= 1 << (i % self.w)
        for j, word in enumerate(packed):
            probe.write(self.k * self.c + j, word)

    def query(self, probe: Probe, i: int) -> bool:
        return bool((probe.read(self.k * self.c + i // self.w) >> (i % self.w)) & 1)


DS_KINDS = {"naive": NaiveBitvector, "lookup": LookupTable}


def make_ds(kind: str, k: int, n: int, w: int) -> MultiphaseDS:
    try:
        return DS_KINDS[kind](k, n, w)
    except KeyError:
        raise ValueError(f"unknown structure {kind!r}; choose from {sorted(DS_KINDS)}") from None


def solve_multiphase(ds: MultiphaseDS, inst: MultiphaseInstance) -> tuple[bool, dict[str, ProbeLog]]:
    """Run all three phases on fresh memory; returns the answer and each phase's log."""
    memory = CellMemory(ds.machine())
    _, pre = run_phase(ds, "preprocess", list(inst.X), memory)
    _, upd = run_phase(ds, "update", inst.Y, memory)
    ans, q = run_phase(ds, "query", inst.i, memory)
    return ans, {"preprocess": pre, "update": upd, "query": q}


@dataclass(frozen=True)
class BlockedLsdInstance:
    """V holds b_j for each block j in [N]; W is any subset of [N] x [B]."""

    N: int
    B: int
    V: tuple[int, ...]
    W: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        if len(self.V) != self.N:
            raise ValueError(f"V must pick exactly one element from each of the {self.N} blocks")
        if any(not 0 <= b < self.B for b in self.V):
            raise ValueError(f"V element outside [0, {self.B})")
        if any(not (0 <= j < self.N and 0 <= h < self.B) for j, h in self.W):
            raise ValueError("W element outside [N] x [B]")

    def pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset(enumerate(self.V))

    def disjoint(self) -> bool:
        return not (self.pairs() & self.W)


def suggested_ell(t_q: int, k: int, n: int) -> int:
    """round(sqrt(t_q lg k / lg n)), at least 1."""
    if k < 2 or n < 2:
        return 1
    return max(1, round(math.sqrt(t_q * math.log2(k) / math.log2(n))))


@dataclass(frozen=True)
class ReductionParams:
    k: int
    n: int
    w: int
    t_q: int
    ell: int

    def __post_init__(self) -> None:
        if self.ell < 1:
            raise ValueError("group size ell must be at least 1")
        if self.k < 1:
            raise ValueError("need k >= 1")
        if self.n % self.ell:
            lo = self.n - self.n % self.ell
            raise ValueError(
                f"ell={self.ell} does not divide n={self.n}; nearest valid n: {lo or self.ell}, {lo + self.ell}"
            )

    @property
    def N(self) -> int:
        return self.k * self.ell

    @property
    def B(self) -> int:
        return self.n // self.ell

    def fits(self, inst: BlockedLsdInstance) -> None:
        if (inst.N, inst.B) != (self.N, self.B):
            raise ValueError(f"instance is [{inst.N}]x[{inst.B}] but parameters need [{self.N}]x[{self.B}]")


def lsd_map(inst: BlockedLsdInstance, params: ReductionParams) -> tuple[list[frozenset[int]], list[frozenset[int]]]:
    """Group blocks into k runs of l; (j, b) becomes element (j mod l)(n/l) + b of group j // l."""
    params.fits(inst)
    ell, B = params.ell, params.B
    X: list[set[int]] = [set() for _ in range(params.k)]
    Y: list[set[int]] = [set() for _ in range(params.k)]
    for j, h in inst.W:
        X[j // ell].add((j % ell) * B + h)
    for j, b in enumerate(inst.V):
        Y[j // ell].add((j % ell) * B + b)
    return [frozenset(s) for s in X], [frozenset(s) for s in Y]


class _AliceUpdateView:
    """Alice's memory during a simulated update: her overwrites, else ask Bob."""

    def __init__(self, bob: CellMemory, t: Transcript) -> None:
        self.config = bob.config
        self.bob = bob
        self.t = t
        self.overwritten: dict[int, int] = {}
        self.requests = 0

    def read(self, address: int) -> int:
        if address in self.overwritten:
            return self.overwritten[address]
        w = self.config.w
        self.t.write_uint("alice", address, w)
        asked = self.t.read_uint(w)
        self.t.write_uint("bob", self.bob.read(asked), w)
        self.requests += 1
        return self.t.read_uint(w)

    def peek(self, address: int) -> int:
        return self.overwritten.get(address, self.bob.read(address))

    def write(self, address: int, word: int) -> None:
        self.overwritten[address] = word


class _Suspend(Exception):
    pass


class _RoundView:
    """Replays a query up to probe t, serving earlier probes from what Alice knows."""

    def __init__(self, config: MachineConfig, cache: dict[int, int], learned: dict[int, int], t: int) -> None:
        self.config = config
        self.cache = cache
        self.learned = learned
        self.t = t
        self.count = 0
        self.needed: int | None = None

    def read(self, address: int) -> int:
        self.count += 1
        if self.count > self.t:
            raise _Suspend
        if address in self.cache:
            return self.cache[address]
        if self.count < self.t:
            return self.learned[address]
        self.needed = address
        raise _Suspend

    def write(self, address: int, word: int) -> None:
        raise ModelViolation(f"write to {address} during a query")


@dataclass
class RoundRecord:
    t: int
    Z: list[int]
    alice_bits: int
    bob_bits: int


@dataclass
class ReductionResult:
    answer: bool
    transcript: Transcript
    step_bits: dict[str, dict[str, int]]
    rounds: list[RoundRecord]
    query_logs: list[ProbeLog]
    update_probes_max: int

    @property
    def query_probes_max(self) -> int:
        return max((len(log) for log in self.query_logs), default=0)


class ReductionSession:
    """Steps 1 and 2 for a fixed W; :meth:`run` then does step 3 for any V."""

    def __init__(self, W: Iterable[tuple[int, int]], ds: MultiphaseDS, params: ReductionParams, seed: int = 0) -> None:
        if (ds.k, ds.n) != (params.k, params.n):
            raise ValueError("structure and reduction disagree on k or n")
        if ds.w != params.w:
            raise ValueError("structure and reduction disagree on w")
        self.ds = ds
        self.params = params
        self.seed = seed
        self.W = frozenset(W)
        dummy = BlockedLsdInstance(params.N, params.B, (0,) * params.N, self.W)
        self.X, _ = lsd_map(dummy, params)

        # step 1: Bob runs Phase I on his own
        self.memory = CellMemory(ds.machine())
        _, log = run_phase(ds, "preprocess", list(self.X), self.memory)
        self.phase1_written = frozenset(log.written())

        # step 2: Alice simulates Phase II for every l-subset of [n]
        subsets = math.comb(params.n, params.ell)
        if subsets > ENUMERATION_CAP:
            raise ValueError(f"C({params.n},{params.ell}) = {subsets} subsets exceeds the cap of {ENUMERATION_CAP}")
        self.step2 = Transcript()
        self.caches: dict[frozenset[int], dict[int, int]] = {}
        self.update_probes_max = 0
        for Y in itertools.combinations(range(params.n), params.ell):
            view = _AliceUpdateView(self.memory, self.step2)
            _, ulog = run_phase(ds, "update", frozenset(Y), view)
            self.caches[frozenset(Y)] = view.overwritten
            self.update_probes_max = max(self.update_probes_max, len(ulog))

    def run(self, V: Sequence[int]) -> ReductionResult:
        params = self.params
        inst = BlockedLsdInstance(params.N, params.B, tuple(V), self.W)
        _, Ys = lsd_map(inst, params)
        t = Transcript()
        t.extend(self.step2)
        t.cursor = len(t)
        steps = {"step2": self.step2.checkpoint()}
        mark = t.checkpoint()

        w = params.w
        learned: dict[int, int] = {}
        answers: dict[int, bool] = {}
        logs: dict[int, ProbeLog] = {}
        rounds: list[RoundRecord] = []
        active = list(range(params.k))
        rnd = 0
        while active:
            rnd += 1
            needed: set[int] = set()
            still = []
            for i in active:
                view = _RoundView(self.memory.config, self.caches[Ys[i]], learned, rnd)
                probe = Probe(view, "query", f"query:{i}")
                try:
                    answers[i] = self.ds.query(probe, i)
                    logs[i] = probe.log
                except _Suspend:
                    if view.needed is not None:
                        needed.add(view.needed)
                    still.append(i)
            active = still
            # unwritten cells hold the default word, which Alice knows
            for a in needed - self.phase1_written:
                learned[a] = 0
            Z = sorted(needed & self.phase1_written)
            before = t.checkpoint()
            if Z:
                decoded, _ = run_protocol(Z, self.phase1_written, w, seed=self.seed, transcript=t)
                for a in sorted(decoded):
                    t.write_uint("bob", self.memory.read(a), w)
                for a in sorted(Z):
                    learned[a] = t.read_uint(w)
            spent = t.since(before)
            rounds.append(RoundRecord(rnd, Z, spent["alice"], spent["bob"]))
        steps["step3"] = t.since(mark)
        return ReductionResult(
            answer=all(answers[i] for i in range(params.k)),
            transcript=t,
            step_bits=steps,
            rounds=rounds,
            query_logs=[logs[i] for i in range(params.k)],
            update_probes_max=self.update_probes_max,
        )


def run_reduction(
    inst: BlockedLsdInstance, ds: MultiphaseDS, params: ReductionParams, seed: int = 0
) -> tuple[bool, Transcript, ReductionResult]:
    """Answer whether V and W are disjoint by simulating ``ds``; returns (answer, transcript, details)."""
    params.fits(inst)
    result = ReductionSession(inst.W, ds, params, seed).run(inst.V)
    return result.answer, result.transcript, result


@dataclass
class ReductionConfig:
    """A valid (k, n, l) triple for the [N] x [B] universe."""

    N: int
    B: int
    ell: int
    w: int = 8

    def params(self, t_q: int) -> ReductionParams:
        return ReductionParams(self.N // self.ell, self.B * self.ell, self.w, t_q, self.ell)


def valid_configs(max_N: int, max_B: int, w: int = 8, max_subsets: int = ENUMERATION_CAP) -> list[ReductionConfig]:
    """Every (N, B, l) with l | N, N <= max_N, B <= max_B and C(lB, l) <= max_subsets."""
    out = []
    for N in range(1, max_N + 1):
        for B in range(1, max_B + 1):
            for ell in range(1, N + 1):
                if N % ell == 0 and math.comb(ell * B, ell) <= max_subsets:
                    out.append(ReductionConfig(N, B, ell, w))
    return out
