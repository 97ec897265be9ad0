"""A cell probe machine: w-bit cells, probe interception and epoch bookkeeping.

Data structures are :class:`DSProgram` subclasses whose phase methods only
touch memory through the :class:`Probe` handed to them.  :func:`run_phase`
records every probe in a :class:`ProbeLog`; only probes are counted.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, Protocol

PHASES = ("preprocess", "update", "query")


class ModelViolation(Exception):
    """A program broke the rules of the model (bad address, oversize word, write while querying)."""


class ConsistencyError(Exception):
    """A decoder or replay needed a cell it was not given."""


@dataclass(frozen=True)
class MachineConfig:
    w: int
    address_space: int | None = None

    def __post_init__(self) -> None:
        if self.w < 1:
            raise ValueError("cell width must be at least 1 bit")
        if self.address_space is None:
            object.__setattr__(self, "address_space", 1 << self.w)
        if not 1 <= self.address_space <= 1 << self.w:
            raise ValueError("address space must lie in [1, 2^w]")

    def check_address(self, address: int) -> None:
        if not 0 <= address < self.address_space:
            raise ModelViolation(f"address {address} outside [0, {self.address_space})")

    def check_word(self, word: int) -> None:
        if not 0 <= word < 1 << self.w:
            raise ModelViolation(f"word {word} does not fit in {self.w} bits")


class Store(Protocol):
    config: MachineConfig

    def read(self, address: int) -> int: ...

    def write(self, address: int, word: int) -> None: ...


class CellMemory:
    """Sparse w-bit cell memory; unwritten cells hold 0."""

    def __init__(self, config: MachineConfig, cells: dict[int, int] | None = None) -> None:
        self.config = config
        self._cells: dict[int, int] = {}
        for a, v in (cells or {}).items():
            self.write(a, v)

    def read(self, address: int) -> int:
        self.config.check_address(address)
        return self._cells.get(address, 0)

    def write(self, address: int, word: int) -> None:
        self.config.check_address(address)
        self.config.check_word(word)
        self._cells[address] = word

    def __contains__(self, address: int) -> bool:
        return address in self._cells

    def __len__(self) -> int:
        return len(self._cells)

    def addresses(self) -> list[int]:
        return sorted(self._cells)

    def copy(self) -> CellMemory:
        m = CellMemory(self.config)
        m._cells = dict(self._cells)
        return m

    def snapshot(self) -> list[tuple[int, int]]:
        return sorted(self._cells.items())

    def to_json(self) -> str:
        return json.dumps({"w": self.config.w, "cells": self.snapshot()})

    @classmethod
    def from_json(cls, text: str, config: MachineConfig | None = None) -> CellMemory:
        data = json.loads(text)
        config = config or MachineConfig(data["w"])
        return cls(config, {a: v for a, v in data["cells"]})


@dataclass(frozen=True)
class ProbeRecord:
    seq: int
    address: int
    kind: str
    before: int | None
    after: int
    tag: str = ""


@dataclass
class ProbeLog:
    records: list[ProbeRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, rec: ProbeRecord) -> None:
        self.records.append(rec)

    def addresses(self) -> list[int]:
        return [r.address for r in self.records]

    def written(self) -> list[int]:
        return [r.address for r in self.records if r.kind == "write"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["op_tag", "seq", "kind", "address"])
        for r in self.records:
            out.writerow([r.tag, r.seq, r.kind, r.address])
        return buf.getvalue()


class Probe:
    """The only window a program has onto memory during one phase."""

    def __init__(self, store: Store, phase: str, tag: str = "") -> None:
        self.store = store
        self.phase = phase
        self.tag = tag
        self.log = ProbeLog()

    @property
    def w(self) -> int:
        return self.store.config.w

    def read(self, address: int) -> int:
        self.store.config.check_address(address)
        word = self.store.read(address)
        self.log.append(ProbeRecord(len(self.log), address, "read", word, word, self.tag))
        return word

    def write(self, address: int, word: int) -> None:
        if self.phase == "query":
            raise ModelViolation(f"write to {address} during a query")
        self.store.config.check_address(address)
        self.store.config.check_word(word)
        # stores that charge for reads (protocol overlays) expose a free peek
        peek = getattr(self.store, "peek", self.store.read)
        before = peek(address)
        self.store.write(address, word)
        self.log.append(ProbeRecord(len(self.log), address, "write", before, word, self.tag))


class DSProgram:
    """Base class for deterministic cell probe data structures.

    Subclasses override the phases they support.  ``t_u``/``t_q`` are the
    declared worst-case update and query probe counts (None if unbounded).
    """

    name = "program"
    t_u: int | None = None
    t_q: int | None = None

    def preprocess(self, probe: Probe, data: Any) -> Any:
        raise NotImplementedError(f"{self.name} has no preprocessing phase")

    def update(self, probe: Probe, data: Any) -> Any:
        raise NotImplementedError(f"{self.name} has no update phase")

    def query(self, probe: Probe, data: Any) -> Any:
        raise NotImplementedError(f"{self.name} has no query phase")


def run_phase(program: DSProgram, phase: str, data: Any, memory: Store, tag: str = "") -> tuple[Any, ProbeLog]:
    if phase not in PHASES:
        raise ValueError(f"unknown phase {phase!r}")
    probe = Probe(memory, phase, tag or phase)
    out = getattr(program, phase)(probe, data)
    return out, probe.log


def probe_set(log: ProbeLog | Iterable[ProbeRecord]) -> frozenset[int]:
    return frozenset(r.address for r in log)


@dataclass(frozen=True)
class EpochPartition:
    """Epochs over updates numbered n_updates (first) down to 1 (last).

    Epoch l holds update numbers [beta^(l-1), beta^l); the top epoch is cut
    off at n_updates.
    """

    beta: int
    n_updates: int

    def __post_init__(self) -> None:
        if self.beta < 2:
            raise ValueError("beta must be at least 2")
        if self.n_updates < 1:
            raise ValueError("need at least one update")

    @property
    def num_epochs(self) -> int:
        ell = 1
        while self.beta**ell <= self.n_updates:
            ell += 1
        return ell

    def epoch_of(self, number: int) -> int:
        if not 1 <= number <= self.n_updates:
            raise ValueError(f"update number {number} outside [1, {self.n_updates}]")
        ell = 1
        while self.beta**ell <= number:
            ell += 1
        return ell

    def numbers(self, ell: int) -> range:
        """Update numbers in epoch ``ell``, descending (chronological order)."""
        lo = self.beta ** (ell - 1)
        hi = min(self.beta**ell - 1, self.n_updates)
        return range(hi, lo - 1, -1)

    def number_at(self, position: int) -> int:
        """Update number of the update executed at 0-based ``position``."""
        return self.n_updates - position


def cell_sets(logs: Sequence[ProbeLog], partition: EpochPartition) -> dict[int, frozenset[int]]:
    """C_l for every epoch: cells whose last write happened during epoch l.

    ``logs`` holds one update log per update, in execution order.
    """
    if len(logs) != partition.n_updates:
        raise ValueError("need exactly one log per update")
    owner: dict[int, int] = {}
    for pos, log in enumerate(logs):
        ell = partition.epoch_of(partition.number_at(pos))
        for addr in log.written():
            owner[addr] = ell
    sets: dict[int, set[int]] = {ell: set() for ell in range(1, partition.num_epochs + 1)}
    for addr, ell in owner.items():
        sets[ell].add(addr)
    return {ell: frozenset(s) for ell, s in sets.items()}
