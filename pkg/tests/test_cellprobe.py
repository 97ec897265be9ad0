from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cplab.cellprobe import (
    CellMemory,
    DSProgram,
    EpochPartition,
    MachineConfig,
    ModelViolation,
    ProbeLog,
    ProbeRecord,
    cell_sets,
    probe_set,
    run_phase,
)


class Counter(DSProgram):
    name = "counter"

    def update(self, probe, addr):
        probe.write(addr, (probe.read(addr) + 1) % (1 << probe.w))

    def query(self, probe, addr):
        return probe.read(addr)


class Writer(DSProgram):
    def query(self, probe, addr):
        probe.write(addr, 1)


def test_memory_bounds_and_json():
    mem = CellMemory(MachineConfig(4))
    mem.write(3, 15)
    assert mem.read(3) == 15 and mem.read(0) == 0
    with pytest.raises(ModelViolation):
        mem.write(16, 0)
    with pytest.raises(ModelViolation):
        mem.write(0, 16)
    back = CellMemory.from_json(mem.to_json())
    assert back.snapshot() == mem.snapshot() == [(3, 15)]
    clone = mem.copy()
    clone.write(1, 1)
    assert 1 not in mem


def test_probe_logging():
    mem = CellMemory(MachineConfig(8))
    _, log = run_phase(Counter(), "update", 5, mem, tag="u")
    assert [(r.kind, r.address, r.before, r.after) for r in log] == [("read", 5, 0, 0), ("write", 5, 0, 1)]
    out, qlog = run_phase(Counter(), "query", 5, mem)
    assert out == 1 and len(qlog) == 1 and probe_set(qlog) == {5}
    assert log.to_csv().splitlines()[0] == "op_tag,seq,kind,address"


def test_query_writes_are_rejected():
    with pytest.raises(ModelViolation):
        run_phase(Writer(), "query", 0, CellMemory(MachineConfig(4)))
    with pytest.raises(ValueError):
        run_phase(Writer(), "delete", 0, CellMemory(MachineConfig(4)))


def test_epoch_partition_boundaries():
    part = EpochPartition(4, 16)
    assert part.num_epochs == 3
    assert [part.epoch_of(x) for x in (1, 3, 4, 15, 16)] == [1, 1, 2, 2, 3]
    assert list(part.numbers(2)) == list(range(15, 3, -1))
    assert list(part.numbers(3)) == [16]
    assert part.number_at(0) == 16 and part.number_at(15) == 1
    assert EpochPartition(20, 16).num_epochs == 1


def _write_log(addrs):
    log = ProbeLog()
    for a in addrs:
        log.append(ProbeRecord(len(log), a, "write", 0, 1))
    return log


@given(st.integers(2, 5), st.lists(st.lists(st.integers(0, 9), max_size=3), min_size=1, max_size=30))
def test_cell_sets_last_writer(beta, writes):
    part = EpochPartition(beta, len(writes))
    sets = cell_sets([_write_log(w) for w in writes], part)
    owner = {}
    for pos, w in enumerate(writes):
        for a in w:
            owner[a] = part.epoch_of(part.number_at(pos))
    for ell, s in sets.items():
        assert s == {a for a, o in owner.items() if o == ell}
    all_cells = [a for s in sets.values() for a in s]
    assert len(all_cells) == len(set(all_cells)) == len(owner)
