"""Multi-writer multi-reader protocol with one-round, multi-version reads.

Writes are exactly as in the two-round protocol.  A read fires everything in
a single volley before receiving anything: the coordinator is asked for the
key array (combined with the snapshot request into one envelope when the
coordinator's own object is being read) while every contacted server returns
its entire version store.  The reader then picks, per object, the value the
coordinator's key selects inside that server's snapshot.

The volley admits one race the write flow cannot exclude: a server snapshot
taken before a write's value arrived, paired with a coordinator reply
computed after that write registered.  The coordinator's key is then absent
from the snapshot.  The read stays safe by fetching exactly the missing
(key, value) pairs in one extra targeted round, and each such read is
counted and flagged as a fallback.
"""

from __future__ import annotations

from typing import Optional

from ..core import Invocation, Key, SystemConfig, Value
from ..simnet import Process, ProcessId, ProtocolInvariantError, StepContext
from .common import (GetTagArray, GetTagsAndValues, ProtocolSpec, ReadValue,
                     ReadValues, TagArray, ValueReply, ValuesSnapshot)
from .algo_b import ServerB, WriterB, _build

FALLBACK_STAT = "fallback_reads"


class WriterC(WriterB):
    """Write transactions are identical to the two-round protocol's."""


class ReaderC(Process):
    def __init__(self, pid: ProcessId, config: SystemConfig):
        super().__init__(pid)
        self.config = config
        self._ids: tuple[int, ...] = ()
        self._t_r: Optional[int] = None
        self._keys: Optional[tuple[Key, ...]] = None
        self._snapshots: dict[int, dict[Key, Value]] = {}
        self._resolved: dict[int, Value] = {}
        self._missing: set[int] = set()
        self._in_fallback = False

    def clone(self) -> "ReaderC":
        r = ReaderC(self.pid, self.config)
        r._ids = self._ids
        r._t_r = self._t_r
        r._keys = self._keys
        r._snapshots = {i: dict(s) for i, s in self._snapshots.items()}
        r._resolved = dict(self._resolved)
        r._missing = set(self._missing)
        r._in_fallback = self._in_fallback
        return r

    def on_invoke(self, inv: Invocation, ctx: StepContext) -> None:
        self._ids = inv.read_set
        self._t_r = None
        self._keys = None
        self._snapshots = {}
        self._resolved = {}
        self._missing = set()
        self._in_fallback = False
        coord = self.config.coordinator
        contacted = {oid: self.config.server_for(oid) for oid in inv.read_set}
        if coord in contacted.values():
            ctx.send(coord, GetTagsAndValues(inv.read_set))
        else:
            ctx.send(coord, GetTagArray(inv.read_set))
        for oid, server in contacted.items():
            if server != coord:
                ctx.send(server, ReadValues())

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, TagArray):
            self._t_r = payload.tag
            self._keys = payload.keys
            self._try_resolve(ctx)
        elif isinstance(payload, ValuesSnapshot):
            self._snapshots[int(frm[1:])] = dict(payload.items)
            self._try_resolve(ctx)
        elif isinstance(payload, ValueReply):
            oid = int(frm[1:])
            self._resolved[oid] = payload.value
            self._missing.discard(oid)
            if not self._missing:
                self._finish(ctx)
        else:
            raise ProtocolInvariantError(f"reader got {payload!r}")

    def _try_resolve(self, ctx: StepContext) -> None:
        if self._keys is None or len(self._snapshots) < len(self._ids):
            return
        for oid in self._ids:
            key = self._keys[oid - 1]
            snapshot = self._snapshots[oid]
            if key in snapshot:
                self._resolved[oid] = snapshot[key]
            else:
                self._missing.add(oid)
        if not self._missing:
            self._finish(ctx)
            return
        # Coordinator/snapshot race: fetch exactly the missing versions.
        self._in_fallback = True
        ctx.bump(FALLBACK_STAT)
        assert self._keys is not None
        for oid in sorted(self._missing):
            ctx.send(self.config.server_for(oid), ReadValue(self._keys[oid - 1]))

    def _finish(self, ctx: StepContext) -> None:
        assert self._t_r is not None
        ctx.complete(tuple(self._resolved[i] for i in self._ids), tag=self._t_r)


class ServerC(ServerB):
    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, ReadValues):
            ctx.send(frm, ValuesSnapshot(self.vals.items_sorted()))
        elif isinstance(payload, GetTagsAndValues):
            log = self._coord_log()
            ctx.send(frm, TagArray(log.snapshot_tag(), log.key_array()))
            ctx.send(frm, ValuesSnapshot(self.vals.items_sorted()))
        else:
            super().on_message(frm, payload, ctx)


def build_c(config: SystemConfig) -> dict[str, Process]:
    return _build(config, WriterC, ReaderC, ServerC)


PROTO_C = ProtocolSpec(
    name="c",
    description="MWMR, coordinator log: one-round multi-version reads",
    single_reader=False,
    client_to_client=False,
    has_tags=True,
    uses_coordinator=True,
    baseline_rounds=1,
    read_request_kinds=frozenset({GetTagArray.KIND, GetTagsAndValues.KIND,
                                  ReadValues.KIND, ReadValue.KIND}),
    build=build_c,
)
