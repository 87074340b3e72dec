"""Multi-writer single-reader protocol with client-to-client messaging.

Writes run in two phases: values go to the owning servers first, and only
after every server acked does the writer inform the reader, which appends
(key, bitmap) to its local write log and acks back with the new log length
as the write's tag.  Reads are local-log lookups plus one parallel
key-addressed fetch per object: one round, one version, non-blocking.
"""

from __future__ import annotations

from typing import Optional

from ..core import ACK, Invocation, Key, SystemConfig, Value
from ..simnet import Process, ProcessId, ProtocolInvariantError, StepContext
from .common import (AckInform, AckValue, InformReader, ProtocolSpec, ReadValue,
                     ValueReply, VersionStore, WriteLog, WriteValue, bitmap_for)


class WriterA(Process):
    def __init__(self, pid: ProcessId, config: SystemConfig):
        super().__init__(pid)
        self.config = config
        self.z = 0
        self._key: Optional[Key] = None
        self._items: dict[int, Value] = {}
        self._awaiting: set[str] = set()

    def clone(self) -> "WriterA":
        w = WriterA(self.pid, self.config)
        w.z = self.z
        w._key = self._key
        w._items = dict(self._items)
        w._awaiting = set(self._awaiting)
        return w

    def on_invoke(self, inv: Invocation, ctx: StepContext) -> None:
        self._key = Key(self.z + 1, self.name)
        self.z += 1
        self._items = dict(inv.write_set)
        self._awaiting = set()
        for oid, value in inv.write_set:
            server = self.config.server_for(oid)
            self._awaiting.add(server)
            ctx.send(server, WriteValue(self._key, value))

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, AckValue):
            self._awaiting.discard(frm)
            if not self._awaiting and self._key is not None:
                bitmap = bitmap_for(tuple(self._items), self.config.k)
                ctx.send(self.config.readers[0], InformReader(self._key, bitmap))
                self._key = None
        elif isinstance(payload, AckInform):
            ctx.complete(ACK, tag=payload.tag)
        else:
            raise ProtocolInvariantError(f"writer got {payload!r}")


class ReaderA(Process):
    """The single reader: issues reads and holds the write log."""

    def __init__(self, pid: ProcessId, config: SystemConfig):
        super().__init__(pid)
        self.config = config
        self.log = WriteLog(config.k)
        self._ids: tuple[int, ...] = ()
        self._t_r = 0
        self._got: dict[int, Value] = {}

    def clone(self) -> "ReaderA":
        r = ReaderA(self.pid, self.config)
        r.log = self.log.clone()
        r._ids = self._ids
        r._t_r = self._t_r
        r._got = dict(self._got)
        return r

    def on_invoke(self, inv: Invocation, ctx: StepContext) -> None:
        # Keys and the read tag come from the log snapshot at invocation;
        # informs arriving mid-read update the log but not this read.
        self._ids = inv.read_set
        self._t_r = self.log.snapshot_tag()
        self._got = {}
        for oid in inv.read_set:
            ctx.send(self.config.server_for(oid), ReadValue(self.log.key_for(oid)))

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, InformReader):
            tag = self.log.append(payload.key, payload.bitmap)
            ctx.send(frm, AckInform(tag))
        elif isinstance(payload, ValueReply):
            oid = int(frm[1:])
            self._got[oid] = payload.value
            if len(self._got) == len(self._ids):
                ctx.complete(tuple(self._got[i] for i in self._ids), tag=self._t_r)
        else:
            raise ProtocolInvariantError(f"reader got {payload!r}")


class ServerA(Process):
    def __init__(self, pid: ProcessId, initial_value: Value):
        super().__init__(pid)
        self._initial = initial_value
        self.vals = VersionStore(initial_value)

    def clone(self) -> "ServerA":
        s = ServerA(self.pid, self._initial)
        s.vals = self.vals.clone()
        return s

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, WriteValue):
            self.vals.add(payload.key, payload.value)
            ctx.send(frm, AckValue(payload.key))
        elif isinstance(payload, ReadValue):
            ctx.send(frm, ValueReply(payload.key, self.vals.get(payload.key)))
        else:
            raise ProtocolInvariantError(f"server got {payload!r}")


def build_a(config: SystemConfig) -> dict[str, Process]:
    procs: dict[str, Process] = {}
    for i, _ in enumerate(config.writers, 1):
        procs[f"w{i}"] = WriterA(ProcessId("writer", i), config)
    procs[config.readers[0]] = ReaderA(ProcessId("reader", 1), config)
    for i in range(1, config.k + 1):
        procs[f"s{i}"] = ServerA(ProcessId("server", i), config.initial_values[i - 1])
    return procs


PROTO_A = ProtocolSpec(
    name="a",
    description="MWSR, client-to-client messaging: one-round one-version reads",
    single_reader=True,
    client_to_client=True,
    has_tags=True,
    uses_coordinator=False,
    baseline_rounds=1,
    read_request_kinds=frozenset({ReadValue.KIND}),
    build=build_a,
)
