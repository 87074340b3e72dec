"""Multi-writer multi-reader protocol with a coordinator-held write log.

One server (``s*``, the coordinator) orders writes: after a write's values
are acked by the owning servers, the writer registers (key, bitmap) with the
coordinator, whose log position becomes the write's tag.  A read first asks
the coordinator for the latest key per object plus the read tag, then
fetches each key from its server: exactly two rounds, one version per
response, and every server handler replies within its own step.
"""

from __future__ import annotations

from typing import Optional

from ..core import ACK, Invocation, Key, SystemConfig, Value
from ..simnet import Process, ProcessId, ProtocolInvariantError, StepContext
from .common import (AckCoord, AckValue, GetTagArray, ProtocolSpec, ReadValue,
                     TagArray, UpdateCoord, ValueReply, VersionStore, WriteLog,
                     WriteValue, bitmap_for)


class WriterB(Process):
    def __init__(self, pid: ProcessId, config: SystemConfig):
        super().__init__(pid)
        self.config = config
        self.z = 0
        self._key: Optional[Key] = None
        self._objects: tuple[int, ...] = ()
        self._awaiting: set[str] = set()

    def clone(self) -> "WriterB":
        w = type(self)(self.pid, self.config)
        w.z = self.z
        w._key = self._key
        w._objects = self._objects
        w._awaiting = set(self._awaiting)
        return w

    def on_invoke(self, inv: Invocation, ctx: StepContext) -> None:
        self._key = Key(self.z + 1, self.name)
        self.z += 1
        self._objects = inv.objects
        self._awaiting = set()
        for oid, value in inv.write_set:
            server = self.config.server_for(oid)
            self._awaiting.add(server)
            ctx.send(server, WriteValue(self._key, value))

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, AckValue):
            self._awaiting.discard(frm)
            if not self._awaiting and self._key is not None:
                bitmap = bitmap_for(self._objects, self.config.k)
                ctx.send(self.config.coordinator, UpdateCoord(self._key, bitmap))
                self._key = None
        elif isinstance(payload, AckCoord):
            ctx.complete(ACK, tag=payload.tag)
        else:
            raise ProtocolInvariantError(f"writer got {payload!r}")


class ReaderB(Process):
    """Stateless between transactions: each read re-fetches the key array."""

    def __init__(self, pid: ProcessId, config: SystemConfig):
        super().__init__(pid)
        self.config = config
        self._ids: tuple[int, ...] = ()
        self._t_r: Optional[int] = None
        self._got: dict[int, Value] = {}

    def clone(self) -> "ReaderB":
        r = ReaderB(self.pid, self.config)
        r._ids = self._ids
        r._t_r = self._t_r
        r._got = dict(self._got)
        return r

    def on_invoke(self, inv: Invocation, ctx: StepContext) -> None:
        self._ids = inv.read_set
        self._t_r = None
        self._got = {}
        ctx.send(self.config.coordinator, GetTagArray(inv.read_set))

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, TagArray):
            self._t_r = payload.tag
            for oid in self._ids:
                ctx.send(self.config.server_for(oid), ReadValue(payload.keys[oid - 1]))
        elif isinstance(payload, ValueReply):
            oid = int(frm[1:])
            self._got[oid] = payload.value
            if len(self._got) == len(self._ids) and self._t_r is not None:
                ctx.complete(tuple(self._got[i] for i in self._ids), tag=self._t_r)
        else:
            raise ProtocolInvariantError(f"reader got {payload!r}")


class ServerB(Process):
    """A plain server, or the coordinator when given the write log."""

    def __init__(self, pid: ProcessId, initial_value: Value, k: int,
                 coordinator: bool):
        super().__init__(pid)
        self._initial = initial_value
        self.k = k
        self.vals = VersionStore(initial_value)
        self.log: Optional[WriteLog] = WriteLog(k) if coordinator else None

    @property
    def is_coordinator(self) -> bool:
        return self.log is not None

    def clone(self) -> "ServerB":
        s = type(self)(self.pid, self._initial, self.k, False)
        s.vals = self.vals.clone()
        s.log = None if self.log is None else self.log.clone()
        return s

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, WriteValue):
            self.vals.add(payload.key, payload.value)
            ctx.send(frm, AckValue(payload.key))
        elif isinstance(payload, ReadValue):
            ctx.send(frm, ValueReply(payload.key, self.vals.get(payload.key)))
        elif isinstance(payload, UpdateCoord):
            ctx.send(frm, AckCoord(self._coord_log().append(payload.key, payload.bitmap)))
        elif isinstance(payload, GetTagArray):
            log = self._coord_log()
            ctx.send(frm, TagArray(log.snapshot_tag(), log.key_array()))
        else:
            raise ProtocolInvariantError(f"server got {payload!r}")

    def _coord_log(self) -> WriteLog:
        if self.log is None:
            raise ProtocolInvariantError(f"{self.name} is not the coordinator")
        return self.log


def _build(config: SystemConfig, writer_cls, reader_cls, server_cls) -> dict[str, Process]:
    procs: dict[str, Process] = {}
    for i, _ in enumerate(config.writers, 1):
        procs[f"w{i}"] = writer_cls(ProcessId("writer", i), config)
    for i, _ in enumerate(config.readers, 1):
        procs[f"r{i}"] = reader_cls(ProcessId("reader", i), config)
    for i in range(1, config.k + 1):
        name = f"s{i}"
        coord = name == config.coordinator
        role = "coordinator-server" if coord else "server"
        procs[name] = server_cls(ProcessId(role, i), config.initial_values[i - 1],
                                 config.k, coord)
    return procs


def build_b(config: SystemConfig) -> dict[str, Process]:
    return _build(config, WriterB, ReaderB, ServerB)


PROTO_B = ProtocolSpec(
    name="b",
    description="MWMR, coordinator log: two-round one-version reads",
    single_reader=False,
    client_to_client=False,
    has_tags=True,
    uses_coordinator=True,
    baseline_rounds=2,
    read_request_kinds=frozenset({GetTagArray.KIND, ReadValue.KIND}),
    build=build_b,
)
