"""A deliberately SNOW-shaped baseline with no ordering authority.

Servers keep a single latest version, overwritten on every write arrival;
reads are one non-blocking round returning that one version; writes are a
single fan-out phase.  The reads are therefore non-blocking, one-round,
one-version, and compatible with concurrent writes, yet nothing makes the
per-server latest versions mutually consistent: bounded exhaustive schedule
exploration of a two-server scenario finds fractured reads that no
serialization order can explain.
"""

from __future__ import annotations

from typing import Optional

from ..core import ACK, INITIAL_KEY, Invocation, Key, SystemConfig, Value
from ..simnet import Process, ProcessId, ProtocolInvariantError, StepContext
from .common import AckValue, ProtocolSpec, ReadReq, ValueReply, WriteValue


class WriterNaive(Process):
    def __init__(self, pid: ProcessId, config: SystemConfig):
        super().__init__(pid)
        self.config = config
        self.z = 0
        self._awaiting: set[str] = set()

    def clone(self) -> "WriterNaive":
        w = WriterNaive(self.pid, self.config)
        w.z = self.z
        w._awaiting = set(self._awaiting)
        return w

    def on_invoke(self, inv: Invocation, ctx: StepContext) -> None:
        key = Key(self.z + 1, self.name)
        self.z += 1
        self._awaiting = set()
        for oid, value in inv.write_set:
            server = self.config.server_for(oid)
            self._awaiting.add(server)
            ctx.send(server, WriteValue(key, value))

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, AckValue):
            self._awaiting.discard(frm)
            if not self._awaiting:
                ctx.complete(ACK)
        else:
            raise ProtocolInvariantError(f"writer got {payload!r}")


class ReaderNaive(Process):
    def __init__(self, pid: ProcessId, config: SystemConfig):
        super().__init__(pid)
        self.config = config
        self._ids: tuple[int, ...] = ()
        self._got: dict[int, Value] = {}

    def clone(self) -> "ReaderNaive":
        r = ReaderNaive(self.pid, self.config)
        r._ids = self._ids
        r._got = dict(self._got)
        return r

    def on_invoke(self, inv: Invocation, ctx: StepContext) -> None:
        self._ids = inv.read_set
        self._got = {}
        for oid in inv.read_set:
            ctx.send(self.config.server_for(oid), ReadReq())

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, ValueReply):
            self._got[int(frm[1:])] = payload.value
            if len(self._got) == len(self._ids):
                ctx.complete(tuple(self._got[i] for i in self._ids))
        else:
            raise ProtocolInvariantError(f"reader got {payload!r}")


class ServerNaive(Process):
    def __init__(self, pid: ProcessId, initial_value: Value):
        super().__init__(pid)
        self._initial = initial_value
        self.latest: tuple[Key, Value] = (INITIAL_KEY, initial_value)

    def clone(self) -> "ServerNaive":
        s = ServerNaive(self.pid, self._initial)
        s.latest = self.latest
        return s

    def on_message(self, frm: str, payload, ctx: StepContext) -> None:
        if isinstance(payload, WriteValue):
            self.latest = (payload.key, payload.value)
            ctx.send(frm, AckValue(payload.key))
        elif isinstance(payload, ReadReq):
            ctx.send(frm, ValueReply(*self.latest))
        else:
            raise ProtocolInvariantError(f"server got {payload!r}")


def build_naive(config: SystemConfig) -> dict[str, Process]:
    procs: dict[str, Process] = {}
    for i, _ in enumerate(config.writers, 1):
        procs[f"w{i}"] = WriterNaive(ProcessId("writer", i), config)
    for i, _ in enumerate(config.readers, 1):
        procs[f"r{i}"] = ReaderNaive(ProcessId("reader", i), config)
    for i in range(1, config.k + 1):
        procs[f"s{i}"] = ServerNaive(ProcessId("server", i), config.initial_values[i - 1])
    return procs


PROTO_NAIVE = ProtocolSpec(
    name="naive",
    description="single-version overwrite baseline: N, O, W hold, S does not",
    single_reader=False,
    client_to_client=False,
    has_tags=False,
    uses_coordinator=False,
    baseline_rounds=1,
    read_request_kinds=frozenset({ReadReq.KIND}),
    build=build_naive,
)
