"""Shared domain vocabulary: objects, keys, tags, transactions, histories.

Objects are numbered 1..k and hold opaque byte-string values; object i lives
on server ``s{i}``.  A write transaction is identified by a :class:`Key`
(the issuing writer's counter paired with its id) and, once ordered, by an
integer tag equal to its 1-based position in a write log.  Histories record
every transaction invocation/response together with the full network event
trace, and are the sole input to the checkers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

# Object ids are plain ints in [1..k]; values are opaque byte strings.
ObjectId = int
Value = bytes

ACK = "ack"

READ = "READ"
WRITE = "WRITE"

#: Placeholder writer id carried by the initial pseudo-write's key.
W0 = "w0"


class MalformedInvocation(ValueError):
    """Raised for invocations that violate the data-type shape."""


@dataclass(frozen=True, order=True)
class Key:
    """Globally unique write-transaction identifier: (counter value, writer id)."""

    seq: int
    writer: str

    def wire(self) -> dict:
        return {"seq": self.seq, "writer": self.writer}

    @classmethod
    def from_wire(cls, d: dict) -> "Key":
        return cls(int(d["seq"]), str(d["writer"]))


#: The unique initial key, paired with every object's initial value.
INITIAL_KEY = Key(0, W0)

#: 1-based position in a write log; tag 1 denotes the initial pseudo-write.
Tag = int


@dataclass(frozen=True)
class Invocation:
    """A READ over a set of objects or a WRITE of (object, value) pairs.

    ``read_set`` is a sorted duplicate-free tuple of object ids;
    ``write_set`` is a tuple of (object id, value) pairs with strictly
    increasing object ids.  Exactly one of the two is populated.
    """

    kind: str
    read_set: tuple[ObjectId, ...] = ()
    write_set: tuple[tuple[ObjectId, Value], ...] = ()

    def __post_init__(self) -> None:
        if self.kind == READ:
            if self.write_set:
                raise MalformedInvocation("READ carries a write set")
            if not self.read_set:
                raise MalformedInvocation("empty read set")
            if any(self.read_set[j] >= self.read_set[j + 1]
                   for j in range(len(self.read_set) - 1)):
                raise MalformedInvocation("read set not strictly increasing")
            if any(i < 1 for i in self.read_set):
                raise MalformedInvocation("object ids start at 1")
        elif self.kind == WRITE:
            if self.read_set:
                raise MalformedInvocation("WRITE carries a read set")
            if not self.write_set:
                raise MalformedInvocation("empty write set")
            ids = [i for i, _ in self.write_set]
            if any(ids[j] >= ids[j + 1] for j in range(len(ids) - 1)):
                raise MalformedInvocation("write set not strictly increasing")
            if any(i < 1 for i in ids):
                raise MalformedInvocation("object ids start at 1")
            if any(not isinstance(v, bytes) for _, v in self.write_set):
                raise MalformedInvocation("values must be bytes")
        else:
            raise MalformedInvocation(f"unknown kind {self.kind!r}")

    @property
    def objects(self) -> tuple[ObjectId, ...]:
        return self.read_set if self.kind == READ else tuple(i for i, _ in self.write_set)

    def wire(self) -> dict:
        if self.kind == READ:
            return {"kind": READ, "read_set": list(self.read_set)}
        return {"kind": WRITE,
                "write_set": [[i, _b64(v)] for i, v in self.write_set]}

    @classmethod
    def from_wire(cls, d: dict) -> "Invocation":
        if d["kind"] == READ:
            return cls(READ, read_set=tuple(int(i) for i in d["read_set"]))
        return cls(WRITE, write_set=tuple((int(i), _unb64(v)) for i, v in d["write_set"]))


def read_txn(*oids: ObjectId) -> Invocation:
    return Invocation(READ, read_set=tuple(sorted(oids)))


def write_txn(*pairs: tuple[ObjectId, Value]) -> Invocation:
    return Invocation(WRITE, write_set=tuple(sorted(pairs)))


@dataclass(frozen=True)
class SequentialState:
    """A k-tuple of object values; position i-1 holds the value of object i."""

    values: tuple[Value, ...]

    @classmethod
    def initial(cls, k: int, initial_values: Optional[tuple[Value, ...]] = None) -> "SequentialState":
        if initial_values is None:
            initial_values = (b"",) * k
        if len(initial_values) != k:
            raise ValueError("need one initial value per object")
        return cls(tuple(initial_values))

    @property
    def k(self) -> int:
        return len(self.values)


Response = Union[str, tuple[Value, ...]]


def seq_apply(state: SequentialState, inv: Invocation) -> tuple[Response, SequentialState]:
    """The sequential semantics of the shared data type.

    A READ returns the projection of the state onto its read set and leaves
    the state untouched; a WRITE overwrites exactly its write-set positions
    and returns an ack.
    """
    if inv.kind == READ:
        if any(i > state.k for i in inv.read_set):
            raise MalformedInvocation("object id beyond k")
        return tuple(state.values[i - 1] for i in inv.read_set), state
    if any(i > state.k for i, _ in inv.write_set):
        raise MalformedInvocation("object id beyond k")
    updated = dict(inv.write_set)
    values = tuple(updated.get(i + 1, v) for i, v in enumerate(state.values))
    return ACK, SequentialState(values)


@dataclass
class TxnRecord:
    """One transaction's lifetime: invocation, global INV/RESP positions,
    response, and the tag the protocol assigned (None until completion,
    and always None for tagless protocols)."""

    txn_id: str
    client: str
    invocation: Invocation
    inv_seq: int
    resp_seq: Optional[int] = None
    response: Optional[Response] = None
    tag: Optional[Tag] = None

    @property
    def complete(self) -> bool:
        return self.resp_seq is not None

    @property
    def kind(self) -> str:
        return self.invocation.kind

    def copy(self) -> "TxnRecord":
        return TxnRecord(self.txn_id, self.client, self.invocation,
                         self.inv_seq, self.resp_seq, self.response, self.tag)

    def wire(self) -> dict:
        if self.response is None:
            response = None
        elif self.response == ACK:
            response = ACK
        else:
            response = [_b64(v) for v in self.response]
        return {
            "txn_id": self.txn_id,
            "client": self.client,
            "invocation": self.invocation.wire(),
            "inv_seq": self.inv_seq,
            "resp_seq": self.resp_seq,
            "response": response,
            "tag": self.tag,
        }

    @classmethod
    def from_wire(cls, d: dict) -> "TxnRecord":
        response: Optional[Response]
        if d["response"] is None:
            response = None
        elif d["response"] == ACK:
            response = ACK
        else:
            response = tuple(_unb64(v) for v in d["response"])
        return cls(d["txn_id"], d["client"], Invocation.from_wire(d["invocation"]),
                   int(d["inv_seq"]),
                   None if d["resp_seq"] is None else int(d["resp_seq"]),
                   response,
                   None if d.get("tag") is None else int(d["tag"]))


@dataclass(frozen=True)
class SystemConfig:
    """Static shape of a run: protocol, object count, client ids."""

    protocol: str
    k: int
    writers: tuple[str, ...]
    readers: tuple[str, ...]
    coordinator: Optional[str] = None
    initial_values: tuple[Value, ...] = ()

    def __post_init__(self) -> None:
        if not self.initial_values:
            object.__setattr__(self, "initial_values", (b"",) * self.k)
        if len(self.initial_values) != self.k:
            raise ValueError("need one initial value per object")

    @property
    def servers(self) -> tuple[str, ...]:
        return tuple(f"s{i}" for i in range(1, self.k + 1))

    @property
    def clients(self) -> tuple[str, ...]:
        return self.writers + self.readers

    def server_for(self, oid: ObjectId) -> str:
        if not 1 <= oid <= self.k:
            raise ValueError(f"object {oid} out of range 1..{self.k}")
        return f"s{oid}"

    def initial_state(self) -> SequentialState:
        return SequentialState.initial(self.k, self.initial_values)

    def wire(self) -> dict:
        return {
            "protocol": self.protocol,
            "k": self.k,
            "writers": list(self.writers),
            "readers": list(self.readers),
            "coordinator": self.coordinator,
            "initial_values": [_b64(v) for v in self.initial_values],
        }

    @classmethod
    def from_wire(cls, d: dict) -> "SystemConfig":
        return cls(d["protocol"], int(d["k"]), tuple(d["writers"]), tuple(d["readers"]),
                   d.get("coordinator"),
                   tuple(_unb64(v) for v in d["initial_values"]))


@dataclass
class History:
    """Everything a run produced: config, transaction records, event trace.

    ``events`` entries are :class:`snowlab.simnet.TraceEvent`; the trace is
    kept here rather than in simnet so checkers depend only on this module's
    types plus the event shape.
    """

    config: SystemConfig
    records: list[TxnRecord] = field(default_factory=list)
    events: list = field(default_factory=list)
    #: Run counters exposed by the protocols (not part of the trace format).
    stats: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return all(r.complete for r in self.records)

    def record(self, txn_id: str) -> TxnRecord:
        for r in self.records:
            if r.txn_id == txn_id:
                return r
        raise KeyError(txn_id)

    def reads(self) -> list[TxnRecord]:
        return [r for r in self.records if r.kind == READ]

    def writes(self) -> list[TxnRecord]:
        return [r for r in self.records if r.kind == WRITE]


def realtime_precedes(a: TxnRecord, b: TxnRecord) -> bool:
    """True iff ``a`` completed before ``b`` was invoked.

    Incomplete transactions precede nothing; two transactions with neither
    preceding the other are concurrent.
    """
    return a.resp_seq is not None and a.resp_seq < b.inv_seq


def _b64(v: bytes) -> str:
    import base64
    return base64.b64encode(v).decode("ascii")


def _unb64(s: str) -> bytes:
    import base64
    return base64.b64decode(s.encode("ascii"))
