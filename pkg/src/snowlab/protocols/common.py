"""Machinery shared by the protocol implementations.

Message payloads are frozen dataclasses with a stable wire form (the same
dicts appear in trace JSON and in run signatures).  ``WriteLog`` is the
ordered list of (key, updated-object bitmap) entries held by the reader in
the client-to-client protocol and by the coordinator elsewhere;
``VersionStore`` is a server's monotone set of (key, value) versions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from ..core import INITIAL_KEY, Invocation, Key, SystemConfig, Value, _b64, _unb64
from ..simnet import Process, ProtocolInvariantError

Bitmap = tuple[int, ...]


def bitmap_for(objects: tuple[int, ...], k: int) -> Bitmap:
    return tuple(1 if i in set(objects) else 0 for i in range(1, k + 1))


# -- wire payloads ----------------------------------------------------------

@dataclass(frozen=True)
class Msg:
    KIND = "?"

    def wire(self) -> dict:
        return {"kind": self.KIND}


@dataclass(frozen=True)
class WriteValue(Msg):
    KIND = "WRITE-VALUE"
    key: Key
    value: Value

    def wire(self) -> dict:
        return {"kind": self.KIND, "key": self.key.wire(), "value": _b64(self.value)}


@dataclass(frozen=True)
class AckValue(Msg):
    KIND = "ACK-VALUE"
    key: Key

    def wire(self) -> dict:
        return {"kind": self.KIND, "key": self.key.wire()}


@dataclass(frozen=True)
class InformReader(Msg):
    KIND = "INFORM-READER"
    key: Key
    bitmap: Bitmap

    def wire(self) -> dict:
        return {"kind": self.KIND, "key": self.key.wire(), "bitmap": list(self.bitmap)}


@dataclass(frozen=True)
class AckInform(Msg):
    KIND = "ACK-INFORM"
    tag: int

    def wire(self) -> dict:
        return {"kind": self.KIND, "tag": self.tag}


@dataclass(frozen=True)
class UpdateCoord(Msg):
    KIND = "UPDATE-COORD"
    key: Key
    bitmap: Bitmap

    def wire(self) -> dict:
        return {"kind": self.KIND, "key": self.key.wire(), "bitmap": list(self.bitmap)}


@dataclass(frozen=True)
class AckCoord(Msg):
    KIND = "ACK-COORD"
    tag: int

    def wire(self) -> dict:
        return {"kind": self.KIND, "tag": self.tag}


@dataclass(frozen=True)
class GetTagArray(Msg):
    KIND = "GET-TAG-ARRAY"
    ids: tuple[int, ...]

    def wire(self) -> dict:
        return {"kind": self.KIND, "ids": list(self.ids)}


@dataclass(frozen=True)
class TagArray(Msg):
    KIND = "TAG-ARRAY"
    tag: int
    keys: tuple[Key, ...]

    def wire(self) -> dict:
        return {"kind": self.KIND, "tag": self.tag,
                "keys": [k.wire() for k in self.keys]}


@dataclass(frozen=True)
class ReadValue(Msg):
    KIND = "READ-VALUE"
    key: Key

    def wire(self) -> dict:
        return {"kind": self.KIND, "key": self.key.wire()}


@dataclass(frozen=True)
class ValueReply(Msg):
    KIND = "VALUE"
    key: Key
    value: Value

    def wire(self) -> dict:
        return {"kind": self.KIND, "key": self.key.wire(), "value": _b64(self.value)}


@dataclass(frozen=True)
class ReadValues(Msg):
    KIND = "READ-VALUES"


@dataclass(frozen=True)
class GetTagsAndValues(Msg):
    """Coordinator request combining GET-TAG-ARRAY with READ-VALUES so a
    one-round read stays one envelope when the coordinator is contacted."""

    KIND = "GET-TAG-ARRAY+READ-VALUES"
    ids: tuple[int, ...]

    def wire(self) -> dict:
        return {"kind": self.KIND, "ids": list(self.ids)}


@dataclass(frozen=True)
class ValuesSnapshot(Msg):
    KIND = "VALUES-SNAPSHOT"
    items: tuple[tuple[Key, Value], ...]

    def wire(self) -> dict:
        return {"kind": self.KIND,
                "items": [[k.wire(), _b64(v)] for k, v in self.items]}


@dataclass(frozen=True)
class ReadReq(Msg):
    KIND = "READ-REQ"


_key = Key.from_wire


def payload_from_wire(d: dict) -> Msg:
    kind = d["kind"]
    if kind == WriteValue.KIND:
        return WriteValue(_key(d["key"]), _unb64(d["value"]))
    if kind == AckValue.KIND:
        return AckValue(_key(d["key"]))
    if kind == InformReader.KIND:
        return InformReader(_key(d["key"]), tuple(d["bitmap"]))
    if kind == AckInform.KIND:
        return AckInform(int(d["tag"]))
    if kind == UpdateCoord.KIND:
        return UpdateCoord(_key(d["key"]), tuple(d["bitmap"]))
    if kind == AckCoord.KIND:
        return AckCoord(int(d["tag"]))
    if kind == GetTagArray.KIND:
        return GetTagArray(tuple(d["ids"]))
    if kind == TagArray.KIND:
        return TagArray(int(d["tag"]), tuple(_key(k) for k in d["keys"]))
    if kind == ReadValue.KIND:
        return ReadValue(_key(d["key"]))
    if kind == ValueReply.KIND:
        return ValueReply(_key(d["key"]), _unb64(d["value"]))
    if kind == ReadValues.KIND:
        return ReadValues()
    if kind == GetTagsAndValues.KIND:
        return GetTagsAndValues(tuple(d["ids"]))
    if kind == ValuesSnapshot.KIND:
        return ValuesSnapshot(tuple((_key(k), _unb64(v)) for k, v in d["items"]))
    if kind == ReadReq.KIND:
        return ReadReq()
    raise ValueError(f"unknown payload kind {kind!r}")


# -- protocol state pieces ---------------------------------------------------

@dataclass(frozen=True)
class LogEntry:
    key: Key
    bitmap: Bitmap


class WriteLog:
    """Append-only list of (key, bitmap) entries; positions are 1-based and
    double as tags.  Position 1 is the initial pseudo-write covering every
    object."""

    def __init__(self, k: int, entries: Optional[list[LogEntry]] = None):
        self.k = k
        self.entries = entries if entries is not None else [
            LogEntry(INITIAL_KEY, (1,) * k)]

    def append(self, key: Key, bitmap: Bitmap) -> int:
        """Append an entry and return the new length, i.e. the entry's tag."""
        if len(bitmap) != self.k:
            raise ProtocolInvariantError("bitmap width mismatch")
        self.entries.append(LogEntry(key, bitmap))
        return len(self.entries)

    def latest_position_for(self, oid: int) -> int:
        """Largest 1-based position whose bitmap covers object ``oid``."""
        for j in range(len(self.entries), 0, -1):
            if self.entries[j - 1].bitmap[oid - 1]:
                return j
        raise ProtocolInvariantError(f"no log entry covers object {oid}")

    def key_for(self, oid: int) -> Key:
        return self.entries[self.latest_position_for(oid) - 1].key

    def key_array(self) -> tuple[Key, ...]:
        return tuple(self.key_for(i) for i in range(1, self.k + 1))

    def snapshot_tag(self) -> int:
        """The tag a read takes from this log snapshot: the full length.

        The tag must dominate the tag of every write that completed before
        the read began (all of which are already in the log), otherwise the
        read would order before them.  Restricting the maximum to the read's
        own objects breaks that dominance when the read set is untouched by
        recent writes; the returned values are unaffected either way, since
        each is still the newest entry covering its object.
        """
        return len(self.entries)

    def clone(self) -> "WriteLog":
        return WriteLog(self.k, list(self.entries))


class VersionStore:
    """A server's set of (key, value) versions; grows monotonically, at most
    one value per key."""

    def __init__(self, initial_value: Value, data: Optional[dict[Key, Value]] = None):
        self.data = data if data is not None else {INITIAL_KEY: initial_value}

    def add(self, key: Key, value: Value) -> None:
        existing = self.data.get(key)
        if existing is not None and existing != value:
            raise ProtocolInvariantError(f"key {key} rebound to a different value")
        self.data[key] = value

    def get(self, key: Key) -> Value:
        try:
            return self.data[key]
        except KeyError:
            raise ProtocolInvariantError(f"version {key} absent from store") from None

    def __contains__(self, key: Key) -> bool:
        return key in self.data

    def items_sorted(self) -> tuple[tuple[Key, Value], ...]:
        return tuple(sorted(self.data.items()))

    def __len__(self) -> int:
        return len(self.data)

    def clone(self) -> "VersionStore":
        return VersionStore(b"", dict(self.data))


@dataclass(frozen=True)
class ProtocolSpec:
    """Static description of one protocol: how to build its process set and
    what shape its reads are supposed to have."""

    name: str
    description: str
    single_reader: bool
    client_to_client: bool
    has_tags: bool
    uses_coordinator: bool
    baseline_rounds: int
    read_request_kinds: frozenset[str]
    build: Callable[[SystemConfig], dict[str, Process]]

    def make_config(self, k: int, n_writers: int, n_readers: int,
                    initial_values: tuple[Value, ...] = (),
                    coordinator: str = "s1") -> SystemConfig:
        if self.single_reader and n_readers != 1:
            raise ValueError(f"protocol {self.name!r} requires exactly 1 reader")
        if n_writers < 1 or n_readers < 1 or k < 1:
            raise ValueError("need at least one writer, one reader and one object")
        return SystemConfig(
            protocol=self.name,
            k=k,
            writers=tuple(f"w{i}" for i in range(1, n_writers + 1)),
            readers=tuple(f"r{i}" for i in range(1, n_readers + 1)),
            coordinator=coordinator if self.uses_coordinator else None,
            initial_values=initial_values,
        )
