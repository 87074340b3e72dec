"""Versioned trace JSON: ``{format: 1, config, records, events}``.

Integers are decimal, keys lower_snake_case, byte-string values base64.
The canonical rendering (sorted keys, no whitespace) underlies history ids
and the campaign determinism digest.
"""

from __future__ import annotations

import hashlib
import json
from typing import Iterable

from .core import History, SystemConfig, TxnRecord
from .simnet import TraceEvent

FORMAT_VERSION = 1


def history_to_dict(h: History) -> dict:
    return {
        "format": FORMAT_VERSION,
        "config": h.config.wire(),
        "records": [r.wire() for r in h.records],
        "events": [e.wire() for e in h.events],
    }


def history_from_dict(d: dict) -> History:
    version = d.get("format")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported trace format {version!r}")
    return History(
        SystemConfig.from_wire(d["config"]),
        [TxnRecord.from_wire(r) for r in d["records"]],
        [TraceEvent.from_wire(e) for e in d["events"]],
    )


def dumps(h: History, pretty: bool = False) -> str:
    d = history_to_dict(h)
    if pretty:
        return json.dumps(d, indent=2, sort_keys=True)
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def loads(text: str) -> History:
    return history_from_dict(json.loads(text))


def history_id(h: History) -> str:
    return hashlib.sha256(dumps(h).encode()).hexdigest()[:16]


def determinism_digest(histories: Iterable[History]) -> str:
    acc = hashlib.sha256()
    for h in histories:
        acc.update(dumps(h).encode())
        acc.update(b"\n")
    return acc.hexdigest()
