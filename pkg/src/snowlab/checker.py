"""History verification.

Two independent routes establish strict serializability:

* the witness route checks a protocol-supplied tag assignment against four
  conditions (well-founded tags; tag order consistent with real time; writes
  totally ordered; every read explained by its latest preceding write), which
  together are sufficient for the existence of serialization points;
* the brute-force oracle searches for an explicit serialization: a total
  order extending real-time precedence whose sequential replay reproduces
  every recorded response.

The remaining checks are structural monitors over the event trace: servers
answering read requests within their own handler step (non-blocking), rounds
and versions per read, and write/read liveness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import (ACK, READ, WRITE, History, TxnRecord, realtime_precedes,
                   seq_apply)
from .simnet import RECV, SEND

PASS = "PASS"
FAIL = "FAIL"
SKIPPED = "SKIPPED"

DEFAULT_ORACLE_CAP = 8

#: Payload kinds that carry object versions, with their version count.
_VERSION_COUNTS = {
    "VALUE": lambda p: 1,
    "VALUES-SNAPSHOT": lambda p: len(p["items"]),
}


@dataclass(frozen=True)
class Verdict:
    status: str
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == PASS

    @property
    def failed(self) -> bool:
        return self.status == FAIL

    def wire(self) -> dict:
        return {"status": self.status, "detail": self.detail}


@dataclass(frozen=True)
class Witness:
    """A tag assignment plus the induced order: phi precedes pi when
    tag(phi) < tag(pi), or tags are equal with phi a write and pi a read."""

    tag_of: dict[str, int]

    def precedes(self, phi: TxnRecord, pi: TxnRecord) -> bool:
        t_phi, t_pi = self.tag_of[phi.txn_id], self.tag_of[pi.txn_id]
        if t_phi < t_pi:
            return True
        return t_phi == t_pi and phi.kind == WRITE and pi.kind == READ


def witness_from_history(h: History) -> Witness:
    """The protocol-assigned tags of a completed history."""
    tags: dict[str, int] = {}
    for r in h.records:
        if r.tag is None:
            raise ValueError(f"transaction {r.txn_id} has no tag; "
                             "this history supports oracle checking only")
        tags[r.txn_id] = r.tag
    return Witness(tags)


def check_witness(h: History, w: Witness) -> Verdict:
    """PASS iff the witness order satisfies the four serialization conditions."""
    if not h.complete:
        raise ValueError("witness checking requires a complete history")
    for r in h.records:
        if r.txn_id not in w.tag_of:
            raise ValueError(f"witness lacks a tag for {r.txn_id}")

    # P1: finitely many predecessors.  Trivial on finite histories; assert
    # tags are positive integers so no pathological encoding sneaks through.
    for r in h.records:
        t = w.tag_of[r.txn_id]
        if not isinstance(t, int) or t < 1:
            return Verdict(FAIL, {"condition": "P1", "txn": r.txn_id, "tag": t})

    # P2: real-time order must not contradict the witness order.
    for pi in h.records:
        for phi in h.records:
            if pi is phi:
                continue
            if realtime_precedes(pi, phi) and w.precedes(phi, pi):
                return Verdict(FAIL, {"condition": "P2",
                                      "earlier": pi.txn_id, "later": phi.txn_id,
                                      "tags": [w.tag_of[pi.txn_id], w.tag_of[phi.txn_id]]})

    # P3: every write comparable to everything, i.e. write tags distinct.
    writes = h.writes()
    by_tag: dict[int, str] = {}
    for r in writes:
        t = w.tag_of[r.txn_id]
        if t in by_tag:
            return Verdict(FAIL, {"condition": "P3", "txns": [by_tag[t], r.txn_id],
                                  "tag": t})
        by_tag[t] = r.txn_id

    # P4: each read returns, per object, its latest preceding write's value.
    for rho in h.reads():
        t_rho = w.tag_of[rho.txn_id]
        for pos, oid in enumerate(rho.invocation.read_set):
            best: Optional[TxnRecord] = None
            for wr in writes:
                if oid not in wr.invocation.objects:
                    continue
                if not w.precedes(wr, rho):
                    continue
                if best is None or w.tag_of[wr.txn_id] > w.tag_of[best.txn_id]:
                    best = wr
            if best is None:
                expected = h.config.initial_values[oid - 1]
            else:
                expected = dict(best.invocation.write_set)[oid]
            got = rho.response[pos]  # type: ignore[index]
            if got != expected:
                return Verdict(FAIL, {
                    "condition": "P4", "read": rho.txn_id, "object": oid,
                    "expected_from": None if best is None else best.txn_id,
                    "tag": t_rho})
    return Verdict(PASS)


def brute_force(h: History, cap: int = DEFAULT_ORACLE_CAP) -> Verdict:
    """Search all real-time-consistent total orders for one whose sequential
    replay reproduces every response.  Independent of any tag assignment."""
    if not h.complete:
        raise ValueError("the oracle requires a complete history")
    records = h.records
    n = len(records)
    if n > cap:
        return Verdict(SKIPPED, {"reason": "transaction count beyond oracle cap",
                                 "n": n, "cap": cap})
    if n == 0:
        return Verdict(PASS, {"order": []})

    preds: list[int] = [0] * n
    succs: list[list[int]] = [[] for _ in range(n)]
    for i, a in enumerate(records):
        for j, b in enumerate(records):
            if i != j and realtime_precedes(a, b):
                preds[j] += 1
                succs[i].append(j)

    initial = h.config.initial_state()
    order: list[str] = []
    dead: set[tuple[frozenset, tuple]] = set()

    def extend(remaining: frozenset, state) -> bool:
        if not remaining:
            return True
        memo_key = (remaining, state.values)
        if memo_key in dead:
            return False
        for i in sorted(remaining):
            if preds[i]:
                continue
            rec = records[i]
            resp, nxt = seq_apply(state, rec.invocation)
            if rec.kind == READ and resp != rec.response:
                continue
            for j in succs[i]:
                preds[j] -= 1
            order.append(rec.txn_id)
            if extend(remaining - {i}, nxt):
                return True
            order.pop()
            for j in succs[i]:
                preds[j] += 1
        dead.add(memo_key)
        return False

    if extend(frozenset(range(n)), initial):
        return Verdict(PASS, {"order": list(order)})
    return Verdict(FAIL, {"condition": "NO-SERIALIZATION", "n": n})


def check_nonblocking(h: History, read_request_kinds: frozenset[str]) -> Verdict:
    """PASS iff every server receipt of a read request is answered toward the
    requester within the same handler step."""
    by_step: dict[int, list] = {}
    for ev in h.events:
        by_step.setdefault(ev.step, []).append(ev)
    for ev in h.events:
        if ev.kind != RECV or not ev.proc.startswith("s"):
            continue
        if not ev.payload or ev.payload.get("kind") not in read_request_kinds:
            continue
        replied = any(e.kind == SEND and e.proc == ev.proc and e.peer == ev.peer
                      for e in by_step[ev.step])
        if not replied:
            return Verdict(FAIL, {"server": ev.proc, "step": ev.step,
                                  "msg_id": ev.msg_id,
                                  "request": ev.payload.get("kind")})
    return Verdict(PASS)


@dataclass(frozen=True)
class ReadReport:
    txn_id: str
    rounds: int
    max_versions: int
    fallback: bool

    def wire(self) -> dict:
        return {"txn_id": self.txn_id, "rounds": self.rounds,
                "max_versions": self.max_versions, "fallback": self.fallback}


def count_rounds_and_versions(h: History, baseline_rounds: int = 1) -> dict[str, ReadReport]:
    """Per-read trace metrics.

    A round is one send-then-await exchange: a maximal run of client sends
    uninterrupted by a receipt.  Versions are counted per server response
    payload; a read is a fallback when it needed more rounds than the
    protocol's baseline.
    """
    reports: dict[str, ReadReport] = {}
    for rec in h.reads():
        rounds = 0
        max_versions = 0
        last_was_send = False
        for ev in h.events:
            if ev.txn_id != rec.txn_id or ev.proc != rec.client:
                continue
            if ev.kind == SEND:
                if not last_was_send:
                    rounds += 1
                last_was_send = True
            elif ev.kind == RECV:
                last_was_send = False
                kind = (ev.payload or {}).get("kind")
                counter = _VERSION_COUNTS.get(kind)
                if counter is not None:
                    max_versions = max(max_versions, counter(ev.payload))
        reports[rec.txn_id] = ReadReport(rec.txn_id, rounds, max_versions,
                                         fallback=rounds > baseline_rounds)
    return reports


def check_w_liveness(h: History) -> Verdict:
    """PASS iff all writes completed, and every read that overlapped a write
    completed as well."""
    pending_writes = [r.txn_id for r in h.writes() if not r.complete]
    if pending_writes:
        return Verdict(FAIL, {"pending_writes": pending_writes})
    stuck = []
    for rd in h.reads():
        if rd.complete:
            continue
        overlapping = [wr.txn_id for wr in h.writes()
                       if not (realtime_precedes(wr, rd) or realtime_precedes(rd, wr))]
        if overlapping:
            stuck.append({"read": rd.txn_id, "overlapping_writes": overlapping})
    if stuck:
        return Verdict(FAIL, {"incomplete_reads": stuck})
    return Verdict(PASS)


def close_history(h: History) -> History:
    """Closure of a truncated history for checking: incomplete reads are
    dropped; incomplete writes are treated as acked with an interval open to
    the right (they precede nothing).  Only the oracle applies afterwards;
    witness tags never exist for writes that did not finish."""
    horizon = max((ev.seq for ev in h.events), default=0) + 1
    records = []
    for r in h.records:
        if r.complete:
            records.append(r.copy())
        elif r.kind == WRITE:
            closed = r.copy()
            closed.resp_seq = horizon
            closed.response = ACK
            records.append(closed)
            horizon += 1
    return History(h.config, records, list(h.events))


def count_snapshot_races(h: History) -> int:
    """Reads whose coordinator-chosen key is absent from some contacted
    server's store snapshot, detected purely from message payloads.  This is
    the condition that forces a one-round read into its fallback round, so it
    must equal the number of fallback reads."""
    races = 0
    for rec in h.reads():
        keys = None
        snapshots: dict[int, list] = {}
        for ev in h.events:
            if ev.kind != RECV or ev.txn_id != rec.txn_id or ev.proc != rec.client:
                continue
            payload = ev.payload or {}
            if payload.get("kind") == "TAG-ARRAY":
                keys = payload["keys"]
            elif payload.get("kind") == "VALUES-SNAPSHOT":
                snapshots[int(ev.peer[1:])] = [item[0] for item in payload["items"]]
        if keys is None:
            continue
        if any(keys[oid - 1] not in snapshots.get(oid, [keys[oid - 1]])
               for oid in rec.invocation.read_set):
            races += 1
    return races


def tag_gaps(h: History) -> int:
    """Number of holes in the write-tag sequence (expected 2..m+1, no gaps)."""
    tags = sorted(r.tag for r in h.writes() if r.tag is not None)
    if not tags:
        return 0
    expected = list(range(2, 2 + len(tags)))
    return sum(1 for got, want in zip(tags, expected) if got != want)
