"""Deterministic discrete-event simulation of asynchronous reliable channels.

Processes are single-threaded state machines driven entirely by this module:
each simulation step either delivers one in-flight envelope or starts one
pending client transaction, and the chosen process's handler runs atomically
to completion (its state change plus outbound sends happen within the step).
Channels are unordered per-pair bags: delivery order within a channel is a
scheduler choice, never FIFO.

Scheduling is pluggable: a seeded random policy (reproducible bit-for-bit
from the seed), a scripted choice list, and bounded-exhaustive exploration
over every delivery/invocation interleaving.  Exploration deduplicates
interleavings whose per-process event subsequences coincide; such schedules
are permutations of one another that no process can distinguish.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .core import History, Invocation, SystemConfig, TxnRecord

INV = "INV"
RESP = "RESP"
SEND = "SEND"
RECV = "RECV"
HANDLER_STEP = "HANDLER-STEP"

#: Scheduler action shapes: ("invoke", client_name) or ("deliver", msg_id).
Action = tuple[str, object]


class ChannelPolicyError(AssertionError):
    """A process sent a message over a channel the protocol does not declare."""


class ProtocolInvariantError(AssertionError):
    """A protocol-internal impossibility occurred (e.g. a missing version)."""


class QuiescenceBudgetExceeded(RuntimeError):
    """The step budget ran out before the network drained: a liveness bug.

    Carries the partial :class:`History` for diagnosis.
    """

    def __init__(self, history: History, steps: int):
        super().__init__(f"no quiescence within {steps} steps")
        self.history = history
        self.steps = steps


@dataclass(frozen=True)
class ProcessId:
    """Identity of a simulated process.

    ``coordinator-server`` marks the server that additionally holds the
    write log in the coordinator-based protocols; it is still server
    ``s{index}``.
    """

    role: str
    index: int

    ROLES = ("writer", "reader", "server", "coordinator-server")

    def __post_init__(self) -> None:
        if self.role not in self.ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def name(self) -> str:
        prefix = {"writer": "w", "reader": "r",
                  "server": "s", "coordinator-server": "s"}[self.role]
        return f"{prefix}{self.index}"

    @property
    def is_server(self) -> bool:
        return self.role in ("server", "coordinator-server")

    @property
    def is_client(self) -> bool:
        return self.role in ("writer", "reader")


def role_prefix(name: str) -> str:
    return name[0]


@dataclass(frozen=True)
class Envelope:
    """One in-flight message; delivered exactly once, never lost or reordered
    relative to anything (each delivery is an independent scheduler choice)."""

    msg_id: int
    frm: str
    to: str
    payload: object
    sent_seq: int
    txn_id: Optional[str] = None


@dataclass(frozen=True)
class TraceEvent:
    """One entry of the execution trace.

    Every handler execution opens with a HANDLER-STEP marker; all events
    sharing its ``step`` number happened atomically inside that handler.
    """

    seq: int
    step: int
    kind: str
    proc: str
    txn_id: Optional[str] = None
    msg_id: Optional[int] = None
    peer: Optional[str] = None
    payload: Optional[dict] = None
    note: Optional[str] = None

    def wire(self) -> dict:
        detail: dict = {}
        if self.kind == SEND:
            detail = {"msg_id": self.msg_id, "to": self.peer, "payload": self.payload}
        elif self.kind == RECV:
            detail = {"msg_id": self.msg_id, "from": self.peer, "payload": self.payload}
        elif self.kind == INV:
            detail = {"invocation": self.payload}
        elif self.kind == RESP:
            detail = self.payload or {}
        elif self.kind == HANDLER_STEP:
            detail = {"action": self.note}
            if self.msg_id is not None:
                detail["msg_id"] = self.msg_id
        return {"seq": self.seq, "step": self.step, "kind": self.kind,
                "proc": self.proc, "txn_id": self.txn_id, "detail": detail}

    @classmethod
    def from_wire(cls, d: dict) -> "TraceEvent":
        kind = d["kind"]
        detail = d.get("detail") or {}
        msg_id = detail.get("msg_id")
        peer = payload = note = None
        if kind == SEND:
            peer, payload = detail.get("to"), detail.get("payload")
        elif kind == RECV:
            peer, payload = detail.get("from"), detail.get("payload")
        elif kind == INV:
            payload = detail.get("invocation")
        elif kind == RESP:
            payload = detail
        elif kind == HANDLER_STEP:
            note = detail.get("action")
        return cls(int(d["seq"]), int(d["step"]), kind, d["proc"], d.get("txn_id"),
                   msg_id if msg_id is None else int(msg_id), peer, payload, note)


class Process:
    """A protocol state machine.  Handlers must be deterministic functions of
    (state, input) and perform all their effects through the context."""

    def __init__(self, pid: ProcessId):
        self.pid = pid

    @property
    def name(self) -> str:
        return self.pid.name

    def clone(self) -> "Process":
        raise NotImplementedError

    def on_invoke(self, inv: Invocation, ctx: "StepContext") -> None:
        raise NotImplementedError(f"{self.name} is not a client")

    def on_message(self, frm: str, payload, ctx: "StepContext") -> None:
        raise NotImplementedError


class StepContext:
    """Effect interface handed to a handler for the duration of one step."""

    def __init__(self, world: "World", proc: str, txn_id: Optional[str]):
        self._world = world
        self.proc = proc
        self.txn_id = txn_id

    def send(self, to: str, payload, txn_id: Optional[str] = None) -> None:
        self._world._send(self.proc, to, payload,
                          self.txn_id if txn_id is None else txn_id)

    def complete(self, response, tag: Optional[int] = None) -> None:
        """Finish the calling client's open transaction."""
        self._world._complete(self.proc, response, tag)

    def bump(self, counter: str, by: int = 1) -> None:
        """Increment a named run statistic (e.g. protocol fallback counts)."""
        self._world.stats[counter] = self._world.stats.get(counter, 0) + by


class RandomPolicy:
    """Uniform choice among enabled actions, reproducible from the seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(seed)

    def choose(self, world: "World", actions: Sequence[Action]) -> int:
        return self._rng.randrange(len(actions))


class ScriptedPolicy:
    """Replays an explicit choice-index list; after it is exhausted, always
    picks the first enabled action (deterministic drain)."""

    def __init__(self, choices: Sequence[int]):
        self.choices = list(choices)
        self._pos = 0

    def choose(self, world: "World", actions: Sequence[Action]) -> int:
        if self._pos < len(self.choices):
            idx = self.choices[self._pos]
            self._pos += 1
            if not 0 <= idx < len(actions):
                raise IndexError(f"scripted choice {idx} out of range "
                                 f"({len(actions)} enabled actions)")
            return idx
        return 0


class World:
    """Full simulation state: processes, pending scripts, in-flight bag,
    records, and the trace.  ``clone`` yields an independent copy; identical
    action sequences applied to clones produce identical traces."""

    def __init__(self, config: SystemConfig, processes: dict[str, Process],
                 scripts: dict[str, tuple[Invocation, ...]],
                 arrival: Optional[tuple[str, ...]] = None,
                 client_to_client: bool = False):
        self.config = config
        self.processes = processes
        self.scripts = {c: tuple(s) for c, s in scripts.items()}
        self.arrival = arrival
        self.client_to_client = client_to_client
        self.script_pos: dict[str, int] = {c: 0 for c in self.scripts}
        self.arrival_pos = 0
        self.in_flight: list[Envelope] = []
        self.events: list[TraceEvent] = []
        self.records: list[TxnRecord] = []
        self.rec_by_id: dict[str, TxnRecord] = {}
        self.open_txn: dict[str, str] = {}
        self.txn_counter: dict[str, int] = {}
        self.stats: dict[str, int] = {}
        self._next_msg = 1
        self._next_seq = 1
        self._step_no = 0
        self._sig: dict[str, bytes] = {}

    # -- state management -------------------------------------------------

    def clone(self) -> "World":
        w = World.__new__(World)
        w.config = self.config
        w.processes = {n: p.clone() for n, p in self.processes.items()}
        w.scripts = self.scripts
        w.arrival = self.arrival
        w.client_to_client = self.client_to_client
        w.script_pos = dict(self.script_pos)
        w.arrival_pos = self.arrival_pos
        w.in_flight = list(self.in_flight)
        w.events = list(self.events)
        w.records = [r.copy() for r in self.records]
        w.rec_by_id = {r.txn_id: r for r in w.records}
        w.open_txn = dict(self.open_txn)
        w.txn_counter = dict(self.txn_counter)
        w.stats = dict(self.stats)
        w._next_msg = self._next_msg
        w._next_seq = self._next_seq
        w._step_no = self._step_no
        w._sig = dict(self._sig)
        return w

    def history(self) -> History:
        return History(self.config, list(self.records), list(self.events),
                       dict(self.stats))

    def signature_digest(self) -> bytes:
        """Digest of the per-process event subsequences (message ids and the
        global interleaving excluded): the canonical identity of a run."""
        items = sorted(self._sig.items())
        return hashlib.blake2b(repr(items).encode("ascii"), digest_size=16).digest()

    # -- scheduling --------------------------------------------------------

    def enabled_actions(self) -> list[Action]:
        """Canonically ordered choices: client invocations first (writer then
        reader order), then every in-flight envelope by send order."""
        actions: list[Action] = []
        for c in self.config.clients:
            if c in self.open_txn:
                continue
            if self.script_pos.get(c, 0) >= len(self.scripts.get(c, ())):
                continue
            if (self.arrival is not None and self.arrival_pos < len(self.arrival)
                    and self.arrival[self.arrival_pos] != c):
                continue
            actions.append(("invoke", c))
        for env in self.in_flight:
            actions.append(("deliver", env.msg_id))
        return actions

    @property
    def quiescent(self) -> bool:
        return not self.enabled_actions()

    def apply(self, action: Action) -> list[TraceEvent]:
        """Run one atomic step; returns the trace events it appended."""
        start = len(self.events)
        self._step_no += 1
        kind, arg = action
        if kind == "invoke":
            self._apply_invoke(str(arg))
        elif kind == "deliver":
            self._apply_deliver(int(arg))  # type: ignore[arg-type]
        else:
            raise ValueError(f"unknown action {action!r}")
        return self.events[start:]

    def _apply_invoke(self, client: str) -> None:
        inv = self.scripts[client][self.script_pos[client]]
        self.script_pos[client] += 1
        if (self.arrival is not None and self.arrival_pos < len(self.arrival)
                and self.arrival[self.arrival_pos] == client):
            self.arrival_pos += 1
        n = self.txn_counter.get(client, 0) + 1
        self.txn_counter[client] = n
        txn_id = f"{client}:{n}"
        self._emit(HANDLER_STEP, client, txn_id=txn_id, note="invoke")
        seq = self._emit(INV, client, txn_id=txn_id, payload=inv.wire())
        rec = TxnRecord(txn_id, client, inv, inv_seq=seq)
        self.records.append(rec)
        self.rec_by_id[txn_id] = rec
        self.open_txn[client] = txn_id
        self.processes[client].on_invoke(inv, StepContext(self, client, txn_id))

    def _apply_deliver(self, msg_id: int) -> None:
        env = self._take(msg_id)
        self._emit(HANDLER_STEP, env.to, txn_id=env.txn_id, note="deliver",
                   msg_id=env.msg_id)
        self._emit(RECV, env.to, txn_id=env.txn_id, msg_id=env.msg_id,
                   peer=env.frm, payload=env.payload.wire())
        self.processes[env.to].on_message(env.frm, env.payload,
                                          StepContext(self, env.to, env.txn_id))

    def _take(self, msg_id: int) -> Envelope:
        for i, env in enumerate(self.in_flight):
            if env.msg_id == msg_id:
                return self.in_flight.pop(i)
        raise KeyError(f"envelope {msg_id} not in flight")

    # -- handler effects ---------------------------------------------------

    def _send(self, frm: str, to: str, payload, txn_id: Optional[str]) -> None:
        self._check_channel(frm, to)
        msg_id = self._next_msg
        self._next_msg += 1
        seq = self._emit(SEND, frm, txn_id=txn_id, msg_id=msg_id, peer=to,
                         payload=payload.wire())
        self.in_flight.append(Envelope(msg_id, frm, to, payload, seq, txn_id))

    def _complete(self, client: str, response, tag: Optional[int]) -> None:
        txn_id = self.open_txn.pop(client, None)
        if txn_id is None:
            raise ProtocolInvariantError(f"{client} completed with no open transaction")
        rec = self.rec_by_id[txn_id]
        detail = {"response": rec_response_wire(response), "tag": tag}
        rec.resp_seq = self._emit(RESP, client, txn_id=txn_id, payload=detail)
        rec.response = response
        rec.tag = tag

    def _check_channel(self, frm: str, to: str) -> None:
        a, b = role_prefix(frm), role_prefix(to)
        if a == "s" and b == "s":
            raise ChannelPolicyError(f"server-to-server send {frm}->{to}")
        if a in "wr" and b in "wr" and not self.client_to_client:
            raise ChannelPolicyError(
                f"client-to-client send {frm}->{to} not declared by this protocol")

    def _emit(self, kind: str, proc: str, txn_id: Optional[str] = None,
              msg_id: Optional[int] = None, peer: Optional[str] = None,
              payload: Optional[dict] = None, note: Optional[str] = None) -> int:
        seq = self._next_seq
        self._next_seq += 1
        self.events.append(TraceEvent(seq, self._step_no, kind, proc, txn_id,
                                      msg_id, peer, payload, note))
        if kind != HANDLER_STEP:
            # msg ids and global ordering deliberately excluded: the rolling
            # digest identifies the per-process view only.
            canon = json.dumps([kind, peer, payload, txn_id],
                               sort_keys=True, separators=(",", ":")).encode()
            prev = self._sig.get(proc, b"")
            self._sig[proc] = hashlib.blake2b(prev + canon, digest_size=16).digest()
        return seq


def rec_response_wire(response) -> object:
    from .core import ACK, _b64
    if response == ACK:
        return ACK
    return [_b64(v) for v in response]


def step(world: World, policy) -> Optional[list[TraceEvent]]:
    """Advance one step under the policy; None signals quiescence."""
    actions = world.enabled_actions()
    if not actions:
        return None
    return world.apply(actions[policy.choose(world, actions)])


def run_to_quiescence(world: World, policy, max_steps: int = 10_000) -> History:
    """Drive the world until nothing is enabled, then return its History.

    Raises :class:`QuiescenceBudgetExceeded` (with the partial history) if
    the budget runs out first, which for these finite workloads signals a
    protocol liveness bug.
    """
    for _ in range(max_steps):
        if step(world, policy) is None:
            return world.history()
    if world.quiescent:
        return world.history()
    raise QuiescenceBudgetExceeded(world.history(), max_steps)


def describe_action(world: World, action: Action) -> str:
    kind, arg = action
    if kind == "invoke":
        return f"invoke {arg}"
    for env in world.in_flight:
        if env.msg_id == arg:
            payload_kind = env.payload.wire().get("kind", "?")
            return f"deliver {payload_kind} {env.frm}->{env.to}"
    return f"deliver msg:{arg}"


class Exploration:
    """Bounded-exhaustive DFS over scheduler choices.

    Iterating yields the History of each quiescent run, one per distinct
    per-process event signature, in deterministic order.  After iteration,
    ``complete`` tells whether every interleaving inside the bounds was
    covered; ``nodes`` counts distinct explored states.
    """

    def __init__(self, world: World, max_depth: int = 64,
                 node_limit: int = 1_000_000):
        self._root = world
        self.max_depth = max_depth
        self.node_limit = node_limit
        self.complete = True
        self.nodes = 0
        self.histories = 0

    def __iter__(self) -> Iterator[History]:
        return self._run()

    def _run(self) -> Iterator[History]:
        visited = {self._root.signature_digest()}
        root_actions = self._root.enabled_actions()
        if not root_actions:
            self.histories += 1
            yield self._root.history()
            return
        # Frames: (world, its enabled actions, next action index, depth).
        stack: list[list] = [[self._root, root_actions, 0, 0]]
        while stack:
            frame = stack[-1]
            world, actions, idx, depth = frame
            if idx >= len(actions):
                stack.pop()
                continue
            frame[2] += 1
            if self.nodes >= self.node_limit:
                self.complete = False
                return
            succ = world.clone()
            succ.apply(actions[idx])
            self.nodes += 1
            sig = succ.signature_digest()
            if sig in visited:
                continue
            visited.add(sig)
            succ_actions = succ.enabled_actions()
            if not succ_actions:
                self.histories += 1
                yield succ.history()
            elif depth + 1 >= self.max_depth:
                self.complete = False
            else:
                stack.append([succ, succ_actions, 0, depth + 1])


def explore(world: World, max_depth: int = 64,
            node_limit: int = 1_000_000) -> Exploration:
    """Stream every maximal execution reachable by permuting enabled-action
    choices, deduplicated by canonical event signature."""
    return Exploration(world, max_depth=max_depth, node_limit=node_limit)
