"""Workload generation, experiment orchestration, and campaign aggregation.

An experiment builds a world from a workload, drives it (one seeded random
schedule, a scripted schedule, or bounded-exhaustive exploration), closes the
run by draining the network, and applies the selected checkers to every
resulting history.  Campaigns aggregate verdicts, round/version histograms,
fallback counters, tag gaps, and a determinism digest over the serialized
histories; rerunning with identical inputs reproduces the digest byte for
byte.
"""

from __future__ import annotations

import json
import random
import string
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import checker, trace
from .core import History, Invocation, read_txn, write_txn
from .protocols import get_protocol
from .protocols.common import ProtocolSpec
from .simnet import (QuiescenceBudgetExceeded, RandomPolicy, ScriptedPolicy,
                     World, describe_action, explore, run_to_quiescence)

ALL_CHECKS = ("witness", "oracle", "snow")

EXIT_OK = 0
EXIT_SAFETY = 2
EXIT_LIVENESS = 3
EXIT_USAGE = 64


@dataclass(frozen=True)
class Exhaustive:
    """Policy marker: explore every interleaving within the bounds."""

    max_depth: int = 64
    node_limit: int = 1_000_000


@dataclass
class Workload:
    """A protocol, an object count, and one transaction script per client."""

    protocol: str
    k: int
    scripts: dict[str, tuple[Invocation, ...]]
    arrival: Optional[tuple[str, ...]] = None
    initial_values: tuple = ()

    def __post_init__(self) -> None:
        proto = get_protocol(self.protocol)
        n_writers = sum(1 for c in self.scripts if c.startswith("w"))
        n_readers = sum(1 for c in self.scripts if c.startswith("r"))
        config = proto.make_config(self.k, max(n_writers, 1), max(n_readers, 1),
                                   self.initial_values)
        for client, script in self.scripts.items():
            if client not in config.clients:
                raise ValueError(f"unknown client {client!r}")
            for inv in script:
                if client.startswith("w") and inv.kind != "WRITE":
                    raise ValueError(f"writer {client} scripted with a {inv.kind}")
                if client.startswith("r") and inv.kind != "READ":
                    raise ValueError(f"reader {client} scripted with a {inv.kind}")
                if any(i > self.k for i in inv.objects):
                    raise ValueError(f"object id beyond k={self.k} in {client} script")
        self.n_writers = max(n_writers, 1)
        self.n_readers = max(n_readers, 1)
        self.total_txns = sum(len(s) for s in self.scripts.values())

    def build_world(self) -> World:
        proto = get_protocol(self.protocol)
        config = proto.make_config(self.k, self.n_writers, self.n_readers,
                                   self.initial_values)
        return World(config, proto.build(config), self.scripts,
                     arrival=self.arrival,
                     client_to_client=proto.client_to_client)


def generate_workload(protocol: str, seed: int, k: int = 4, n_writers: int = 1,
                      n_readers: int = 1, n_txns: int = 4,
                      value_len: int = 3) -> Workload:
    """Random scripts: each transaction goes to a uniformly chosen client;
    writers write random object subsets with random lowercase values, readers
    read random subsets."""
    rng = random.Random(f"workload:{seed}")
    clients = [f"w{i}" for i in range(1, n_writers + 1)] + \
              [f"r{i}" for i in range(1, n_readers + 1)]
    scripts: dict[str, list[Invocation]] = {c: [] for c in clients}
    for _ in range(n_txns):
        client = rng.choice(clients)
        size = rng.randint(1, k)
        objects = sorted(rng.sample(range(1, k + 1), size))
        if client.startswith("w"):
            pairs = tuple(
                (oid, "".join(rng.choices(string.ascii_lowercase, k=value_len)).encode())
                for oid in objects)
            scripts[client].append(write_txn(*pairs))
        else:
            scripts[client].append(read_txn(*objects))
    return Workload(protocol, k, {c: tuple(s) for c, s in scripts.items()})


def canonical_snow_scenario(protocol: str) -> Workload:
    """Two servers, one write to both objects, two reads of both objects.

    The read-capable client population is protocol-shaped: the single-reader
    protocol runs both reads back to back at its one reader, the others give
    each read its own client."""
    w = write_txn((1, b"x1"), (2, b"y1"))
    r = read_txn(1, 2)
    if get_protocol(protocol).single_reader:
        scripts = {"w1": (w,), "r1": (r, r)}
    else:
        scripts = {"w1": (w,), "r1": (r,), "r2": (r,)}
    return Workload(protocol, 2, scripts)


def run_plan(world: World, plan: Sequence[str], drain: bool = True,
             max_steps: int = 10_000) -> History:
    """Drive a world through a hand-written schedule.

    Each plan entry is matched (by prefix) against the canonical action
    descriptions, e.g. ``"invoke w1"`` or ``"deliver WRITE-VALUE w1->s2"``;
    afterwards the run is drained deterministically.
    """
    for want in plan:
        actions = world.enabled_actions()
        for action in actions:
            if describe_action(world, action).startswith(want):
                world.apply(action)
                break
        else:
            have = [describe_action(world, a) for a in actions]
            raise ValueError(f"no enabled action matches {want!r}; have {have}")
    if drain:
        return run_to_quiescence(world, ScriptedPolicy([]), max_steps=max_steps)
    return world.history()


# -- verdicts and reports -----------------------------------------------------

@dataclass
class HistoryVerdict:
    history_id: str
    witness: Optional[checker.Verdict]
    oracle: Optional[checker.Verdict]
    nonblocking: Optional[checker.Verdict]
    liveness: Optional[checker.Verdict]
    reads: dict[str, checker.ReadReport]
    tag_gaps: int
    snapshot_races: int

    @property
    def safety_failure(self) -> bool:
        if self.oracle is not None and self.oracle.failed:
            return True
        # An unconfirmed witness failure is treated as a safety failure; a
        # witness failure the oracle overrules is only "witness-insufficient"
        # (the four conditions are sufficient, not necessary).
        if self.witness is not None and self.witness.failed:
            return self.oracle is None or not self.oracle.ok
        return False

    @property
    def witness_insufficient(self) -> bool:
        return (self.witness is not None and self.witness.failed
                and self.oracle is not None and self.oracle.ok)

    @property
    def cross_violation(self) -> bool:
        return (self.witness is not None and self.witness.ok
                and self.oracle is not None and self.oracle.failed)

    def wire(self) -> dict:
        def v(x):
            return None if x is None else x.wire()
        return {
            "history_id": self.history_id,
            "witness": v(self.witness),
            "oracle": v(self.oracle),
            "snow": {
                "nonblocking": v(self.nonblocking),
                "reads": [r.wire() for r in self.reads.values()],
                "liveness": v(self.liveness),
            },
            "tag_gaps": self.tag_gaps,
            "snapshot_races": self.snapshot_races,
        }


@dataclass
class ExperimentReport:
    protocol: str
    checks: tuple[str, ...]
    n_histories: int = 0
    verdicts: list[HistoryVerdict] = field(default_factory=list)
    rounds_histogram: Counter = field(default_factory=Counter)
    versions_histogram: Counter = field(default_factory=Counter)
    reads_total: int = 0
    fallback_reads: int = 0
    snapshot_races: int = 0
    protocol_fallback_stat: int = 0
    tag_gaps_total: int = 0
    safety_failures: int = 0
    liveness_failures: int = 0
    witness_insufficient: int = 0
    cross_violations: int = 0
    oracle_skipped: int = 0
    exploration_complete: bool = True
    explored_nodes: int = 0
    digest: str = ""
    elapsed_s: float = 0.0
    failure_examples: list[dict] = field(default_factory=list)

    @property
    def fallback_rate(self) -> float:
        return self.fallback_reads / self.reads_total if self.reads_total else 0.0

    def exit_code(self) -> int:
        if self.safety_failures or self.cross_violations:
            return EXIT_SAFETY
        if self.liveness_failures:
            return EXIT_LIVENESS
        return EXIT_OK

    def wire(self) -> dict:
        return {
            "protocol": self.protocol,
            "checks": list(self.checks),
            "n_histories": self.n_histories,
            "rounds_histogram": dict(sorted(self.rounds_histogram.items())),
            "versions_histogram": dict(sorted(self.versions_histogram.items())),
            "reads_total": self.reads_total,
            "fallback_reads": self.fallback_reads,
            "fallback_rate": self.fallback_rate,
            "snapshot_races": self.snapshot_races,
            "protocol_fallback_stat": self.protocol_fallback_stat,
            "tag_gaps_total": self.tag_gaps_total,
            "safety_failures": self.safety_failures,
            "liveness_failures": self.liveness_failures,
            "witness_insufficient": self.witness_insufficient,
            "cross_violations": self.cross_violations,
            "oracle_skipped": self.oracle_skipped,
            "exploration_complete": self.exploration_complete,
            "explored_nodes": self.explored_nodes,
            "determinism_digest": self.digest,
            "elapsed_s": round(self.elapsed_s, 3),
            "failure_examples": self.failure_examples,
        }

    def summary(self) -> str:
        lines = [
            f"protocol={self.protocol} histories={self.n_histories} "
            f"reads={self.reads_total} safety_failures={self.safety_failures} "
            f"liveness_failures={self.liveness_failures}",
            f"rounds={dict(sorted(self.rounds_histogram.items()))} "
            f"versions={dict(sorted(self.versions_histogram.items()))}",
            f"fallback_reads={self.fallback_reads} "
            f"(rate={self.fallback_rate:.4f}, races={self.snapshot_races}, "
            f"protocol_stat={self.protocol_fallback_stat}) "
            f"tag_gaps={self.tag_gaps_total}",
            f"witness_insufficient={self.witness_insufficient} "
            f"cross_violations={self.cross_violations} "
            f"oracle_skipped={self.oracle_skipped}",
            f"digest={self.digest} elapsed={self.elapsed_s:.2f}s",
        ]
        if not self.exploration_complete:
            lines.append("WARNING: exploration truncated (bounds hit); "
                         "results cover only the explored prefix")
        return "\n".join(lines)


def check_history(h: History, proto: ProtocolSpec,
                  checks: Sequence[str] = ALL_CHECKS,
                  oracle_cap: int = checker.DEFAULT_ORACLE_CAP,
                  sample_seed: int = 0) -> HistoryVerdict:
    """Apply the selected checkers to one complete history."""
    witness_v = oracle_v = nonblocking_v = liveness_v = None
    if "witness" in checks and proto.has_tags and h.complete:
        witness_v = checker.check_witness(h, checker.witness_from_history(h))
    if "oracle" in checks and h.complete:
        oracle_v = _oracle_with_sampling(h, oracle_cap, sample_seed)
    reads = {}
    if "snow" in checks:
        nonblocking_v = checker.check_nonblocking(h, proto.read_request_kinds)
        liveness_v = checker.check_w_liveness(h)
        reads = checker.count_rounds_and_versions(h, proto.baseline_rounds)
    return HistoryVerdict(
        history_id=trace.history_id(h),
        witness=witness_v,
        oracle=oracle_v,
        nonblocking=nonblocking_v,
        liveness=liveness_v,
        reads=reads,
        tag_gaps=checker.tag_gaps(h) if proto.has_tags else 0,
        snapshot_races=checker.count_snapshot_races(h),
    )


def _oracle_with_sampling(h: History, cap: int, sample_seed: int) -> checker.Verdict:
    """The full oracle within the cap; beyond it, a sound sub-history: every
    write is kept (dropping one could orphan a read's values) and reads are
    sampled to fill the budget.  A sub-history failure implies the full
    history fails; a pass only covers the sampled reads."""
    if len(h.records) <= cap:
        return checker.brute_force(h, cap)
    writes = h.writes()
    if len(writes) >= cap:
        return checker.Verdict(checker.SKIPPED,
                               {"reason": "write count beyond oracle cap",
                                "writes": len(writes), "cap": cap})
    rng = random.Random(f"oracle-sample:{sample_seed}")
    reads = h.reads()
    sampled = rng.sample(reads, min(len(reads), cap - len(writes)))
    keep = {r.txn_id for r in writes} | {r.txn_id for r in sampled}
    sub = History(h.config, [r for r in h.records if r.txn_id in keep], h.events)
    verdict = checker.brute_force(sub, cap)
    detail = dict(verdict.detail)
    detail["sampled_reads"] = sorted(r.txn_id for r in sampled)
    return checker.Verdict(verdict.status, detail)


def _fold(report: ExperimentReport, h: History, v: HistoryVerdict) -> None:
    report.n_histories += 1
    report.verdicts.append(v)
    for rr in v.reads.values():
        report.rounds_histogram[rr.rounds] += 1
        report.versions_histogram[rr.max_versions] += 1
        report.reads_total += 1
        if rr.fallback:
            report.fallback_reads += 1
    report.snapshot_races += v.snapshot_races
    report.protocol_fallback_stat += h.stats.get("fallback_reads", 0)
    report.tag_gaps_total += v.tag_gaps
    if v.safety_failure:
        report.safety_failures += 1
        if len(report.failure_examples) < 5:
            report.failure_examples.append({
                "history_id": v.history_id,
                "witness": None if v.witness is None else v.witness.wire(),
                "oracle": None if v.oracle is None else v.oracle.wire(),
                "records": [r.wire() for r in h.records],
            })
    if v.liveness is not None and v.liveness.failed:
        report.liveness_failures += 1
    if v.witness_insufficient:
        report.witness_insufficient += 1
    if v.cross_violation:
        report.cross_violations += 1
    if v.oracle is not None and v.oracle.status == checker.SKIPPED:
        report.oracle_skipped += 1
    if v.nonblocking is not None and v.nonblocking.failed:
        report.safety_failures += 1


def run_experiment(workload: Workload, policy,
                   checks: Sequence[str] = ALL_CHECKS,
                   oracle_cap: int = checker.DEFAULT_ORACLE_CAP,
                   max_steps: int = 10_000,
                   out_dir: Optional[str] = None) -> ExperimentReport:
    """Execute one workload under one policy and check every history.

    ``policy`` is a scheduling policy (random or scripted) for a single run,
    or :class:`Exhaustive` for bounded exploration of all interleavings.
    """
    proto = get_protocol(workload.protocol)
    report = ExperimentReport(workload.protocol, tuple(checks))
    started = time.perf_counter()
    digest_acc = _DigestAccumulator()

    def handle(h: History) -> None:
        digest_acc.add(h)
        v = check_history(h, proto, checks, oracle_cap)
        _fold(report, h, v)
        if out_dir is not None and (v.safety_failure or report.n_histories == 1):
            _write_trace(out_dir, v.history_id, h)

    if isinstance(policy, Exhaustive):
        stream = explore(workload.build_world(), policy.max_depth, policy.node_limit)
        for h in stream:
            handle(h)
        report.exploration_complete = stream.complete
        report.explored_nodes = stream.nodes
    else:
        try:
            handle(run_to_quiescence(workload.build_world(), policy, max_steps))
        except QuiescenceBudgetExceeded as stuck:
            report.liveness_failures += 1
            report.n_histories += 1
            v = checker.check_w_liveness(stuck.history)
            report.failure_examples.append({
                "history_id": trace.history_id(stuck.history),
                "liveness": v.wire(),
                "reason": f"no quiescence within {stuck.steps} steps",
            })
    report.digest = digest_acc.hexdigest()
    report.elapsed_s = time.perf_counter() - started
    if out_dir is not None:
        _write_report(out_dir, report)
    return report


def fuzz_campaign(protocol: str, n_runs: int, seed0: int,
                  checks: Sequence[str] = ALL_CHECKS,
                  k: int = 4, max_writers: int = 3, max_readers: int = 3,
                  max_txns: int = 8,
                  oracle_cap: int = checker.DEFAULT_ORACLE_CAP,
                  out_dir: Optional[str] = None) -> ExperimentReport:
    """``n_runs`` random-schedule experiments with seeds seed0..seed0+n-1,
    each over a freshly generated workload of the campaign shape."""
    if n_runs < 1:
        raise ValueError("need at least one run")
    proto = get_protocol(protocol)
    report = ExperimentReport(protocol, tuple(checks))
    started = time.perf_counter()
    digest_acc = _DigestAccumulator()
    for seed in range(seed0, seed0 + n_runs):
        shape_rng = random.Random(f"shape:{seed}")
        n_writers = shape_rng.randint(1, max_writers)
        n_readers = 1 if proto.single_reader else shape_rng.randint(1, max_readers)
        n_txns = shape_rng.randint(1, max_txns)
        workload = generate_workload(protocol, seed, k=k, n_writers=n_writers,
                                     n_readers=n_readers, n_txns=n_txns)
        try:
            h = run_to_quiescence(workload.build_world(), RandomPolicy(seed))
        except QuiescenceBudgetExceeded as stuck:
            report.liveness_failures += 1
            report.n_histories += 1
            report.failure_examples.append({
                "seed": seed,
                "reason": f"no quiescence within {stuck.steps} steps",
            })
            continue
        digest_acc.add(h)
        v = check_history(h, proto, checks, oracle_cap, sample_seed=seed)
        _fold(report, h, v)
        if v.safety_failure and out_dir is not None:
            _write_trace(out_dir, v.history_id, h)
    report.digest = digest_acc.hexdigest()
    report.elapsed_s = time.perf_counter() - started
    if out_dir is not None:
        _write_report(out_dir, report)
    return report


class _DigestAccumulator:
    def __init__(self) -> None:
        import hashlib
        self._acc = hashlib.sha256()

    def add(self, h: History) -> None:
        self._acc.update(trace.dumps(h).encode())
        self._acc.update(b"\n")

    def hexdigest(self) -> str:
        return self._acc.hexdigest()


def _write_trace(out_dir: str, history_id: str, h: History) -> None:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / f"trace-{history_id}.json").write_text(trace.dumps(h, pretty=True))


def _write_report(out_dir: str, report: ExperimentReport) -> None:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / "report.json").write_text(json.dumps(report.wire(), indent=2, sort_keys=True))
    (path / "report.txt").write_text(report.summary() + "\n")
