"""One-round multi-version protocol: snapshot reads, the merged coordinator
envelope, and the documented coordinator/snapshot race with its fallback."""

import pytest

from snowlab import checker
from snowlab.core import read_txn, write_txn
from snowlab.harness import run_plan
from snowlab.protocols.algo_c import PROTO_C
from snowlab.simnet import RECV, SEND, RandomPolicy, run_to_quiescence

from conftest import build_world, run_random

W12 = write_txn((1, b"5"), (2, b"7"))


def sends_by_kind(h, kind):
    return [e for e in h.events if e.kind == SEND and e.payload["kind"] == kind]


def test_fresh_read_is_one_round_with_initial_values():
    h = run_random("c", 2, {"r1": (read_txn(1, 2),)}, seed=1)
    rec = h.records[0]
    assert rec.response == (b"", b"")
    assert rec.tag == 1
    report = checker.count_rounds_and_versions(h, 1)[rec.txn_id]
    assert report.rounds == 1 and not report.fallback


def test_write_completes_before_read_key_availability_holds(drain_first):
    world = build_world("c", 2, {"w1": (W12,), "r1": (read_txn(1, 2),)},
                        arrival=("w1", "r1"))
    h = run_to_quiescence(world, drain_first)
    read = h.reads()[0]
    assert read.response == (b"5", b"7")
    assert read.tag == 2
    report = checker.count_rounds_and_versions(h, 1)[read.txn_id]
    assert report.rounds == 1
    assert report.max_versions == 2  # both servers hold initial + one write
    assert h.stats.get("fallback_reads", 0) == 0


def test_merged_coordinator_envelope_when_reading_its_object():
    h = run_random("c", 2, {"r1": (read_txn(1, 2),)}, seed=2)
    merged = sends_by_kind(h, "GET-TAG-ARRAY+READ-VALUES")
    assert len(merged) == 1 and merged[0].peer == "s1"
    # no separate plain requests went to the coordinator
    assert all(e.peer != "s1" for e in sends_by_kind(h, "GET-TAG-ARRAY"))
    assert all(e.peer != "s1" for e in sends_by_kind(h, "READ-VALUES"))


def test_separate_envelopes_when_coordinator_object_not_read():
    h = run_random("c", 2, {"r1": (read_txn(2),)}, seed=3)
    assert len(sends_by_kind(h, "GET-TAG-ARRAY")) == 1
    assert len(sends_by_kind(h, "READ-VALUES")) == 1
    assert not sends_by_kind(h, "GET-TAG-ARRAY+READ-VALUES")


RACE_PLAN = [
    "invoke r1",                      # read volley goes up first
    "invoke w1",
    "deliver READ-VALUES r1->s2",     # s2 snapshots before the write lands
    "deliver WRITE-VALUE w1->s1",
    "deliver WRITE-VALUE w1->s2",
    "deliver ACK-VALUE s1->w1",
    "deliver ACK-VALUE s2->w1",
    "deliver UPDATE-COORD w1->s1",    # coordinator now knows the write
    "deliver ACK-COORD s1->w1",
    "deliver GET-TAG-ARRAY+READ-VALUES r1->s1",  # tag array postdates it
]


def test_scripted_race_triggers_fallback_and_stays_safe():
    world = build_world("c", 2, {"w1": (W12,), "r1": (read_txn(1, 2),)})
    h = run_plan(world, RACE_PLAN)
    read = h.reads()[0]
    assert read.response == (b"5", b"7")
    assert read.tag == 2
    report = checker.count_rounds_and_versions(h, 1)[read.txn_id]
    assert report.fallback and report.rounds == 2
    assert h.stats["fallback_reads"] == 1
    assert checker.count_snapshot_races(h) == 1
    # the extra round targets exactly the missing object
    fallback_fetches = sends_by_kind(h, "READ-VALUE")
    assert [e.peer for e in fallback_fetches] == ["s2"]
    assert checker.check_witness(h, checker.witness_from_history(h)).ok
    assert checker.brute_force(h).ok


def test_sequential_runs_never_fall_back(drain_first):
    scripts = {
        "w1": (W12, write_txn((1, b"8"))),
        "w2": (write_txn((2, b"9"),),),
        "r1": (read_txn(1, 2), read_txn(1)),
        "r2": (read_txn(2),),
    }
    world = build_world("c", 2, scripts)
    h = run_to_quiescence(world, drain_first)
    assert h.stats.get("fallback_reads", 0) == 0
    assert checker.count_snapshot_races(h) == 0
    for report in checker.count_rounds_and_versions(h, 1).values():
        assert report.rounds == 1


def test_snapshot_grows_with_writes_touching_the_object(drain_first):
    scripts = {"w1": (write_txn((1, b"a")), write_txn((1, b"b")),
                      write_txn((1, b"c"))),
               "r1": (read_txn(1),)}
    world = build_world("c", 2, scripts, arrival=("w1", "w1", "w1", "r1"))
    h = run_to_quiescence(world, drain_first)
    read = h.reads()[0]
    assert read.response == (b"c",)
    report = checker.count_rounds_and_versions(h, 1)[read.txn_id]
    assert report.max_versions == 4  # initial version plus three writes


@pytest.mark.parametrize("seed", range(25))
def test_safety_and_shape_across_random_schedules(seed):
    scripts = {
        "w1": (W12,),
        "w2": (write_txn((2, b"9"), (3, b"1")),),
        "r1": (read_txn(1, 2, 3),),
        "r2": (read_txn(2), read_txn(1, 3)),
    }
    h = run_random("c", 3, scripts, seed=seed)
    assert h.complete
    reports = checker.count_rounds_and_versions(h, 1)
    fallbacks = sum(1 for r in reports.values() if r.fallback)
    assert fallbacks == h.stats.get("fallback_reads", 0)
    assert fallbacks == checker.count_snapshot_races(h)
    for report in reports.values():
        assert report.rounds == (2 if report.fallback else 1)
    assert checker.check_nonblocking(h, PROTO_C.read_request_kinds).ok
    assert checker.check_witness(h, checker.witness_from_history(h)).ok
    assert checker.brute_force(h).ok
    assert checker.check_w_liveness(h).ok
