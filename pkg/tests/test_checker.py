"""Witness conditions, the brute-force oracle, monitors, and cross-route
soundness on simulated corpora."""

import pytest
from hypothesis import given, strategies as st

from snowlab import checker
from snowlab.checker import (FAIL, PASS, SKIPPED, Verdict, Witness, brute_force,
                             check_nonblocking, check_w_liveness, check_witness,
                             close_history, witness_from_history)
from snowlab.core import (ACK, History, SystemConfig, TxnRecord, read_txn,
                          write_txn)
from snowlab.harness import check_history, generate_workload
from snowlab.protocols import get_protocol
from snowlab.simnet import RandomPolicy, TraceEvent, run_to_quiescence

CONFIG = SystemConfig("naive", 2, ("w1", "w2"), ("r1", "r2"))


def wrec(txn_id, pairs, inv, resp, tag=None, client="w1"):
    return TxnRecord(txn_id, client, write_txn(*pairs), inv, resp, ACK, tag)


def rrec(txn_id, ids, inv, resp, values, tag=None, client="r1"):
    return TxnRecord(txn_id, client, read_txn(*ids), inv, resp,
                     None if values is None else tuple(values), tag)


def hist(*records) -> History:
    return History(CONFIG, list(records))


class TestWitness:
    def test_sequential_write_then_read_passes(self):
        h = hist(wrec("w1:1", ((1, b"5"), (2, b"7")), 1, 2, tag=2),
                 rrec("r1:1", (1, 2), 3, 4, (b"5", b"7"), tag=2))
        assert check_witness(h, witness_from_history(h)).ok

    def test_read_before_write_with_larger_tag_fails_p2(self):
        h = hist(rrec("r1:1", (1,), 1, 2, (b"",), tag=3),
                 wrec("w1:1", ((1, b"5"),), 3, 4, tag=2))
        v = check_witness(h, witness_from_history(h))
        assert v.failed and v.detail["condition"] == "P2"

    def test_two_writes_sharing_a_tag_fail_p3(self):
        h = hist(wrec("w1:1", ((1, b"5"),), 1, 2, tag=2),
                 wrec("w2:1", ((2, b"7"),), 3, 4, tag=2, client="w2"))
        v = check_witness(h, witness_from_history(h))
        assert v.failed and v.detail["condition"] == "P3"

    def test_read_missing_a_preceding_write_fails_p4(self):
        h = hist(wrec("w1:1", ((2, b"x"),), 1, 2, tag=2),
                 rrec("r1:1", (2,), 3, 4, (b"",), tag=3))
        v = check_witness(h, witness_from_history(h))
        assert v.failed and v.detail["condition"] == "P4"

    def test_nonpositive_tag_fails_p1(self):
        h = hist(wrec("w1:1", ((1, b"5"),), 1, 2, tag=0))
        v = check_witness(h, witness_from_history(h))
        assert v.failed and v.detail["condition"] == "P1"

    def test_missing_tag_is_an_input_error(self):
        h = hist(wrec("w1:1", ((1, b"5"),), 1, 2, tag=2),
                 rrec("r1:1", (1,), 3, 4, (b"5",)))
        with pytest.raises(ValueError):
            witness_from_history(h)
        with pytest.raises(ValueError):
            check_witness(h, Witness({"w1:1": 2}))

    def test_incomplete_history_rejected(self):
        h = hist(wrec("w1:1", ((1, b"5"),), 1, None))
        with pytest.raises(ValueError):
            check_witness(h, Witness({"w1:1": 2}))

    @given(st.lists(st.tuples(st.sampled_from(["READ", "WRITE"]),
                              st.integers(1, 4)),
                    min_size=2, max_size=6))
    def test_order_is_irreflexive_and_transitive(self, shape):
        records = []
        for i, (kind, tag) in enumerate(shape):
            if kind == "WRITE":
                records.append(wrec(f"t{i}", ((1, b"x"),), 2 * i + 1,
                                    2 * i + 2, tag=tag))
            else:
                records.append(rrec(f"t{i}", (1,), 2 * i + 1, 2 * i + 2,
                                    (b"",), tag=tag))
        w = Witness({r.txn_id: r.tag for r in records})
        for a in records:
            assert not w.precedes(a, a)
            for b in records:
                for c in records:
                    if w.precedes(a, b) and w.precedes(b, c):
                        assert w.precedes(a, c)


class TestBruteForce:
    def test_single_initial_read_passes(self):
        h = hist(rrec("r1:1", (1, 2), 1, 2, (b"", b"")))
        v = brute_force(h)
        assert v.ok and v.detail["order"] == ["r1:1"]

    def test_fractured_read_fails(self):
        h = hist(wrec("w1:1", ((1, b"1"), (2, b"1")), 1, 2),
                 rrec("r1:1", (1, 2), 3, 4, (b"1", b"")))
        v = brute_force(h)
        assert v.failed and v.detail["condition"] == "NO-SERIALIZATION"

    def test_concurrent_read_of_pre_state_serializes_before_the_write(self):
        # Both orders are real-time consistent; only [read, write] replays.
        h = hist(wrec("w1:1", ((1, b"1"),), 1, 4),
                 rrec("r1:1", (1,), 2, 3, (b"",)))
        v = brute_force(h)
        assert v.ok and v.detail["order"] == ["r1:1", "w1:1"]

    def test_realtime_order_is_respected(self):
        # The read follows the write in real time, so reading the pre-state
        # is a violation even though values alone could serialize.
        h = hist(wrec("w1:1", ((1, b"1"),), 1, 2),
                 rrec("r1:1", (1,), 3, 4, (b"",)))
        assert brute_force(h).failed

    def test_cap_exceeded_is_skipped_not_failed(self):
        records = [wrec(f"w1:{i}", ((1, bytes([i])),), 2 * i + 1, 2 * i + 2)
                   for i in range(9)]
        v = brute_force(hist(*records))
        assert v.status == SKIPPED

    def test_relabeling_transaction_ids_preserves_the_verdict(self):
        a = hist(wrec("w1:1", ((1, b"1"), (2, b"1")), 1, 2),
                 rrec("r1:1", (1, 2), 3, 4, (b"1", b"")))
        b = hist(wrec("w1:9", ((1, b"1"), (2, b"1")), 1, 2),
                 rrec("r2:3", (1, 2), 3, 4, (b"1", b""), client="r2"))
        assert brute_force(a).status == brute_force(b).status

    def test_empty_history_passes(self):
        assert brute_force(hist()).ok


def ev(seq, step, kind, proc, msg_id=None, peer=None, payload=None):
    return TraceEvent(seq, step, kind, proc, None, msg_id, peer, payload)


class TestNonblocking:
    KINDS = frozenset({"READ-REQ"})

    def test_empty_trace_passes_vacuously(self):
        assert check_nonblocking(hist(), self.KINDS).ok

    def test_deferred_reply_fails(self):
        h = History(CONFIG, [], [
            ev(1, 1, "HANDLER-STEP", "s1"),
            ev(2, 1, "RECV", "s1", 1, "r1", {"kind": "READ-REQ"}),
            ev(3, 2, "HANDLER-STEP", "s1"),
            ev(4, 2, "RECV", "s1", 2, "w1", {"kind": "WRITE-VALUE"}),
            ev(5, 2, "SEND", "s1", 3, "r1", {"kind": "VALUE"}),
        ])
        v = check_nonblocking(h, self.KINDS)
        assert v.failed and v.detail["step"] == 1

    def test_same_step_reply_passes(self):
        h = History(CONFIG, [], [
            ev(1, 1, "HANDLER-STEP", "s1"),
            ev(2, 1, "RECV", "s1", 1, "r1", {"kind": "READ-REQ"}),
            ev(3, 1, "SEND", "s1", 2, "r1", {"kind": "VALUE"}),
        ])
        assert check_nonblocking(h, self.KINDS).ok


class TestLiveness:
    def test_pending_write_fails(self):
        h = hist(wrec("w1:1", ((1, b"1"),), 1, None))
        v = check_w_liveness(h)
        assert v.failed and v.detail["pending_writes"] == ["w1:1"]

    def test_no_writes_passes_vacuously(self):
        assert check_w_liveness(hist(rrec("r1:1", (1,), 1, 2, (b"",)))).ok

    def test_incomplete_read_overlapping_a_write_fails(self):
        h = hist(wrec("w1:1", ((1, b"1"),), 1, 4),
                 rrec("r1:1", (1,), 2, None, None))
        assert check_w_liveness(h).failed

    def test_incomplete_read_after_all_writes_is_tolerated(self):
        h = hist(wrec("w1:1", ((1, b"1"),), 1, 2),
                 rrec("r1:1", (1,), 3, None, None))
        assert check_w_liveness(h).ok


class TestClosure:
    def test_drops_incomplete_reads_and_acks_pending_writes(self):
        h = hist(wrec("w1:1", ((1, b"1"),), 1, 2),
                 wrec("w2:1", ((2, b"2"),), 3, None, client="w2"),
                 rrec("r1:1", (1,), 4, None, None))
        closed = close_history(h)
        assert [r.txn_id for r in closed.records] == ["w1:1", "w2:1"]
        assert closed.complete
        assert brute_force(closed).ok
        # the synthesized completion precedes nothing
        from snowlab.core import realtime_precedes
        assert not realtime_precedes(closed.records[1], closed.records[0])


@pytest.mark.parametrize("protocol", ["a", "b", "c"])
def test_witness_pass_implies_oracle_pass_on_random_corpus(protocol):
    proto = get_protocol(protocol)
    for seed in range(40):
        wl = generate_workload(protocol, seed, k=3,
                               n_writers=2, n_readers=1, n_txns=5)
        h = run_to_quiescence(wl.build_world(), RandomPolicy(seed))
        v = check_history(h, proto)
        assert not v.cross_violation
        assert v.witness is not None and v.witness.ok
        assert v.oracle is not None and v.oracle.ok
