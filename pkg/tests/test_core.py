import pytest
from hypothesis import given, strategies as st

from snowlab.core import (ACK, Invocation, MalformedInvocation, SequentialState,
                          TxnRecord, read_txn, realtime_precedes, seq_apply,
                          write_txn)


def state(*values: bytes) -> SequentialState:
    return SequentialState(tuple(values))


class TestSeqApply:
    def test_write_overwrites_exactly_its_positions(self):
        resp, nxt = seq_apply(state(b"0", b"0", b"0"),
                              write_txn((1, b"5"), (2, b"7")))
        assert resp == ACK
        assert nxt.values == (b"5", b"7", b"0")

    def test_read_projects_without_mutation(self):
        s = state(b"5", b"7", b"9")
        resp, nxt = seq_apply(s, read_txn(1, 3))
        assert resp == (b"5", b"9")
        assert nxt is s

    def test_read_of_initial_state_returns_initial_values(self):
        s = SequentialState.initial(4)
        resp, nxt = seq_apply(s, read_txn(1, 2, 3, 4))
        assert resp == (b"", b"", b"", b"")
        assert nxt == s

    def test_object_id_beyond_k_rejected(self):
        with pytest.raises(MalformedInvocation):
            seq_apply(state(b"a"), read_txn(2))


class TestInvocationShape:
    def test_empty_read_set_rejected(self):
        with pytest.raises(MalformedInvocation):
            Invocation("READ", read_set=())

    def test_duplicate_objects_rejected(self):
        with pytest.raises(MalformedInvocation):
            Invocation("READ", read_set=(1, 1))
        with pytest.raises(MalformedInvocation):
            Invocation("WRITE", write_set=((2, b"x"), (2, b"y")))

    def test_unsorted_write_set_rejected(self):
        with pytest.raises(MalformedInvocation):
            Invocation("WRITE", write_set=((3, b"x"), (1, b"y")))

    def test_helpers_sort(self):
        assert read_txn(3, 1).read_set == (1, 3)
        assert write_txn((2, b"b"), (1, b"a")).write_set == ((1, b"a"), (2, b"b"))


values_st = st.binary(max_size=3)


@given(st.lists(values_st, min_size=1, max_size=6), st.data())
def test_read_is_pure_projection(vals, data):
    s = state(*vals)
    k = len(vals)
    ids = data.draw(st.sets(st.integers(1, k), min_size=1))
    resp, nxt = seq_apply(s, read_txn(*ids))
    assert nxt == s
    assert resp == tuple(vals[i - 1] for i in sorted(ids))


@given(st.lists(values_st, min_size=1, max_size=6), st.data())
def test_write_changes_exactly_the_write_set(vals, data):
    s = state(*vals)
    k = len(vals)
    ids = sorted(data.draw(st.sets(st.integers(1, k), min_size=1)))
    pairs = [(i, data.draw(values_st)) for i in ids]
    resp, nxt = seq_apply(s, write_txn(*pairs))
    assert resp == ACK
    written = dict(pairs)
    for i in range(1, k + 1):
        if i in written:
            assert nxt.values[i - 1] == written[i]
        else:
            assert nxt.values[i - 1] == vals[i - 1]


def rec(txn_id: str, inv_seq: int, resp_seq=None) -> TxnRecord:
    return TxnRecord(txn_id, "w1", write_txn((1, b"v")), inv_seq, resp_seq,
                     ACK if resp_seq else None)


class TestRealtimePrecedes:
    def test_complete_before_invocation(self):
        assert realtime_precedes(rec("a", 1, 4), rec("b", 9))

    def test_not_when_response_follows(self):
        assert not realtime_precedes(rec("a", 1, 9), rec("b", 4, 6))

    def test_incomplete_precedes_nothing(self):
        assert not realtime_precedes(rec("a", 1), rec("b", 100, 101))

    @given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)),
                    min_size=2, max_size=6))
    def test_irreflexive_partial_order(self, intervals):
        records = [rec(f"t{i}", a, a + b + 1) for i, (a, b) in enumerate(intervals)]
        for a in records:
            assert not realtime_precedes(a, a)
            for b in records:
                if realtime_precedes(a, b):
                    assert not realtime_precedes(b, a)
                for c in records:
                    if realtime_precedes(a, b) and realtime_precedes(b, c):
                        assert realtime_precedes(a, c)
