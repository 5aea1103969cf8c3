import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trapsim import rb_explore
from trapsim.game_params import compute_t0
from trapsim.reliable_broadcast import (DELIVERED, ECHO, READY, SEND, RBError, RBInstance,
                                        payload_digest)

X = b"payload-x"
HX = payload_digest(X)


def test_start_fans_out_and_guards():
    inst = RBInstance(0, 0, 4, 1)
    assert inst.start(X) == [("RB", 0, SEND, HX, X)]
    with pytest.raises(RBError):
        inst.start(X)
    with pytest.raises(RBError):
        RBInstance(1, 0, 4, 1).start(X)


def test_echo_threshold_n4():
    inst = RBInstance(1, 0, 4, 1)
    out, _ = inst.handle(0, SEND, HX, X)
    assert out == [("RB", 0, ECHO, HX, X)]
    for s in (0, 2):
        assert inst.handle(s, ECHO, HX, X)[0] == []
    out, _ = inst.handle(3, ECHO, HX, X)
    assert out == [("RB", 0, READY, HX, X)]


def test_ready_amplification_n4():
    inst = RBInstance(1, 0, 4, 1)
    assert inst.handle(2, READY, HX, X)[0] == []
    out, delivered = inst.handle(3, READY, HX, X)
    assert out == [("RB", 0, READY, HX, X)] and delivered is None
    _, delivered = inst.handle(0, READY, HX, X)
    assert delivered == X and inst.phase == DELIVERED


def test_duplicates_and_conflicts_counted_once():
    inst = RBInstance(1, 0, 4, 1)
    other = payload_digest(b"y")
    inst.handle(2, ECHO, HX, X)
    inst.handle(2, ECHO, HX, X)
    inst.handle(2, ECHO, other, b"y")
    assert len(inst.echo_set[HX]) == 1 and other not in inst.echo_set


def test_bad_payload_and_wrong_source_dropped():
    inst = RBInstance(1, 0, 4, 1)
    assert inst.handle(0, SEND, HX, b"not-x") == ([], None)
    assert inst.handle(2, SEND, HX, X) == ([], None)
    assert not inst.sent_echo


def test_delivers_at_most_once():
    inst = RBInstance(1, 0, 4, 1)
    got = [inst.handle(s, READY, HX, X)[1] for s in (0, 2, 3)]
    assert got == [None, None, X]
    other = payload_digest(b"y")
    for s in (0, 2, 3):
        assert inst.handle(s, READY, other, b"y")[1] is None
    assert inst.delivered == X


def _broadcast(n, order_seed, equivocate=False):
    """Full run with a random delivery order; a Byzantine source may split its SEND."""
    t0 = compute_t0(n)
    rng = random.Random(order_seed)
    insts = [RBInstance(p, 0, n, t0) for p in range(n)]
    pending = []
    if equivocate:
        byz = set(range(t0))
        for r in range(n):
            pay = X if r % 2 else b"payload-y"
            pending.append((0, r, ("RB", 0, SEND, payload_digest(pay), pay)))
    else:
        byz = set()
        first = insts[0].start(X)
        pending += [(0, r, m) for r in range(n) for m in first]
    while pending:
        sender, r, msg = pending.pop(rng.randrange(len(pending)))
        if r in byz:
            continue
        out, _ = insts[r].handle(sender, *msg[2:])
        pending += [(r, q, m) for m in out for q in range(n)]
    return [i.delivered for p, i in enumerate(insts) if p not in byz]


@given(st.integers(4, 10), st.integers(0, 10_000))
@settings(max_examples=80, deadline=None)
def test_validity_with_correct_source(n, seed):
    assert set(_broadcast(n, seed)) == {X}


@given(st.integers(4, 10), st.integers(0, 10_000))
@settings(max_examples=80, deadline=None)
def test_agreement_with_equivocating_source(n, seed):
    got = _broadcast(n, seed, equivocate=True)
    values = {v for v in got if v is not None}
    assert len(values) <= 1
    if values:
        assert None not in got


def test_exhaustive_n4_is_clean():
    res = rb_explore.explore_exhaustive(4)
    assert res.ok, res.violations[:3]
    assert res.runs == 7 and res.states > 100_000


def test_exhaustive_n4_catches_weak_echo_threshold():
    n = 4
    res = rb_explore.explore_exhaustive(n, echo_threshold=n - compute_t0(n) - 1)
    assert not res.ok
    assert res.violations[0].kind == "agreement"


def test_random_n7_clean_and_catches_weak_threshold():
    assert rb_explore.explore_random(7, runs=600, seed=3).ok
    bad = rb_explore.explore_random(7, runs=2000, seed=0, echo_threshold=4)
    assert not bad.ok


def test_send_plans_are_distinct_classes():
    plans = list(rb_explore.send_plans(4))
    assert len(plans) == 6
    assert all(len(p) == 3 for p in plans)
