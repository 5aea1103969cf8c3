import itertools
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trapsim.accountable_predecision import (Certificate, NoFraudError, VoteCollector,
                                             extract_pofs, make_vote, run_predecision)
from trapsim.bftcr import (HASH, POFS, RESOLVED, CommitmentList, CommitmentPayload,
                           ProofOfBaiting, WinnerProposal, conflict_pair, pof_list_ok,
                           resolve, select_winner, settle, validate_pob)
from trapsim.crypto_toy import KeyRing, encrypt, decrypt
from trapsim.game_params import ProtocolParams, compute_t0
from trapsim.strategies import V_A, V_B, build_coalition_plan


def cert(ring, n, value, signers):
    return Certificate.from_votes(value, [make_vote(ring, s, value) for s in signers])


def test_vote_collector_quorum_n4():
    ring = KeyRing(4)
    vc = VoteCollector(4, ring)
    assert vc.add(0, make_vote(ring, 0, V_A)) is None
    assert vc.add(0, make_vote(ring, 0, V_A)) is None  # counted once
    assert vc.add(1, make_vote(ring, 2, V_A)) is None  # relayed by the wrong sender
    assert vc.add(1, make_vote(ring, 1, V_A)) is None
    c = vc.add(2, make_vote(ring, 2, V_A))
    assert c is not None and c.signers == {0, 1, 2} and c.is_valid(ring, 4)


def test_certificate_validation():
    ring = KeyRing(4)
    good = cert(ring, 4, V_A, (0, 1, 2))
    assert good.is_valid(ring, 4)
    assert not cert(ring, 4, V_A, (0, 1)).is_valid(ring, 4)
    mixed = Certificate(V_A, good.votes[:2] + (make_vote(ring, 3, V_B),))
    assert not mixed.is_valid(ring, 4)
    assert not Certificate(V_A, good.votes[:2] + (good.votes[0],)).is_valid(ring, 4)


@given(st.integers(4, 16), st.randoms(use_true_random=False))
@settings(max_examples=100, deadline=None)
def test_conflicting_certificates_expose_t0_plus_one(n, rnd):
    """Any two quorums intersect in at least t0 + 1 players; each one yields a proof."""
    ring = KeyRing(n)
    q = n - compute_t0(n)
    a = rnd.sample(range(n), q)
    b = rnd.sample(range(n), q)
    pofs = extract_pofs(ring, cert(ring, n, V_A, a), cert(ring, n, V_B, b))
    assert {p.culprit for p in pofs} == set(a) & set(b)
    assert len(pofs) >= compute_t0(n) + 1
    assert pof_list_ok(ring, pofs, compute_t0(n))


def test_extract_pofs_needs_conflict():
    ring = KeyRing(4)
    c = cert(ring, 4, V_A, (0, 1, 2))
    with pytest.raises(NoFraudError):
        extract_pofs(ring, c, c)


def test_honest_predecision_agrees():
    for seed in range(5):
        got = run_predecision(7, seed=seed)
        assert len(got) == 7 and {p.value for p in got.values()} == {V_A}


def test_split_coalition_yields_two_certificates():
    params = ProtocolParams.corollary(10, 2, 2, 60)
    plan = build_coalition_plan(params, 0, seed=1)
    got = run_predecision(10, plan=plan, seed=1)
    assert {p.value for p in got.values()} == {V_A, V_B}


def test_commitment_payload_codec():
    ring = KeyRing(4)
    h = CommitmentPayload.hash_of(V_A)
    assert CommitmentPayload.decode(h.encode()) == h and h.kind == HASH
    pofs = extract_pofs(ring, cert(ring, 4, V_A, (0, 1, 2)), cert(ring, 4, V_B, (1, 2, 3)))
    p = CommitmentPayload.pofs(pofs)
    assert p.kind == POFS and CommitmentPayload.decode(p.encode()) == p
    assert CommitmentPayload.decode(b"?junk") is None
    assert conflict_pair(pofs) == (V_A, V_B)
    key = b"k" * 16
    assert CommitmentPayload.decode(decrypt(encrypt(p.encode(), key), key)) == p


def test_pof_list_needs_t0_plus_one_culprits():
    ring = KeyRing(7)
    pofs = extract_pofs(ring, cert(ring, 7, V_A, range(5)), cert(ring, 7, V_B, range(2, 7)))
    assert len(pofs) == 3 and pof_list_ok(ring, pofs, 2)
    assert not pof_list_ok(ring, pofs[:2], 2)


def test_proof_of_baiting_validation():
    entry = (5, b"d" * 16)
    lists = {s: CommitmentList(s, (entry,) if s < 2 else ((6, b"e" * 16),)) for s in range(4)}
    pob = ProofOfBaiting(5, entry[1], tuple(lists[s] for s in range(2)))
    assert validate_pob(pob, lists, 1)
    assert not validate_pob(pob, lists, 2)
    forged = ProofOfBaiting(5, entry[1], (CommitmentList(3, (entry,)), lists[0]))
    assert not validate_pob(forged, lists, 1)


def proposal(cands, frauds=(1, 2, 3), pair=(V_A, V_B)):
    return WinnerProposal(tuple(sorted(cands.items())), tuple(frauds), pair)


def test_settle_rewards_winner_and_punishes_the_rest():
    prop = proposal({1: b"k1", 2: b"k2"})
    dec = settle(prop)
    assert dec.kind == RESOLVED and dec.winner in (1, 2)
    assert dec.punished == {1, 2, 3} - {dec.winner}
    assert dec.value == resolve((V_A, V_B)) == min(V_A, V_B)


def test_winner_draw_deterministic_and_roughly_uniform():
    counts = Counter()
    for i in range(3000):
        keys = {j: bytes([i % 256, i // 256, j]) * 4 for j in (4, 7, 9)}
        prop = proposal(keys)
        assert select_winner(prop) == select_winner(prop)
        counts[select_winner(prop)] += 1
    for j in (4, 7, 9):
        assert Fraction(283, 1000) <= Fraction(counts[j], 3000) <= Fraction(383, 1000)


@given(st.dictionaries(st.integers(0, 9), st.binary(min_size=1, max_size=4), min_size=1, max_size=4),
       st.dictionaries(st.integers(0, 9), st.binary(min_size=1, max_size=4), min_size=1, max_size=4))
def test_proposal_merge_is_a_union(a, b):
    pa, pb = proposal(a), proposal(b, frauds=(4,))
    merged = pa.merge(pb)
    assert {j for j, _ in merged.candidates} == set(a) | set(b)
    assert set(merged.frauds) == {1, 2, 3, 4}
    assert merged.well_formed()
    for j, key in merged.candidates:
        assert key == a.get(j, b.get(j))


def test_empty_proposal_is_rejected():
    assert not WinnerProposal((), (), (V_A, V_B)).well_formed()
    with pytest.raises(ValueError):
        select_winner(WinnerProposal((), (), (V_A, V_B)))


def test_commitment_list_digest_depends_on_order():
    e = [(1, b"a" * 16), (2, b"b" * 16)]
    assert CommitmentList(0, tuple(e)).digest != CommitmentList(0, tuple(reversed(e))).digest
    assert all(CommitmentList(0, tuple(p)).digest for p in itertools.permutations(e))
