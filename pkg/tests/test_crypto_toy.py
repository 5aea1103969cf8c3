import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trapsim.crypto_toy import (PAD_SIZE, KeyRing, ProofOfFraud, SignedMessage, conflicting,
                                decode_pofs, decode_vote, decrypt, encode_pofs, encode_vote,
                                encrypt, pof_build, pof_verify)

FUZZ_CASES = 10_000


def test_sign_verify_roundtrip():
    ring = KeyRing(4, seed=1)
    msg = ring.sign(2, b"hello")
    assert ring.verify(msg)
    assert not ring.verify(SignedMessage(1, b"hello", msg.tag))
    assert not ring.verify(SignedMessage(2, b"hellp", msg.tag))
    assert not KeyRing(4, seed=2).verify(msg)
    with pytest.raises(ValueError):
        ring.sign(4, b"x")


def test_signature_fuzz():
    """Random payloads with one random byte or the signer changed never verify."""
    ring = KeyRing(7, seed=3)
    rng = random.Random(99)
    forged = 0
    for _ in range(FUZZ_CASES):
        signer = rng.randrange(7)
        payload = rng.randbytes(rng.randrange(1, 48))
        msg = ring.sign(signer, payload)
        assert ring.verify(msg)
        choice = rng.randrange(3)
        if choice == 0:
            i = rng.randrange(len(payload))
            bad = payload[:i] + bytes([payload[i] ^ (1 + rng.randrange(255))]) + payload[i + 1:]
            tampered = SignedMessage(signer, bad, msg.tag)
        elif choice == 1:
            tampered = SignedMessage((signer + 1 + rng.randrange(6)) % 7, payload, msg.tag)
        else:
            i = rng.randrange(len(msg.tag))
            tag = msg.tag[:i] + bytes([msg.tag[i] ^ 0x5A]) + msg.tag[i + 1:]
            tampered = SignedMessage(signer, payload, tag)
        forged += ring.verify(tampered)
    assert forged == 0


@given(st.integers(-2**31, 2**31 - 1), st.binary(max_size=300), st.binary(min_size=16, max_size=16))
def test_signed_message_codec(signer, payload, tag):
    msg = SignedMessage(signer, payload, tag)
    raw = msg.encode() + b"tail"
    back, offset = SignedMessage.decode(raw)
    assert back == msg and raw[offset:] == b"tail"


@given(st.binary(max_size=PAD_SIZE - 4), st.binary(min_size=16, max_size=32))
def test_commitment_roundtrip(payload, key):
    c = encrypt(payload, key, owner=3)
    assert decrypt(c, key) == payload
    assert len(c.ciphertext) == PAD_SIZE


def test_commitment_hides_length_and_rejects_wrong_keys():
    rng = random.Random(5)
    a = encrypt(b"x", b"k" * 16)
    b = encrypt(b"y" * 1000, b"k" * 16)
    assert len(a.ciphertext) == len(b.ciphertext)
    for _ in range(FUZZ_CASES):
        assert decrypt(a, rng.randbytes(16)) is None
    assert decrypt(a, b"") is None
    with pytest.raises(ValueError):
        encrypt(b"z" * PAD_SIZE, b"k" * 16)


def test_commitment_digest_binds_ciphertext():
    a = encrypt(b"same", b"k1" * 8)
    b = encrypt(b"same", b"k2" * 8)
    assert a.digest != b.digest


@given(st.integers(0, 9), st.binary(min_size=1, max_size=20).filter(lambda b: b"|" not in b))
def test_vote_codec(rnd, value):
    assert decode_vote(encode_vote(rnd, value)) == (rnd, value)


def test_decode_vote_rejects_garbage():
    assert decode_vote(b"nope") is None
    assert decode_vote(b"vote|x|v") is None


def test_pof_build_and_verify():
    ring = KeyRing(4, seed=0)
    a = ring.sign(1, encode_vote(0, b"A"))
    b = ring.sign(1, encode_vote(0, b"B"))
    pof = pof_build(ring, a, b)
    assert pof is not None and pof.culprit == 1 and pof_verify(ring, pof)
    # order-insensitive
    assert pof_build(ring, b, a) == pof
    # same value, other round, other signer, or forged: no proof
    assert pof_build(ring, a, a) is None
    assert pof_build(ring, a, ring.sign(1, encode_vote(1, b"B"))) is None
    assert pof_build(ring, a, ring.sign(2, encode_vote(0, b"B"))) is None
    forged = SignedMessage(1, encode_vote(0, b"C"), b"\0" * 16)
    assert pof_build(ring, a, forged) is None
    assert not pof_verify(ring, ProofOfFraud(1, a, forged))
    assert not pof_verify(ring, ProofOfFraud(2, a, b))
    assert conflicting(a.payload, b.payload)


def test_pof_fuzz_never_accepts_honest_pairs():
    ring = KeyRing(10, seed=8)
    rng = random.Random(8)
    for _ in range(FUZZ_CASES):
        p = rng.randrange(10)
        rnd = rng.randrange(3)
        value = rng.choice((b"A", b"B"))
        a = ring.sign(p, encode_vote(rnd, value))
        other = ring.sign(p, encode_vote(rng.randrange(3), value))
        assert pof_build(ring, a, other) is None


@given(st.lists(st.tuples(st.integers(0, 6), st.sampled_from([b"A", b"B", b"C"])), max_size=8))
def test_pof_list_codec(items):
    ring = KeyRing(7, seed=1)
    pofs = []
    for signer, value in {s: v for s, v in items}.items():
        other = b"Z"
        pofs.append(pof_build(ring, ring.sign(signer, encode_vote(0, value)),
                              ring.sign(signer, encode_vote(0, other))))
    raw = encode_pofs(pofs)
    back = decode_pofs(raw)
    assert back == sorted(pofs, key=lambda p: p.culprit)
    assert decode_pofs(raw + b"x") is None
    assert decode_pofs(raw[:-1]) is None or not pofs
