"""Toy deterministic crypto: keyed-digest signatures, padded commitments, proofs of fraud.

Nothing here is secure in the real-world sense. Signing keys live only inside
a :class:`KeyRing`, so within one simulation a valid tag can only come from
:meth:`KeyRing.sign`.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass, field

PAD_SIZE = 2048
TAG_SIZE = 16
DIGEST_SIZE = 16


def digest(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=DIGEST_SIZE).digest()


@dataclass(frozen=True)
class SignedMessage:
    signer: int
    payload: bytes
    tag: bytes

    def encode(self) -> bytes:
        return struct.pack(">iH", self.signer, len(self.payload)) + self.payload + self.tag

    @staticmethod
    def decode(buf: bytes, offset: int = 0) -> tuple["SignedMessage", int]:
        signer, size = struct.unpack_from(">iH", buf, offset)
        offset += 6
        payload = bytes(buf[offset:offset + size])
        offset += size
        tag = bytes(buf[offset:offset + TAG_SIZE])
        if len(tag) != TAG_SIZE:
            raise ValueError("truncated signed message")
        return SignedMessage(signer, payload, tag), offset + TAG_SIZE


class KeyRing:
    """Holds one secret per player. The only place tags are minted."""

    def __init__(self, n: int, seed: int = 0):
        rng = random.Random(f"keyring:{seed}")
        self.n = n
        self._secrets = [rng.randbytes(32) for _ in range(n)]
        self._checked: dict[tuple[int, bytes, bytes], bool] = {}

    def _tag(self, signer: int, payload: bytes) -> bytes:
        return hashlib.blake2b(payload, key=self._secrets[signer], digest_size=TAG_SIZE).digest()

    def sign(self, signer: int, payload: bytes) -> SignedMessage:
        if not 0 <= signer < self.n:
            raise ValueError(f"unknown signer {signer}")
        return SignedMessage(signer, payload, self._tag(signer, payload))

    def verify(self, msg: SignedMessage) -> bool:
        if not isinstance(msg, SignedMessage) or not 0 <= msg.signer < self.n:
            return False
        key = (msg.signer, msg.payload, msg.tag)
        ok = self._checked.get(key)
        if ok is None:
            ok = self._tag(msg.signer, msg.payload) == msg.tag
            self._checked[key] = ok
        return ok


# -- commitments --------------------------------------------------------------

@dataclass(frozen=True)
class Commitment:
    owner: int
    ciphertext: bytes
    mac: bytes
    digest: bytes = field(compare=False, default=b"")

    def __post_init__(self):
        if not self.digest:
            object.__setattr__(self, "digest", digest(self.ciphertext + self.mac))


def _keystream(key: bytes) -> int:
    return int.from_bytes(hashlib.shake_256(b"ks" + key).digest(PAD_SIZE), "big")


def _pad(payload: bytes) -> bytes:
    if len(payload) > PAD_SIZE - 4:
        raise ValueError(f"payload of {len(payload)} bytes exceeds pad size")
    return struct.pack(">I", len(payload)) + payload + bytes(PAD_SIZE - 4 - len(payload))


def encrypt(payload: bytes, key: bytes, owner: int = -1) -> Commitment:
    plain = _pad(payload)
    ct = (int.from_bytes(plain, "big") ^ _keystream(key)).to_bytes(PAD_SIZE, "big")
    mac = hashlib.blake2b(plain, key=key[:64], digest_size=TAG_SIZE).digest()
    return Commitment(owner, ct, mac)


def decrypt(commitment: Commitment, key: bytes) -> bytes | None:
    """Original payload, or None when the key does not match."""
    if not isinstance(key, (bytes, bytearray)) or not key:
        return None
    plain = (int.from_bytes(commitment.ciphertext, "big") ^ _keystream(key)).to_bytes(PAD_SIZE, "big")
    if hashlib.blake2b(plain, key=key[:64], digest_size=TAG_SIZE).digest() != commitment.mac:
        return None
    (size,) = struct.unpack_from(">I", plain)
    if size > PAD_SIZE - 4:
        return None
    return plain[4:4 + size]


# -- votes and proofs of fraud -------------------------------------------------

def encode_vote(round_tag: int, value: bytes) -> bytes:
    return b"vote|%d|" % round_tag + value


def decode_vote(payload: bytes) -> tuple[int, bytes] | None:
    parts = payload.split(b"|", 2)
    if len(parts) != 3 or parts[0] != b"vote":
        return None
    try:
        return int(parts[1]), parts[2]
    except ValueError:
        return None


def conflicting(payload_a: bytes, payload_b: bytes) -> bool:
    """Two votes for different values in the same round."""
    a, b = decode_vote(payload_a), decode_vote(payload_b)
    return a is not None and b is not None and a[0] == b[0] and a[1] != b[1]


@dataclass(frozen=True)
class ProofOfFraud:
    culprit: int
    msg_a: SignedMessage
    msg_b: SignedMessage


def pof_build(ring: KeyRing, msg_a: SignedMessage, msg_b: SignedMessage) -> ProofOfFraud | None:
    if msg_a.signer != msg_b.signer or msg_a == msg_b:
        return None
    if not (ring.verify(msg_a) and ring.verify(msg_b)):
        return None
    if not conflicting(msg_a.payload, msg_b.payload):
        return None
    # canonical order so equal evidence encodes identically
    if msg_b.payload < msg_a.payload:
        msg_a, msg_b = msg_b, msg_a
    return ProofOfFraud(msg_a.signer, msg_a, msg_b)


def pof_verify(ring: KeyRing, pof: ProofOfFraud) -> bool:
    return (
        pof.msg_a.signer == pof.culprit == pof.msg_b.signer
        and pof.msg_a != pof.msg_b
        and ring.verify(pof.msg_a)
        and ring.verify(pof.msg_b)
        and conflicting(pof.msg_a.payload, pof.msg_b.payload)
    )


def encode_pofs(pofs) -> bytes:
    items = sorted(pofs, key=lambda p: p.culprit)
    out = [struct.pack(">H", len(items))]
    for p in items:
        out.append(p.msg_a.encode())
        out.append(p.msg_b.encode())
    return b"".join(out)


def decode_pofs(buf: bytes) -> list[ProofOfFraud] | None:
    try:
        (count,) = struct.unpack_from(">H", buf)
        offset = 2
        pofs = []
        for _ in range(count):
            a, offset = SignedMessage.decode(buf, offset)
            b, offset = SignedMessage.decode(buf, offset)
            pofs.append(ProofOfFraud(a.signer, a, b))
        if offset != len(buf):
            return None
        return pofs
    except (struct.error, ValueError):
        return None
