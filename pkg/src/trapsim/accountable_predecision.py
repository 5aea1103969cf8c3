"""One-round signed-vote consensus that yields certified predecisions.

A player predecides the first value for which it holds ``n - t0`` votes from
distinct signers, or adopts a valid certificate relayed by someone else as
long as it certifies the value the player itself voted for.
Two certificates for different values always share at least ``t0 + 1``
signers, and each shared signer can be turned into a proof of fraud.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .crypto_toy import (KeyRing, ProofOfFraud, SignedMessage, decode_vote, digest,
                         encode_vote, pof_build)
from .game_params import compute_t0

PREDECISION_ROUND = 0


@dataclass(frozen=True)
class Certificate:
    value: bytes
    votes: tuple  # SignedMessage, sorted by signer

    @classmethod
    def from_votes(cls, value: bytes, votes) -> "Certificate":
        return cls(value, tuple(sorted(votes, key=lambda v: v.signer)))

    @property
    def signers(self) -> frozenset:
        return frozenset(v.signer for v in self.votes)

    def canonical(self) -> bytes:
        parts = [struct.pack(">H", len(self.value)), self.value]
        for v in self.votes:
            parts.append(v.encode())
        return b"".join(parts)

    @property
    def digest(self) -> bytes:
        return digest(self.canonical())

    def is_valid(self, ring: KeyRing, n: int, round_tag: int = PREDECISION_ROUND) -> bool:
        if not self.value:
            return False
        seen = set()
        for v in self.votes:
            if v.signer in seen or not ring.verify(v):
                return False
            if decode_vote(v.payload) != (round_tag, self.value):
                return False
            seen.add(v.signer)
        return len(seen) >= n - compute_t0(n)


@dataclass(frozen=True)
class Predecision:
    value: bytes
    certificate: Certificate


class VoteCollector:
    """Counts at most one vote per signer; reports the first value to reach quorum."""

    def __init__(self, n: int, ring: KeyRing, round_tag: int = PREDECISION_ROUND):
        self.n = n
        self.quorum = n - compute_t0(n)
        self.ring = ring
        self.round_tag = round_tag
        self._by_value: dict[bytes, list] = {}
        self._counted: set = set()
        self.certified: Certificate | None = None

    def add(self, sender: int, msg: SignedMessage) -> Certificate | None:
        if msg.signer != sender or sender in self._counted or not self.ring.verify(msg):
            return None
        decoded = decode_vote(msg.payload)
        if decoded is None or decoded[0] != self.round_tag or not decoded[1]:
            return None
        self._counted.add(sender)
        votes = self._by_value.setdefault(decoded[1], [])
        votes.append(msg)
        if self.certified is None and len(votes) >= self.quorum:
            self.certified = Certificate.from_votes(decoded[1], votes)
            return self.certified
        return None


def make_vote(ring: KeyRing, signer: int, value: bytes,
              round_tag: int = PREDECISION_ROUND) -> SignedMessage:
    return ring.sign(signer, encode_vote(round_tag, value))


class NoFraudError(ValueError):
    pass


def extract_pofs(ring: KeyRing, cert_a: Certificate, cert_b: Certificate) -> list[ProofOfFraud]:
    """One proof of fraud per signer present in both certificates."""
    if cert_a.value == cert_b.value:
        raise NoFraudError("certificates agree; there is no fraud to extract")
    by_signer = {v.signer: v for v in cert_b.votes}
    pofs = []
    for va in cert_a.votes:
        vb = by_signer.get(va.signer)
        if vb is None:
            continue
        pof = pof_build(ring, va, vb)
        if pof is not None:
            pofs.append(pof)
    return sorted(pofs, key=lambda p: p.culprit)


def run_predecision(n: int, inputs: dict | None = None, plan=None, policy=None,
                    seed: int = 0, ring: KeyRing | None = None) -> dict:
    """Run only the vote layer; returns {correct player: Predecision}.

    ``plan`` is a coalition plan whose members vote ``v_A`` towards partition
    A and ``v_B`` towards partition B.
    """
    from .strategies import build_players
    from .net_sim import SchedulePolicy, run_until_quiescent

    ring = ring or KeyRing(n, seed)
    if policy is None:
        policy = SchedulePolicy("fifo", seed)
    players, nodes = build_players(n, ring, plan=plan, inputs=inputs, seed=seed,
                                   predecision_only=True)
    run_until_quiescent(players, policy, record=False)
    return {p: node.predecision for p, node in nodes.items() if node.predecision is not None}
