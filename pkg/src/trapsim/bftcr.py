"""Commit-reveal agreement layered on top of certified predecisions.

Per player (``TrapNode``):

1. predecide through the vote layer, then commit ``enc(HASH(value))`` with RB1;
2. after ``n - t0`` RB1 deliveries, reliably broadcast the list of those commitments (RB2);
3. once ``n - t0`` RB1 and RB2 deliveries are in, reveal the decryption key;
4. on each key: relay it, decrypt, count hashes, or verify a proof-of-fraud list;
5. if fraud was proven and ``t0 + 1`` non-culprit commitments are open, run the
   winner consensus, then punish, reward and resolve.

A node only ever sees one "world": coalition members that play both sides
run two nodes that share an id.
"""

from __future__ import annotations

import hashlib
import struct
from collections import Counter
from dataclasses import dataclass, field

from .accountable_predecision import Certificate, Predecision, VoteCollector, make_vote
from .crypto_toy import (Commitment, KeyRing, ProofOfFraud, decode_pofs, decode_vote,
                         decrypt, digest, encode_pofs, encrypt, pof_verify)
from .game_params import compute_t0
from .reliable_broadcast import RBInstance

HASH = "HASH"
POFS = "POFS"
VALUE_DECIDED = "ValueDecided"
RESOLVED = "Resolved"


class BftcrError(ValueError):
    pass


@dataclass(frozen=True)
class CommitmentPayload:
    kind: str
    body: object  # digest bytes for HASH, tuple of ProofOfFraud for POFS

    def encode(self) -> bytes:
        if self.kind == HASH:
            return b"H" + self.body
        return b"P" + encode_pofs(self.body)

    @staticmethod
    def decode(raw: bytes) -> "CommitmentPayload | None":
        if raw[:1] == b"H" and len(raw) > 1:
            return CommitmentPayload(HASH, bytes(raw[1:]))
        if raw[:1] == b"P":
            pofs = decode_pofs(raw[1:])
            if pofs is not None:
                return CommitmentPayload(POFS, tuple(pofs))
        return None

    @staticmethod
    def hash_of(value: bytes) -> "CommitmentPayload":
        return CommitmentPayload(HASH, digest(value))

    @staticmethod
    def pofs(pofs) -> "CommitmentPayload":
        return CommitmentPayload(POFS, tuple(sorted(pofs, key=lambda p: p.culprit)))


def pof_list_ok(ring: KeyRing, pofs, t0: int) -> bool:
    """Every proof verifies and at least t0+1 distinct players are exposed."""
    culprits = set()
    for p in pofs:
        if not isinstance(p, ProofOfFraud) or not pof_verify(ring, p):
            return False
        culprits.add(p.culprit)
    return len(culprits) >= t0 + 1


def conflict_pair(pofs) -> tuple[bytes, bytes]:
    a = decode_vote(pofs[0].msg_a.payload)[1]
    b = decode_vote(pofs[0].msg_b.payload)[1]
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CommitmentList:
    source: int
    entries: tuple  # (owner, commitment digest) in delivery order
    digest: bytes = field(default=b"", compare=False)

    def __post_init__(self):
        if not self.digest:
            raw = struct.pack(">i", self.source) + b"".join(
                struct.pack(">i", o) + d for o, d in self.entries)
            object.__setattr__(self, "digest", digest(raw))


@dataclass(frozen=True)
class ProofOfBaiting:
    candidate: int
    commitment_digest: bytes
    witnesses: tuple  # CommitmentList


def validate_pob(pob: ProofOfBaiting, delivered_lists: dict, t0: int) -> bool:
    """t0+1 distinct RB2-delivered lists that name the candidate's commitment."""
    entry = (pob.candidate, pob.commitment_digest)
    sources = set()
    for w in pob.witnesses:
        if delivered_lists.get(w.source) != w:
            return False
        if entry in w.entries:
            sources.add(w.source)
    return len(sources) >= t0 + 1


@dataclass(frozen=True)
class WinnerProposal:
    candidates: tuple  # (player, revealed key), sorted by player
    frauds: tuple
    pair: tuple

    @property
    def digest(self) -> bytes:
        return digest(repr((self.candidates, self.frauds, self.pair)).encode())

    def merge(self, other: "WinnerProposal") -> "WinnerProposal":
        cands = dict(self.candidates)
        for j, key in other.candidates:
            cands.setdefault(j, key)
        return WinnerProposal(tuple(sorted(cands.items())),
                              tuple(sorted(set(self.frauds) | set(other.frauds))),
                              min(self.pair, other.pair))

    def well_formed(self) -> bool:
        return (bool(self.candidates) and len(self.pair) == 2
                and self.pair[0] != self.pair[1])


@dataclass(frozen=True)
class BftcrDecision:
    kind: str
    value: bytes
    winner: int | None = None
    punished: frozenset = frozenset()


def select_winner(proposal: WinnerProposal) -> int:
    """Beacon draw: uniform over the candidates, keyed by their revealed secrets."""
    cands = proposal.candidates
    if not cands:
        raise BftcrError("winner consensus decided an empty candidate set")
    h = hashlib.blake2b(proposal.digest + b"".join(k for _, k in cands), digest_size=16).digest()
    return cands[int.from_bytes(h, "big") % len(cands)][0]


def resolve(pair: tuple) -> bytes:
    return min(pair)


def settle(proposal: WinnerProposal) -> BftcrDecision:
    """Punish every exposed player except the winner, reward the winner, resolve."""
    winner = select_winner(proposal)
    punished = frozenset(proposal.frauds) - {winner}
    if winner in punished:
        raise BftcrError("winner cannot be punished")
    return BftcrDecision(RESOLVED, resolve(proposal.pair), winner, punished)


def _wc_payload(rnd: int, proposal) -> bytes:
    return b"wc|%d|" % rnd + (proposal.digest if proposal is not None else b"nil")


def _show(value: bytes) -> str:
    return value.decode("latin-1")


class TrapNode:
    """State machine for one player (or one persona of a two-faced player)."""

    def __init__(self, me: int, n: int, ring: KeyRing, value: bytes, key: bytes,
                 predecision_only: bool = False, rb_echo_threshold: int | None = None):
        self.me = me
        self.n = n
        self.t0 = compute_t0(n)
        self.q = n - self.t0
        self.ring = ring
        self.value = value
        self.key = key
        self.predecision_only = predecision_only
        self.rb_echo_threshold = rb_echo_threshold
        self.out: list = []
        self.events: list[str] = []
        # hooks set by strategies
        self.auto_commit = True
        self.reveal_gate = None

        self.votes = VoteCollector(n, ring)
        self.predecision: Predecision | None = None
        self.cert_senders: set = set()
        self.local_hash: bytes | None = None

        self.rb: dict = {}
        self.commitment: Commitment | None = None
        self.commit_kind: str | None = None
        self.rb2_started = False
        self.revealed = False
        self.enc_msgs: dict[int, Commitment] = {}
        self.enc_order: list = []
        self.list_enc_msgs: dict[int, CommitmentList] = {}
        self.witness: dict = {}
        self.keys: dict[int, bytes] = {}
        self.pending_keys: dict[int, list] = {}
        self.decrypted: dict[int, CommitmentPayload] = {}
        self.hashes: Counter = Counter()
        self.pof_received = False
        self.list_pofs: dict[int, tuple] = {}
        self.culprits: set = set()
        self.pair: tuple | None = None
        self.decision: BftcrDecision | None = None
        self.bad_keys = 0

        self.wc_started = False
        self.wc_done = False
        self.wc_result: BftcrDecision | None = None
        self.wc_proposal: WinnerProposal | None = None
        self.participants: frozenset = frozenset()
        self.wc_quorum = 0
        self.wc_round = 0
        self.wc_lock: WinnerProposal | None = None
        self.wc_adopt: WinnerProposal | None = None
        self.wc_seen: WinnerProposal | None = None
        self.wc_pre: dict = {}
        self.wc_com: dict = {}
        self.wc_sent_com: set = set()

    # -- plumbing -----------------------------------------------------------

    def flush(self) -> list:
        out, self.out = self.out, []
        return out

    def handle_all(self, sender: int, items) -> None:
        """Handle a batch of items from one sender; RB traffic takes a fast path."""
        rb = self.rb
        out = self.out
        for item in items:
            if item[0] == "RB" and not self.predecision_only:
                key = item[1]
                inst = rb.get(key) if isinstance(key, tuple) else None
                if inst is None:
                    self._on_rb(sender, item)
                elif inst.delivered_digest is None:
                    delivered = inst.receive(sender, item[2], item[3], item[4], out)
                    if delivered is not None:
                        if key[0] == 1:
                            self.on_rb1_deliver(key[1], delivered)
                        else:
                            self.on_rb2_deliver(key[1], delivered)
            else:
                self.handle(sender, item)

    def handle(self, sender: int, item) -> None:
        tag = item[0]
        if tag == "RB":
            if not self.predecision_only:
                self._on_rb(sender, item)
        elif tag == "KEY":
            if not self.predecision_only:
                self.on_key_deliver(item[2], item[1])
        elif tag == "VOTE":
            cert = self.votes.add(sender, item[1])
            if cert is not None and self.predecision is None:
                self._predecide(cert)
        elif tag == "CERT":
            cert = item[1]
            self.cert_senders.add(sender)
            # only adopt a certificate for the value this node voted for
            if self.predecision is None and isinstance(cert, Certificate) and cert.value == self.value:
                if cert.is_valid(self.ring, self.n):
                    self._predecide(cert)
        elif tag == "WC":
            if not self.predecision_only:
                self._on_wc(sender, item)
        elif tag == "START":
            self.out.append(("VOTE", make_vote(self.ring, self.me, self.value)))

    def _predecide(self, cert: Certificate):
        self.predecision = Predecision(cert.value, cert)
        self.local_hash = digest(cert.value)
        self.out.append(("CERT", cert))
        self.events.append("predecide=" + _show(cert.value))
        if not self.predecision_only and self.auto_commit:
            self.bftcr_start(CommitmentPayload.hash_of(cert.value))

    def _instance(self, key) -> RBInstance | None:
        inst = self.rb.get(key)
        if inst is None:
            if (not isinstance(key, tuple) or len(key) != 2 or key[0] not in (1, 2)
                    or not 0 <= key[1] < self.n):
                return None
            inst = self.rb[key] = RBInstance(self.me, key[1], self.n, self.t0, key,
                                             self.rb_echo_threshold)
        return inst

    def _on_rb(self, sender: int, item):
        key = item[1]
        inst = (self.rb.get(key) or self._instance(key)) if isinstance(key, tuple) else None
        # a delivered instance has already sent READY; later traffic changes nothing
        if inst is None or inst.delivered_digest is not None:
            return
        delivered = inst.receive(sender, item[2], item[3], item[4], self.out)
        if delivered is not None:
            if key[0] == 1:
                self.on_rb1_deliver(key[1], delivered)
            else:
                self.on_rb2_deliver(key[1], delivered)

    # -- commit / reveal ------------------------------------------------------

    def bftcr_start(self, payload: CommitmentPayload, commitment: Commitment | None = None):
        """Encrypt the payload under this node's key and start RB1."""
        if self.commitment is not None:
            raise BftcrError("already committed")
        if payload.kind == POFS and not pof_list_ok(self.ring, payload.body, self.t0):
            raise BftcrError(f"a POFS commitment needs at least {self.t0 + 1} verified culprits")
        if payload.kind == HASH and self.predecision is None:
            raise BftcrError("HASH commitment without a predecision")
        if commitment is None:
            commitment = encrypt(payload.encode(), self.key, owner=self.me)
        self.commitment = commitment
        self.commit_kind = payload.kind
        self.out.extend(self._instance((1, self.me)).start(commitment))
        self.events.append("commit=" + payload.kind)
        self._maybe_reveal()

    def on_rb1_deliver(self, source: int, c):
        if not isinstance(c, Commitment) or c.owner != source or source in self.enc_msgs:
            return
        self.enc_msgs[source] = c
        self.enc_order.append((source, c.digest))
        if not self.rb2_started and len(self.enc_order) >= self.q:
            self.rb2_started = True
            lst = CommitmentList(self.me, tuple(self.enc_order[:self.q]))
            self.out.extend(self._instance((2, self.me)).start(lst))
        self._try_pending(source)
        self._maybe_reveal()

    def on_rb2_deliver(self, source: int, lst):
        if not isinstance(lst, CommitmentList) or lst.source != source or source in self.list_enc_msgs:
            return
        self.list_enc_msgs[source] = lst
        for entry in lst.entries:
            w = self.witness.get(entry)
            if w is None:
                w = self.witness[entry] = set()
            w.add(source)
        self._try_pending(source)
        self._maybe_reveal()
        self._maybe_start_wc()

    def reveal_ready(self) -> bool:
        return len(self.list_enc_msgs) >= self.q and len(self.enc_msgs) >= self.q

    def _maybe_reveal(self):
        if self.revealed or self.commitment is None or not self.reveal_ready():
            return
        if self.reveal_gate is not None and not self.reveal_gate(self):
            return
        self.reveal()

    def reveal(self):
        if self.revealed:
            return
        self.revealed = True
        self.out.append(("KEY", self.me, self.key))
        self.events.append("reveal")

    # -- keys ------------------------------------------------------------------

    def on_key_deliver(self, key: bytes, j: int):
        if not isinstance(j, int) or not 0 <= j < self.n or j in self.keys:
            return
        if j not in self.enc_msgs or j not in self.list_enc_msgs:
            pend = self.pending_keys.setdefault(j, [])
            if key not in pend:
                pend.append(key)
            return
        self._open(j, key)

    def _try_pending(self, j: int):
        if j in self.pending_keys and j in self.enc_msgs and j in self.list_enc_msgs:
            for key in self.pending_keys.pop(j):
                if self._open(j, key):
                    break

    def _open(self, j: int, key: bytes) -> bool:
        raw = decrypt(self.enc_msgs[j], key)
        if raw is None:
            self.bad_keys += 1
            return False
        self.keys[j] = key
        self.out.append(("KEY", j, key))
        cp = CommitmentPayload.decode(raw)
        if cp is None:
            return True
        self.decrypted[j] = cp
        if cp.kind == HASH:
            self.hashes[cp.body] += 1
            if (self.decision is None and self.hashes[cp.body] >= self.q
                    and cp.body == self.local_hash):
                self.decision = BftcrDecision(VALUE_DECIDED, self.predecision.value)
                self.events.append("decide=" + _show(self.predecision.value))
        elif pof_list_ok(self.ring, cp.body, self.t0):
            self.list_pofs[j] = cp.body
            self.culprits.update(p.culprit for p in cp.body)
            pair = conflict_pair(cp.body)
            self.pair = pair if self.pair is None else min(self.pair, pair)
            self.pof_received = True
            self.events.append(f"pofs-from={j}")
        self._maybe_start_wc()
        return True

    # -- candidates ----------------------------------------------------------------

    def witnesses_of(self, j: int) -> int:
        c = self.enc_msgs.get(j)
        if c is None:
            return 0
        return len(self.witness.get((j, c.digest), ()))

    def validate_candidate(self, j: int) -> bool:
        """j revealed a verified POFS list whose commitment sits in t0+1 RB2 lists."""
        return j in self.list_pofs and self.witnesses_of(j) >= self.t0 + 1

    def proof_of_baiting(self, j: int) -> ProofOfBaiting | None:
        c = self.enc_msgs.get(j)
        if c is None:
            return None
        entry = (j, c.digest)
        wits = tuple(self.list_enc_msgs[s] for s in sorted(self.witness.get(entry, ())))
        return ProofOfBaiting(j, c.digest, wits)

    def valid_candidates(self) -> list[int]:
        return sorted(j for j in self.list_pofs if self.witnesses_of(j) >= self.t0 + 1)

    def view(self) -> WinnerProposal:
        cands = tuple((j, self.keys[j]) for j in self.valid_candidates())
        return WinnerProposal(cands, tuple(sorted(self.culprits)), self.pair)

    # -- winner consensus --------------------------------------------------------

    def _maybe_start_wc(self):
        if self.wc_started or self.wc_done or not self.pof_received:
            return
        open_honest = sum(1 for j in self.decrypted if j not in self.culprits)
        if open_honest < self.t0 + 1 or not self.valid_candidates():
            return
        self.wc_started = True
        self.participants = frozenset(range(self.n)) - frozenset(self.culprits)
        n2 = len(self.participants)
        self.wc_quorum = n2 - (-(-n2 // 3) - 1)
        self.events.append("wc")
        self._wc_enter_round()
        self._wc_progress()

    def _wc_proposal(self) -> WinnerProposal:
        if self.wc_lock is not None:
            return self.wc_lock
        if self.wc_adopt is not None:
            return self.wc_adopt
        mine = self.view()
        return mine if self.wc_seen is None else mine.merge(self.wc_seen)

    def _wc_enter_round(self):
        self.out.append(("WC", "PRE", self.wc_round, self._wc_proposal()))

    def _on_wc(self, sender: int, item):
        kind = item[1]
        if kind == "PRE":
            rnd, prop = item[2], item[3]
            if not isinstance(prop, WinnerProposal) or not prop.well_formed():
                return
            self.wc_pre.setdefault(rnd, {}).setdefault(sender, prop)
        elif kind == "COM":
            rnd, prop, sig = item[2], item[3], item[4]
            if (sig.signer != sender or sig.payload != _wc_payload(rnd, prop)
                    or not self.ring.verify(sig)):
                return
            self.wc_com.setdefault(rnd, {}).setdefault(sender, (prop, sig))
        elif kind == "DEC":
            if not self.wc_done:
                self._adopt_decision(item[2], item[3])
            return
        if self.wc_started and not self.wc_done:
            self._wc_progress()

    def _wc_progress(self):
        parts = self.participants
        q = self.wc_quorum
        while not self.wc_done:
            rnd = self.wc_round
            pre = [p for s, p in self.wc_pre.get(rnd, {}).items() if s in parts]
            if rnd not in self.wc_sent_com and len(pre) >= q:
                counts = Counter(pre)
                locked = [p for p, c in counts.items() if c >= q]
                choice = locked[0] if locked else None
                if choice is not None:
                    self.wc_lock = choice
                for p in pre:
                    self.wc_seen = p if self.wc_seen is None else self.wc_seen.merge(p)
                sig = self.ring.sign(self.me, _wc_payload(rnd, choice))
                self.wc_sent_com.add(rnd)
                self.out.append(("WC", "COM", rnd, choice, sig))
            com = {s: v for s, v in self.wc_com.get(rnd, {}).items() if s in parts}
            if rnd not in self.wc_sent_com or len(com) < q:
                return
            counts = Counter(p for p, _ in com.values() if p is not None)
            for prop, c in counts.items():
                if c >= q:
                    proof = tuple(sig for p, sig in com.values() if p == prop)
                    self._finish(prop, rnd, proof)
                    return
            if self.wc_lock is None and counts:
                self.wc_adopt = min(counts, key=lambda p: p.digest)
            self.wc_round += 1
            self._wc_enter_round()

    def _adopt_decision(self, packed, proof):
        try:
            rnd, prop = packed
        except (TypeError, ValueError):
            return
        if not isinstance(prop, WinnerProposal) or not prop.well_formed():
            return
        parts = self.participants if self.wc_started else frozenset(range(self.n)) - frozenset(prop.frauds)
        n2 = len(parts)
        need = n2 - (-(-n2 // 3) - 1)
        payload = _wc_payload(rnd, prop)
        signers = {s.signer for s in proof
                   if s.signer in parts and s.payload == payload and self.ring.verify(s)}
        if len(signers) >= need:
            self._finish(prop, rnd, proof)

    def _finish(self, prop: WinnerProposal, rnd: int, proof):
        self.wc_done = True
        self.wc_proposal = prop
        self.wc_result = settle(prop)
        self.out.append(("WC", "DEC", (rnd, prop), proof))
        if self.decision is None:
            self.decision = self.wc_result
            self.events.append(f"resolve={_show(self.wc_result.value)}/winner={self.wc_result.winner}")
        else:
            self.events.append(f"settle/winner={self.wc_result.winner}")
