"""Schedule exploration for reliable broadcast with one Byzantine player.

Player ``n-1`` is Byzantine. It may send SEND, ECHO and READY for two
payloads to any correct player, in any order, or never. Each correct player
sends each phase at most once, so the set of messages in transit is a
function of the players' states; the search state is just the tuple of
correct-player states, with senders of identical messages treated as
interchangeable.

``explore_exhaustive`` enumerates every reachable state for each class of Byzantine
SEND plan (and for a correct source); ``explore_random`` samples delivery
orders for larger ``n``.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .game_params import compute_t0
from .reliable_broadcast import ECHO, READY, SEND, RBInstance, payload_digest

PAYLOAD_A = b"payload-a"
PAYLOAD_B = b"payload-b"
DIG_A = payload_digest(PAYLOAD_A)
DIG_B = payload_digest(PAYLOAD_B)
PAYLOADS = {DIG_A: PAYLOAD_A, DIG_B: PAYLOAD_B}


@dataclass
class Violation:
    kind: str
    detail: str


@dataclass
class ExploreResult:
    states: int = 0
    final_states: int = 0
    runs: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _clone(inst: RBInstance) -> RBInstance:
    c = RBInstance.__new__(RBInstance)
    c.__dict__.update(inst.__dict__)
    c.echo_set = {d: set(s) for d, s in inst.echo_set.items()}
    c.ready_set = {d: set(s) for d, s in inst.ready_set.items()}
    c._echoed_by = set(inst._echoed_by)
    c._readied_by = set(inst._readied_by)
    c._payloads = dict(inst._payloads)
    return c


def _counts(sets: dict, byz: int):
    """Per-digest count of correct senders plus the digest the Byzantine player sent, if any."""
    counts = tuple(sorted((d, len(v - {byz})) for d, v in sets.items() if v - {byz}))
    byz_dig = next((d for d, v in sets.items() if byz in v), None)
    return counts, byz_dig


def _key(inst: RBInstance, byz: int):
    # Correct senders that sent the same digest are interchangeable, so only
    # counts matter. A delivered player ignores everything; a readied one
    # ignores echoes.
    if inst.delivered_digest is not None:
        return (inst.echo_digest, inst.ready_digest, inst.delivered_digest)
    echoes = None if inst.sent_ready else _counts(inst.echo_set, byz)
    return (inst.echo_digest, inst.ready_digest, echoes, _counts(inst.ready_set, byz))


class RBWorld:
    def __init__(self, n: int, correct_source: bool = True, send_plan: dict | None = None,
                 echo_threshold: int | None = None):
        self.n = n
        self.t0 = compute_t0(n)
        self.byz = n - 1
        self.correct = tuple(range(n - 1))
        self.source = 0 if correct_source else self.byz
        self.send_plan = send_plan or {}
        self.byz_values = (DIG_B,) if correct_source else (DIG_A, DIG_B)
        self.initial = tuple(RBInstance(p, self.source, n, self.t0, "x", echo_threshold)
                             for p in self.correct)
        if correct_source:
            self.initial[0].start(PAYLOAD_A)

    def state_key(self, insts):
        """Players with the same SEND plan are interchangeable: sort their keys."""
        groups: dict = {}
        for p, inst in enumerate(insts):
            tag = ("source",) if p == self.source else self.send_plan.get(p, ())
            groups.setdefault(tag, []).append(_key(inst, self.byz))
        return tuple(sorted((tag, tuple(sorted(keys, key=repr))) for tag, keys in groups.items()))

    def moves(self, insts):
        """Every deliverable message that can still change its recipient's state."""
        out = []
        byz = self.byz
        for r, inst in enumerate(insts):
            if inst.delivered_digest is not None:
                continue
            if not inst.sent_echo:
                if self.source == byz:
                    out.extend((byz, r, SEND, d) for d in self.send_plan.get(r, ()))
                else:
                    out.append((self.source, r, SEND, DIG_A))
            echo_matters = not inst.sent_ready
            # one canonical sender per (phase, digest): senders of equal messages are symmetric
            picked = set()
            for s, other in enumerate(insts):
                d = other.echo_digest
                if echo_matters and d is not None and s not in inst._echoed_by \
                        and (ECHO, d) not in picked:
                    picked.add((ECHO, d))
                    out.append((s, r, ECHO, d))
                d = other.ready_digest
                if d is not None and s not in inst._readied_by and (READY, d) not in picked:
                    picked.add((READY, d))
                    out.append((s, r, READY, d))
            if echo_matters and byz not in inst._echoed_by:
                out.extend((byz, r, ECHO, d) for d in self.byz_values)
            if byz not in inst._readied_by:
                out.extend((byz, r, READY, d) for d in self.byz_values)
        return out

    def correct_in_transit(self, insts) -> bool:
        return any(m[0] != self.byz for m in self.moves(insts))

    def deliver(self, insts, msg):
        sender, r, phase, d = msg
        inst = _clone(insts[r])
        inst.receive(sender, phase, d, PAYLOADS[d], [])
        return insts[:r] + (inst,) + insts[r + 1:]

    def check(self, insts) -> list:
        """Properties that must hold once no correct player's message is in transit."""
        out = []
        delivered = [inst.delivered for inst in insts]
        values = {v for v in delivered if v is not None}
        if len(values) > 1:
            out.append(Violation("agreement", f"different payloads delivered: {delivered}"))
        elif values and None in delivered:
            out.append(Violation("agreement", f"a correct player never delivers: {delivered}"))
        if self.source != self.byz and any(v != PAYLOAD_A for v in delivered):
            out.append(Violation("validity", f"correct source's payload not delivered: {delivered}"))
        if values - {PAYLOAD_A, PAYLOAD_B}:
            out.append(Violation("integrity", f"unknown payload delivered: {values}"))
        for inst in insts:
            if inst.delivered is not None and inst.ready_set.get(inst.delivered_digest, ()) and \
                    len(inst.ready_set[inst.delivered_digest]) < inst.ready_threshold:
                out.append(Violation("integrity", "delivered below the READY threshold"))
        return out


def send_plans(n: int):
    """Byzantine SEND plans up to symmetry.

    Each correct player gets nothing, a SEND for ``a`` or a SEND for ``b``.
    Sending both is covered: only the first SEND counts, and the search
    already tries each one first. Correct players are interchangeable, and so
    are the two payloads, so one plan per class is enough.
    """
    seen = set()
    for combo in itertools.product(((), (DIG_A,), (DIG_B,)), repeat=n - 1):
        canon = min(tuple(sorted(combo)),
                    tuple(sorted(tuple({DIG_A: DIG_B, DIG_B: DIG_A}[d] for d in c) for c in combo)))
        if canon in seen:
            continue
        seen.add(canon)
        yield dict(enumerate(canon))


def explore_world(w: RBWorld, res: ExploreResult, max_violations: int = 5) -> ExploreResult:
    seen = set()
    stack = [w.initial]
    while stack:
        insts = stack.pop()
        key = w.state_key(insts)
        if key in seen:
            continue
        seen.add(key)
        res.states += 1
        moves = w.moves(insts)
        if not any(m[0] != w.byz for m in moves):
            res.final_states += 1
            bad = w.check(insts)
            if bad:
                res.violations.extend(bad)
                if len(res.violations) >= max_violations:
                    return res
        for msg in moves:
            stack.append(w.deliver(insts, msg))
    return res


def explore_exhaustive(n: int = 4, echo_threshold: int | None = None,
                       max_violations: int = 5) -> ExploreResult:
    res = ExploreResult()
    worlds = [RBWorld(n, True, None, echo_threshold)]
    worlds += [RBWorld(n, False, plan, echo_threshold) for plan in send_plans(n)]
    for w in worlds:
        explore_world(w, res, max_violations)
        res.runs += 1
        if len(res.violations) >= max_violations:
            break
    return res


def explore_random(n: int = 7, runs: int = 2000, seed: int = 0, echo_threshold: int | None = None,
                   stop_prob: float = 0.01) -> ExploreResult:
    """Random orders. The Byzantine player stops sending at a random point."""
    rng = random.Random(seed)
    choices = ((), (DIG_A,), (DIG_B,), (DIG_A, DIG_B))
    res = ExploreResult()
    for i in range(runs):
        correct_source = i % 4 == 0
        plan = {r: choices[rng.randrange(4)] for r in range(n - 1)}
        w = RBWorld(n, correct_source, plan, echo_threshold)
        insts = w.initial
        byz_active = True
        while True:
            moves = w.moves(insts)
            if byz_active and rng.random() < stop_prob:
                byz_active = False
            if not byz_active:
                moves = [m for m in moves if m[0] != w.byz]
            if not moves:
                break
            insts = w.deliver(insts, moves[rng.randrange(len(moves))])
            res.states += 1
        res.runs += 1
        res.final_states += 1
        res.violations.extend(w.check(insts))
    return res
