"""Deterministic partially synchronous scheduler.

Logical time is the step counter. Each step the scheduler picks one player
and a subset of that player's in-transit messages; the player reacts and may
submit new messages. Every message carries a deadline ``send_step + delta``
and is force-delivered once the deadline is within ``n`` steps.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol

FIFO = "fifo"
RANDOM = "seeded-random"
PARTITION = "partition-adversarial"
POLICIES = (FIFO, RANDOM, PARTITION)

SCHEDULER = -1  # sender id of the START messages


class LivelockError(RuntimeError):
    pass


@dataclass(eq=False)
class ScheduledMessage:
    mid: int
    sender: int
    recipient: int
    payload: object
    send_step: int
    deadline: int | None
    delivered_at: int | None = None


@dataclass(frozen=True)
class SchedulePolicy:
    kind: str = FIFO
    seed: int = 0
    delta: int | None = None
    partition: tuple[frozenset, frozenset] | None = None
    isolation_cap: int | None = None  # negative: the partition never heals

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}")
        if self.partition is not None:
            a, b = self.partition
            object.__setattr__(self, "partition", (frozenset(a), frozenset(b)))


class Scheduler:
    def __init__(self, n: int, policy: SchedulePolicy):
        self.n = n
        self.policy = policy
        self.delta = policy.delta if policy.delta is not None else 4 * n
        if self.delta <= n:
            raise ValueError(f"delta={self.delta} must exceed n={n}")
        self.rng = random.Random(policy.seed)
        self.step = 0
        self.messages: list[ScheduledMessage] = []
        self._pending: list[list[ScheduledMessage]] = [[] for _ in range(n)]
        self._order: deque = deque()
        self._deadlines: list = []
        self._held: list[ScheduledMessage] = []
        self._last_chosen = [0] * n
        self.active = [True] * n
        self.heal_signal: Callable[[], bool] | None = None
        self.healed_at: int | None = None
        self._side = {}
        if policy.kind == PARTITION and policy.partition is not None:
            a, b = policy.partition
            self._side = {p: 0 for p in a}
            self._side.update({p: 1 for p in b})
            self.cap = policy.isolation_cap if policy.isolation_cap is not None else 60 * n
        else:
            self.healed_at = 0
            self.cap = 0

    @property
    def isolated(self) -> bool:
        return self.healed_at is None

    def _crosses(self, sender: int, recipient: int) -> bool:
        s = self._side.get(sender)
        r = self._side.get(recipient)
        return s is not None and r is not None and s != r

    def submit(self, sender: int, recipient: int, payload) -> int:
        mid = len(self.messages)
        held = self.isolated and self._crosses(sender, recipient)
        msg = ScheduledMessage(mid, sender, recipient, payload, self.step,
                               None if held else self.step + self.delta)
        self.messages.append(msg)
        if held:
            self._held.append(msg)
        else:
            self._enqueue(msg)
        return mid

    def _enqueue(self, msg: ScheduledMessage):
        self._pending[msg.recipient].append(msg)
        self._order.append(msg)
        heapq.heappush(self._deadlines, (msg.deadline, msg.mid, msg))

    def heal(self):
        if not self.isolated:
            return
        self.healed_at = self.step
        for msg in self._held:
            msg.deadline = self.step + self.delta
            self._enqueue(msg)
        self._held = []

    def in_transit(self) -> int:
        return sum(len(p) for p in self._pending) + len(self._held)

    def _urgent(self) -> ScheduledMessage | None:
        dl = self._deadlines
        while dl and dl[0][2].delivered_at is not None:
            heapq.heappop(dl)
        if dl and dl[0][0] - self.step <= self.n:
            return dl[0][2]
        return None

    def _oldest(self) -> ScheduledMessage | None:
        order = self._order
        while order and order[0].delivered_at is not None:
            order.popleft()
        return order[0] if order else None

    def _starved(self) -> int | None:
        window = self.n * self.delta
        for p in range(self.n):
            if self.active[p] and self.step - self._last_chosen[p] >= window - self.n:
                return p
        return None

    def next_move(self) -> tuple[int, list[ScheduledMessage]] | None:
        """(player, delivered messages), or None once nothing is in transit."""
        if self.isolated and self.cap >= 0:
            if self.step >= self.cap or (self.heal_signal is not None and self.heal_signal()):
                self.heal()
            elif not any(self._pending) and self._held:
                self.heal()
        if not any(self._pending):
            return None

        player = None
        batch: list[ScheduledMessage]
        urgent = self._urgent()
        if urgent is not None:
            player = urgent.recipient
            horizon = self.step + self.n
            pend = self._pending[player]
            batch = [m for m in pend if m.deadline <= horizon]
            rest = [m for m in pend if m.deadline > horizon]
            if self.policy.kind == FIFO:
                batch, rest = pend, []
            else:
                extra = [m for m in rest if self.rng.random() < 0.5]
                if extra:
                    batch = batch + extra
                    rest = [m for m in rest if m not in extra]
            self._pending[player] = rest
        else:
            if self.step % self.n == 0:
                player = self._starved()
            if player is None:
                if self.policy.kind == FIFO:
                    player = self._oldest().recipient
                else:
                    ready = [p for p in range(self.n) if self._pending[p]]
                    player = ready[self.rng.randrange(len(ready))]
            pend = self._pending[player]
            if self.policy.kind == FIFO or not pend:
                batch, rest = pend, []
            else:
                batch, rest = [], []
                for m in pend:
                    (batch if self.rng.random() < 0.5 else rest).append(m)
                if not batch:
                    batch.append(rest.pop(self.rng.randrange(len(rest))))
            self._pending[player] = rest

        for m in batch:
            m.delivered_at = self.step
            if m.deadline is not None and self.step > m.deadline:
                raise LivelockError(f"message {m.mid} missed its deadline")
        batch.sort(key=lambda m: m.mid)
        self._last_chosen[player] = self.step
        return player, batch


@dataclass
class TraceRecord:
    step: int
    player: int
    delivered: tuple
    action: str

    def line(self) -> str:
        ids = ",".join(str(i) for i in self.delivered)
        return f"{self.step}|{self.player}|delivered:[{ids}]|{self.action}"


@dataclass
class RunTrace:
    records: list[TraceRecord] = field(default_factory=list)
    terminated: bool = True
    steps: int = 0
    messages: int = 0
    healed_at: int | None = None
    outcome: object = None

    def lines(self, milestones_only: bool = False) -> list[str]:
        recs = self.records
        if milestones_only:
            recs = [r for r in recs if r.action and "!" in r.action]
        return [r.line() for r in recs]

    def digest(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for line in self.lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()


class Player(Protocol):
    def step(self, delivered: list[tuple[int, object]]) -> tuple[list[tuple[Iterable[int], object]], str]:
        ...


START = (("START",),)


def run_until_quiescent(players, policy: SchedulePolicy, step_ceiling: int = 200_000,
                        heal_signal=None, record: bool = True, observer=None) -> RunTrace:
    """Drive the players until no message is in transit or the ceiling is hit."""
    n = len(players)
    sched = Scheduler(n, policy)
    sched.heal_signal = heal_signal
    for p in range(n):
        sched.submit(SCHEDULER, p, START)
    trace = RunTrace()
    records = trace.records
    while True:
        if sched.step >= step_ceiling:
            trace.terminated = False
            break
        move = sched.next_move()
        if move is None:
            break
        player, batch = move
        sends, action = players[player].step([(m.sender, m.payload) for m in batch])
        for recipients, payload in sends:
            for r in recipients:
                sched.submit(player, r, payload)
        if observer is not None:
            action = observer(sched.step, player, action)
        if record:
            records.append(TraceRecord(sched.step, player, tuple(m.mid for m in batch), action))
        sched.step += 1
    trace.steps = sched.step
    trace.messages = len(sched.messages)
    trace.healed_at = sched.healed_at
    trace.scheduler = sched
    return trace
