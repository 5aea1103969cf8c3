"""Player strategies, coalition planning, run classification and payoffs.

Two-faced players (``Disagree``, ``Bait``, ``LateBait``, ``Equivocator``) run one
protocol node per partition. Messages from a partition-A player are routed to
the A node, and coalition members tag what they send each other with the
world it belongs to.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import mean

from .accountable_predecision import extract_pofs
from .bftcr import (POFS, RESOLVED, BftcrDecision, CommitmentPayload, TrapNode,
                    pof_list_ok)
from .crypto_toy import KeyRing, encrypt
from .game_params import (FinancialParams, ProtocolParams, compute_m, compute_t0,
                          dominance_check)
from .net_sim import FIFO, PARTITION, POLICIES, RANDOM, SchedulePolicy, run_until_quiescent

CORRECT = "Correct"
DISAGREE = "Disagree"
BAIT = "Bait"
LATE_BAIT = "LateBait"
SILENT = "Silent"
EQUIVOCATOR = "Equivocator"
STRATEGY_KINDS = (CORRECT, DISAGREE, BAIT, LATE_BAIT, SILENT, EQUIVOCATOR)
TWO_FACED = (DISAGREE, BAIT, LATE_BAIT, EQUIVOCATOR)

V_A = b"blockA"
V_B = b"blockB"
JUNK = b"junk"

RATIONAL_LIBRARY = (CORRECT, DISAGREE, BAIT, LATE_BAIT, SILENT)
BYZANTINE_LIBRARY = (DISAGREE, SILENT)


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class CoalitionPlan:
    n: int
    rational: tuple
    byzantine: tuple
    roles: dict  # member -> strategy kind
    partition: tuple  # (A, B): frozensets of non-two-faced players
    values: tuple = (V_A, V_B)

    @property
    def members(self) -> tuple:
        return tuple(sorted(self.rational + self.byzantine))

    @property
    def baiters(self) -> tuple:
        return tuple(p for p in self.rational if self.roles.get(p) == BAIT)

    @property
    def active(self) -> tuple:
        return tuple(sorted(p for p, r in self.roles.items() if r in TWO_FACED))

    def can_split(self) -> bool:
        """Both partitions plus the two-faced members reach a certificate quorum."""
        q = self.n - compute_t0(self.n)
        act = len(self.active)
        a, b = self.partition
        return len(a) + act >= q and len(b) + act >= q

    def side_of(self, p: int) -> int | None:
        if p in self.partition[0]:
            return 0
        if p in self.partition[1]:
            return 1
        return None


def _layout(n: int, rational, byzantine, roles: dict, seed: int) -> CoalitionPlan:
    rng = random.Random(f"layout:{seed}")
    two_faced = {p for p, r in roles.items() if r in TWO_FACED}
    rest = [p for p in range(n) if p not in two_faced]
    rng.shuffle(rest)
    half, extra = divmod(len(rest), 2)
    cut = half + (extra if rng.random() < 0.5 else 0)
    a, b = frozenset(rest[:cut]), frozenset(rest[cut:])
    return CoalitionPlan(n, tuple(sorted(rational)), tuple(sorted(byzantine)), dict(roles), (a, b))


def pick_members(n: int, k: int, t: int, seed: int) -> tuple[tuple, tuple]:
    ids = list(range(n))
    random.Random(f"members:{seed}").shuffle(ids)
    return tuple(sorted(ids[:k])), tuple(sorted(ids[k:k + t]))


def build_coalition_plan(params: ProtocolParams, baiter_count: int, seed: int = 0,
                         late_bait: int = 0) -> CoalitionPlan:
    """Seeded coalition with balanced partitions that can each be certified."""
    n, k, t = params.n, params.k, params.t
    if baiter_count < 0 or baiter_count + late_bait > k:
        raise PlanError(f"{baiter_count} baiters and {late_bait} late baiters exceed k={k}")
    rational, byzantine = pick_members(n, k, t, seed)
    roles = {p: DISAGREE for p in rational + byzantine}
    for p in rational[:baiter_count]:
        roles[p] = BAIT
    for p in rational[baiter_count:baiter_count + late_bait]:
        roles[p] = LATE_BAIT
    plan = _layout(n, rational, byzantine, roles, seed)
    if not plan.can_split():
        raise PlanError(
            f"k+t={k + t} cannot certify two partitions of the {n - k - t} other players "
            f"(each side needs {n - compute_t0(n) - k - t})")
    return plan


# -- players ------------------------------------------------------------------

def _action(sends: list, events: list) -> str:
    items = sum(len(p[2]) if p[0] == "W" else len(p) for _, p in sends)
    head = f"send:{items}" if items else "idle"
    return ";".join([head] + events) if events else head


class CorrectPlayer:
    kind = CORRECT

    def __init__(self, node: TrapNode, n: int):
        self.node = node
        self.me = node.me
        self.everyone = tuple(range(n))

    def step(self, delivered):
        node = self.node
        for sender, payload in delivered:
            if payload and payload[0] == "W":
                continue
            node.handle_all(sender, payload)
        out = node.flush()
        sends = [(self.everyone, tuple(out))] if out else []
        events = node.events
        node.events = []
        return sends, _action(sends, events)


class SilentPlayer:
    kind = SILENT

    def __init__(self, me: int):
        self.me = me

    def step(self, delivered):
        return [], "idle"


class SplitPlayer:
    """Runs one node per partition and keeps the partitions apart."""

    kind = DISAGREE

    def __init__(self, me: int, n: int, personas, side: dict, coalition, key: bytes, shared=None):
        self.me = me
        self.n = n
        self.t0 = compute_t0(n)
        self.personas = personas
        self.side = side
        self.coalition = tuple(sorted(coalition))
        self.plain = tuple(tuple(sorted(p for p, s in side.items() if s == w)) for w in (0, 1))
        self.key = key
        self.shared = shared
        self.outsiders = tuple(sorted(side))
        self.events: list[str] = []
        self.committed = False
        self.revealed = False
        # rational members stop splitting once the fraud is public
        self.cooperative = False
        self.merged = False
        self.heard: tuple = ([], [])

    def merge(self):
        """Stop splitting: replay what each side heard to the other persona."""
        self.merged = True
        self.events.append("merge")
        for w in (0, 1):
            node = self.personas[1 - w]
            for sender, payload in self.heard[w]:
                for item in payload:
                    node.handle(sender, item)
        self.heard = ([], [])

    def step(self, delivered):
        personas = self.personas
        merged = self.merged
        for sender, payload in delivered:
            if payload and payload[0] == "W":
                personas[payload[1]].handle_all(sender, payload[2])
            elif sender < 0 or (merged and sender in self.side):
                for node in personas:
                    node.handle_all(sender, payload)
            else:
                w = self.side.get(sender)
                if w is None:
                    continue
                personas[w].handle_all(sender, payload)
                if self.cooperative:
                    self.heard[w].append((sender, payload))
        self.after_step()
        if not self.merged and self.cooperative and self.exposed():
            self.merge()
        sends = []
        events = self.events
        self.events = []
        for w, node in enumerate(personas):
            out = node.flush()
            if out:
                t = tuple(out)
                plain = self.outsiders if self.merged else self.plain[w]
                if plain:
                    sends.append((plain, t))
                sends.append((self.coalition, ("W", w, t)))
            if node.events:
                events.extend("AB"[w] + ":" + e for e in node.events)
                node.events = []
        if self.shared is not None:
            self.shared.update(self)
        return sends, _action(sends, events)

    def after_step(self):
        pass

    def exposed(self) -> bool:
        return any(node.pof_received for node in self.personas)

    def has_revealed(self) -> bool:
        return all(node.revealed for node in self.personas)

    def _both_certs(self):
        a, b = self.personas
        if a.predecision is None or b.predecision is None:
            return None
        return a.predecision, b.predecision

    def _pofs(self):
        pair = self._both_certs()
        if pair is None or pair[0].value == pair[1].value:
            return None
        pofs = extract_pofs(self.personas[0].ring, pair[0].certificate, pair[1].certificate)
        if not pof_list_ok(self.personas[0].ring, pofs, self.t0):
            return None
        return pofs

    def _commit_pofs(self, pofs):
        payload = CommitmentPayload.pofs(pofs)
        commitment = encrypt(payload.encode(), self.key, owner=self.me)
        for node in self.personas:
            node.key = self.key
            node.bftcr_start(payload, commitment)
        self.committed = True

    def _commit_hashes(self):
        for node in self.personas:
            if node.commitment is None and node.predecision is not None:
                node.bftcr_start(CommitmentPayload.hash_of(node.predecision.value))
        self.committed = all(node.commitment is not None for node in self.personas)

    def witness_sources(self) -> set:
        out = set()
        for node in self.personas:
            c = node.commitment
            if c is not None:
                out |= node.witness.get((self.me, c.digest), set())
        return out

    def _reveal_when_safe(self):
        """Reveal in both worlds once both saw n-t0 RB2 lists and t0+1 lists name us."""
        if self.revealed or not self.committed:
            return
        if all(node.reveal_ready() for node in self.personas) and \
                len(self.witness_sources()) >= self.t0 + 1:
            for node in self.personas:
                node.reveal()
            self.revealed = True


class DisagreePlayer(SplitPlayer):
    kind = DISAGREE


class EquivocatorPlayer(SplitPlayer):
    kind = EQUIVOCATOR


class BaitPlayer(SplitPlayer):
    """Joins the split, withholds its commitment, then commits and reveals proofs of fraud."""

    kind = BAIT

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.withheld = False
        self.pofs_ready = False
        self.pof_count = 0
        for node in self.personas:
            node.auto_commit = False
            node.reveal_gate = _never

    def after_step(self):
        if not self.committed:
            personas = self.personas
            if not self.withheld and any(p.predecision is not None for p in personas):
                self.withheld = True
                self.events.append("withhold")
            pair = self._both_certs()
            if pair is not None and self._heard_both_sides():
                pofs = self._pofs()
                if pofs is not None:
                    self.pofs_ready = True
                    self.pof_count = len(pofs)
                    self.events.append(f"pofs={len(pofs)}")
                    self._commit_pofs(pofs)
                    self.events.append("bait-commit")
                else:
                    self._commit_hashes()
                    for node in personas:
                        node.reveal_gate = None
                        node._maybe_reveal()
                    self.revealed = True
        if self.committed and not self.revealed:
            self._reveal_when_safe()
            if self.revealed:
                self.events.append("bait-reveal")


    def _heard_both_sides(self) -> bool:
        # wait for a certificate relayed by an outsider in each partition
        return all(not self.plain[w] or any(s in node.cert_senders for s in self.plain[w])
                   for w, node in enumerate(self.personas))


class LateBaitPlayer(SplitPlayer):
    """Plays the split but commits only after seeing someone else's proofs of fraud."""

    kind = LATE_BAIT

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        for node in self.personas:
            node.auto_commit = False
            node.reveal_gate = _never

    def after_step(self):
        if not self.committed:
            seen = any(node.pof_received for node in self.personas)
            if seen:
                pofs = self._pofs()
                if pofs is not None:
                    self._commit_pofs(pofs)
                    self.events.append("late-commit")
                else:
                    self._commit_hashes()
        if self.committed and not self.revealed:
            if all(node.reveal_ready() for node in self.personas):
                for node in self.personas:
                    node.reveal()
                self.revealed = True
                self.events.append("late-reveal")


def _never(node) -> bool:
    return False


_PLAYER_CLASSES = {
    DISAGREE: DisagreePlayer,
    BAIT: BaitPlayer,
    LATE_BAIT: LateBaitPlayer,
    EQUIVOCATOR: EquivocatorPlayer,
}


class CoalitionMonitor:
    """Tells the partition scheduler when the coalition has played out its isolated phase."""

    def __init__(self, members):
        self.waiting = {p.me for p in members if p.kind != LATE_BAIT}
        self.done = not self.waiting

    def update(self, player):
        if player.me in self.waiting and player.has_revealed():
            self.waiting.discard(player.me)
            self.done = not self.waiting

    def __call__(self) -> bool:
        return self.done


@dataclass
class Setup:
    players: list
    nodes: dict  # correct player -> TrapNode
    roles: dict
    plan: CoalitionPlan | None
    split: bool
    monitor: CoalitionMonitor | None


def build_players(n: int, ring: KeyRing, plan: CoalitionPlan | None = None,
                  inputs: dict | None = None, seed: int = 0, predecision_only: bool = False,
                  rb_echo_threshold: int | None = None, roles: dict | None = None,
                  side: dict | None = None):
    """Players for one run. Returns (players, {correct id: node}); see :func:`setup_run`."""
    s = setup_run(n, ring, plan, inputs, seed, predecision_only, rb_echo_threshold, roles, side)
    return s.players, s.nodes


def setup_run(n: int, ring: KeyRing, plan: CoalitionPlan | None = None,
              inputs: dict | None = None, seed: int = 0, predecision_only: bool = False,
              rb_echo_threshold: int | None = None, roles: dict | None = None,
              side: dict | None = None) -> Setup:
    rng = random.Random(f"keys:{seed}")
    roles = dict(plan.roles) if plan is not None else dict(roles or {})
    split = plan is not None and plan.can_split()
    if plan is not None:
        side = {p: 0 for p in plan.partition[0]}
        side.update({p: 1 for p in plan.partition[1]})
        values = plan.values
    else:
        values = (V_A, JUNK)
        if side is None:
            rest = [p for p in range(n) if roles.get(p) not in TWO_FACED]
            random.Random(f"sides:{seed}").shuffle(rest)
            side = {p: (0 if i < (len(rest) + 1) // 2 else 1) for i, p in enumerate(rest)}
    coalition = sorted(p for p, r in roles.items() if r in TWO_FACED)

    def node(me, value):
        return TrapNode(me, n, ring, value, rng.randbytes(16), predecision_only, rb_echo_threshold)

    players, nodes, split_players = [], {}, []
    for p in range(n):
        role = roles.get(p, CORRECT)
        if role == CORRECT:
            if inputs is not None and p in inputs:
                value = inputs[p]
            elif split:
                value = values[side[p]]
            else:
                value = values[0]
            nodes[p] = node(p, value)
            players.append(CorrectPlayer(nodes[p], n))
        elif role == SILENT:
            rng.randbytes(16)
            players.append(SilentPlayer(p))
        else:
            cls = _PLAYER_CLASSES[role]
            personas = [node(p, values[0]), node(p, values[1])]
            pl = cls(p, n, personas, side, coalition, rng.randbytes(16))
            pl.cooperative = plan is not None and p in plan.rational
            players.append(pl)
            split_players.append(pl)
    monitor = CoalitionMonitor(split_players) if split_players else None
    if monitor is not None:
        for pl in split_players:
            pl.shared = monitor
    return Setup(players, nodes, roles, plan, split, monitor)


# -- outcomes -----------------------------------------------------------------

RUN_CLASSES = {
    1: "agreement",
    2: "disagreement",
    3: "baited",
    4: "trapped",
    5: "non-termination",
    6: "victim",
}


@dataclass
class RunOutcome:
    n: int
    seed: int
    policy: str
    roles: dict
    rational: tuple
    decisions: dict  # correct player -> BftcrDecision | None
    winner: int | None = None
    slashed: frozenset = frozenset()
    resolved: bool = False
    settle_consistent: bool = True
    terminated: bool = True
    disagreement: bool = False
    run_class: dict = field(default_factory=dict)
    candidate_valid: dict = field(default_factory=dict)
    steps: int = 0
    messages: int = 0
    trace: object = None

    @property
    def decided_values(self) -> set:
        return {d.value for d in self.decisions.values() if d is not None}

    @property
    def baiters(self) -> tuple:
        return tuple(sorted(p for p, r in self.roles.items() if r == BAIT))


def classify_run(outcome: RunOutcome) -> dict:
    """Run class 1-6 for every player."""
    classes = {}
    coalition = {p for p, r in outcome.roles.items() if r != CORRECT}
    for p in range(outcome.n):
        role = outcome.roles.get(p, CORRECT)
        if not outcome.terminated:
            c = 5
        elif outcome.disagreement:
            c = 6 if role == CORRECT else 2
        elif outcome.resolved:
            if role == BAIT or p == outcome.winner:
                c = 3
            elif p in coalition and p in outcome.slashed:
                c = 4
            else:
                c = 1
        else:
            c = 1
        classes[p] = c
    return classes


def outcome_from_setup(setup: Setup, trace, n: int, seed: int, policy: str) -> RunOutcome:
    nodes = setup.nodes
    decisions = {p: node.decision for p, node in nodes.items()}
    settled = [node.wc_result for node in nodes.values() if node.wc_result is not None]
    winner, slashed, consistent = None, frozenset(), True
    if settled:
        first = settled[0]
        consistent = all(s == first for s in settled)
        winner, slashed = first.winner, first.punished
    values = {d.value for d in decisions.values() if d is not None}
    terminated = all(d is not None for d in decisions.values())
    candidate_valid = {}
    for p, role in setup.roles.items():
        if role in (BAIT, LATE_BAIT):
            candidate_valid[p] = any(node.validate_candidate(p) for node in nodes.values())
    rational = setup.plan.rational if setup.plan is not None else ()
    out = RunOutcome(
        n=n, seed=seed, policy=policy, roles=dict(setup.roles), rational=rational,
        decisions=decisions, winner=winner, slashed=slashed,
        resolved=bool(settled) or any(d is not None and d.kind == RESOLVED for d in decisions.values()),
        settle_consistent=consistent, terminated=terminated, disagreement=len(values) > 1,
        candidate_valid=candidate_valid, steps=trace.steps, messages=trace.messages,
    )
    out.run_class = classify_run(out)
    return out


def policy_for(kind: str, seed: int, plan: CoalitionPlan | None, side: dict | None = None,
               delta: int | None = None, isolation_cap: int | None = None) -> SchedulePolicy:
    partition = None
    if kind == PARTITION:
        if plan is not None:
            partition = plan.partition
        elif side:
            partition = (frozenset(p for p, s in side.items() if s == 0),
                         frozenset(p for p, s in side.items() if s == 1))
    return SchedulePolicy(kind, seed, delta, partition, isolation_cap)


def coalition_roles(params: ProtocolParams, baiter_count: int, seed: int,
                    late_bait: int = 0) -> CoalitionPlan:
    """Like :func:`build_coalition_plan` but never refuses: unsplittable coalitions still try."""
    n, k, t = params.n, params.k, params.t
    rational, byzantine = pick_members(n, k, t, seed)
    roles = {p: DISAGREE for p in rational + byzantine}
    for p in rational[:baiter_count]:
        roles[p] = BAIT
    for p in rational[baiter_count:baiter_count + late_bait]:
        roles[p] = LATE_BAIT
    return _layout(n, rational, byzantine, roles, seed)


def simulate(params: ProtocolParams, policy: str = FIFO, seed: int = 0,
             baiter_count: int | None = None, late_bait: int = 0,
             plan: CoalitionPlan | None = None, roles: dict | None = None,
             step_ceiling: int | None = None, record: bool = False,
             rb_echo_threshold: int | None = None, isolation_cap: int | None = None,
             observer=None) -> RunOutcome:
    """One seeded run. With no plan and no roles, k+t members attack with m(k,t) baiters."""
    n = params.n
    ring = KeyRing(n, seed)
    if plan is None and roles is None and params.k + params.t > 0:
        m = params.effective_m if baiter_count is None else baiter_count
        plan = coalition_roles(params, min(m, params.k), seed, late_bait)
    setup = setup_run(n, ring, plan, seed=seed, rb_echo_threshold=rb_echo_threshold, roles=roles)
    side = None
    if plan is None:
        side = {}
        for pl in setup.players:
            if isinstance(pl, SplitPlayer):
                side = pl.side
                break
    pol = policy_for(policy, seed, plan, side, isolation_cap=isolation_cap)
    ceiling = step_ceiling if step_ceiling is not None else 400 * n * n
    trace = run_until_quiescent(setup.players, pol, ceiling, heal_signal=setup.monitor,
                                record=record, observer=observer(setup) if observer else None)
    out = outcome_from_setup(setup, trace, n, seed, policy)
    if record:
        out.trace = trace
    return out


# -- payoffs ------------------------------------------------------------------

@dataclass
class UtilityReport:
    per_player: dict
    per_kind: dict

    def mean_for(self, players) -> Fraction:
        vals = [self.per_player[p] for p in players]
        return sum(vals, Fraction(0)) / len(vals)


def compute_utilities(outcome: RunOutcome, fin: FinancialParams, params: ProtocolParams,
                      epsilon_agree: Fraction = Fraction(1),
                      nontermination: Fraction = Fraction(-1),
                      victim: Fraction | None = None) -> UtilityReport:
    """Payoff table: agreement eps, disagreement G/k, winner R, trapped or losing baiter -L."""
    g = params.gain_share
    victim = -g if victim is None else victim
    util = {}
    for p, c in outcome.run_class.items():
        if c == 1:
            u = Fraction(epsilon_agree)
        elif c == 2:
            u = g
        elif c == 3:
            u = fin.reward if p == outcome.winner else -fin.deposit
        elif c == 4:
            u = -fin.deposit
        elif c == 5:
            u = Fraction(nontermination)
        else:
            u = Fraction(victim)
        util[p] = u
    per_kind: dict = {}
    for p, u in util.items():
        per_kind.setdefault(outcome.roles.get(p, CORRECT), []).append(u)
    per_kind = {k: sum(v, Fraction(0)) / len(v) for k, v in per_kind.items()}
    return UtilityReport(util, per_kind)


def _mean(values) -> Fraction:
    values = list(values)
    return sum(values, Fraction(0)) / len(values) if values else Fraction(0)


def check_dominance_empirical(params: ProtocolParams, fin: FinancialParams, seeds,
                              policy: str = PARTITION) -> dict:
    """Mean realized payoff of colluding vs baiting, over matched seed batches."""
    m = params.effective_m
    if m < 1 or not params.feasible:
        raise ValueError("empirical dominance needs a feasible configuration with m >= 1")
    seeds = list(seeds)
    report = {"n": params.n, "k": params.k, "t": params.t, "m": m, "seeds": len(seeds),
              "G/k": params.gain_share, "analytic": dominance_check(params, fin)}
    batches = {"disagree": 0, "bait_m": m}
    if m + 1 <= params.k:
        batches["bait_m+1"] = m + 1
    for name, count in batches.items():
        utils, classes = [], {}
        for s in seeds:
            out = simulate(params, policy, s, baiter_count=count)
            rep = compute_utilities(out, fin, params)
            who = out.baiters if count else out.rational
            utils.extend(rep.per_player[p] for p in who)
            for p in who:
                classes[out.run_class[p]] = classes.get(out.run_class[p], 0) + 1
        report[name] = {"mean": _mean(utils), "min": min(utils), "max": max(utils),
                        "classes": dict(sorted(classes.items()))}
    report["bait_beats_disagree"] = report["bait_m"]["mean"] > report["disagree"]["mean"]
    report["bait_beats_gain_share"] = report["bait_m"]["mean"] > params.gain_share
    return report


def check_robustness(params: ProtocolParams, fin: FinancialParams,
                     library=RATIONAL_LIBRARY, byzantine_library=BYZANTINE_LIBRARY,
                     epsilon: Fraction = Fraction(0), seeds=(0,), policies=POLICIES,
                     member_seed: int = 0) -> dict:
    """Exhaustive sweep of library profiles for the coalition.

    A profile counts as a violation when some rational member beats its payoff
    under the all-correct profile by more than ``epsilon`` and no rational
    member can gain more than ``epsilon`` by switching alone to another library
    strategy (the deviation is self-enforcing).
    """
    n, k, t = params.n, params.k, params.t
    if n > 13:
        raise ValueError("exhaustive robustness sweep is limited to n <= 13")
    rational, byzantine = pick_members(n, k, t, member_seed)
    cache: dict = {}

    def payoff(r_prof, b_prof, policy):
        key = (r_prof, b_prof, policy)
        if key not in cache:
            roles = dict(zip(rational, r_prof))
            roles.update(zip(byzantine, b_prof))
            totals = {p: Fraction(0) for p in rational}
            correct_neg = False
            for s in seeds:
                plan = _layout(n, rational, byzantine, roles, s)
                out = simulate(params, policy, s, plan=plan)
                rep = compute_utilities(out, fin, params)
                for p in rational:
                    totals[p] += rep.per_player[p]
                correct_neg |= any(rep.per_player[p] <= 0 for p in out.decisions
                                   if roles.get(p, CORRECT) == CORRECT and p not in rational)
            cache[key] = ({p: v / len(seeds) for p, v in totals.items()}, correct_neg)
        return cache[key]

    violations, immunity_failures, profiles = [], [], 0
    sigma = tuple(CORRECT for _ in rational)
    for b_prof in itertools.product(byzantine_library, repeat=len(byzantine)):
        for policy in policies:
            base, neg = payoff(sigma, b_prof, policy)
            if neg:
                immunity_failures.append({"byzantine": b_prof, "policy": policy})
            for r_prof in itertools.product(library, repeat=len(rational)):
                profiles += 1
                if r_prof == sigma:
                    continue
                util, _ = payoff(r_prof, b_prof, policy)
                gainers = [p for p in rational if util[p] > base[p] + epsilon]
                if not gainers:
                    continue
                stable = True
                for i, p in enumerate(rational):
                    for alt in library:
                        if alt == r_prof[i]:
                            continue
                        alt_prof = r_prof[:i] + (alt,) + r_prof[i + 1:]
                        if payoff(alt_prof, b_prof, policy)[0][p] > util[p] + epsilon:
                            stable = False
                            break
                    if not stable:
                        break
                if stable:
                    violations.append({"rational": r_prof, "byzantine": b_prof, "policy": policy,
                                       "gain": {p: str(util[p] - base[p]) for p in gainers}})
    return {"n": n, "k": k, "t": t, "profiles": profiles, "runs": len(cache) * len(seeds),
            "robust": not violations, "violations": violations,
            "t_immune": not immunity_failures, "immunity_failures": immunity_failures,
            "note": "checked against a finite strategy library"}
