from fractions import Fraction

import pytest

from trapsim.acceptance import corollary, immunity_run
from trapsim.game_params import FinancialParams, ProtocolParams
from trapsim.net_sim import FIFO, PARTITION, POLICIES, RANDOM
from trapsim.strategies import (BAIT, CORRECT, DISAGREE, EQUIVOCATOR, LATE_BAIT, SILENT,
                                PlanError, RunOutcome, build_coalition_plan,
                                check_dominance_empirical, check_robustness, classify_run,
                                coalition_roles, compute_utilities, simulate)


def outcome(roles, **kw):
    base = dict(n=6, seed=0, policy=FIFO, roles=roles, rational=(), decisions={})
    base.update(kw)
    return RunOutcome(**base)


ROLES = {4: BAIT, 5: DISAGREE}


@pytest.mark.parametrize("kw,expected", [
    (dict(terminated=False), {0: 5, 4: 5, 5: 5}),
    (dict(disagreement=True), {0: 6, 4: 2, 5: 2}),
    (dict(resolved=True, winner=4, slashed=frozenset({5})), {0: 1, 4: 3, 5: 4}),
    (dict(), {0: 1, 4: 1, 5: 1}),
])
def test_run_class_table(kw, expected):
    classes = classify_run(outcome(ROLES, **kw))
    assert {p: classes[p] for p in expected} == expected


def test_payoff_table():
    params = ProtocolParams(10, 2, 2, 60, Fraction(1, 3))
    fin = FinancialParams.from_params(params)
    assert fin.deposit == 20 and fin.reward == 60
    out = outcome({4: BAIT, 5: BAIT, 3: DISAGREE}, n=6, resolved=True, winner=4,
                  slashed=frozenset({3, 5}))
    out.run_class = classify_run(out)
    u = compute_utilities(out, fin, params, epsilon_agree=Fraction(1, 10)).per_player
    assert u[4] == 60 and u[5] == -20 and u[3] == -20 and u[0] == Fraction(1, 10)
    dis = outcome({4: DISAGREE}, disagreement=True)
    dis.run_class = classify_run(dis)
    u = compute_utilities(dis, fin, params).per_player
    assert u[4] == 30 and u[0] == -30
    stuck = outcome({4: DISAGREE}, terminated=False)
    stuck.run_class = classify_run(stuck)
    assert set(compute_utilities(stuck, fin, params).per_player.values()) == {-1}


@pytest.mark.parametrize("policy", POLICIES)
def test_honest_runs_agree(policy):
    params = ProtocolParams.corollary(7, 0, 0, 60)
    for seed in range(5):
        out = simulate(params, policy, seed)
        assert out.terminated and not out.disagreement
        assert set(out.run_class.values()) == {1}


def test_disagreement_without_baiters():
    out = simulate(corollary(10, 2, 2), PARTITION, 0, baiter_count=0)
    assert out.disagreement and out.run_class[out.rational[0]] == 2


def test_one_baiter_traps_the_coalition():
    params = corollary(10, 2, 2)
    for seed in range(10):
        out = simulate(params, PARTITION, seed)
        assert out.terminated and not out.disagreement and out.resolved
        assert out.winner in out.baiters and len(out.slashed) == 3
        assert out.decided_values == {min(b"blockA", b"blockB")}
        for p, role in out.roles.items():
            assert out.run_class[p] == {BAIT: 3, DISAGREE: 4}[role]


def test_coalition_plan_guards():
    params = corollary(10, 2, 2)
    with pytest.raises(PlanError):
        build_coalition_plan(params, 2, late_bait=1)
    plan = build_coalition_plan(params, 1, seed=4)
    assert len(plan.baiters) == 1 and plan.can_split()
    assert set(plan.members) == set(plan.roles)
    a, b = plan.partition
    assert not (a & b) and len(a) + len(b) == 6
    unsplittable = coalition_roles(corollary(13, 1, 2), 0, 0)
    assert not unsplittable.can_split()


def test_late_baiter_is_never_a_candidate_when_others_bait():
    params = corollary(31, 6, 7)
    for seed in range(4):
        out = simulate(params, PARTITION, seed, baiter_count=2, late_bait=1)
        assert out.terminated and out.resolved
        late = [p for p, r in out.roles.items() if r == LATE_BAIT]
        assert [out.candidate_valid[p] for p in late] == [False]
        assert all(out.candidate_valid[p] for p in out.baiters)
        assert out.run_class[late[0]] == 4


@pytest.mark.parametrize("kind", [SILENT, EQUIVOCATOR])
@pytest.mark.parametrize("n", [4, 7, 10])
def test_t0_byzantine_cannot_break_agreement(kind, n):
    for policy in POLICIES:
        for seed in range(10):
            out = immunity_run(n, kind, policy, seed)
            assert out.terminated and len(out.decided_values) == 1


def test_empirical_dominance_at_n10():
    params = corollary(10, 2, 2)
    rep = check_dominance_empirical(params, FinancialParams.from_params(params), range(20))
    assert rep["analytic"] and rep["bait_beats_disagree"] and rep["bait_beats_gain_share"]
    assert rep["disagree"]["classes"] == {2: 40}
    with pytest.raises(ValueError):
        check_dominance_empirical(corollary(11, 1, 3), FinancialParams(Fraction(1), Fraction(1)), [0])


def test_robustness_sweep_small():
    params = corollary(10, 2, 2)
    rep = check_robustness(params, FinancialParams.from_params(params), seeds=(0,))
    assert rep["robust"] and rep["t_immune"]
    assert rep["profiles"] == 5 ** 2 * 2 ** 2 * 3


def test_simulation_is_deterministic():
    params = corollary(10, 2, 2)
    a = simulate(params, RANDOM, 7, record=True)
    b = simulate(params, RANDOM, 7, record=True)
    assert a.trace.digest() == b.trace.digest() and a.run_class == b.run_class


def test_payoff_example_with_unit_delta():
    params = ProtocolParams.corollary(10, 2, 2, 60, delta=1)
    fin = FinancialParams.from_params(params)
    assert (fin.deposit, fin.reward) == (21, 63)
    out = simulate(params, PARTITION, 0)
    u = compute_utilities(out, fin, params).per_player
    assert u[out.winner] == 63
    assert {u[p] for p in out.slashed} == {-21}


def test_coalition_total_never_positive_beyond_agreement_bonus():
    params = corollary(10, 2, 2)
    fin = FinancialParams.from_params(params)
    eps = Fraction(1)
    for seed in range(10):
        out = simulate(params, PARTITION, seed)
        u = compute_utilities(out, fin, params, epsilon_agree=eps).per_player
        coalition = [p for p, r in out.roles.items() if r != CORRECT]
        assert sum(u[p] for p in coalition) <= params.k * eps


def test_single_baiter_always_wins_reward():
    params = corollary(10, 2, 2)
    fin = FinancialParams.from_params(params)
    for seed in range(10):
        out = simulate(params, PARTITION, seed, baiter_count=1)
        assert compute_utilities(out, fin, params).per_player[out.baiters[0]] == fin.reward


def test_half_minimum_deposit_makes_baiting_unprofitable():
    params = ProtocolParams(10, 2, 2, 60, Fraction(1, 12), 0)
    fin = FinancialParams.from_params(params)
    rep = check_dominance_empirical(params, fin, range(10))
    assert not rep["analytic"]
    assert rep["bait_m"]["mean"] < params.gain_share
    assert not rep["bait_beats_disagree"]


def test_zero_reward_breaks_robustness():
    params = corollary(10, 2, 2)
    fin = FinancialParams(FinancialParams.from_params(params).deposit, Fraction(0))
    rep = check_robustness(params, fin, seeds=(0,))
    assert not rep["robust"]
    assert any(v["rational"] == (DISAGREE, DISAGREE) for v in rep["violations"])
