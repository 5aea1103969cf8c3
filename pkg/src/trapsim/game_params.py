"""Closed-form thresholds, deposits and rewards for the baiting game.

Every comparison here runs on ``int`` or ``fractions.Fraction``; floats never
enter a feasibility, baiter-count or dominance decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union

Number = Union[int, Fraction]


class _Sentinel:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __bool__(self) -> bool:
        return False


#: Returned by :func:`min_deposit_coeff` when the coalition cannot split the
#: correct players at all, so no baiter (and no deposit bound) is needed.
NO_BAIT_NEEDED = _Sentinel("NO_BAIT_NEEDED")

#: Returned by :func:`worst_case_deposit_coeff` when no feasible coalition
#: needs a baiter for the given ``n``.
NO_FEASIBLE_COALITION = _Sentinel("NO_FEASIBLE_COALITION")


def as_fraction(value: Number | str | float) -> Fraction:
    """Exact conversion. Floats go through their decimal repr, so ``0.01`` is 1/100."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value).strip())


def compute_t0(n: int) -> int:
    """ceil(n/3) - 1: the classic Byzantine tolerance."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return -(-n // 3) - 1


def feasible(n: int, k: int, t: int) -> bool:
    """n > max(3k/2 + 3t, 2(k+t)), in integers."""
    if n < 1 or k < 0 or t < 0:
        raise ValueError(f"invalid (n, k, t) = ({n}, {k}, {t})")
    return 2 * n > 3 * k + 6 * t and n > 2 * (k + t)


def compute_m(n: int, k: int, t: int) -> int:
    """Smallest integer baiter count strictly above (k+t-n)/2 + t0.

    May be zero or negative: then the coalition is too small to split the
    correct players into two certified partitions.
    """
    t0 = compute_t0(n)
    return math.floor(Fraction(k + t - n, 2) + t0) + 1


def effective_m(n: int, k: int, t: int) -> int:
    return max(compute_m(n, k, t), 0)


def partition_slack(n: int, k: int, t: int) -> int:
    """Players the coalition can shift between A and B while both still certify.

    Both partitions need ``|side| + k + t >= n - t0``; the slack is what is
    left of ``n - k - t`` after each side gets its minimum. Negative means no
    two-certificate split exists.
    """
    t0 = compute_t0(n)
    return (n - k - t) - 2 * (n - t0 - k - t)


def min_deposit_coeff(n: int, k: int, t: int):
    """Open lower bound m/(k (t0 - m + 1)) on d; any d above it makes baiting dominant.

    Returns :data:`NO_BAIT_NEEDED` when the effective baiter count is zero.
    """
    if k == 0:
        raise ValueError("min_deposit_coeff needs at least one rational player (k >= 1)")
    if not feasible(n, k, t):
        raise ValueError(f"(n, k, t) = ({n}, {k}, {t}) is not feasible")
    m = compute_m(n, k, t)
    if m <= 0:
        return NO_BAIT_NEEDED
    t0 = compute_t0(n)
    if t0 - m + 1 <= 0:
        raise ValueError(f"no valid deposit: t0 - m + 1 = {t0 - m + 1} <= 0")
    return Fraction(m, k * (t0 - m + 1))


def feasible_coalitions(n: int) -> Iterator[tuple[int, int]]:
    """All (k, t) with k >= 1 that satisfy :func:`feasible`."""
    for k in range(1, n):
        for t in range(0, n):
            if 3 * k + 6 * t >= 2 * n:
                break
            if feasible(n, k, t):
                yield k, t


def worst_case_deposit_coeff(n: int):
    """Brute-force max of :func:`min_deposit_coeff` over feasible (k, t) needing a baiter."""
    best = None
    for k, t in feasible_coalitions(n):
        d = min_deposit_coeff(n, k, t)
        if d is NO_BAIT_NEEDED:
            continue
        if best is None or d > best:
            best = d
    return NO_FEASIBLE_COALITION if best is None else best


def worst_case_argmax(n: int) -> list[tuple[int, int]]:
    """Every (k, t) attaining :func:`worst_case_deposit_coeff`."""
    best = worst_case_deposit_coeff(n)
    if best is NO_FEASIBLE_COALITION:
        return []
    return [
        (k, t)
        for k, t in feasible_coalitions(n)
        if min_deposit_coeff(n, k, t) == best
    ]


def corollary_deposit_coeff(n: int) -> Fraction:
    """The single deposit coefficient 1/(ceil(n/3) - 1) used for every (k, t)."""
    t0 = compute_t0(n)
    if t0 < 1:
        raise ValueError(f"n = {n} leaves t0 = 0; no deposit coefficient defined")
    return Fraction(1, t0)


def max_tolerated_byzantine(n: int, d: Number | str | float) -> int:
    """Largest integer t strictly below t0 + 1 - 1/(t0 d), floored at 0."""
    d = as_fraction(d)
    if d <= 0:
        raise ValueError("d must be positive")
    if n < 4:
        raise ValueError("n must be at least 4")
    t0 = compute_t0(n)
    bound = Fraction(t0 + 1) - 1 / (t0 * d)
    t = math.ceil(bound) - 1
    return max(t, 0)


def win_prob(m: int) -> Fraction:
    if m < 1:
        raise ValueError("m must be >= 1")
    return Fraction(1, m)


def lose_prob(m: int) -> Fraction:
    if m < 1:
        raise ValueError("m must be >= 1")
    return Fraction(m - 1, m)


def utility_bait(m: int, reward: Number, deposit: Number) -> Fraction:
    """Expected utility of one of m baiters: R/m - (m-1) L/m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return win_prob(m) * as_fraction(reward) - lose_prob(m) * as_fraction(deposit)


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    k: int
    t: int
    gain_total: Fraction = Fraction(0)
    deposit_coeff: Fraction = Fraction(0)
    delta: Fraction | None = None
    t0: int = field(init=False)

    def __post_init__(self):
        if self.n < 1 or self.k < 0 or self.t < 0:
            raise ValueError(f"invalid (n, k, t) = ({self.n}, {self.k}, {self.t})")
        object.__setattr__(self, "gain_total", as_fraction(self.gain_total))
        object.__setattr__(self, "deposit_coeff", as_fraction(self.deposit_coeff))
        if self.delta is not None:
            object.__setattr__(self, "delta", as_fraction(self.delta))
            if self.delta < 0:
                raise ValueError("delta must be >= 0")
        if self.gain_total < 0 or self.deposit_coeff < 0:
            raise ValueError("gain_total and deposit_coeff must be >= 0")
        object.__setattr__(self, "t0", compute_t0(self.n))

    @property
    def feasible(self) -> bool:
        return feasible(self.n, self.k, self.t)

    @property
    def m(self) -> int:
        return compute_m(self.n, self.k, self.t)

    @property
    def effective_m(self) -> int:
        return max(self.m, 0)

    @property
    def gain_share(self) -> Fraction:
        return self.gain_total / self.k if self.k else Fraction(0)

    @classmethod
    def corollary(cls, n: int, k: int, t: int, gain_total: Number, delta: Number | None = None):
        """Params with d = 1/t0 and delta defaulting to G/10**6."""
        gain_total = as_fraction(gain_total)
        if delta is None:
            delta = gain_total / 10**6
        return cls(n, k, t, gain_total, corollary_deposit_coeff(n), as_fraction(delta))


@dataclass(frozen=True)
class FinancialParams:
    deposit: Fraction
    reward: Fraction

    @classmethod
    def from_params(cls, params: ProtocolParams) -> "FinancialParams":
        """L = d G (+ delta), R = t0 L."""
        deposit = params.deposit_coeff * params.gain_total
        if params.delta is not None:
            deposit += params.delta
        return cls(deposit, params.t0 * deposit)


@dataclass(frozen=True)
class UtilityModel:
    gain_share: Fraction
    epsilon_agree: Fraction = Fraction(1)

    def __post_init__(self):
        if self.epsilon_agree <= 0:
            raise ValueError("epsilon_agree must be strictly positive")

    @staticmethod
    def win_prob(m: int) -> Fraction:
        return win_prob(m)

    @staticmethod
    def lose_prob(m: int) -> Fraction:
        return lose_prob(m)


def dominance_check(params: ProtocolParams, fin: FinancialParams) -> bool:
    """Baiting beats disagreeing and slashed deposits cover the reward."""
    m = params.effective_m
    if m < 1:
        raise ValueError("dominance_check needs an effective baiter count >= 1")
    if params.k < 1:
        raise ValueError("dominance_check needs k >= 1")
    bait = utility_bait(m, fin.reward, fin.deposit)
    return bait > params.gain_total / params.k and params.t0 * fin.deposit >= fin.reward


def params_report(n: int, k: int | None = None, t: int | None = None,
                  gain_total: Number = 1, d: Number | str | None = None) -> dict:
    """Key/value summary backing the ``params`` CLI command."""
    t0 = compute_t0(n)
    report: dict = {"n": n, "t0": t0}
    if n >= 4 and t0 >= 1:
        report["corollary_d"] = str(corollary_deposit_coeff(n))
    wc = worst_case_deposit_coeff(n)
    report["worst_case_d"] = str(wc)
    if d is not None:
        d = as_fraction(d)
        report["d"] = str(d)
    if n >= 4 and t0 >= 1:
        report["t_max"] = max_tolerated_byzantine(n, d if d is not None else corollary_deposit_coeff(n))
    if k is not None and t is not None:
        report["k"] = k
        report["t"] = t
        report["feasible"] = feasible(n, k, t)
        report["m"] = compute_m(n, k, t)
        report["effective_m"] = effective_m(n, k, t)
        if k >= 1 and feasible(n, k, t):
            report["d_min"] = str(min_deposit_coeff(n, k, t))
        coeff = d if d is not None else (corollary_deposit_coeff(n) if t0 >= 1 else Fraction(0))
        delta = None if d is not None else as_fraction(gain_total) / 10**6
        pp = ProtocolParams(n, k, t, as_fraction(gain_total), coeff, delta)
        fin = FinancialParams.from_params(pp)
        report["G"] = str(pp.gain_total)
        report["L"] = str(fin.deposit)
        report["R"] = str(fin.reward)
        if k >= 1 and pp.effective_m >= 1 and pp.feasible:
            report["dominance"] = dominance_check(pp, fin)
    return report
