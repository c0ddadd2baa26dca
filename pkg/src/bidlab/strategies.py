"""Safe and undominated-safe strategy classes.

A strategy is safe when every bid stays at or below the averaged valuation
w_{Q_l} of its cumulative demand; safe strategies satisfy the RoI constraint
against every competing bid profile. Bidding exactly w_{Q_l} everywhere is
the undominated frontier of that class.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

from .auction import (
    CompetingBids,
    MUniformStrategy,
    TiePolicy,
    ValuationCurve,
    clear_auction,
)

# Enumeration refuses classes larger than this many strategies.
ENUM_CAP = 10**7


class StrategyClass(enum.Enum):
    OVERBID = "overbid"
    UNDOMINATED = "undominated"
    MIXED_SAFE = "mixed_safe"
    UNDERBID = "underbid"


@dataclass(frozen=True)
class SafeClassSpec:
    """The delta-shifted m-uniform undominated class over a curve.

    delta = 0 gives the safe undominated class; delta > 0 shifts every bid
    up by delta (used by the sliding-window heuristic).
    """

    curve: ValuationCurve
    m: int
    delta: float = 0.0

    def __post_init__(self):
        if not 1 <= self.m <= self.curve.m_units:
            raise ValueError(f"m={self.m} outside [1, {self.curve.m_units}]")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


def size_undominated(M: int, m: int) -> int:
    """Number of undominated strategies with at most m pairs over M units."""
    return sum(math.comb(M, k) for k in range(1, m + 1))


def enumerate_undominated(spec: SafeClassSpec):
    """Yield every strategy of the class, lexicographic in the Q-subset.

    Each subset {Q_1 < ... < Q_k} of [M] with k <= m yields the strategy
    bidding w_{Q_j} + delta for the Q_j - Q_{j-1} units of pair j.
    """
    M = spec.curve.m_units
    total = size_undominated(M, spec.m)
    if total > ENUM_CAP:
        raise ValueError(f"class size {total} exceeds enumeration cap {ENUM_CAP}")
    w = spec.curve.averaged
    for k in range(1, spec.m + 1):
        for zs in itertools.combinations(range(1, M + 1), k):
            prev = 0
            pairs = []
            for z in zs:
                pairs.append((w[z - 1] + spec.delta, z - prev))
                prev = z
            yield MUniformStrategy(pairs)


def is_safe(curve: ValuationCurve, strategy: MUniformStrategy) -> bool:
    """True iff b_l <= w_{Q_l} for every pair."""
    if strategy.total_demand > curve.m_units:
        raise ValueError("strategy demands more units than the curve values")
    return all(
        b <= curve.w(Q) for b, Q in zip(strategy.bids, strategy.cumulative)
    )


def classify(curve: ValuationCurve, strategy: MUniformStrategy) -> StrategyClass:
    """Place a strategy relative to the averaged valuations w_{Q_l}.

    Any bid above its w makes the strategy an overbid. Safe strategies split
    into undominated (every bid equal), underbid (every bid strictly below),
    and the mixed remainder.
    """
    if strategy.total_demand > curve.m_units:
        raise ValueError("strategy demands more units than the curve values")
    ws = [curve.w(Q) for Q in strategy.cumulative]
    if any(b > w for b, w in zip(strategy.bids, ws)):
        return StrategyClass.OVERBID
    if all(b == w for b, w in zip(strategy.bids, ws)):
        return StrategyClass.UNDOMINATED
    if all(b < w for b, w in zip(strategy.bids, ws)):
        return StrategyClass.UNDERBID
    return StrategyClass.MIXED_SAFE


def adversary_violating(
    curve: ValuationCurve, strategy: MUniformStrategy
) -> CompetingBids:
    """Competing bids that make an overbidding strategy violate its RoI.

    Targets the first pair l with b_l > w_{Q_l}: every unit beyond Q_l is
    blocked by an unbeatable bid and the first Q_l slots stay cheap, so the
    bidder wins exactly Q_l units at price b_l and pays above their value.
    """
    if classify(curve, strategy) is not StrategyClass.OVERBID:
        raise ValueError("strategy does not overbid; no violating profile exists")
    M = curve.m_units
    Q_target = next(
        Q for b, Q in zip(strategy.bids, strategy.cumulative) if b > curve.w(Q)
    )
    eps = strategy.bids[-1] / 4.0
    blocker = 2.0 * strategy.bids[0]
    profile = [blocker] * (M - Q_target) + [eps] * Q_target
    return CompetingBids(K=M, bids=profile)


def sum_to_max_value(
    curve: ValuationCurve,
    strategy: MUniformStrategy,
    competing: CompetingBids,
    tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
) -> float:
    """Value of a safe strategy as the max over its cumulative prefixes.

    V(b; beta) = max_l V((b_l, Q_l); beta). Holds for safe strategies, and
    more generally whenever the strategy is RoI-feasible for this profile.
    """
    return max(
        clear_auction(curve, MUniformStrategy([(b, Q)]), competing, tie).value
        for b, Q in zip(strategy.bids, strategy.cumulative)
    )


def brute_force_best(
    curve: ValuationCurve,
    m: int,
    history,
    tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
) -> tuple[MUniformStrategy, float]:
    """Hindsight-optimal undominated strategy by exhaustive enumeration.

    Ties go to the earliest strategy in enumeration order. Intended as the
    oracle for the DAG optimizer and for desk-scale experiments.
    """
    best, best_value = None, -math.inf
    for strategy in enumerate_undominated(SafeClassSpec(curve, m)):
        total = sum(
            clear_auction(curve, strategy, competing, tie).value
            for competing in history
        )
        if total > best_value:
            best, best_value = strategy, total
    assert best is not None
    return best, best_value
