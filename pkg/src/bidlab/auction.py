"""Uniform-price multi-unit auction mechanics.

K identical units are sold at the price of the lowest accepted bid (the K-th
highest bid overall). A bidder submits a small number of bid-quantity pairs
with strictly decreasing prices; value is additive over won units along a
weakly decreasing valuation curve.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

import numpy as np

# Minimum gap between distinct generated bid levels; instance generators
# refuse configurations that would separate levels by less than this.
EPS_GAP = 1e-9

_PAIR_RE = re.compile(r"\(([^,()]+),([^,()]+)\)")


class TiePolicy(enum.Enum):
    """How a bidder's unit bid that exactly equals a competing bid resolves.

    FAVOR_BIDDER: the bidder's unit wins the tie (the default mechanics).
    LOWER_INDEX_WINS: competing bids win ties, so the bidder needs a strictly
    higher bid for each unit.
    """

    FAVOR_BIDDER = "favor_bidder"
    LOWER_INDEX_WINS = "lower_index_wins"


class ValuationCurve:
    """Weakly decreasing nonnegative marginal values v_1 >= ... >= v_M.

    Args:
        values: marginal value per unit, v_1 > 0, nonincreasing, finite.
    """

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("curve must be a nonempty 1-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")
        if v[0] <= 0 or np.any(v < 0):
            raise ValueError("curve needs v_1 > 0 and all values >= 0")
        if np.any(np.diff(v) > 0):
            raise ValueError("curve must be nonincreasing")
        v.setflags(write=False)
        self.values = v
        # prefix[j] = v_1 + ... + v_j, prefix[0] = 0
        self._prefix = np.concatenate(([0.0], np.cumsum(v)))
        self._prefix.setflags(write=False)
        # averaged[j-1] = w_j, the average value of the first j units.
        # Where the rounded quotient would overshoot (w_j * j > prefix_j in
        # floats), nudge w_j down an ulp: a bidder paying w_j for each of j
        # units must never owe more than the value of those units, and the
        # feasibility comparison is exact.
        q = np.arange(1, v.size + 1, dtype=float)
        w = self._prefix[1:] / q
        over = w * q > self._prefix[1:]
        while np.any(over):
            w[over] = np.nextafter(w[over], 0.0)
            over = w * q > self._prefix[1:]
        self._averaged = w
        self._averaged.setflags(write=False)

    @property
    def m_units(self) -> int:
        return int(self.values.size)

    @property
    def averaged(self) -> np.ndarray:
        """w_j for j = 1..M as a read-only array (index j-1)."""
        return self._averaged

    def value(self, x: int) -> float:
        """Total value of winning the first x units."""
        if not 0 <= x <= self.m_units:
            raise ValueError(f"x={x} outside [0, {self.m_units}]")
        return float(self._prefix[x])

    def w(self, j: int) -> float:
        """Average per-unit value w_j of the first j units, 1 <= j <= M."""
        if not 1 <= j <= self.m_units:
            raise ValueError(f"j={j} outside [1, {self.m_units}]")
        return float(self._averaged[j - 1])

    def scaled(self, gamma: float) -> "ValuationCurve":
        """Fold a target RoI gamma into the curve by scaling with 1/(1+gamma)."""
        if gamma < 0:
            raise ValueError("gamma must be >= 0")
        return ValuationCurve(self.values / (1.0 + gamma))

    def __eq__(self, other):
        return isinstance(other, ValuationCurve) and np.array_equal(
            self.values, other.values
        )

    def __repr__(self):
        return f"ValuationCurve({self.values.tolist()})"


class MUniformStrategy:
    """Bid-quantity pairs <(b_1,q_1),...,(b_m,q_m)> with b_1 > ... > b_m > 0.

    Adjacent pairs with exactly equal bids are merged (same expanded unit-bid
    multiset, so allocation and payment are unchanged). Increasing bids are
    rejected.
    """

    def __init__(self, pairs):
        merged: list[tuple[float, int]] = []
        for b, q in pairs:
            b = float(b)
            q = int(q)
            if not math.isfinite(b) or b <= 0:
                raise ValueError(f"bid {b} must be positive and finite")
            if q <= 0:
                raise ValueError(f"quantity {q} must be a positive integer")
            if merged and b > merged[-1][0]:
                raise ValueError("bids must be nonincreasing across pairs")
            if merged and b == merged[-1][0]:
                merged[-1] = (b, merged[-1][1] + q)
            else:
                merged.append((b, q))
        if not merged:
            raise ValueError("strategy needs at least one pair")
        self.bids = tuple(b for b, _ in merged)
        self.quantities = tuple(q for _, q in merged)

    @property
    def num_pairs(self) -> int:
        return len(self.bids)

    @property
    def cumulative(self) -> tuple[int, ...]:
        """Q_j, total demand of the first j pairs."""
        out, acc = [], 0
        for q in self.quantities:
            acc += q
            out.append(acc)
        return tuple(out)

    @property
    def total_demand(self) -> int:
        return sum(self.quantities)

    def expanded(self) -> np.ndarray:
        """Unit bids e_1 >= e_2 >= ... as a flat vector (standard format)."""
        return np.repeat(self.bids, self.quantities)

    def prefix(self, ell: int) -> "MUniformStrategy":
        """The strategy truncated to its first ell pairs."""
        if not 1 <= ell <= self.num_pairs:
            raise ValueError(f"ell={ell} outside [1, {self.num_pairs}]")
        return MUniformStrategy(
            list(zip(self.bids[:ell], self.quantities[:ell]))
        )

    def to_text(self) -> str:
        return ";".join(f"({b:.9f},{q})" for b, q in zip(self.bids, self.quantities))

    @classmethod
    def from_text(cls, text: str) -> "MUniformStrategy":
        pairs = [(float(b), int(q)) for b, q in _PAIR_RE.findall(text)]
        if not pairs:
            raise ValueError(f"no (bid,quantity) pairs in {text!r}")
        return cls(pairs)

    @classmethod
    def from_breakpoints(cls, curve: ValuationCurve, breakpoints) -> "MUniformStrategy":
        """Undominated strategy bidding w_z at each cumulative breakpoint z.

        breakpoints: strictly increasing cumulative quantities 0 < z_1 <= ... <= M.
        """
        zs = list(breakpoints)
        if not zs or any(z2 <= z1 for z1, z2 in zip(zs, zs[1:])):
            raise ValueError("breakpoints must be strictly increasing and nonempty")
        if zs[0] < 1 or zs[-1] > curve.m_units:
            raise ValueError("breakpoints outside [1, M]")
        prev = 0
        pairs = []
        for z in zs:
            pairs.append((curve.w(z), z - prev))
            prev = z
        return cls(pairs)

    def __eq__(self, other):
        return (
            isinstance(other, MUniformStrategy)
            and self.bids == other.bids
            and self.quantities == other.quantities
        )

    def __hash__(self):
        return hash((self.bids, self.quantities))

    def __repr__(self):
        inner = ", ".join(f"({b:g},{q})" for b, q in zip(self.bids, self.quantities))
        return f"MUniformStrategy(<{inner}>)"


class CompetingBids:
    """Top-K competing bids for one round, stored in descending order.

    beta_minus(k) is the k-th smallest among the top K competing bids, with
    zero padding when fewer than K competing bids exist, beta_minus(0) = 0,
    and beta_minus(k) = inf for k > K (at most K units are ever allocated).
    """

    def __init__(self, K: int, bids):
        if K < 1:
            raise ValueError("K must be >= 1")
        arr = np.sort(np.asarray(bids, dtype=float))[::-1].copy()
        if arr.size > K:
            raise ValueError(f"{arr.size} bids exceed K={K}; use from_profile")
        if arr.size and (np.any(arr < 0) or not np.all(np.isfinite(arr))):
            raise ValueError("competing bids must be nonnegative and finite")
        self.K = int(K)
        self.bids = arr
        self.bids.setflags(write=False)
        # ascending with zero padding to length K: _asc[k-1] = beta_minus(k)
        self._asc = np.concatenate((np.zeros(K - arr.size), arr[::-1]))
        self._asc.setflags(write=False)

    @classmethod
    def from_profile(cls, K: int, all_bids) -> "CompetingBids":
        """Keep the top K of a full competing bid profile."""
        arr = np.sort(np.asarray(all_bids, dtype=float))[::-1]
        return cls(K, arr[:K])

    def beta_minus(self, k: int) -> float:
        if k < 0:
            raise ValueError("k must be >= 0")
        if k == 0:
            return 0.0
        if k > self.K:
            return math.inf
        return float(self._asc[k - 1])

    def thresholds(self, depth: int) -> np.ndarray:
        """[beta_minus(1), ..., beta_minus(depth)], inf past position K."""
        out = np.full(depth, np.inf)
        upto = min(depth, self.K)
        out[:upto] = self._asc[:upto]
        return out

    def __repr__(self):
        return f"CompetingBids(K={self.K}, bids={self.bids.tolist()})"


@dataclass(frozen=True)
class RoundOutcome:
    """Result of one auction round from the bidder's perspective.

    p is the market clearing price (K-th highest combined bid, zero when the
    auction is undersubscribed); the bidder pays p per won unit, so the
    payment is zero whenever x = 0 regardless of where the market cleared.
    """

    x: int
    p: float
    value: float
    payment: float

    @property
    def clearing_price(self) -> float:
        return self.p

    @property
    def surplus(self) -> float:
        return self.value - self.payment

    @property
    def roi_ok(self) -> bool:
        return self.value >= self.payment


def clear_auction(
    curve: ValuationCurve,
    strategy: MUniformStrategy,
    competing: CompetingBids,
    tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
) -> RoundOutcome:
    """Run one uniform-price auction round.

    The bidder's k-th expanded unit wins iff its bid clears beta_minus(k)
    (with equality winning under FAVOR_BIDDER).
    """
    if strategy.total_demand > curve.m_units:
        raise ValueError("strategy demands more units than the curve values")
    e = strategy.expanded()
    thr = competing.thresholds(e.size)
    wins = e >= thr if tie is TiePolicy.FAVOR_BIDDER else e > thr
    # e is nonincreasing and thr nondecreasing, so wins is a prefix
    x = int(e.size if wins.all() else np.argmin(wins))
    combined = np.concatenate((e, competing.bids))
    if combined.size >= competing.K:
        p = float(np.partition(combined, -competing.K)[-competing.K])
    else:
        p = 0.0
    return RoundOutcome(x=x, p=p, value=curve.value(x), payment=p * x)


def per_unit_price(
    strategy: MUniformStrategy, competing: CompetingBids, x: int
) -> float:
    """Price paid per unit given the allocation x, by case analysis.

    Independent of clear_auction's K-th highest route: zero allocation pays
    nothing; an allocation strictly inside pair l pays b_l; an allocation
    exhausting pair l exactly pays min(b_l, beta_minus(Q_l + 1)).
    """
    if x == 0:
        return 0.0
    prev = 0
    for b, Q in zip(strategy.bids, strategy.cumulative):
        if prev < x < Q:
            return float(b)
        if x == Q:
            return float(min(b, competing.beta_minus(Q + 1)))
        prev = Q
    raise ValueError(f"allocation {x} exceeds total demand {strategy.total_demand}")


def roi_feasible(outcome: RoundOutcome) -> bool:
    """Whether the round's value covers its payment (target RoI folded in)."""
    return outcome.value >= outcome.payment


def feasible_over_history(
    curve: ValuationCurve,
    strategy: MUniformStrategy,
    history,
    tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
) -> bool:
    """Whether the fixed strategy is RoI-feasible in every round of history."""
    return all(
        clear_auction(curve, strategy, competing, tie).roi_ok
        for competing in history
    )
