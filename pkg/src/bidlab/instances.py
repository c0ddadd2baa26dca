"""Hard benchmark instances and the empirical richness-ratio estimator.

Each generator builds a fixed competing-bid history on which the gap
between bidding classes is realized exactly: a rich multi-pair bidder
collects roughly twice (or m'-times) the value available to the best
single safe pair, or a fixed per-round regret floor is forced against
any online learner. The constructions are parameterized so the target
ratio comes out in closed form; tests re-derive every number by
clearing the auctions round by round.

richness_ratio measures the other direction: given any history, how
much value does a restricted safe class leave on the table relative to
a richer benchmark.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .auction import (
    CompetingBids,
    MUniformStrategy,
    TiePolicy,
    ValuationCurve,
    clear_auction,
)
from .dag import assign_offline_weights, build_dag, max_weight_path

__all__ = [
    "MIN_LEVEL_GAP",
    "DEFAULT_SIZE_CAP",
    "BenchmarkInstance",
    "RegretScenarioPair",
    "Benchmark",
    "FeasibleSameM",
    "SafeMPrime",
    "FeasibleMPrime",
    "RichnessEstimate",
    "gen_regret_lb",
    "regret_lb_delta",
    "gen_pouf_tight_m1",
    "gen_pouf_tight_general",
    "gen_mmbar_tight",
    "gen_cumulative_impossibility",
    "feasible_upper_bound",
    "richness_ratio",
]

# smallest allowed gap between distinct competing-bid levels; float ties
# at the win/lose boundary would make the constructions ambiguous
MIN_LEVEL_GAP = 1e-9

# instances are meant for desk-scale exact analysis; rounds * K beyond
# this is rejected (override via BIDLAB_SIZE_CAP)
DEFAULT_SIZE_CAP = 10**6


def _size_cap() -> int:
    return int(os.environ.get("BIDLAB_SIZE_CAP", DEFAULT_SIZE_CAP))


def _check_size(T: int, K: int, what: str) -> None:
    cap = _size_cap()
    if T * K > cap:
        raise ValueError(
            f"{what}: {T} rounds x {K} units = {T * K} exceeds the "
            f"size cap {cap}; shrink N/m or raise BIDLAB_SIZE_CAP"
        )


def _sentinel(curve: ValuationCurve, T: int) -> float:
    """A bid no value-seeking bidder outbids, kept finite: 10 * v_1 * T."""
    return 10.0 * float(curve.values[0]) * T


def _flat_tail_w(v: float, q: int) -> float:
    # average of the first q marginals of the curve [1, v, v, ...],
    # valid past the curve's own length (used for the q = M+1 level)
    return (1.0 + (q - 1) * v) / q


@dataclass(frozen=True, eq=False)
class BenchmarkInstance:
    """A fixed curve plus a full competing-bid history.

    Attributes
    ----------
    curve : ValuationCurve
        The bidder's marginal values.
    history : tuple of CompetingBids
        One top-K profile per round, in play order.
    K : int
        Units per round; every profile carries exactly this capacity.
    metadata : dict
        Construction name, parameters, and closed-form targets. Values
        are JSON-safe; prescribed strategies are stored as
        [bid, quantity] pair lists.
    """

    curve: ValuationCurve
    history: tuple
    K: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))
        if not self.history:
            raise ValueError("instance needs at least one round")
        for t, competing in enumerate(self.history):
            if not isinstance(competing, CompetingBids):
                raise TypeError(f"round {t}: expected CompetingBids")
            if competing.K != self.K:
                raise ValueError(
                    f"round {t}: capacity {competing.K} != instance K={self.K}"
                )
        levels = np.unique(np.concatenate([c.bids for c in self.history]))
        gaps = np.diff(levels)
        if levels.size and not np.all(np.isfinite(levels)):
            raise ValueError("competing bids must be finite")
        if gaps.size and gaps.min() < MIN_LEVEL_GAP:
            raise ValueError(
                f"distinct bid levels {gaps.min():.3e} apart; need >= {MIN_LEVEL_GAP}"
            )

    @property
    def T(self) -> int:
        return len(self.history)

    def simulate(
        self, strategy: MUniformStrategy, tie: TiePolicy = TiePolicy.FAVOR_BIDDER
    ):
        """Clear every round for a fixed strategy.

        Returns (total value, total payment, per-round allocations).
        """
        value = payment = 0.0
        alloc = []
        for competing in self.history:
            out = clear_auction(self.curve, strategy, competing, tie)
            value += out.value
            payment += out.payment
            alloc.append(out.x)
        return value, payment, alloc

    def prescribed_strategy(self) -> MUniformStrategy:
        """The strategy metadata says realizes the target ratio."""
        pairs = self.metadata["optimal_strategy"]
        return MUniformStrategy([(b, q) for b, q in pairs])

    def to_dict(self) -> dict:
        return {
            "curve": self.curve.values.tolist(),
            "K": self.K,
            "history": [c.bids.tolist() for c in self.history],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BenchmarkInstance":
        return cls(
            curve=ValuationCurve(payload["curve"]),
            history=tuple(
                CompetingBids(payload["K"], bids) for bids in payload["history"]
            ),
            K=int(payload["K"]),
            metadata=dict(payload.get("metadata", {})),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "BenchmarkInstance":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- regret floor ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegretScenarioPair:
    """Two competing-bid profiles plus per-scenario mixing probabilities.

    Scenario "P" plays the high profile (all bids at 1 - delta') with
    probability 1/2 + delta, scenario "Q" with probability 1/2 - delta.
    The two safe strategies returned by dominant_strategies() are the
    only contenders: conceding half the units is optimal under P,
    taking them all is optimal under Q, and no learner can tell the
    scenarios apart fast enough to avoid sqrt(T) regret.
    """

    curve: ValuationCurve
    beta_club: CompetingBids
    beta_diamond: CompetingBids
    delta: float

    @property
    def M(self) -> int:
        return self.curve.m_units

    def club_probability(self, scenario: str) -> float:
        if scenario == "P":
            return 0.5 + self.delta
        if scenario == "Q":
            return 0.5 - self.delta
        raise ValueError(f"scenario must be 'P' or 'Q', got {scenario!r}")

    def dominant_strategies(self):
        """(concede half, take all), both safe and undominated."""
        M = self.M
        return (
            MUniformStrategy([(self.curve.w(M // 2), M // 2)]),
            MUniformStrategy([(self.curve.w(M), M)]),
        )

    def expected_round_value(self, strategy: MUniformStrategy, scenario: str) -> float:
        p = self.club_probability(scenario)
        v_club = clear_auction(self.curve, strategy, self.beta_club).value
        v_diam = clear_auction(self.curve, strategy, self.beta_diamond).value
        return p * v_club + (1.0 - p) * v_diam

    def adversary(self, scenario: str, rng=None, seed: int = 0):
        """Per-round profile sampler for run_rounds, scenario fixed."""
        p = self.club_probability(scenario)
        rng = np.random.default_rng(seed) if rng is None else rng

        def draw(t, strategies, outcomes):
            return self.beta_club if rng.random() < p else self.beta_diamond

        return draw

    def mixture_adversary(self, rng=None, seed: int = 0):
        """Draw the scenario fairly once, then sample profiles from it."""
        rng = np.random.default_rng(seed) if rng is None else rng
        scenario = "P" if rng.random() < 0.5 else "Q"
        return self.adversary(scenario, rng=rng)


def gen_regret_lb(M: int, delta: float) -> RegretScenarioPair:
    """Two-scenario family forcing regret proportional to M * sqrt(T).

    The curve has M/2 marginals at 1 and M/2 at 1 - delta; the two
    profiles bid all K = M units at 1 - delta' and at 1 - delta/2 - delta'
    respectively, delta' = delta / (2M). Conceding (bid 1 for M/2 units)
    is worth exactly M/2 per round in both scenarios; taking all M units
    at 1 - delta/2 earns (M/2)(2 - delta) per profile-low round and 0
    otherwise, which beats conceding only when the low profile is the
    frequent one.

    delta = 0 is accepted and collapses the scenarios into one.
    """
    if M < 2 or M % 2:
        raise ValueError(f"M must be even and >= 2, got {M}")
    if not 0.0 <= delta < 0.25:
        raise ValueError(f"delta must lie in [0, 1/4), got {delta}")
    v = 1.0 - delta
    d_small = delta / (2.0 * M)
    curve = ValuationCurve([1.0] * (M // 2) + [v] * (M // 2))
    club = CompetingBids(M, [1.0 - d_small] * M)
    diamond = CompetingBids(M, [(1.0 + v) / 2.0 - d_small] * M)
    return RegretScenarioPair(curve, club, diamond, delta)


def regret_lb_delta(T: int) -> float:
    """Scenario separation that maximizes the forced regret at horizon T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return 1.0 / (4.0 * math.sqrt(2.0 * T))


# -- tight ratio constructions -----------------------------------------------


def _reject_small_eps(eps: float, name: str) -> None:
    if eps < MIN_LEVEL_GAP:
        raise ValueError(
            f"{name}: bid offset eps={eps:.3e} below {MIN_LEVEL_GAP}; "
            "the construction would hinge on float ties"
        )


def gen_pouf_tight_m1(delta: float) -> BenchmarkInstance:
    """Single-pair safe bidding forfeits a (2 - delta) factor, exactly.

    M = T = 2 * ceil(1/delta) units and rounds, K = M + 1. For the first
    M - 1 rounds one competing slot is priced at 1 - eps (only a bid of
    w_1 = 1 clears it) under K - 1 blockers at the sentinel; the last
    round everyone bids eps. Demanding everything at bid 1 stays
    RoI-feasible, earns 1 per early round and 1 + (M-1)v at the end;
    any single safe pair must choose between the early unit and the
    final burst and gets M at best.
    """
    if not 0.0 < delta <= 0.5:
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    M = T = 2 * math.ceil(1.0 / delta)
    K = M + 1
    _check_size(T, K, "gen_pouf_tight_m1")
    eps = (delta - 1.0 / M) / (4.0 * (1.0 - 1.0 / M))
    _reject_small_eps(eps, "gen_pouf_tight_m1")
    v = 1.0 - 4.0 * eps
    curve = ValuationCurve([1.0] + [v] * (M - 1))
    C = _sentinel(curve, T)
    early = CompetingBids(K, [C] * (K - 1) + [1.0 - eps])
    final = CompetingBids(K, [eps] * K)
    history = (early,) * (M - 1) + (final,)
    opt_value = (M - 1) + curve.value(M)
    metadata = {
        "name": "pouf_tight_m1",
        "delta": delta,
        "M": M,
        "T": T,
        "K": K,
        "eps": eps,
        "v": v,
        "sentinel": C,
        "target_ratio": 2.0 - delta,
        "optimal_strategy": [[1.0, M]],
        "optimal_strategy_feasible_only": True,
        "opt_value": opt_value,
        "safe1_value": float(M),
    }
    return BenchmarkInstance(curve, history, K, metadata)


def gen_pouf_tight_general(m: int, delta: float, N: int) -> BenchmarkInstance:
    """m-pair feasible bidding beats the best safe pair by 2 - delta.

    T = M = N^(2m-1), K = M + 1, and the history splits into 2m
    partitions. Partition 1 is a single round with every slot at
    w_{M+1} + eps; partition j >= 2 has N^(j-1) - N^(j-2) rounds whose
    cheapest slots sit at w_{q_j + 1} + eps with q_j = N^(2m-j) (one
    extra slot at that level when j is odd), the rest at the sentinel.
    The prescribed m-pair strategy (bid 1 for N units, then w_{N^(2j-2)}
    for the next block) wins exactly q_j units in partition j while
    every single safe pair is squeezed to the value N^(2m-1) of always
    winning one top unit.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0.0 < delta <= 0.5:
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    if N < 2 * math.ceil(1.0 / delta):
        raise ValueError(
            f"N={N} too small: need N >= 2*ceil(1/delta) = {2 * math.ceil(1.0 / delta)}"
        )
    M = T = N ** (2 * m - 1)
    K = M + 1
    if M > _size_cap():
        raise ValueError(f"N^(2m-1) = {M} exceeds the size cap {_size_cap()}")
    _check_size(T, K, "gen_pouf_tight_general")
    eps_prime = (m * delta / (2 * m - 1) - 1.0 / N) / (2.0 * (1.0 - 1.0 / N))
    eps = eps_prime / (M * (M + 1))
    _reject_small_eps(eps, "gen_pouf_tight_general")
    v = 1.0 - 2.0 * eps_prime
    curve = ValuationCurve([1.0] + [v] * (M - 1))
    C = _sentinel(curve, T)

    sizes = [1] + [N ** (j - 1) - N ** (j - 2) for j in range(2, 2 * m + 1)]
    counts = [K]
    levels = [_flat_tail_w(v, M + 1) + eps]
    units = [M]
    for j in range(2, 2 * m + 1):
        q = N ** (2 * m - j)
        counts.append(q + 1 if j % 2 else q)
        levels.append(curve.w(q + 1) + eps)
        units.append(q)

    history = []
    for size, n_small, level in zip(sizes, counts, levels):
        profile = CompetingBids(K, [C] * (K - n_small) + [level] * n_small)
        history.extend([profile] * size)

    pairs = [[1.0, N]] if m > 1 else [[1.0, M]]
    for j in range(2, m + 1):
        pairs.append(
            [curve.w(N ** (2 * j - 2)), N ** (2 * j - 1) - N ** (2 * j - 3)]
        )
    opt_value = M + (2 * m - 1) * (M - M // N) * v
    metadata = {
        "name": "pouf_tight_general",
        "m": m,
        "delta": delta,
        "N": N,
        "M": M,
        "T": T,
        "K": K,
        "eps": eps,
        "eps_prime": eps_prime,
        "v": v,
        "sentinel": C,
        "target_ratio": 2.0 - delta,
        "partition_sizes": sizes,
        "partition_small_counts": counts,
        "partition_levels": levels,
        "partition_units": units,
        "optimal_strategy": pairs,
        "optimal_strategy_feasible_only": True,
        "opt_value": opt_value,
        "safe1_value": float(M),
    }
    return BenchmarkInstance(curve, history, K, metadata)


def gen_mmbar_tight(m_prime: int, delta: float, N: int) -> BenchmarkInstance:
    """The best m'-pair safe strategy beats the best pair by m' - delta.

    T = M = K = N^(m'-1) with m' partitions: one opening round priced at
    w_{M+1} + eps on every slot, then partition j has N^(j-1) - N^(j-2)
    rounds with the cheapest N^(m'-j) + 1 slots at w_{N^(m'-j)+1} + eps
    and sentinels above. The safe strategy with breakpoints
    (1, N, ..., N^(m'-1)) wins exactly N^(m'-j) units in partition j;
    any single pair collects only the always-available top unit.

    m_prime = 1 yields the degenerate one-round instance with ratio 1.
    """
    if m_prime < 1:
        raise ValueError(f"m_prime must be >= 1, got {m_prime}")
    if m_prime == 1:
        curve = ValuationCurve([1.0])
        history = (CompetingBids(1, [0.5]),)
        metadata = {
            "name": "mmbar_tight",
            "m_prime": 1,
            "delta": delta,
            "N": N,
            "M": 1,
            "T": 1,
            "K": 1,
            "target_ratio": 1.0,
            "partition_sizes": [1],
            "partition_units": [1],
            "optimal_strategy": [[1.0, 1]],
            "optimal_strategy_feasible_only": False,
            "opt_value": 1.0,
            "safe1_value": 1.0,
        }
        return BenchmarkInstance(curve, history, 1, metadata)

    if not 0.0 < delta <= 0.5:
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    if N < math.ceil(m_prime / delta):
        raise ValueError(
            f"N={N} too small: need N >= ceil(m'/delta) = {math.ceil(m_prime / delta)}"
        )
    M = T = K = N ** (m_prime - 1)
    if M > _size_cap():
        raise ValueError(f"N^(m'-1) = {M} exceeds the size cap {_size_cap()}")
    _check_size(T, K, "gen_mmbar_tight")
    eps_prime = (delta / (m_prime - 1) - 1.0 / N) / (2.0 * (1.0 - 1.0 / N))
    eps = eps_prime / (M * (M + 1))
    _reject_small_eps(eps, "gen_mmbar_tight")
    v = 1.0 - 2.0 * eps_prime
    curve = ValuationCurve([1.0] + [v] * (M - 1))
    C = _sentinel(curve, T)

    sizes = [1] + [N ** (j - 1) - N ** (j - 2) for j in range(2, m_prime + 1)]
    counts = [K]
    levels = [_flat_tail_w(v, M + 1) + eps]
    units = [M]
    for j in range(2, m_prime + 1):
        q = N ** (m_prime - j)
        counts.append(q + 1)
        levels.append(curve.w(q + 1) + eps)
        units.append(q)

    history = []
    for size, n_small, level in zip(sizes, counts, levels):
        profile = CompetingBids(K, [C] * (K - n_small) + [level] * n_small)
        history.extend([profile] * size)

    breakpoints = [N**j for j in range(m_prime)]
    safe_opt = MUniformStrategy.from_breakpoints(curve, breakpoints)
    opt_value = M + (m_prime - 1) * (M - M // N) * v
    metadata = {
        "name": "mmbar_tight",
        "m_prime": m_prime,
        "delta": delta,
        "N": N,
        "M": M,
        "T": T,
        "K": K,
        "eps": eps,
        "eps_prime": eps_prime,
        "v": v,
        "sentinel": C,
        "target_ratio": m_prime - delta,
        "partition_sizes": sizes,
        "partition_small_counts": counts,
        "partition_levels": levels,
        "partition_units": units,
        "optimal_strategy": [list(p) for p in zip(safe_opt.bids, safe_opt.quantities)],
        "optimal_strategy_feasible_only": False,
        "opt_value": opt_value,
        "safe1_value": float(M),
    }
    return BenchmarkInstance(curve, history, K, metadata)


def gen_cumulative_impossibility(epsilon: float, T: int) -> BenchmarkInstance:
    """Cumulative-RoI bidding cannot be approximated by per-round safety.

    One unit of value per round (m = M = 1), K = 2. For the first
    (1-eps)T rounds the top competing bids are [3T, 1 + eps/2]: winning
    requires overbidding the value, which per-round-safe play never
    does, while a cumulative bidder at 1 + eps runs a deficit it repays
    exactly during the final eps*T giveaway rounds priced at eps. The
    overbidder banks value T against payment T; safe play gets eps*T.
    """
    if not 0.0 < epsilon <= 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    n_cheap = epsilon * T
    if abs(n_cheap - round(n_cheap)) > 1e-9:
        raise ValueError(f"epsilon*T = {n_cheap} must be an integer")
    n_cheap = int(round(n_cheap))
    if not 0 < n_cheap < T:
        raise ValueError("need 0 < epsilon*T < T")
    curve = ValuationCurve([1.0])
    expensive = CompetingBids(2, [3.0 * T, 1.0 + epsilon / 2.0])
    cheap = CompetingBids(2, [epsilon, epsilon])
    history = (expensive,) * (T - n_cheap) + (cheap,) * n_cheap
    metadata = {
        "name": "cumulative_impossibility",
        "epsilon": epsilon,
        "T": T,
        "M": 1,
        "K": 2,
        "hindsight_bid": 1.0 + epsilon,
        "hindsight_value": float(T),
        "hindsight_payment": float(T),
        "safe_value": float(n_cheap),
        "phase_lengths": [T - n_cheap, n_cheap],
    }
    return BenchmarkInstance(curve, history, 2, metadata)


# -- richness ratio ----------------------------------------------------------


@dataclass(frozen=True)
class Benchmark:
    """Numerator class for richness_ratio.

    kind "safe" compares against the exact optimum over safe strategies
    with m_prime pairs; kind "feasible" against all RoI-feasible bid
    vectors, whose optimum is replaced by a per-round-decoupled upper
    bound (the estimate then lower-bounds alpha). m_prime None means
    the learner's own m.
    """

    kind: str
    m_prime: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("safe", "feasible"):
            raise ValueError(f"kind must be 'safe' or 'feasible', got {self.kind!r}")
        if self.m_prime is not None and self.m_prime < 1:
            raise ValueError("m_prime must be >= 1")


FeasibleSameM = Benchmark("feasible", None)


def SafeMPrime(m_prime: int) -> Benchmark:
    return Benchmark("safe", int(m_prime))


def FeasibleMPrime(m_prime: int) -> Benchmark:
    return Benchmark("feasible", int(m_prime))


@dataclass(frozen=True)
class RichnessEstimate:
    alpha: float
    lam: float
    metadata: dict


def feasible_upper_bound(
    curve: ValuationCurve, history, tie: TiePolicy = TiePolicy.FAVOR_BIDDER
) -> float:
    """Sum over rounds of the best single safe pair's value.

    Upper-bounds the total value of every RoI-feasible bid vector (of
    any richness): whatever x_t a feasible strategy wins in round t,
    bidding (w_{x_t}, x_t) wins at least as much there. The bound is
    decoupled across rounds, so it is generally unattainable by one
    fixed strategy.
    """
    w = curve.averaged
    M = curve.m_units
    qs = np.arange(1, M + 1)
    prefix = np.concatenate(([0.0], np.cumsum(curve.values)))
    side = "right" if tie is TiePolicy.FAVOR_BIDDER else "left"
    total = 0.0
    for competing in history:
        thr = competing.thresholds(M)
        x = np.minimum(np.searchsorted(thr, w, side=side), qs)
        total += float(prefix[x].max())
    return total


def richness_ratio(
    history,
    curve: ValuationCurve,
    m: int,
    benchmark: Benchmark = FeasibleSameM,
    tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
) -> RichnessEstimate:
    """How much of a richer benchmark's value the m-pair safe class keeps.

    lam is the ratio benchmark/my-class of total hindsight value on the
    given history; alpha = 1/lam is the kept fraction. Safe benchmarks
    are computed exactly by dynamic programming; feasible benchmarks use
    feasible_upper_bound, so the reported alpha is a lower bound on the
    true kept fraction (flagged in metadata).
    """
    history = tuple(history)
    _check_size(len(history), curve.m_units, "richness_ratio")
    dag = build_dag(curve.m_units, m)
    assign_offline_weights(dag, history, curve, tie)
    _, denom = max_weight_path(dag)

    if benchmark.kind == "feasible":
        num = feasible_upper_bound(curve, history, tie)
        is_lower_bound = True
    else:
        m_prime = benchmark.m_prime if benchmark.m_prime is not None else m
        bench_dag = build_dag(curve.m_units, m_prime)
        assign_offline_weights(bench_dag, history, curve, tie)
        _, num = max_weight_path(bench_dag)
        is_lower_bound = False

    if denom > 0.0:
        lam = num / denom
    else:
        lam = math.inf if num > 0.0 else 1.0
    alpha = 0.0 if math.isinf(lam) else 1.0 / lam
    metadata = {
        "benchmark_kind": benchmark.kind,
        "benchmark_m_prime": benchmark.m_prime,
        "m": m,
        "numerator": num,
        "denominator": denom,
        "alpha_is_lower_bound": is_lower_bound,
    }
    return RichnessEstimate(alpha=alpha, lam=lam, metadata=metadata)
