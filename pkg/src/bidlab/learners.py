"""Online no-regret learners over the safe-strategy DAG.

All six modes share one round skeleton: UPDATE the edge probabilities with
the previous round's (possibly estimated) weights, SAMPLE an s-d path by a
Markov walk, MAP it to a safe strategy. They differ in the feedback they
observe and in how the next update's weight vector is built:

- FullInfo: exact per-edge weights from the revealed competing bids.
- Bandit: the one-sided unbiased estimator built from allocation alone.
- AdaptiveBandit: covering-set exploration mixed in, with a biased
  estimator whose denominator is floored at lambda / |cover|.
- ContextualStochastic / ContextualAdversarial: one DAG per declared
  valuation curve; stochastic updates every copy each round, adversarial
  touches only the observed context's copy.
- ShiftedWindow: full-information play with every sampled bid shifted by
  the per-unit surplus banked over a sliding window.

Learners assume values normalized to [0, 1]; rescale curves first
(``ValuationCurve.scaled``) when working in raw units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .auction import (
    CompetingBids,
    MUniformStrategy,
    RoundOutcome,
    TiePolicy,
    ValuationCurve,
    clear_auction,
)
from .dag import (
    DagPath,
    LayeredDag,
    build_covering_set,
    build_dag,
    max_weight_path,
    num_edges,
    path_to_strategy,
    round_weights,
    sample_path,
    update_probabilities,
)

# adaptive mode requires lambda = 2 * eta * (m+1) * M * |E| to this tolerance
LAMBDA_TOL = 1e-9


class LearnerMode(Enum):
    FULL_INFO = "full_info"
    BANDIT = "bandit"
    ADAPTIVE_BANDIT = "adaptive_bandit"
    CONTEXTUAL_STOCHASTIC = "contextual_stochastic"
    CONTEXTUAL_ADVERSARIAL = "contextual_adversarial"
    SHIFTED_WINDOW = "shifted_window"


# -- default tunings ---------------------------------------------------------


def full_info_eta(M: int, m: int, T: int) -> float:
    return math.sqrt(8.0 * m * math.log(M) / T) / M


def bandit_eta(M: int, m: int, T: int) -> float:
    return math.sqrt(math.log(M) / (m * T)) / M**2


def adaptive_eta(M: int, m: int, T: int) -> float:
    E = num_edges(M, m)
    return math.sqrt(m * math.log(M) / ((m + 1) * E * T)) / (2.0 * M)


def adaptive_lambda(M: int, m: int, T: int) -> float:
    E = num_edges(M, m)
    return math.sqrt(m * (m + 1) * E * math.log(M) / T)


def adaptive_theta(M: int, m: int, T: int, delta_conf: float) -> float:
    E = num_edges(M, m)
    return M * math.sqrt((m + 1) * math.log(E / delta_conf) / (T * E))


@dataclass
class LearnerConfig:
    """Run parameters; mode-specific defaults are filled at construction.

    For the adaptive mode the identity lam = 2 * eta * (m+1) * M * |E| is
    enforced: give one of (eta, lam) and the other is derived, give both
    and they must agree to LAMBDA_TOL, give neither and the theory-tuned
    defaults (which satisfy the identity exactly) are used.
    """

    mode: LearnerMode
    M: int
    m: int
    T: int
    eta: Optional[float] = None
    lam: Optional[float] = None
    theta: Optional[float] = None
    delta_conf: Optional[float] = None
    T0: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = LearnerMode(self.mode)
        if not 1 <= self.m <= self.M:
            raise ValueError(f"need 1 <= m <= M, got m={self.m}, M={self.M}")
        if self.T < 1:
            raise ValueError("T must be >= 1")

        if self.mode is LearnerMode.ADAPTIVE_BANDIT:
            if self.delta_conf is None:
                self.delta_conf = 1.0 / self.T
            if not 0 < self.delta_conf < 1:
                raise ValueError("delta_conf must lie in (0, 1)")
            E = num_edges(self.M, self.m)
            coupling = 2.0 * (self.m + 1) * self.M * E
            if self.eta is None and self.lam is None:
                self.eta = adaptive_eta(self.M, self.m, self.T)
                self.lam = adaptive_lambda(self.M, self.m, self.T)
            elif self.eta is None:
                self.eta = self.lam / coupling
            elif self.lam is None:
                self.lam = self.eta * coupling
            if abs(self.lam - self.eta * coupling) > LAMBDA_TOL:
                raise ValueError(
                    "adaptive mode requires lam = 2*eta*(m+1)*M*|E|; got "
                    f"lam={self.lam!r} vs {self.eta * coupling!r}"
                )
            if not 0 < self.lam <= 1:
                raise ValueError(f"lam must lie in (0, 1], got {self.lam!r}")
            if self.theta is None:
                self.theta = adaptive_theta(self.M, self.m, self.T, self.delta_conf)
            if not 0 < self.theta <= self.M:
                raise ValueError(f"theta must lie in (0, M], got {self.theta!r}")
        elif self.eta is None:
            if self.mode is LearnerMode.BANDIT:
                self.eta = bandit_eta(self.M, self.m, self.T)
            else:
                self.eta = full_info_eta(self.M, self.m, self.T)

        if self.eta < 0:
            raise ValueError("eta must be nonnegative")

        if self.mode is LearnerMode.SHIFTED_WINDOW:
            if self.T0 is None:
                self.T0 = 1
            if self.T0 != math.inf and (self.T0 != int(self.T0) or self.T0 < 1):
                raise ValueError("T0 must be a positive integer or math.inf")


@dataclass(frozen=True)
class BanditFeedback:
    """Own allocation and payment; the only feedback in the bandit setting."""

    x: int
    payment: float


# -- learners ----------------------------------------------------------------


class _DagLearner:
    """Shared state: one DAG, the pending weight vector, a round counter."""

    mode: LearnerMode

    def __init__(
        self,
        config: LearnerConfig,
        curve: ValuationCurve,
        rng: Optional[np.random.Generator] = None,
        tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
    ):
        if config.mode is not self.mode:
            raise ValueError(f"config.mode is {config.mode}, expected {self.mode}")
        if curve.m_units != config.M:
            raise ValueError("curve length must equal config.M")
        if curve.values[0] > 1.0:
            raise ValueError("values must be normalized to [0, 1]")
        self.config = config
        self.curve = curve
        self.tie = tie
        self.rng = np.random.default_rng(config.seed) if rng is None else rng
        self.dag = build_dag(config.M, config.m)
        self._pending = np.zeros(self.dag.n_edges)
        self._t = 0
        self._awaiting = False
        self._last_path: Optional[DagPath] = None

    @property
    def t(self) -> int:
        return self._t

    def _advance(self) -> None:
        if self._awaiting:
            raise RuntimeError("observe the previous round before proposing")
        if self._t >= self.config.T:
            raise RuntimeError(f"horizon T={self.config.T} exhausted")
        self._t += 1
        self._awaiting = True


class FullInfoLearner(_DagLearner):
    """Weight-pushing Hedge under full information.

    The first update runs on all-zero weights, so round 1 samples uniformly
    over paths. After the competing bids are revealed, exact per-edge
    weights are stored for the next round's update.
    """

    mode = LearnerMode.FULL_INFO

    def propose(self) -> MUniformStrategy:
        self._advance()
        update_probabilities(self.dag, self.config.eta, self._pending)
        self._last_path = sample_path(self.dag, self.rng)
        return path_to_strategy(self._last_path, self.curve)

    def observe(self, competing: CompetingBids) -> None:
        self._pending = round_weights(self.dag, self.curve, competing, tie=self.tie)
        self._awaiting = False


def _recovered_edge_weight(
    curve: ValuationCurve, jfrom: int, jto: int, x: int
) -> float:
    # allocation is a prefix of the demanded units, so on the sampled path
    # the indicator for unit k is exactly 1{k <= x}
    if jto < 0 or x <= jfrom:
        return 0.0
    return curve.value(min(jto, x)) - curve.value(jfrom)


class BanditLearner(_DagLearner):
    """Semi-bandit learner: Hedge updates with the one-sided estimator.

    On-path edge weights are recovered from the allocation alone; off-path
    edges fall back to their a-priori upper bound w_bar, which keeps the
    estimator unbiased while bounding it from above by w_bar everywhere.
    """

    mode = LearnerMode.BANDIT

    def __init__(self, config, curve, rng=None, tie=TiePolicy.FAVOR_BIDDER):
        super().__init__(config, curve, rng, tie)
        self.w_bar = np.where(
            self.dag.is_sink_edge, 0.0, (self.dag.jto - self.dag.jfrom).astype(float)
        )
        self._p: Optional[np.ndarray] = None

    def propose(self) -> MUniformStrategy:
        self._advance()
        update_probabilities(self.dag, self.config.eta, self._pending)
        self._p = self.dag.current_marginals()
        if self._p.min() <= 0:
            raise AssertionError("edge marginal must stay positive")
        self._last_path = sample_path(self.dag, self.rng)
        return path_to_strategy(self._last_path, self.curve)

    def observe_bandit(self, feedback: BanditFeedback) -> None:
        est = self.w_bar.copy()
        for e in self._last_path.edges:
            w_rec = _recovered_edge_weight(
                self.curve, int(self.dag.jfrom[e]), int(self.dag.jto[e]), feedback.x
            )
            est[e] -= (self.w_bar[e] - w_rec) / self._p[e]
        if np.any(est > self.w_bar + 1e-12):
            raise AssertionError("estimator exceeded its per-edge bound")
        self._pending = est
        self._awaiting = False


class AdaptiveBanditLearner(_DagLearner):
    """Bandit learner hardened against adaptive adversaries.

    Sampling mixes the weight-pushing walk with uniform draws from a fixed
    covering path set (probability lam), which floors every edge marginal
    at lam / |cover|. The probability update itself runs every round; only
    the sampling branch is randomized.
    """

    mode = LearnerMode.ADAPTIVE_BANDIT

    def __init__(self, config, curve, rng=None, tie=TiePolicy.FAVOR_BIDDER):
        super().__init__(config, curve, rng, tie)
        self.cover = build_covering_set(self.dag)
        freq = np.zeros(self.dag.n_edges)
        for path in self.cover:
            freq[list(path.edges)] += 1.0
        self.cover_freq = freq / len(self.cover)
        self._p: Optional[np.ndarray] = None

    def propose(self) -> MUniformStrategy:
        self._advance()
        cfg = self.config
        update_probabilities(self.dag, cfg.eta, self._pending)
        p_hat = self.dag.current_marginals()
        self._p = (1.0 - cfg.lam) * p_hat + cfg.lam * self.cover_freq
        if self._p.min() < cfg.lam / len(self.cover) - 1e-12:
            raise AssertionError("edge marginal fell below the exploration floor")
        if self.rng.random() < cfg.lam:
            self._last_path = self.cover[int(self.rng.integers(len(self.cover)))]
        else:
            self._last_path = sample_path(self.dag, self.rng)
        return path_to_strategy(self._last_path, self.curve)

    def observe_bandit(self, feedback: BanditFeedback) -> None:
        est = self.config.theta / self._p
        for e in self._last_path.edges:
            w_rec = _recovered_edge_weight(
                self.curve, int(self.dag.jfrom[e]), int(self.dag.jto[e]), feedback.x
            )
            est[e] += w_rec / self._p[e]
        self._pending = est
        self._awaiting = False


class _ContextualLearner:
    """One DAG copy per declared context curve."""

    mode: LearnerMode

    def __init__(
        self,
        config: LearnerConfig,
        contexts: Sequence[ValuationCurve],
        rng: Optional[np.random.Generator] = None,
        tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
    ):
        if config.mode is not self.mode:
            raise ValueError(f"config.mode is {config.mode}, expected {self.mode}")
        if not contexts:
            raise ValueError("need at least one context curve")
        for curve in contexts:
            if curve.m_units != config.M:
                raise ValueError("every context curve must have M values")
            if curve.values[0] > 1.0:
                raise ValueError("values must be normalized to [0, 1]")
        self.config = config
        self.contexts = list(contexts)
        self.tie = tie
        self.rng = np.random.default_rng(config.seed) if rng is None else rng
        self.dags = [build_dag(config.M, config.m) for _ in self.contexts]
        self._pending = [np.zeros(d.n_edges) for d in self.dags]
        self._t = 0
        self._awaiting = False
        self._last_idx: Optional[int] = None
        self._last_path: Optional[DagPath] = None

    @property
    def t(self) -> int:
        return self._t

    def context_index(self, context: ValuationCurve) -> int:
        for i, curve in enumerate(self.contexts):
            if curve == context:
                return i
        raise ValueError("unknown context curve")

    def _advance(self) -> None:
        if self._awaiting:
            raise RuntimeError("observe the previous round before proposing")
        if self._t >= self.config.T:
            raise RuntimeError(f"horizon T={self.config.T} exhausted")
        self._t += 1
        self._awaiting = True


class ContextualStochasticLearner(_ContextualLearner):
    """Stochastic contexts: every copy updates each round, the observed
    context's copy is sampled."""

    mode = LearnerMode.CONTEXTUAL_STOCHASTIC

    def propose(self, context: ValuationCurve) -> MUniformStrategy:
        self._advance()
        for dag, pending in zip(self.dags, self._pending):
            update_probabilities(dag, self.config.eta, pending)
        idx = self.context_index(context)
        self._last_idx = idx
        self._last_path = sample_path(self.dags[idx], self.rng)
        return path_to_strategy(self._last_path, self.contexts[idx])

    def observe(self, competing: CompetingBids) -> None:
        for i, dag in enumerate(self.dags):
            self._pending[i] = round_weights(
                dag, self.contexts[i], competing, tie=self.tie
            )
        self._awaiting = False


class ContextualAdversarialLearner(_ContextualLearner):
    """Adversarial contexts: only the observed context's copy is touched,
    so each copy runs full-information Hedge on its own subsequence."""

    mode = LearnerMode.CONTEXTUAL_ADVERSARIAL

    def propose(self, context: ValuationCurve) -> MUniformStrategy:
        self._advance()
        idx = self.context_index(context)
        self._last_idx = idx
        update_probabilities(self.dags[idx], self.config.eta, self._pending[idx])
        self._last_path = sample_path(self.dags[idx], self.rng)
        return path_to_strategy(self._last_path, self.contexts[idx])

    def observe(self, competing: CompetingBids) -> None:
        idx = self._last_idx
        self._pending[idx] = round_weights(
            self.dags[idx], self.contexts[idx], competing, tie=self.tie
        )
        self._awaiting = False


class ShiftedWindowLearner(_DagLearner):
    """Sliding-window shifted bidding on top of full-information Hedge.

    delta_t is 1/M times the surplus (V - P) banked over the trailing
    window of T0 - 1 completed rounds, floored at zero: the shifted class
    only exists for nonnegative shifts, so a negative balance falls back
    to the plain undominated bids until the bank recovers. Round weights
    use the same shift, keeping the update consistent with the bids
    actually submitted.

    The ledger needs only (x, P): V is reconstructed from the allocation
    and the curve, so the same arithmetic serves bandit feedback.
    """

    mode = LearnerMode.SHIFTED_WINDOW

    def __init__(self, config, curve, rng=None, tie=TiePolicy.FAVOR_BIDDER):
        super().__init__(config, curve, rng, tie)
        self._surplus: list[float] = []
        self.last_delta = 0.0
        self._last_submitted: Optional[MUniformStrategy] = None

    def _window_delta(self) -> float:
        T0 = self.config.T0
        if T0 == 1:
            return 0.0
        window = self._surplus if T0 == math.inf else self._surplus[-(int(T0) - 1):]
        return max(0.0, sum(window)) / self.config.M

    def propose(self) -> MUniformStrategy:
        self._advance()
        update_probabilities(self.dag, self.config.eta, self._pending)
        delta = self._window_delta()
        self.last_delta = delta
        self._last_path = sample_path(self.dag, self.rng)
        pairs = []
        prev = 0
        for z in self._last_path.breakpoints:
            pairs.append((self.curve.w(z) + delta, z - prev))
            prev = z
        self._last_submitted = MUniformStrategy(pairs)
        return self._last_submitted

    def observe(
        self, competing: CompetingBids, outcome: Optional[RoundOutcome] = None
    ) -> None:
        if self._last_submitted is None:
            value, payment = 0.0, 0.0
        else:
            if outcome is None:
                outcome = clear_auction(
                    self.curve, self._last_submitted, competing, tie=self.tie
                )
            value = self.curve.value(outcome.x)
            payment = outcome.payment
        self._surplus.append(value - payment)
        self._pending = round_weights(
            self.dag, self.curve, competing, tie=self.tie, shift=self.last_delta
        )
        self._awaiting = False


# -- adversaries -------------------------------------------------------------

# callback protocol: (t, strategy_history, outcome_history) -> CompetingBids
Adversary = Callable[
    [int, Sequence[Optional[MUniformStrategy]], Sequence[RoundOutcome]],
    CompetingBids,
]


class ReplayAdversary:
    """Oblivious adversary replaying a fixed history of competing bids."""

    def __init__(self, history: Sequence[CompetingBids]):
        self.history = list(history)

    def __call__(self, t, strategies, outcomes) -> CompetingBids:
        return self.history[(t - 1) % len(self.history)]


class IIDUniformAdversary:
    """K competing bids drawn i.i.d. uniform on [0, high] each round."""

    def __init__(self, K: int, high: float = 1.0, seed: int = 0, rng=None):
        self.K = K
        self.high = high
        self.rng = np.random.default_rng(seed) if rng is None else rng

    def __call__(self, t, strategies, outcomes) -> CompetingBids:
        return CompetingBids.from_profile(self.K, self.rng.uniform(0, self.high, self.K))


def _price_setting_bid(strategy: MUniformStrategy, x: int) -> float:
    # bid of the pair containing the bidder's x-th won unit
    for cum, bid in zip(strategy.cumulative, strategy.bids):
        if x <= cum:
            return bid
    return strategy.bids[-1]


class PriceSqueezeAdversary:
    """Adaptive: prices all K slots just above the bidder's last winning bid.

    Starts at a base level and rises by step after every round in which the
    bidder won, capped at cap; drops back to base after shut-out rounds.
    """

    def __init__(self, K: int, base: float = 0.1, step: float = 0.02, cap: float = 1.0):
        self.K = K
        self.base = base
        self.step = step
        self.cap = cap

    def __call__(self, t, strategies, outcomes) -> CompetingBids:
        level = self.base
        if outcomes and outcomes[-1].x > 0 and strategies[-1] is not None:
            level = min(
                self.cap, _price_setting_bid(strategies[-1], outcomes[-1].x) + self.step
            )
        return CompetingBids.from_profile(self.K, [level] * self.K)


# -- round driver ------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    """One simulated round; cum_regret is against the best fixed safe
    strategy in hindsight (summed per context for the contextual modes)."""

    t: int
    strategy_text: str
    x: int
    p: float
    value: float
    payment: float
    delta_t: float
    cum_value: float
    cum_regret: float


TRACE_FIELDS = (
    "t",
    "strategy_text",
    "x",
    "p",
    "value",
    "payment",
    "delta_t",
    "cum_value",
    "cum_regret",
)


def run_rounds(
    learner,
    adversary: Adversary,
    T: Optional[int] = None,
    contexts: Optional[Sequence[ValuationCurve]] = None,
) -> list[TraceRecord]:
    """Drive one learner against an adversary callback for T rounds.

    The driver clears each auction with the true competing bids, hands the
    learner only what its feedback model allows, and tracks the hindsight
    safe optimum incrementally with a scratch DAG per context.

    Parameters
    ----------
    learner : one of the six learner classes above.
    adversary : callable (t, strategies_so_far, outcomes_so_far) -> CompetingBids.
    T : number of rounds; defaults to learner.config.T.
    contexts : per-round context curves, required for contextual modes.

    Returns
    -------
    list of TraceRecord, one per round.
    """
    cfg = learner.config
    T = cfg.T if T is None else T
    mode = learner.mode
    contextual = mode in (
        LearnerMode.CONTEXTUAL_STOCHASTIC,
        LearnerMode.CONTEXTUAL_ADVERSARIAL,
    )
    if contextual:
        if contexts is None or len(contexts) < T:
            raise ValueError("contextual modes need a context curve per round")
        curves = learner.contexts
    else:
        curves = [learner.curve]

    oracle = build_dag(cfg.M, cfg.m)
    oracle_w = [np.zeros(oracle.n_edges) for _ in curves]
    oracle_best = [0.0 for _ in curves]

    records: list[TraceRecord] = []
    strategies: list[Optional[MUniformStrategy]] = []
    outcomes: list[RoundOutcome] = []
    cum_value = 0.0

    for t in range(1, T + 1):
        if contextual:
            context = contexts[t - 1]
            strategy = learner.propose(context)
            idx = learner.context_index(context)
        else:
            strategy = learner.propose()
            idx = 0
        curve = curves[idx]

        competing = adversary(t, strategies, outcomes)
        if strategy is None:
            outcome = RoundOutcome(
                x=0, p=competing.beta_minus(competing.K), value=0.0, payment=0.0
            )
        else:
            outcome = clear_auction(curve, strategy, competing, tie=learner.tie)

        if mode in (LearnerMode.BANDIT, LearnerMode.ADAPTIVE_BANDIT):
            learner.observe_bandit(BanditFeedback(outcome.x, outcome.payment))
        elif mode is LearnerMode.SHIFTED_WINDOW:
            learner.observe(competing, outcome)
        else:
            learner.observe(competing)

        oracle_w[idx] += round_weights(oracle, curve, competing, tie=learner.tie)
        oracle.weights = oracle_w[idx]
        oracle_best[idx] = max_weight_path(oracle)[1]

        cum_value += outcome.value
        records.append(
            TraceRecord(
                t=t,
                strategy_text="" if strategy is None else strategy.to_text(),
                x=outcome.x,
                p=outcome.p,
                value=outcome.value,
                payment=outcome.payment,
                delta_t=getattr(learner, "last_delta", 0.0),
                cum_value=cum_value,
                cum_regret=sum(oracle_best) - cum_value,
            )
        )
        strategies.append(strategy)
        outcomes.append(outcome)

    return records


def make_learner(
    config: LearnerConfig,
    curve: Optional[ValuationCurve] = None,
    contexts: Optional[Sequence[ValuationCurve]] = None,
    rng: Optional[np.random.Generator] = None,
    tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
):
    """Instantiate the learner class matching config.mode."""
    mode = config.mode
    if mode in (LearnerMode.CONTEXTUAL_STOCHASTIC, LearnerMode.CONTEXTUAL_ADVERSARIAL):
        if contexts is None:
            if curve is None:
                raise ValueError("contextual modes need context curves")
            contexts = [curve]
        cls = (
            ContextualStochasticLearner
            if mode is LearnerMode.CONTEXTUAL_STOCHASTIC
            else ContextualAdversarialLearner
        )
        return cls(config, contexts, rng, tie)
    if curve is None:
        raise ValueError("need a valuation curve")
    cls = {
        LearnerMode.FULL_INFO: FullInfoLearner,
        LearnerMode.BANDIT: BanditLearner,
        LearnerMode.ADAPTIVE_BANDIT: AdaptiveBanditLearner,
        LearnerMode.SHIFTED_WINDOW: ShiftedWindowLearner,
    }[mode]
    return cls(config, curve, rng, tie)
