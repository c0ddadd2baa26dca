"""Safe-class structure: classification, enumeration, value identities."""

import numpy as np
import pytest

from bidlab import (
    CompetingBids,
    MUniformStrategy,
    SafeClassSpec,
    StrategyClass,
    ValuationCurve,
    adversary_violating,
    brute_force_best,
    classify,
    clear_auction,
    enumerate_undominated,
    is_safe,
    roi_feasible,
    size_undominated,
    sum_to_max_value,
)

SMALL_CURVE = ValuationCurve([0.9, 0.5, 0.1])


class TestClassify:
    def test_overbid(self):
        # w_3 = 0.5, bidding 0.6 for all three units overbids
        assert (
            classify(SMALL_CURVE, MUniformStrategy([(0.6, 3)]))
            is StrategyClass.OVERBID
        )

    def test_undominated_three_pairs(self):
        curve = ValuationCurve([6, 4, 3, 2, 2, 2, 1, 1, 1])
        s = MUniformStrategy.from_breakpoints(curve, [3, 7, 9])
        assert classify(curve, s) is StrategyClass.UNDOMINATED
        assert is_safe(curve, s)

    def test_underbid(self):
        s = MUniformStrategy([(0.09, 2), (0.01, 1)])
        assert classify(SMALL_CURVE, s) is StrategyClass.UNDERBID
        assert is_safe(SMALL_CURVE, s)

    def test_mixed_safe(self):
        # first bid on the frontier, second strictly below it
        s = MUniformStrategy([(0.9, 1), (0.2, 2)])
        assert classify(SMALL_CURVE, s) is StrategyClass.MIXED_SAFE
        assert is_safe(SMALL_CURVE, s)

    def test_worked_example_bidder_is_undominated(self):
        curve = ValuationCurve([6, 4, 3, 1, 1])
        s = MUniformStrategy([(5, 2), (3, 3)])  # w_2 = 5, w_5 = 3
        assert classify(curve, s) is StrategyClass.UNDOMINATED

    def test_overbid_is_not_safe(self):
        assert not is_safe(SMALL_CURVE, MUniformStrategy([(0.6, 3)]))


class TestEnumeration:
    def test_m1_singletons(self):
        curve = ValuationCurve([3, 2, 1])
        got = list(enumerate_undominated(SafeClassSpec(curve, m=1)))
        assert got == [
            MUniformStrategy([(3.0, 1)]),
            MUniformStrategy([(2.5, 2)]),
            MUniformStrategy([(2.0, 3)]),
        ]

    def test_m2_size(self):
        curve = ValuationCurve([3, 2, 1])
        got = list(enumerate_undominated(SafeClassSpec(curve, m=2)))
        assert len(got) == 6 == size_undominated(3, 2)

    def test_count_formula(self):
        assert size_undominated(10, 3) == 175
        assert (
            sum(1 for _ in enumerate_undominated(
                SafeClassSpec(ValuationCurve(np.linspace(10, 1, 10)), m=3)
            ))
            == 175
        )

    def test_lexicographic_order(self):
        curve = ValuationCurve([3, 2, 1])
        subsets = [
            s.cumulative for s in enumerate_undominated(SafeClassSpec(curve, m=2))
        ]
        assert subsets == [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3)]

    def test_all_enumerated_are_undominated(self):
        curve = ValuationCurve([6, 4, 3, 1, 1])
        for s in enumerate_undominated(SafeClassSpec(curve, m=3)):
            assert classify(curve, s) is StrategyClass.UNDOMINATED

    def test_shifted_class_offsets_pairwise(self):
        curve = ValuationCurve([6, 4, 3, 1, 1])
        base = list(enumerate_undominated(SafeClassSpec(curve, m=2)))
        shifted = list(enumerate_undominated(SafeClassSpec(curve, m=2, delta=0.25)))
        assert len(base) == len(shifted)
        for b, s in zip(base, shifted):
            assert s.quantities == b.quantities
            assert all(
                sb == pytest.approx(bb + 0.25) for sb, bb in zip(s.bids, b.bids)
            )

    def test_cap_refused(self):
        curve = ValuationCurve(np.linspace(50, 1, 40))
        with pytest.raises(ValueError, match="cap"):
            list(enumerate_undominated(SafeClassSpec(curve, m=8)))


class TestAdversaryViolating:
    def test_all_slots_cheap(self):
        strategy = MUniformStrategy([(0.6, 3)])
        profile = adversary_violating(SMALL_CURVE, strategy)
        assert profile.K == 3
        assert list(profile.bids) == [0.15, 0.15, 0.15]
        out = clear_auction(SMALL_CURVE, strategy, profile)
        assert out.x == 3
        assert not roi_feasible(out)

    def test_single_slot(self):
        strategy = MUniformStrategy([(1.0, 1)])  # w_1 = 0.9
        profile = adversary_violating(SMALL_CURVE, strategy)
        out = clear_auction(SMALL_CURVE, strategy, profile)
        assert out.x == 1
        assert out.payment == 1.0
        assert not roi_feasible(out)

    def test_rejects_safe_strategy(self):
        with pytest.raises(ValueError):
            adversary_violating(SMALL_CURVE, MUniformStrategy([(0.5, 3)]))

    def test_violation_hits_middle_pair(self):
        curve = ValuationCurve([1.0, 0.8, 0.2, 0.2])
        # second pair overbids: w_3 = 2/3 < 0.7
        strategy = MUniformStrategy([(1.0, 1), (0.7, 2), (0.1, 1)])
        profile = adversary_violating(curve, strategy)
        out = clear_auction(curve, strategy, profile)
        assert out.x == 3
        assert not roi_feasible(out)


class TestSafetyFuzz:
    def test_undominated_never_violates(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            M = int(rng.integers(1, 9))
            curve = ValuationCurve(np.sort(rng.uniform(0.05, 5.0, M))[::-1])
            k = int(rng.integers(1, min(3, M) + 1))
            zs = np.sort(rng.choice(np.arange(1, M + 1), size=k, replace=False))
            strategy = MUniformStrategy.from_breakpoints(curve, zs)
            K = int(rng.integers(1, 12))
            n = int(rng.integers(0, K + 1))
            competing = CompetingBids(K, rng.uniform(0, 6, n))
            assert clear_auction(curve, strategy, competing).roi_ok

    def test_prefix_allocation_lemma(self):
        # whenever some feasible strategy wins r units, the 1-uniform
        # frontier strategy (w_q, q) wins exactly q units for every q <= r
        rng = np.random.default_rng(5)
        for _ in range(300):
            M = int(rng.integers(2, 8))
            curve = ValuationCurve(np.sort(rng.uniform(0.05, 5.0, M))[::-1])
            K = int(rng.integers(1, 10))
            competing = CompetingBids(K, rng.uniform(0, 6, int(rng.integers(0, K + 1))))
            bids = np.sort(rng.uniform(0.05, 6.0, int(rng.integers(1, M + 1))))[::-1]
            strategy = MUniformStrategy(
                [(b, 1) for b in np.unique(bids)[::-1]]
            )
            out = clear_auction(curve, strategy, competing)
            if not out.roi_ok:
                continue
            for q in range(1, out.x + 1):
                single = MUniformStrategy([(curve.w(q), q)])
                assert clear_auction(curve, single, competing).x == q


class TestSumToMax:
    def test_single_pair_is_identity(self):
        competing = CompetingBids(3, [0.3, 0.3, 0.3])
        s = MUniformStrategy([(0.5, 3)])
        assert sum_to_max_value(SMALL_CURVE, s, competing) == 1.5

    def test_two_pair_prefix_max(self):
        # <(w_1,1),(w_3,2)> equals the better of (w_1,1) and (w_3,3)
        curve = ValuationCurve([3, 2, 1])
        s = MUniformStrategy.from_breakpoints(curve, [1, 3])
        for profile in ([2.5, 2.5, 0.5], [1.5, 1.5, 1.5], [4, 4, 4], [0.1]):
            competing = CompetingBids(3, profile)
            direct = clear_auction(curve, s, competing).value
            prefix_best = max(
                clear_auction(curve, MUniformStrategy([(curve.w(z), z)]), competing).value
                for z in (1, 3)
            )
            assert sum_to_max_value(curve, s, competing) == prefix_best == direct

    def test_fuzz_identity_exact(self):
        rng = np.random.default_rng(9)
        for _ in range(2000):
            M = int(rng.integers(1, 9))
            curve = ValuationCurve(np.sort(rng.uniform(0.05, 5.0, M))[::-1])
            k = int(rng.integers(1, min(3, M) + 1))
            zs = np.sort(rng.choice(np.arange(1, M + 1), size=k, replace=False))
            strategy = MUniformStrategy.from_breakpoints(curve, zs)
            K = int(rng.integers(1, 12))
            competing = CompetingBids(K, rng.uniform(0, 6, int(rng.integers(0, K + 1))))
            direct = clear_auction(curve, strategy, competing).value
            assert sum_to_max_value(curve, strategy, competing) == direct


class TestBruteForce:
    def test_matches_manual_max(self):
        curve = ValuationCurve([3, 2, 1])
        history = [CompetingBids(2, [2.4, 1.2]), CompetingBids(2, [0.5, 0.5])]
        best, value = brute_force_best(curve, 2, history)
        expected = max(
            sum(clear_auction(curve, s, cb).value for cb in history)
            for s in enumerate_undominated(SafeClassSpec(curve, 2))
        )
        assert value == expected
        total = sum(clear_auction(curve, best, cb).value for cb in history)
        assert total == value
