"""Aggregate classification, bid reconstruction, and the bundled corpus."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bidlab.ets import (
    AuctionAggregates,
    ShapeClass,
    aggregate_errors,
    classify_shape,
    grid_search_f,
    load_bundled_corpus,
    read_aggregates_csv,
    reconstruct,
    reconstruct_corpus,
    to_competing_bids,
    write_aggregates_csv,
    write_report_csv,
)


def _agg(b_min, b_max, b_avg, b_med, n_sub=30, K=40, auction_id="a0"):
    return AuctionAggregates(auction_id, b_min, b_max, b_avg, b_med, n_sub, K)


class TestClassify:
    def test_low_shoulder_limit(self):
        # minimum and average coincide: everything sits on the low edge
        assert classify_shape(_agg(0.4, 0.9, 0.4, 0.4)) is ShapeClass.TYPE_I

    def test_high_shoulder_limit(self):
        assert classify_shape(_agg(0.1, 0.6, 0.6, 0.6)) is ShapeClass.TYPE_II

    def test_low_median_high_average_degenerates_to_flat(self):
        # median says low shoulder, average says the concentrated interval
        # would overshoot b_max: inconsistent, fall back to flat
        agg = _agg(0.1, 0.5, 0.35, 0.2)
        assert 2 * agg.b_avg > agg.b_min + agg.b_max
        assert classify_shape(agg) is ShapeClass.UNIFORM

    def test_high_median_low_average_degenerates_to_flat(self):
        agg = _agg(0.1, 0.5, 0.25, 0.4)
        assert classify_shape(agg) is ShapeClass.UNIFORM

    def test_validation(self):
        with pytest.raises(ValueError, match="b_min"):
            _agg(0.6, 0.5, 0.55, 0.55)
        with pytest.raises(ValueError, match="b_avg"):
            _agg(0.2, 0.5, 0.6, 0.4)
        with pytest.raises(ValueError, match="n_sub"):
            _agg(0.2, 0.5, 0.4, 0.4, n_sub=0)


class TestReconstruct:
    def test_count_and_range(self):
        agg = _agg(0.3, 0.8, 0.4, 0.38, n_sub=25)
        values = reconstruct(agg, 0.9, np.random.default_rng(3))
        assert values.size == 25
        assert values.min() >= 0.3 - 1e-12 and values.max() <= 0.8 + 1e-12
        assert np.all(np.diff(values) <= 0)

    def test_concentrated_count_is_rounded_fraction(self):
        # Type I with f = 0.8 and 20 bids: 16 in [b_min, 2 b_avg - b_min]
        agg = _agg(0.3, 0.8, 0.4, 0.38, n_sub=20)
        values = reconstruct(agg, 0.8, np.random.default_rng(5))
        split = 2 * agg.b_avg - agg.b_min
        assert np.sum(values <= split) == 16

    def test_f_near_one_uses_only_the_concentrated_interval(self):
        agg = _agg(0.3, 0.8, 0.4, 0.38, n_sub=20)
        values = reconstruct(agg, 0.99, np.random.default_rng(5))
        assert values.max() <= 2 * agg.b_avg - agg.b_min + 1e-12

    def test_endpoints_are_pinned_when_both_sides_populated(self):
        agg = _agg(0.3, 0.8, 0.4, 0.38, n_sub=40)
        values = reconstruct(agg, 0.9, np.random.default_rng(7))
        assert values.min() == agg.b_min
        assert values.max() == agg.b_max

    def test_type_ii_mirrors_type_i(self):
        agg = _agg(0.2, 0.7, 0.6, 0.62, n_sub=40)
        assert classify_shape(agg) is ShapeClass.TYPE_II
        values = reconstruct(agg, 0.9, np.random.default_rng(9))
        split = 2 * agg.b_avg - agg.b_max
        assert np.sum(values >= split) == 36

    def test_rejects_f_out_of_range(self):
        agg = _agg(0.3, 0.8, 0.4, 0.38)
        with pytest.raises(ValueError):
            reconstruct(agg, 1.0, np.random.default_rng(0))

    @given(
        b_min=st.floats(min_value=0.05, max_value=0.5),
        spread=st.floats(min_value=0.05, max_value=0.45),
        pos=st.floats(min_value=0.0, max_value=1.0),
        med_pos=st.floats(min_value=0.0, max_value=1.0),
        n_sub=st.integers(min_value=1, max_value=60),
        f=st.floats(min_value=0.5, max_value=0.99),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=60, deadline=None)
    def test_any_valid_aggregates_reconstruct_in_range(
        self, b_min, spread, pos, med_pos, n_sub, f, seed
    ):
        b_max = b_min + spread
        agg = _agg(
            b_min, b_max, b_min + pos * spread, b_min + med_pos * spread, n_sub
        )
        values = reconstruct(agg, f, np.random.default_rng(seed))
        assert values.size == n_sub
        assert values.min() >= b_min - 1e-12
        assert values.max() <= b_max + 1e-12

    def test_zero_errors_on_exact_values(self):
        values = [0.3, 0.4, 0.5, 0.8]
        agg = _agg(0.3, 0.8, 0.5, 0.4, n_sub=4)
        errs = aggregate_errors(agg, values)
        assert max(errs.values()) == 0.0


class TestCorpusReconstruction:
    def test_seed_determinism(self):
        aggs = load_bundled_corpus()[:10]
        r1, v1 = reconstruct_corpus(aggs, 0.95, seed=42)
        r2, v2 = reconstruct_corpus(aggs, 0.95, seed=42)
        assert r1 == r2
        for k in v1:
            assert np.array_equal(v1[k], v2[k])

    def test_threaded_matches_serial(self):
        aggs = load_bundled_corpus()[:12]
        serial, vs = reconstruct_corpus(aggs, 0.9, seed=5)
        pooled, vp = reconstruct_corpus(aggs, 0.9, seed=5, max_workers=4)
        assert serial == pooled
        for k in vs:
            assert np.array_equal(vs[k], vp[k])

    def test_acceptance_monotone_in_tolerance(self):
        aggs = load_bundled_corpus()
        counts = [
            len(reconstruct_corpus(aggs, 0.7, seed=1, tolerance=tol)[0].accepted)
            for tol in (0.01, 0.03, 0.05, 0.10, 0.25)
        ]
        assert counts == sorted(counts)

    def test_accepted_means_every_error_below_tolerance(self):
        aggs = load_bundled_corpus()
        report, _ = reconstruct_corpus(aggs, 0.95, seed=3)
        for auction_id in report.accepted:
            assert max(report.errors[auction_id].values()) < report.tolerance
        for auction_id in report.rejected:
            assert max(report.errors[auction_id].values()) >= report.tolerance

    def test_grid_search_on_bundled_corpus(self):
        aggs = load_bundled_corpus()
        assert len(aggs) == 50
        best_f, report = grid_search_f(aggs, seed=0)
        assert 0.50 <= best_f <= 0.99
        assert report.acceptance_rate >= 0.9


class TestToCompetingBids:
    def test_unit_quantities_give_sorted_values(self):
        values = [0.9, 0.5, 0.7, 0.3]
        cb = to_competing_bids(values, 4, quantity_policy=lambda v, K: np.ones(4))
        assert np.allclose(cb.bids, [0.9, 0.7, 0.5, 0.3])

    def test_default_policy_oversubscribes(self):
        values = np.linspace(0.2, 0.8, 10)
        K = 40
        per = int(np.ceil(1.5 * K / 10))
        assert per * 10 >= K
        cb = to_competing_bids(values, K)
        assert cb.bids.size == K
        # each distinct value appears at most `per` times among the top K
        _, counts = np.unique(cb.bids, return_counts=True)
        assert counts.max() <= per

    def test_deterministic(self):
        values = np.linspace(0.2, 0.8, 7)
        a = to_competing_bids(values, 9)
        b = to_competing_bids(values, 9)
        assert np.array_equal(a.bids, b.bids)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            to_competing_bids([], 4)
        with pytest.raises(ValueError):
            to_competing_bids([0.5], 0)


class TestCsvIO:
    def test_aggregates_round_trip(self, tmp_path):
        aggs = load_bundled_corpus()
        path = tmp_path / "aggs.csv"
        write_aggregates_csv(aggs, path)
        back = read_aggregates_csv(path)
        assert back == aggs

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("auction_id,b_min\nx,0.1\n")
        with pytest.raises(ValueError, match="missing columns"):
            read_aggregates_csv(path)

    def test_report_csv_rows(self, tmp_path):
        aggs = load_bundled_corpus()[:8]
        report, _ = reconstruct_corpus(aggs, 0.9, seed=2)
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 9
        assert lines[0].startswith("auction_id,accepted,err_min")
