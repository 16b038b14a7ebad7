import itertools
import json
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from imbcredit.binning import (
    METHODS,
    BinningScheme,
    add_missing_bin,
    assign_bin,
    discretize,
    fit_scheme,
    merge_weak_bins,
    one_hot,
    percentile_rank,
    schemes_from_json,
    schemes_to_json,
    two_proportion_z,
)
from imbcredit.errors import DataError


def linear_scan(cuts, value):
    if value != value:
        return len(cuts) + 1
    for j, c in enumerate(cuts):
        if value <= c:
            return j
    return len(cuts)


def scheme(counts, events, cuts=None, missing=False):
    k = len(counts) - missing
    cuts = list(range(1, k)) if cuts is None else cuts
    return BinningScheme.from_counts("v", "quantile", cuts, counts, events, has_missing_bin=missing)


class TestPercentileRank:
    def test_identity_layout(self):
        r = percentile_rank(np.arange(1, 101), 100)
        assert len(r.table) == 100
        assert list(r.table["min"]) == list(range(1, 101))
        assert list(r.table["max"]) == list(range(1, 101))
        assert (r.table["count"] == 1).all()

    def test_uniform_sort_and_slice(self):
        x = np.random.default_rng(4).uniform(size=1000)
        r = percentile_rank(x, 10)
        assert list(r.table["count"]) == [100] * 10
        order = np.sort(x)
        for g in range(10):
            chunk = order[100 * g:100 * (g + 1)]
            assert r.table["min"][g] == chunk[0]
            assert r.table["max"][g] == chunk[-1]

    def test_ties_fold_into_one_rank(self):
        # 12 zeros among 150 values take ranks 1-8 together, like a mass point at 0
        x = np.r_[np.zeros(12), np.arange(1, 139)]
        y = np.r_[np.ones(3), np.zeros(147)]
        r = percentile_rank(x, 100, y=y)
        first = r.table.iloc[0]
        assert first["min"] == first["max"] == 0
        assert first["count"] == 12 and first["events"] == 3
        assert first["first_rank"] == 1 and first["rank"] > 1

    def test_missing_rows_unassigned(self):
        r = percentile_rank([1.0, np.nan, 2.0], 2)
        assert r.assignment[1] == -1
        assert r.table["count"].sum() == 2

    def test_constant(self):
        assert percentile_rank(np.ones(20), 10).constant


class TestDiscretize:
    @pytest.mark.parametrize("method", METHODS)
    def test_toy_cut_matches_exhaustive_search(self, method):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        y = np.array([0, 0, 1, 1])
        # brute force: the cut position minimising misclassified rows
        best = min(range(1, 4), key=lambda k: y[:k].sum() + (1 - y[k:]).sum())
        lo, hi = x[best - 1], x[best]
        s = discretize(x, y, method, max_bins=2, min_bin_fraction=0.0)
        assert len(s.cuts) == 1
        assert lo <= s.cuts[0] < hi

    @pytest.mark.parametrize("method", METHODS)
    def test_counts_conserved_and_cap_respected(self, method):
        rng = np.random.default_rng(1)
        x = rng.gamma(2.0, size=3000)
        y = (rng.random(3000) < 1 / (1 + np.exp(3 - x))).astype(int)
        s = discretize(x, y, method, max_bins=20)
        assert s.n_bins <= 20
        assert s.counts.sum() == 3000 and s.events.sum() == y.sum()
        assert (s.counts >= 0.005 * 3000).all()
        idx = s.assign(x)
        np.testing.assert_array_equal(np.bincount(idx, minlength=s.n_bins), s.counts)

    def test_constant_column_unusable(self):
        s = discretize(np.full(10, 3.0), [0, 1] * 5)
        assert not s.usable and s.n_bins == 1

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            discretize([1, 2], [0, 1], "entropy")
        with pytest.raises(ValueError):
            discretize([1, 2], [0, 1], max_bins=1)
        with pytest.raises(DataError):
            discretize([np.nan, np.nan], [0, 1])

    def test_optimal_refuses_insignificant_split(self):
        x = np.arange(40.0)
        y = np.tile([0, 1], 20)
        assert discretize(x, y, "optimal", min_bin_fraction=0.0).n_bins == 1

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from(["exp", "cube", "affine"]))
    def test_monotone_relabeling(self, seed, kind):
        rng = np.random.default_rng(seed)
        x = np.round(rng.normal(size=400), 2)
        y = (rng.random(400) < 0.2).astype(int)
        f = {"exp": np.exp, "cube": lambda v: v ** 3 + v, "affine": lambda v: 3 * v + 7}[kind]
        a = discretize(x, y, "quantile", 10)
        b = discretize(f(x), y, "quantile", 10)
        np.testing.assert_array_equal(a.assign(x), b.assign(f(x)))
        np.testing.assert_allclose(f(np.array(a.cuts)), b.cuts, rtol=1e-12)


class TestMerge:
    def test_identical_rates_merge(self):
        s = merge_weak_bins(scheme([100, 100, 100], [10, 10, 50]))
        assert list(s.counts) == [200, 100]
        assert list(s.events) == [20, 50]

    def test_merge_order_matches_z_oracle(self):
        counts = [500, 500, 500, 500, 500]
        events = [20, 60, 62, 120, 200]
        s0 = scheme(counts, events)
        # pooled z squared equals the uncorrected 2x2 chi-square
        z2 = [chi2_contingency([[events[j], counts[j] - events[j]],
                                [events[j + 1], counts[j + 1] - events[j + 1]]],
                               correction=False)[0] for j in range(4)]
        first = int(np.argmin(z2))
        assert first == 1
        for j in range(4):
            z = two_proportion_z(counts[j], events[j], counts[j + 1], events[j + 1])
            assert z * z == pytest.approx(z2[j], rel=1e-12)
        s = merge_weak_bins(s0)
        assert list(s.counts) == [500, 1000, 500, 500]
        assert list(s.cuts) == [1, 3, 4]

    def test_significant_pairs_kept(self):
        s = scheme([1000, 1000, 1000], [10, 100, 300])
        assert merge_weak_bins(s) is s

    def test_stops_at_two_bins(self):
        assert merge_weak_bins(scheme([100] * 5, [10] * 5)).n_value_bins == 2

    def test_missing_bin_untouched(self):
        s = merge_weak_bins(scheme([100, 100, 100, 40], [10, 10, 10, 7], missing=True))
        assert s.has_missing_bin
        assert (s.bins[-1].count, s.bins[-1].events) == (40, 7)

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 400), st.floats(0, 1)), min_size=2, max_size=12),
           st.booleans())
    def test_conservation(self, raw, missing):
        counts = [n for n, _ in raw]
        events = [int(round(n * f)) for n, f in raw]
        s0 = scheme(counts, events, missing=missing and len(raw) > 2)
        s = merge_weak_bins(s0)
        assert s.counts.sum() == s0.counts.sum()
        assert s.events.sum() == s0.events.sum()
        assert s.n_bins <= s0.n_bins
        if s0.has_missing_bin:
            assert s.bins[-1].count == s0.bins[-1].count
            assert s.bins[-1].events == s0.bins[-1].events


class TestMissingBin:
    def test_hand_count(self):
        x = np.array([1, 2, np.nan, 3, np.nan, 4, np.nan, 5.0])
        y = np.array([0, 1, 1, 0, 0, 1, 0, 0])
        s = add_missing_bin(discretize(x, y, "distance", 2, min_bin_fraction=0.0), x, y)
        assert s.has_missing_bin
        assert (s.bins[-1].count, s.bins[-1].events) == (3, 1)
        assert s.bin_labels()[-1] == "missing"
        assert assign_bin(s, float("nan")) == s.n_bins - 1

    def test_complete_column_unchanged(self):
        s = scheme([5, 5], [1, 2])
        assert add_missing_bin(s, [1.0, 2.0], [0, 1]) is s

    def test_assign_missing_without_missing_bin(self):
        with pytest.raises(DataError):
            scheme([5, 5], [1, 2]).assign([np.nan])

    def test_fit_scheme_merges_then_appends(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=2000)
        x[:100] = np.nan
        y = (rng.random(2000) < 0.1).astype(int)
        s = fit_scheme(x, y, "quantile", 20)
        assert s.has_missing_bin
        assert s.bins[-1].count == 100
        assert s.counts.sum() == 2000


class TestAssignBin:
    def test_boundaries(self):
        s = scheme([1, 1, 1], [0, 0, 1], cuts=[10, 20])
        assert assign_bin(s, 10) == 0
        assert assign_bin(s, 10.000001) == 1
        assert assign_bin(s, 20) == 1
        assert assign_bin(s, 1e9) == 2
        assert assign_bin(s, -1e9) == 0
        assert s.bin_labels() == ["(-inf, 10]", "(10, 20]", "(20, inf)"]

    def test_against_linear_scan(self):
        rng = np.random.default_rng(9)
        cuts = sorted(rng.choice(np.arange(-50, 50), 12, replace=False).astype(float))
        s = scheme([1] * 13, [0] * 12 + [1], cuts=cuts)
        v = np.r_[rng.integers(-60, 60, 5000).astype(float), rng.normal(0, 40, 5000)]
        expected = [linear_scan(cuts, a) for a in v]
        np.testing.assert_array_equal(s.assign(v), expected)


class TestOneHot:
    def test_three_bin_indicator(self):
        s = scheme([2, 2, 2], [0, 1, 1], cuts=[1, 2])
        frame = pd.DataFrame({"v": [3.0]})
        assert list(one_hot([s], frame, drop_reference=False).matrix[0]) == [0, 0, 1]
        dm = one_hot([s], frame)
        assert list(dm.matrix[0]) == [0, 1]
        assert dm.reference == {"v": "(-inf, 1]"}
        assert dm.columns == ["v[(1, 2]]", "v[(2, inf)]"]

    def test_column_sums_and_row_sums(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=50)
        x[[3, 17]] = np.nan
        y = (rng.random(50) < 0.4).astype(int)
        y[:2] = [0, 1]
        s = fit_scheme(x, y, "quantile", 4, merge_alpha=None, min_bin_fraction=0.0, variable="v")
        full = one_hot([s], pd.DataFrame({"v": x}), drop_reference=False)
        np.testing.assert_array_equal(full.matrix.sum(axis=1), np.ones(50))
        np.testing.assert_array_equal(full.matrix.sum(axis=0), s.counts)

    def test_groups_over_several_variables(self):
        a = BinningScheme.from_counts("a", "quantile", [0], [5, 5], [1, 2])
        b = BinningScheme.from_counts("b", "quantile", [0, 1], [3, 3, 4], [1, 1, 1])
        dm = one_hot([a, b], pd.DataFrame({"a": [-1.0, 1.0], "b": [0.5, 9.0]}))
        assert dm.groups == {"a": [0], "b": [1, 2]}
        assert dm.matrix.tolist() == [[0, 1, 0], [1, 0, 1]]

    def test_absent_variable(self):
        with pytest.raises(DataError):
            one_hot([scheme([1, 1], [0, 1])], pd.DataFrame({"w": [1.0]}))


class TestSerialization:
    def test_round_trip_bit_exact(self):
        rng = np.random.default_rng(2)
        x = rng.lognormal(size=500) / 3
        x[::50] = np.nan
        y = (rng.random(500) < 0.2).astype(int)
        s = fit_scheme(x, y, "gini", 8, variable="v")
        text = schemes_to_json([s], method="gini", note="x")
        back, meta = schemes_from_json(text)
        assert meta == {"method": "gini", "note": "x"}
        assert back[0] == s
        probe = np.r_[x, np.array(s.cuts), np.nextafter(np.array(s.cuts), np.inf)]
        np.testing.assert_array_equal(back[0].assign(probe), s.assign(probe))
        assert schemes_to_json(back, method="gini", note="x") == text

    def test_wrong_format(self):
        with pytest.raises(DataError):
            schemes_from_json(json.dumps({"format": "other", "schemes": []}))

    def test_bad_cuts_rejected(self):
        with pytest.raises(ValueError):
            scheme([1, 1, 1], [0, 1, 0], cuts=[2, 1])


def test_woe_sign_and_smoothing():
    s = scheme([100, 100], [5, 50])
    assert s.woe[0] > 0 > s.woe[1]
    z = scheme([100, 100], [0, 50])
    # 0.5 is added to every cell once a zero appears
    p0 = (100.5) / (100.5 + 50.5)
    q0 = 0.5 / 51.0
    assert z.woe[0] == pytest.approx(math.log(p0 / q0), rel=1e-12)
    assert np.isfinite(z.woe).all()


def test_partition_totality_random_cuts():
    rng = np.random.default_rng(0)
    for _ in range(20):
        cuts = np.unique(rng.normal(size=rng.integers(1, 8)))
        s = scheme([1] * (len(cuts) + 1), [0] * len(cuts) + [1], cuts=list(cuts))
        v = np.r_[cuts, rng.normal(size=200)]
        for a, b in zip(s.assign(v), v):
            assert a == linear_scan(cuts, b)
            assert sum(1 for lo, hi in itertools.pairwise([-np.inf, *cuts, np.inf])
                       if lo < b <= hi) == 1
