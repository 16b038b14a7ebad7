import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imbcredit.binning import BinningScheme, merge_weak_bins
from imbcredit.diagnostics import (
    EmpiricalLogitTable,
    IVReport,
    empirical_logit,
    empirical_logit_table,
    fit_line,
    information_value,
    iv_from_counts,
    iv_strength,
    iv_table,
    linearity_score,
    select_variables,
    vif,
)
from imbcredit.errors import DataError

# (N, Y, elogit) rows of the RevolvingUtilization rank table, four decimals
RANK_ROWS = [
    (12000, 335, -3.5488),
    (1501, 18, -4.3844),
    (1499, 25, -4.0574),
    (1500, 556, -0.5290),
    (1500, 589, -0.4358),
]

# variable, bins, IV as reported for the credit data
IV_ROWS = [
    ("RevolvingUtilizationOfUnsecuredLines", 19, 1.1635),
    ("NumberOfTime30-59DaysPastDueNotWorse", 3, 0.4865),
    ("NumberOfTimes90DaysLate", 2, 0.4842),
    ("NumberOfTime60-89DaysPastDueNotWorse", 2, 0.2648),
    ("age", 20, 0.2620),
    ("NumberOfOpenCreditLinesAndLoans", 15, 0.0852),
    ("MonthlyIncome", 21, 0.0813),
    ("DebtRatio", 20, 0.0795),
    ("NumberOfDependents", 5, 0.0279),
    ("NumberRealEstateLoansOrLines", 4, 0.0184),
]


def scheme(counts, events):
    return BinningScheme.from_counts("v", "quantile", list(range(1, len(counts))), counts, events)


counts_events = st.lists(
    st.tuples(st.integers(2, 500), st.floats(0.0, 1.0)), min_size=2, max_size=15
).map(lambda raw: ([n for n, _ in raw], [int(round(n * f)) for n, f in raw])).filter(
    lambda ce: 0 < sum(ce[1]) < sum(ce[0])
)


class TestEmpiricalLogit:
    @pytest.mark.parametrize("n, y, expected", RANK_ROWS)
    def test_rank_table_rows(self, n, y, expected):
        assert round(float(empirical_logit(y, n)), 4) == expected

    def test_all_event_rank(self):
        assert empirical_logit(10, 10) == pytest.approx(math.log(21), abs=1e-15)

    def test_slope_recovered_from_simulated_data(self):
        rng = np.random.default_rng(0)
        n, beta = 200_000, 0.8
        x = rng.normal(size=n)
        y = (rng.random(n) < 1 / (1 + np.exp(-(-2 + beta * x)))).astype(int)
        t = empirical_logit_table(x, y, 50)
        line = fit_line(t.table["mean"], t.table["elogit"])
        assert line.slope > 0
        assert abs(line.slope - beta) < 0.2 * beta

    def test_table_layout(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=1000)
        y = (rng.random(1000) < 0.3).astype(int)
        t = empirical_logit_table(x, y, 100, variable="x")
        assert len(t.table) == 100
        assert t.table["count"].sum() == 1000
        assert t.table["events"].sum() == y.sum()
        assert list(t.series_by_mean().columns) == ["mean", "elogit", "fitted"]
        assert list(t.series_by_rank().columns) == ["rank", "elogit", "fitted"]

    def test_elogit_reproduced_bit_exactly(self):
        rng = np.random.default_rng(2)
        x = rng.exponential(size=3000)
        y = (rng.random(3000) < 0.1).astype(int)
        t = empirical_logit_table(x, y, 100).table
        again = [math.log((yy + 0.5) / (nn - yy + 0.5)) for nn, yy in zip(t["count"], t["events"])]
        assert list(t["elogit"]) == again

    def test_non_binary_target(self):
        with pytest.raises(DataError):
            empirical_logit_table([1.0, 2.0], [0, 2])


class TestLinearity:
    def frame(self, mean, elogit):
        k = len(mean)
        return EmpiricalLogitTable("v", pd.DataFrame(
            {"rank": np.arange(1, k + 1), "mean": mean, "elogit": elogit}))

    def test_collinear_rank_points(self):
        r = linearity_score(self.frame(np.exp(np.arange(10.0)), 0.3 * np.arange(10.0) - 2))
        assert r.r2_rank == pytest.approx(1.0, abs=1e-12)
        assert r.r2_value < 0.9
        assert r.recommendation == "discretize"

    def test_quadratic_against_normal_equations(self):
        m = np.linspace(-2, 3, 25)
        e = 0.5 * m ** 2 - m + 0.1
        r = linearity_score(self.frame(m, e))
        for x, got in ((m, r.r2_value), (np.arange(1.0, 26), r.r2_rank)):
            A = np.column_stack([np.ones_like(x), x])
            coef = np.linalg.solve(A.T @ A, A.T @ e)
            rss = np.sum((e - A @ coef) ** 2)
            tss = np.sum((e - e.mean()) ** 2)
            assert got == pytest.approx(1 - rss / tss, abs=1e-10)

    def test_linear_in_value_prefers_interval(self):
        m = np.arange(12.0)
        assert linearity_score(self.frame(m, 2 * m)).recommendation == "interval"

    def test_too_few_ranks(self):
        with pytest.raises(ValueError):
            linearity_score(self.frame([1.0, 2.0], [0.0, 1.0]))


class TestInformationValue:
    def test_direct_evaluation(self):
        # p = (0.8, 0.2), q = (0.2, 0.8)
        s = scheme([100, 100], [20, 80])
        expected = 2 * 0.6 * math.log(4)
        assert expected == pytest.approx(1.66355, abs=5e-6)
        r = information_value(s)
        assert r.iv == pytest.approx(expected, rel=1e-12)
        assert r.strength == "strong" and r.bins == 2

    def test_equal_rates_give_zero(self):
        r = information_value(scheme([100, 300, 50], [10, 30, 5]))
        assert r.iv == pytest.approx(0.0, abs=1e-15)
        assert r.strength == "useless"

    def test_errors(self):
        with pytest.raises(ValueError):
            information_value(scheme([10], [5]))
        with pytest.raises(DataError):
            information_value(scheme([10, 10], [0, 0]))

    @pytest.mark.parametrize("iv, label", [
        (0.0, "useless"), (0.0199, "useless"), (0.02, "weak"), (0.0999, "weak"),
        (0.1, "medium"), (0.2999, "medium"), (0.3, "strong"), (1.16, "strong"),
    ])
    def test_strength_labels(self, iv, label):
        assert iv_strength(iv) == label

    @settings(max_examples=200, deadline=None)
    @given(counts_events)
    def test_non_negative(self, ce):
        assert iv_from_counts(*ce) >= 0.0

    @settings(max_examples=100, deadline=None)
    @given(counts_events)
    def test_symmetric_in_class_roles(self, ce):
        counts, events = ce
        flipped = [n - e for n, e in zip(counts, events)]
        assert iv_from_counts(counts, flipped) == pytest.approx(iv_from_counts(counts, events),
                                                               rel=1e-12, abs=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(counts_events.filter(lambda ce: len(ce[0]) > 2), st.data())
    def test_merging_never_increases(self, ce, data):
        counts, events = ce
        # smoothing must stay in the same state on both sides of the merge
        if any(e == 0 or e == n for n, e in zip(counts, events)):
            counts = [n + 2 for n in counts]
            events = [e + 1 for e in events]
        j = data.draw(st.integers(0, len(counts) - 2))
        mc = counts[:j] + [counts[j] + counts[j + 1]] + counts[j + 2:]
        me = events[:j] + [events[j] + events[j + 1]] + events[j + 2:]
        assert iv_from_counts(mc, me) <= iv_from_counts(counts, events) + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(counts_events.filter(lambda ce: len(ce[0]) > 2))
    def test_merge_weak_bins_never_increases(self, ce):
        counts, events = ce
        if any(e == 0 or e == n for n, e in zip(counts, events)):
            counts = [n + 2 for n in counts]
            events = [e + 1 for e in events]
        s = scheme(counts, events)
        assert information_value(merge_weak_bins(s)).iv <= information_value(s).iv + 1e-12


class TestSelection:
    reports = [IVReport(v, iv, iv_strength(iv), b) for v, b, iv in IV_ROWS]

    def test_credit_table_top_five(self):
        assert select_variables(self.reports, 0.1) == [v for v, _, _ in IV_ROWS[:5]]

    def test_zero_threshold_keeps_all(self):
        assert set(select_variables(self.reports, 0.0)) == {v for v, _, _ in IV_ROWS}

    def test_strict_boundary(self):
        r = [IVReport("a", 0.05, "weak", 2), IVReport("b", 0.0500001, "weak", 2)]
        assert select_variables(r, 0.05) == ["b"]

    def test_empty_selection_warns(self, caplog):
        assert select_variables(self.reports, 5.0) == []
        assert "no variable" in caplog.text

    def test_iv_table_sorted(self):
        t = iv_table(self.reports[::-1])
        assert list(t["variable"]) == [v for v, _, _ in IV_ROWS]


class TestVIF:
    def test_orthogonal_columns(self):
        a = np.tile([1.0, -1.0], 50)
        b = np.repeat([1.0, -1.0], 50)
        r = vif(pd.DataFrame({"a": a, "b": b}))
        np.testing.assert_allclose(r.values.to_numpy(), [1.0, 1.0], atol=1e-12)

    def test_near_collinear_against_normal_equations(self):
        rng = np.random.default_rng(7)
        x1 = rng.normal(size=300)
        x2 = x1 + 0.1 * rng.normal(size=300)
        x3 = rng.normal(size=300)
        X = np.column_stack([x1, x2, x3])
        r = vif(X, names=["x1", "x2", "x3"])
        for k in range(3):
            A = np.column_stack([np.ones(300), np.delete(X, k, axis=1)])
            coef = np.linalg.solve(A.T @ A, A.T @ X[:, k])
            resid = X[:, k] - A @ coef
            tc = X[:, k] - X[:, k].mean()
            r2 = 1 - resid @ resid / (tc @ tc)
            assert r.values.iloc[k] == pytest.approx(1 / (1 - r2), rel=1e-8)
        assert r.values["x1"] > 50

    def test_exact_collinearity_flagged(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=50)
        b = rng.normal(size=50)
        r = vif(pd.DataFrame({"a": a, "b": b, "c": 2 * a - b}))
        assert np.isinf(r.values).all()
        assert r.collinear == ["a", "b", "c"]

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 6))
    def test_at_least_one(self, seed, p):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, p)) @ rng.normal(size=(p, p))
        assert (vif(X).values >= 1 - 1e-9).all()

    def test_frame_output(self):
        r = vif(pd.DataFrame({"a": [1.0, 2, 3, 5], "b": [2.0, 1, 4, 3]}))
        assert list(r.to_frame().columns) == ["variable", "vif"]
