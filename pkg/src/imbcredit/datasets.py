"""Synthetic stand-in for the Give Me Some Credit table.

Same column names and similar marginal shapes (heavy-tailed utilization,
zero-inflated delinquency counters sharing 96/98 reporting codes, missing
income and dependents), with an event rate near 6.7%. It exists to
exercise the pipeline without the real file; numbers obtained on it say
nothing about the real data.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

TARGET = "SeriousDlqin2yrs"
PREDICTORS = [
    "RevolvingUtilizationOfUnsecuredLines",
    "age",
    "NumberOfTime30-59DaysPastDueNotWorse",
    "DebtRatio",
    "MonthlyIncome",
    "NumberOfOpenCreditLinesAndLoans",
    "NumberOfTimes90DaysLate",
    "NumberRealEstateLoansOrLines",
    "NumberOfTime60-89DaysPastDueNotWorse",
    "NumberOfDependents",
]


def make_credit_like(n: int = 20000, seed: int = 0) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    age = np.clip(np.round(rng.normal(52, 14, n)), 21, 99)
    util = rng.beta(0.6, 1.4, n) * 1.1
    util[rng.random(n) < 0.07] = 0.0
    tail = rng.random(n) < 0.003
    util[tail] = np.exp(rng.uniform(1, 10, tail.sum()))

    risk = rng.gamma(0.4, 1.0, n) + 1.2 * util.clip(0, 1.2) - 0.01 * (age - 50)
    d30 = rng.poisson(np.clip(0.25 * risk, 0, None))
    d60 = rng.poisson(np.clip(0.06 * risk, 0, None))
    d90 = rng.poisson(np.clip(0.08 * risk, 0, None))
    coded = rng.random(n) < 0.002
    code = np.where(rng.random(n) < 0.9, 98, 96)
    for arr in (d30, d60, d90):
        arr[coded] = code[coded]

    income = np.round(np.exp(rng.normal(8.5, 0.6, n)))
    income_missing = rng.random(n) < 0.2
    debt = rng.lognormal(-1.2, 0.7, n)
    debt[income_missing] = rng.lognormal(6.5, 1.5, income_missing.sum())
    open_lines = rng.poisson(8, n)
    real_estate = rng.poisson(1.0, n)
    dependents = rng.poisson(0.75, n).astype(float)

    logit = (
        -4.85
        + 3.2 * np.sqrt(util.clip(0, 1.3))
        + 0.6 * np.minimum(d30, 4)
        + 1.1 * np.minimum(d90, 4)
        + 0.8 * np.minimum(d60, 4)
        + 2.6 * coded
        - 0.022 * (age - 52)
        + 0.25 * (debt > 0.6)
        - 0.15 * (income > 6000)
        + 0.06 * dependents
        - 0.05 * np.minimum(open_lines, 4)
        + 0.4 * tail
    )
    y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(int)

    income = income.astype(float)
    income[income_missing] = np.nan
    dependents[income_missing & (rng.random(n) < 0.13)] = np.nan
    frame = pd.DataFrame({
        TARGET: y,
        "RevolvingUtilizationOfUnsecuredLines": util,
        "age": age,
        "NumberOfTime30-59DaysPastDueNotWorse": d30,
        "DebtRatio": debt,
        "MonthlyIncome": income,
        "NumberOfOpenCreditLinesAndLoans": open_lines,
        "NumberOfTimes90DaysLate": d90,
        "NumberRealEstateLoansOrLines": real_estate,
        "NumberOfTime60-89DaysPastDueNotWorse": d60,
        "NumberOfDependents": dependents,
    })
    frame.index = pd.RangeIndex(1, n + 1)
    return frame


def write_credit_like_csv(path, n: int = 20000, seed: int = 0) -> None:
    """Write in the Kaggle layout: unnamed id column first, ``NA`` for missing."""
    make_credit_like(n, seed).to_csv(path, na_rep="NA")
