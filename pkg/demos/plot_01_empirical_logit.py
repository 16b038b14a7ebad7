"""
Empirical logit and the linearity check
=======================================

Group a predictor into percentile ranks, compute the smoothed log-odds of
the event in each rank and ask whether that curve is closer to a line in
the raw value or in the rank index. A heavy-tailed variable like revolving
utilization usually prefers the rank, which is a hint to discretize it.
"""
import pandas as pd

from imbcredit.datasets import make_credit_like, TARGET
from imbcredit.diagnostics import empirical_logit_table, linearity_score

frame = make_credit_like(n=20000, seed=1)
y = frame[TARGET].to_numpy()

for name in ["RevolvingUtilizationOfUnsecuredLines", "age"]:
    t = empirical_logit_table(frame[name].to_numpy(), y, n_ranks=100, variable=name)
    score = linearity_score(t)
    print(f"{name}: {len(t.table)} ranks, r2 by value {score.r2_value:.3f}, "
          f"r2 by rank {score.r2_rank:.3f} -> {score.recommendation}")

# the table behind the plot: one row per merged rank
t = empirical_logit_table(frame["age"].to_numpy(), y, n_ranks=10, variable="age")
with pd.option_context("display.width", 120):
    print(t.table)
