"""
Binning and information value
=============================

Fit a quantile binning scheme per predictor (weakly different neighbours
merged, a separate bin for missing values), then rank the predictors by
information value and keep the ones above 0.1.
"""
from imbcredit.binning import METHODS, fit_scheme
from imbcredit.datasets import PREDICTORS, TARGET, make_credit_like
from imbcredit.diagnostics import information_value, iv_table, select_variables

frame = make_credit_like(n=20000, seed=2)
y = frame[TARGET].to_numpy()

schemes = [fit_scheme(frame[v].to_numpy(), y, "quantile", 20, variable=v) for v in PREDICTORS]
# a rare count can land in a single quantile bin; such a scheme carries no IV
reports = [information_value(s) for s in schemes if s.usable and s.n_bins > 1]
print(iv_table(reports).to_string(index=False))
print("selected:", select_variables(reports, 0.1))

# one scheme in detail: counts, event rates and WoE per bin
income = next(s for s in schemes if s.variable == "MonthlyIncome")
print(income.to_frame().to_string(index=False))

# the four discretizers on the same column; equal widths waste almost every
# bin on the long right tail, and what is left merges into one
x = frame["RevolvingUtilizationOfUnsecuredLines"].to_numpy()
for method in METHODS:
    s = fit_scheme(x, y, method, 20, variable="util")
    iv = f"IV {information_value(s).iv:.4f}" if s.n_bins > 1 else "single bin"
    print(f"{method:>8}: {s.n_value_bins:2d} bins, {iv}")
