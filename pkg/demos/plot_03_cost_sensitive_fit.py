"""
Cost-sensitive logistic regression and the tau sweep
====================================================

Class weights W1 = tau/ybar and W0 = (1-tau)/(1-ybar) reweight the
log-likelihood as if the event share were tau. With tau = ybar both
weights are 1 and the plain maximum-likelihood fit comes back. Sweeping
tau and scoring each value by cross-validated AUC picks the weights.
"""
import numpy as np

from imbcredit import ingest, model
from imbcredit.datasets import TARGET, make_credit_like

frame = make_credit_like(n=20000, seed=3).dropna()
cols = ["RevolvingUtilizationOfUnsecuredLines", "age", "NumberOfTime30-59DaysPastDueNotWorse",
        "NumberOfTimes90DaysLate", "NumberOfTime60-89DaysPastDueNotWorse"]
X = frame[cols].to_numpy()
y = frame[TARGET].to_numpy()
ybar = y.mean()

plain = model.fit(X, y, names=cols)
unit = model.fit(X, y, model.class_weights(ybar, ybar), names=cols)
print("max |plain - (tau = ybar)|:", np.max(np.abs(plain.coefficients - unit.coefficients)))

balanced = model.fit(X, y, model.class_weights(0.5, ybar), names=cols)
print(balanced.coef().to_frame("tau = 0.5").join(plain.coef().rename("unweighted")))
print(f"intercept shift {balanced.intercept - plain.intercept:.4f}, "
      f"ln(W1/W0) = {np.log(balanced.weights.w1 / balanced.weights.w0):.4f}")

folds = ingest.fold_indices(y, 5, stratified=True, seed=0)
sweep = model.sweep_tau(X, y, model.default_tau_grid(ybar, num=8), folds)
print(sweep.table[["tau", "w1", "w0", "mean_auc", "std_auc"]].to_string(index=False))
print(f"best tau {sweep.best_tau:.4f}: W1 {sweep.best_weights.w1:.3f}, W0 {sweep.best_weights.w0:.3f}")
