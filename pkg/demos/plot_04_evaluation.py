"""
ROC, AUC, cutoff and the confusion suite
========================================

Fit on a stratified 70/30 split, draw the test ROC curve, place the cutoff
where sensitivity and specificity meet, and report Type I / Type II error,
accuracy and F1 there. Then repeat the fit over 10 folds for the mean and
spread of AUC.
"""
from imbcredit import evaluation, ingest, model
from imbcredit.datasets import PREDICTORS, TARGET, make_credit_like

frame = make_credit_like(n=20000, seed=4).dropna()
data = ingest.Dataset.from_arrays({v: frame[v].to_numpy() for v in PREDICTORS},
                                  frame[TARGET].to_numpy())
train, test = ingest.split(data, ingest.SplitSpec(train_fraction=0.7, seed=4))
fitted = model.fit(train.predictors.to_numpy(), train.target)
scores = model.predict_proba(fitted, test.predictors.to_numpy())

curve = evaluation.roc(scores, test.target)
print(f"test AUC {curve.auc:.4f} over {len(curve.fpr)} ROC points")
cutoff = evaluation.choose_cutoff(scores, test.target)
report = evaluation.confusion(scores, test.target, cutoff)
print(f"cutoff {cutoff:.4f}: sensitivity {report.sensitivity:.3f}, "
      f"specificity {report.specificity:.3f}")
print(f"type I {report.type1:.4f}, type II {report.type2:.4f}, "
      f"accuracy {report.accuracy:.4f}, F1 {report.f1:.4f}")

folds = ingest.make_folds(train, ingest.SplitSpec(fold_count=10, seed=4))


def pipeline(tr, va):
    m = model.fit(tr.predictors.to_numpy(), tr.target)
    return model.predict_proba(m, va.predictors.to_numpy())


cv = evaluation.cross_validate(pipeline, folds)
print(cv.to_frame().to_string(index=False))
print(f"mean {cv.mean:.4f}, std {cv.std:.4f}")
