"""Command-line driver.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from imbcredit.config import load_config
from imbcredit.errors import ConfigError, ImbCreditError, NumericalError
from imbcredit.pipeline import Pipeline

logger = logging.getLogger("imbcredit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="imbcredit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help, model=False, model_required=False):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=True, help="pipeline YAML file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="split/fold seed (overrides config)")
        if model:
            p.add_argument("--model", type=int, choices=range(1, 6), required=model_required)
        return p

    add("explore", "empirical-logit tables, linearity scores, missingness summary")
    p = add("bin", "fit binning schemes and the information-value table")
    p.add_argument("--method", choices=["distance", "quantile", "gini", "optimal", "all"],
                   help="'all' also compares the four methods by test AUC")
    p = add("sweep", "tune tau by cross-validated AUC", model=True)
    p.set_defaults(model=3)
    add("train", "fit, cross-validate and evaluate a model", model=True, model_required=True)
    add("cv", "cross-validated AUC of a model", model=True, model_required=True)
    add("evaluate", "test-set metrics of a stored fit", model=True, model_required=True)
    p = add("score", "score a CSV with a stored fit", model=True)
    p.add_argument("--fit", help="fit JSON (default: <out>/fit_model<MODEL>.json)")
    p.add_argument("--data", required=True, help="CSV to score")
    p.add_argument("--output", help="file name of the scored CSV inside the output directory")
    add("run", "every stage for models 1-5")
    return parser


def _pipeline(args) -> Pipeline:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.split = dataclasses.replace(cfg.split, seed=args.seed)
    if getattr(args, "method", None) not in (None, "all"):
        cfg.binning = dataclasses.replace(cfg.binning, method=args.method)
    return Pipeline(cfg, args.out)


def _dispatch(args) -> None:
    pipe = _pipeline(args)
    cmd = args.command
    if cmd == "explore":
        res = pipe.explore()
        print(res.values["linearity"].to_string(index=False))
    elif cmd == "bin":
        res = pipe.bin("all" if args.method == "all" else None)
        if "comparison" in res.values:
            print(res.values["comparison"].to_string(index=False))
        print(res.values["iv"].to_string(index=False))
    elif cmd == "sweep":
        sw = pipe.sweep(args.model).values["sweep"]
        print(sw.table.to_string(index=False))
        print(f"best tau = {sw.best_tau:.6g}  W1 = {sw.best_weights.w1:.4f}  "
              f"W0 = {sw.best_weights.w0:.4f}")
    elif cmd == "train":
        res = pipe.train(args.model)
        cv, cm = res.values["cv"], res.values["confusion"]
        print(res.values["fit"].coef().to_string())
        print(f"CV AUC mean = {cv.mean:.4f}  std = {cv.std:.4f}")
        print(f"cutoff = {cm.cutoff:.4g}  type I = {cm.type1:.4f}  type II = {cm.type2:.4f}  "
              f"accuracy = {cm.accuracy:.4f}  F1 = {cm.f1:.4f}")
    elif cmd == "cv":
        cv = pipe.cv(args.model).values["cv"]
        print(f"CV AUC mean = {cv.mean:.4f}  std = {cv.std:.4f}"
              + ("  (incomplete)" if cv.incomplete else ""))
    elif cmd == "evaluate":
        print(pipe.evaluate(args.model).values["confusion"])
    elif cmd == "score":
        if args.fit is None and args.model is None:
            raise ConfigError("score needs --fit or --model")
        fit_path = args.fit or pipe.path(f"fit_model{args.model}.json")
        res = pipe.score(fit_path, args.data, args.output)
        print(f"scored {len(res.values['scored'])} rows -> {res.artifacts[0]}")
    elif cmd == "run":
        print(pipe.run().values["summary"].to_string(index=False))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except ImbCreditError as exc:
        print(f"imbcredit: {exc}", file=sys.stderr)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"imbcredit: numerical failure: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
