"""Command line interface: ``mile train | predict | benchmark``.

Exit codes: 0 success, 1 usage/config error, 2 data or file error,
3 numerical failure (non-finite loss, sampler divergence).
"""

import argparse
import csv
import json
import logging
import os
import sys
from importlib import resources

import numpy as np

from . import predictive
from .config import build_config, load_config, validate_params
from .container import load_model, save_model
from .data import feature_names, load_csv, load_features
from .ensemble import MemberError, fit
from .errors import ConfigError, ContainerError, DataError, MileError, NumericError, ShapeError, TaskMismatchError
from .synthetic import GENERATORS, train_test

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SUITE_SIZES = {"n_train": 300, "n_test": 300}

log = logging.getLogger("mile")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def shipped_config(name):
    """Parameters of a config bundled with the package (``usage`` or ``synthetic``)."""
    text = resources.files("mile").joinpath("configs", f"{name}.json").read_text(encoding="utf-8")
    return validate_params(json.loads(text))


def _levels(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers, e.g. 0.1,0.9") from None
    if not 0 < lo < hi < 1:
        raise argparse.ArgumentTypeError("need 0 < lo < hi < 1")
    return lo, hi


def _fmt(x, digits):
    return format(float(x), f".{digits}g")


def _write_csv(fh, header, columns, digits):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow(v if isinstance(v, str) else _fmt(v, digits) for v in row)


def cmd_train(args):
    params = load_config(args.config)
    data = load_csv(args.data, args.target, args.task)
    n_out = data.y.shape[1] if args.task == "regression" else len(data.labels)
    cfg = build_config(params, data.X.shape[1], args.task, n_out)
    ens = fit(data, cfg)
    ens.extra.update(features=feature_names(args.data, args.target), targets=list(args.target))
    save_model(ens, args.out)
    out = sys.stdout
    out.write("member,seed,step_size,decoherence_length,map_valid_loss,divergences\n")
    for i, m in enumerate(ens.member_meta):
        out.write(
            f"{i},{m.seed},{_fmt(m.step_size, 6)},{_fmt(m.decoherence_length, 6)},"
            f"{_fmt(m.map_valid_loss, 6)},{m.divergences}\n"
        )
    out.write(f"# wrote {ens.n_samples} posterior samples x {ens.samples.shape[1]} parameters to {args.out}\n")
    return EXIT_OK


def cmd_predict(args):
    ens = load_model(args.model)
    X = load_features(args.data, ens.extra.get("features"))
    out = sys.stdout
    if ens.task == "classification":
        if args.mean_std or args.intervals:
            raise UsageError("--mean-std and --intervals apply to regression models only")
        probs = predictive.predict_proba(ens, X)
        labels = ens.labels or [str(j) for j in range(probs.shape[1])]
        cls = [str(labels[j]) for j in np.argmax(probs, axis=1)]
        _write_csv(out, ["class", *(f"p_{lab}" for lab in labels)], [cls, *probs.T], 17)
    else:
        mu, sigma = predictive._mixture_params(ens, X)
        means, stds = predictive.mixture_moments(mu, sigma)
        targets = ens.extra.get("targets") or [f"y{j}" for j in range(means.shape[1])]
        suffix = (lambda j: "") if means.shape[1] == 1 else (lambda j: f"_{targets[j]}")
        header, columns = [], []
        q = predictive.mixture_quantiles(mu, sigma, args.intervals) if args.intervals else None
        for j in range(means.shape[1]):
            header.append(f"mean{suffix(j)}")
            columns.append(means[:, j])
            if args.mean_std:
                header.append(f"std{suffix(j)}")
                columns.append(stds[:, j])
            if q is not None:
                for level, qk in zip(args.intervals, q):
                    header.append(f"q_{level:g}{suffix(j)}")
                    columns.append(qk[:, j])
        _write_csv(out, header, columns, 17)
    if args.raw_out:
        np.save(args.raw_out, predictive.predict_raw(ens, X))
    return EXIT_OK


def run_benchmark(seed, params, sizes=SUITE_SIZES, problems=GENERATORS):
    """Fit and score every synthetic problem; returns a list of metric dicts."""
    params = dict(params, master_seed=seed)
    rows = []
    for k, name in enumerate(problems):
        train, test = train_test(name, sizes["n_train"], sizes["n_test"], seed + k)
        cfg = build_config(params, train.X.shape[1])
        ens = fit(train, cfg)
        means, _ = predictive.predict_moments(ens, test.X)
        rows.append(
            {
                "dataset": name,
                "rmse": predictive.metric_rmse(test.y, means),
                "nll_distributional": predictive.metric_nll_distributional(ens, test.X, test.y),
                "nll_mean": predictive.metric_nll_mean_regression(test.y, means),
                "coverage_80": predictive.metric_coverage(ens, test.X, test.y, (0.1, 0.9)),
            }
        )
    return rows


def cmd_benchmark(args):
    params = load_config(args.config) if args.config else shipped_config("synthetic")
    rows = run_benchmark(args.seed, params)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "metrics.csv")
    keys = ["dataset", "rmse", "nll_distributional", "nll_mean", "coverage_80"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_csv(fh, keys, [[r[k] for r in rows] for k in keys], 6)
    sys.stdout.write(open(path, encoding="utf-8").read())
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="mile", description="Bayesian deep ensembles: MAP training followed by MCLMC sampling.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit an ensemble and write a model file")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--data", required=True, help="training CSV with a header row")
    p.add_argument("--target", required=True, action="append", help="target column (repeat for several)")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--task", choices=("regression", "classification"), default="regression")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="posterior-predictive summaries as CSV on stdout")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV of features (extra columns are ignored)")
    p.add_argument("--mean-std", action="store_true", help="add predictive std column(s)")
    p.add_argument("--intervals", type=_levels, metavar="LO,HI", help="credible interval levels")
    p.add_argument("--raw-out", metavar="FILE", help="save per-sample outputs (S x n x width) as .npy")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("benchmark", help="run the shipped synthetic suite")
    p.add_argument("--suite", required=True, choices=("synthetic",))
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True, help="output directory for metrics.csv")
    p.add_argument("--config", help="override the shipped suite configuration")
    p.set_defaults(func=cmd_benchmark)
    return parser


def _exit_code(exc):
    if isinstance(exc, MemberError) and exc.__cause__ is not None:
        exc = exc.__cause__
    if isinstance(exc, (UsageError, ConfigError, TaskMismatchError)):
        return EXIT_USAGE
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, ShapeError, ContainerError, OSError, MileError)):
        return EXIT_DATA
    raise exc


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except (UsageError, MileError, OSError) as exc:
        code = _exit_code(exc)
        sys.stderr.write(f"mile: error: {exc}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
