"""Command-line interface.

Subcommands ``active-learn``, ``compare-marginal``, ``evaluate`` and
``gen-pool``.  Exit status: 0 success, 1 usage error, 2 data error,
3 numerical failure.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, acquisition, harness
from .exceptions import DataError, GPEmbedError, NumericalError

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3
RESULT_FIELDS = ("method", "repetition", "seed", "nll", "rmse", "skld")
TRACE_FIELDS = ("step", "index", "utility", "log_posterior", "trace_sigma")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(out, command, config, files):
    manifest = {"command": command, "version": __version__, "config": config,
                "files": sorted(files)}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _csv_list(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _output_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _log(args, message):
    if not args.quiet:
        print(message, file=sys.stderr)


def _write_runs(out, records):
    """Results table, per-run traces and records; returns written names."""
    rows = []
    files = ["results.csv"]
    (out / "traces").mkdir(exist_ok=True)
    (out / "records").mkdir(exist_ok=True)
    for rec in records:
        m = rec.metrics or {}
        rows.append((rec.method, rec.repetition, rec.seed, m.get("nll"), m.get("rmse"),
                     m.get("skld")))
        name = f"{rec.method}_rep{rec.repetition}"
        _write_csv(out / "traces" / f"{name}.csv", TRACE_FIELDS,
                   [(s.step, s.index, s.utility, s.log_posterior, s.trace_sigma)
                    for s in rec.steps])
        rec.save(out / "records" / f"{name}.json")
        files += [f"traces/{name}.csv", f"records/{name}.json"]
    _write_csv(out / "results.csv", RESULT_FIELDS, rows)
    return files


def _experiment_config(args):
    return harness.ExperimentConfig(
        problem=args.problem, D=args.D, d=args.d, csv_path=args.csv,
        target_column=args.target, methods=_csv_list(args.methods), budget=args.budget,
        n_box=args.n_box, n_sphere=args.n_sphere, prior_std=args.prior_std,
        marginalize=_csv_list(args.marginalize), learn_scale=args.learn_scale,
        learn_noise=args.learn_noise, noise_variance=args.noise_variance,
        n_train=args.n_train, n_test=args.n_test, repetitions=args.repetitions,
        seed=args.seed, n_restarts=args.n_restarts, maxiter=args.maxiter)


def cmd_active_learn(args):
    config = _experiment_config(args)
    out = _output_dir(args.out)
    records = harness.run_experiment(
        config, progress=lambda r: _log(args, f"{r.method} rep {r.repetition}: "
                                              f"rmse={r.metrics['rmse']:.4f}"))
    files = _write_runs(out, records)
    _write_manifest(out, "active-learn", config.to_dict(), files)


def cmd_compare_marginal(args):
    config = harness.MarginalConfig(
        D=args.D, n_train=args.n_train, n_test=args.n_test, repetitions=args.repetitions,
        length_scale=args.length_scale,
        n_samples=args.n_samples, burn_in=args.burn_in, prior_std=args.prior_std,
        noise_variance=args.noise_variance, n_restarts=args.n_restarts, seed=args.seed)
    out = _output_dir(args.out)
    results = harness.compare_marginal(
        config, progress=lambda rep, r: _log(args, f"rep {rep}: " + ", ".join(
            f"{k} nll={v.nll:.3f}" for k, v in r.items())))
    rows = [(name, rep, r[name].seed, r[name].nll, r[name].rmse, r[name].skld)
            for rep, r in enumerate(results) for name in r]
    _write_csv(out / "results.csv", RESULT_FIELDS, rows)
    _write_manifest(out, "compare-marginal", config.to_dict(), ["results.csv"])


def cmd_evaluate(args):
    out = _output_dir(args.out)
    rows = []
    problems = {}
    for path in args.records:
        rec = harness.RunRecord.load(path)
        config = harness.ExperimentConfig.from_dict(rec.config)
        key = rec.repetition
        if key not in problems:
            problems[key] = harness.make_problem(config, rec.repetition)
        seed = harness.derive_seed(args.seed, "eval", rec.repetition)
        report = harness.evaluate_embedding(rec, problems[key], args.n_train, args.n_test,
                                            seed)
        rows.append((rec.method, rec.repetition, rec.seed, report.nll, report.rmse,
                     report.skld))
    _write_csv(out / "results.csv", RESULT_FIELDS, rows)
    _write_manifest(out, "evaluate", {"records": [str(p) for p in args.records],
                                      "seed": args.seed, "n_train": args.n_train,
                                      "n_test": args.n_test}, ["results.csv"])


def cmd_gen_pool(args):
    pool = acquisition.generate_pool(args.D, args.n_box, args.n_sphere,
                                     np.random.default_rng(args.seed))
    out = Path(args.out)
    header = ["provenance"] + [f"x{j}" for j in range(args.D)]
    try:
        _write_csv(out, header, ([p] + row.tolist()
                                 for p, row in zip(pool.provenance, pool.points)))
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}") from exc


def _flag(value):
    if value.lower() in ("1", "true", "yes"):
        return True
    if value.lower() in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {value!r}")


def build_parser():
    parser = _Parser(prog="gpembed",
                     description="Active learning of linear embeddings for GP regression.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-q", "--quiet", action="store_true", help="no progress output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("active-learn", help="run the active learning comparison")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--problem", choices=harness.PROBLEMS, default="synthetic")
    p.add_argument("--D", type=int, default=10)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--csv", help="CSV file for --problem csv")
    p.add_argument("--target", help="target column for --problem csv")
    p.add_argument("--methods", default="bald,rand,lasso",
                   help="comma-separated subset of " + ",".join(harness.METHODS))
    p.add_argument("--budget", type=int, default=30)
    p.add_argument("--n-box", type=int, default=1000)
    p.add_argument("--n-sphere", type=int, default=1000)
    p.add_argument("--prior-std", type=float, default=None,
                   help="embedding prior std (default 5 / (4 D))")
    p.add_argument("--marginalize", default="R",
                   help="comma-separated blocks among R,scale,noise")
    p.add_argument("--learn-scale", type=_flag, default=None)
    p.add_argument("--learn-noise", type=_flag, default=None)
    p.add_argument("--noise-variance", type=float, default=0.01)
    p.add_argument("--n-train", type=int, default=100)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--n-restarts", type=int, default=1)
    p.add_argument("--maxiter", type=int, default=200)
    p.set_defaults(func=cmd_active_learn)

    p = sub.add_parser("compare-marginal", help="MAP vs BBQ vs MGP against slice sampling")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--D", type=int, default=5)
    p.add_argument("--n-train", type=int, default=None, help="default 10 D")
    p.add_argument("--n-test", type=int, default=None, help="default 10 D")
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--length-scale", type=float, default=0.25,
                   help="median length scale of the generating GP")
    p.add_argument("--prior-std", type=float, default=4.0)
    p.add_argument("--noise-variance", type=float, default=0.01)
    p.add_argument("--n-restarts", type=int, default=3)
    p.set_defaults(func=cmd_compare_marginal)

    p = sub.add_parser("evaluate", help="re-score saved run records")
    p.add_argument("records", nargs="+", help="run record JSON files")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-train", type=int, default=100)
    p.add_argument("--n-test", type=int, default=1000)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen-pool", help="write a candidate pool as CSV")
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--n-box", type=int, default=1000)
    p.add_argument("--n-sphere", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_gen_pool)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, GPEmbedError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
