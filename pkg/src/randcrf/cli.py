"""Command-line interface: data generation, training, evaluation, bound
tables, and the full synthetic comparison."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import harness
from .bounds import BOUND_TABLE_HEADER, bound_table
from .losses import LOSS_CSV_HEADER, exact_crf_loss, hamming_loss
from .spaces import space
from .trainer import (TRACE_CSV_HEADER, Method, beta_schedule, trace_csv_rows,
                      train_crf, train_svm)


def _add_gen_data(sub):
    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--family", required=True, help="tree[:v] | dag[:v,p] | set[:k,u]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--out", required=True)
    p.add_argument("--weights-out", help="also write the sampled ground-truth weights")


def _cmd_gen_data(args) -> int:
    family = harness.parse_family(args.family)
    rng = np.random.default_rng(args.seed)
    w_star = harness.generate_ground_truth(family, rng)
    S = harness.generate_dataset(family, w_star, args.m, rng)
    harness.save_dataset(args.out, S)
    if args.weights_out:
        harness.save_weights(args.weights_out, w_star)
    print(f"wrote {S.m} samples to {args.out}")
    return 0


def _add_train(sub):
    p = sub.add_parser("train", help="train one method on a dataset")
    p.add_argument("--method", required=True, choices=[m.value for m in Method])
    p.add_argument("--config", required=True, help="JSON file mirroring ExperimentConfig")
    p.add_argument("--data", required=True)
    p.add_argument("--out-weights", required=True)
    p.add_argument("--trace", help="per-iteration CSV")
    p.add_argument("--run-id", default="train")


def _cmd_train(args) -> int:
    with open(args.config) as fh:
        cfg = harness.ExperimentConfig.from_dict(json.load(fh))
    method = Method(args.method)
    S = harness.load_dataset(args.data, cfg.family)
    w_hat, trace = harness._train_method(method, S, cfg, cfg.master_seed)
    harness.save_weights(args.out_weights, w_hat)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_CSV_HEADER)
            writer.writerows(trace_csv_rows(trace, args.run_id, method))
    print(f"trained {method.value}: final objective {trace.rows[-1].objective:.6f}, "
          f"support {w_hat.support_size}")
    return 0


def _add_eval(sub):
    p = sub.add_parser("eval", help="evaluate saved weights on a dataset")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--family", required=True)
    p.add_argument("--metrics", required=True, help="output CSV of loss rows")
    p.add_argument("--beta", type=float, help="Gumbel scale; default is the training schedule")
    p.add_argument("--run-id", default="eval")
    p.add_argument("--method", default="eval")


def _cmd_eval(args) -> int:
    family = harness.parse_family(args.family)
    S = harness.load_dataset(args.data, family)
    w = harness.load_weights(args.weights)
    beta = args.beta if args.beta is not None else beta_schedule(S.m, space(family).size)
    reports = [exact_crf_loss(w, S, beta), hamming_loss(w, S)]
    with open(args.metrics, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOSS_CSV_HEADER)
        for rep in reports:
            writer.writerow(rep.csv_row(args.run_id, args.method))
    for rep in reports:
        print(f"{rep.kind.value}: {rep.value:.6f}")
    return 0


def _add_bounds(sub):
    p = sub.add_parser("bounds", help="print bound values over a parameter grid")
    p.add_argument("--grid", required=True,
                   help="semicolon-separated lists, e.g. 'd=105;s=11;m=25,100,400;n=10;r=1365;delta=0.05'")
    p.add_argument("--out", help="optional CSV destination")


def _parse_grid(spec: str) -> dict[str, list]:
    grid: dict[str, list] = {}
    for part in spec.split(";"):
        if not part.strip():
            continue
        key, _, vals = part.partition("=")
        key = key.strip()
        conv = float if key in ("delta", "l1") else int
        grid[key] = [conv(v) for v in vals.split(",")]
    return grid


def _cmd_bounds(args) -> int:
    rows = bound_table(_parse_grid(args.grid))
    header = BOUND_TABLE_HEADER
    widths = [max(len(h), 12) for h in header]
    print("  ".join(h.rjust(w) for h, w in zip(header, widths)))
    for row in rows:
        cells = [f"{v:.6g}" if isinstance(v, float) else str(v) for v in row]
        print("  ".join(c.rjust(w) for c, w in zip(cells, widths)))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    return 0


def _add_reproduce(sub):
    p = sub.add_parser("reproduce", help="run the full four-method comparison")
    p.add_argument("--families", default="tree,dag,set",
                   help="comma-separated family labels")
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--out", required=True, help="metrics CSV")
    p.add_argument("--summary", help="summary CSV (means and 95%% CIs)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m-train", type=int, default=100)
    p.add_argument("--m-test", type=int, default=100)
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--l1", type=float, default=0.01)
    p.add_argument("--methods", default=",".join(m.value for m in Method))
    p.add_argument("--threads", type=int,
                   help=f"worker processes; default ${harness.THREADS_ENV_VAR} or 1")


def _cmd_reproduce(args) -> int:
    methods = tuple(Method(m) for m in args.methods.split(","))
    all_records = []
    for family in harness.parse_family_list(args.families):
        cfg = harness.ExperimentConfig(
            family=family, m_train=args.m_train, m_test=args.m_test,
            repetitions=args.reps, methods=methods, l1_lambda=args.l1,
            iterations=args.iterations, master_seed=args.seed)
        records = harness.run_experiment(cfg, threads=args.threads)
        all_records.extend(records)
        print(f"{harness.family_label(family)}: {len(records)} records", file=sys.stderr)
    harness.write_metrics_csv(args.out, all_records)
    if args.summary:
        harness.write_summary_csv(args.summary, harness.summarize(all_records))
    print(f"wrote {len(all_records)} records to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randcrf",
        description="Perturb-and-MAP structured prediction: exact and randomized CRF training")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_gen_data(sub)
    _add_train(sub)
    _add_eval(sub)
    _add_bounds(sub)
    _add_reproduce(sub)
    return parser


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "bounds": _cmd_bounds,
    "reproduce": _cmd_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
