"""Command-line harness: gen, train, gradcheck, retention, allocate.

Exit codes: 0 success, 1 validation error, 2 numeric failure, 3 I/O or
file-format error. Every subcommand is deterministic given its config and
seed; artifacts contain no timestamps.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .config import resolve_config
from .errors import FormatError, NumericError, ValidationError
from .features import assemble_features
from .gradcheck import GRADCHECK_TOLERANCE, run_gradient_checks
from .losses import target_complexity
from .mlp import load_checkpoint, save_checkpoint
from .predictor import infer_count, predict_policy
from .retention import (EXPECTED_AVERAGES, AVERAGE_TOLERANCE, evaluate_policy,
                        load_score_table, retention_report)
from .synthetic import build_dataset, load_dataset, save_dataset
from .tokens import PLACEHOLDER, expand, parse_tokens
from .training import train, write_training_log

DEFAULT_TEMPLATE = f"<s> user : describe the {PLACEHOLDER} image briefly assistant :"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _config_flags(parser):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir")


def _collect_overrides(args, keys):
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def build_parser() -> _Parser:
    parser = _Parser(prog="vocorate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic tiered dataset")
    _config_flags(p)
    p.add_argument("--count", type=int)
    p.add_argument("--n-patches", dest="n_patches", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--split", default="train", choices=("train", "val"))
    p.add_argument("--out", help="dataset file (default <out_dir>/dataset.avds)")
    p.add_argument("--dump-csv", dest="dump_csv",
                   help="also write per-scene (dial, entropy, attention_variance, target) rows")

    p = sub.add_parser("train", help="train the count predictor on a dataset")
    _config_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--lambda-rate", dest="lambda_rate", type=float)
    p.add_argument("--lambda-comp", dest="lambda_comp", type=float)
    p.add_argument("--lambda-task", dest="lambda_task", type=float)
    p.add_argument("--gamma-a", dest="gamma_a", help="positive number or 'auto'")
    p.add_argument("--candidates", help="comma-separated counts, e.g. 1,2,4")

    p = sub.add_parser("gradcheck", help="finite-difference validation of every gradient path")
    _config_flags(p)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--corrupt", action="store_true",
                   help="perturb one analytic gradient to prove the harness fails loudly")

    p = sub.add_parser("retention", help="benchmark retention rates from a score table")
    p.add_argument("--table", help="CSV of model,benchmark,value (default: shipped table)")
    p.add_argument("--out", help="write per-model retention CSV here")

    p = sub.add_parser("allocate", help="run a trained predictor over a dataset")
    _config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="write per-scene allocation CSV here")
    p.add_argument("--template", default=DEFAULT_TEMPLATE,
                   help="prompt with one placeholder to expand per scene")
    p.add_argument("--candidates", help="comma-separated counts, e.g. 1,2,4")

    return parser


_CONFIG_KEYS = ("seed", "out_dir", "count", "n_patches", "dim", "steps", "batch_size",
                "learning_rate", "lambda_rate", "lambda_comp", "lambda_task",
                "gamma_a", "candidates")


def _resolve(args):
    return resolve_config(file_path=getattr(args, "config", None),
                          flag_overrides=_collect_overrides(args, _CONFIG_KEYS))


def cmd_gen(args) -> int:
    config = _resolve(args)
    dataset = build_dataset(config.count, seed=config.seed, n_patches=config.n_patches,
                            dim=config.dim, split=args.split)
    out = args.out or os.path.join(config.out_dir, "dataset.avds")
    save_dataset(dataset, out)

    loss_config = config.loss_config(gamma_a=config.gamma_a if config.gamma_a else 1.0)
    per_scene = []
    for spec, patches, attention in dataset.scenes:
        feats = assemble_features(patches, attention, config.tau_e)
        c = target_complexity(patches, attention, loss_config, config.tau_e)
        per_scene.append((spec.complexity_dial, feats.entropy, feats.attention_variance, c))

    print(f"wrote {len(dataset)} scenes to {out} (split={dataset.split})")
    tiers = sorted(set(d for d, _, _, _ in per_scene))
    means = []
    for tier in tiers:
        cs = [c for d, _, _, c in per_scene if d == tier]
        means.append(float(np.mean(cs)))
        print(f"tier dial={tier:.2f}: {len(cs)} scenes, mean target={means[-1]:.4f}")
    for lo, hi in zip(means, means[1:]):
        print(f"tier separation: {hi - lo:.4f}")

    if args.dump_csv:
        with open(args.dump_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dial", "entropy", "attention_variance", "target_complexity"])
            for row in per_scene:
                writer.writerow([f"{v:.10g}" for v in row])
        print(f"wrote per-scene stats to {args.dump_csv}")
    return 0


def cmd_train(args) -> int:
    config = _resolve(args)
    dataset = load_dataset(args.dataset)
    result = train(dataset, config)

    checkpoint_path = os.path.join(config.out_dir, "predictor.avck")
    log_path = os.path.join(config.out_dir, "training_log.csv")
    save_checkpoint(result.params, checkpoint_path)
    write_training_log(result.log_rows, log_path)

    report = evaluate_policy(result.params, dataset, config.candidate_set(), config.tau_e)
    last = result.log_rows[-1]
    print(f"trained {config.steps} steps on {len(dataset)} scenes (gamma_a={result.gamma_a:.6g})")
    print(f"final losses: rate={last[1]:.4f} comp={last[2]:.4f} total={last[3]:.4f}")
    for tier, count, mean_inf, mean_exp in zip(report.tiers, report.tier_scene_counts,
                                               report.tier_mean_inferred,
                                               report.tier_mean_expected):
        print(f"tier dial={tier:.2f}: {count} scenes, mean inferred count={mean_inf:.3f}, "
              f"mean expected count={mean_exp:.3f}")
    print(f"counts non-decreasing across tiers: {report.monotonic}")
    print(f"checkpoint: {checkpoint_path}")
    print(f"training log: {log_path}")
    return 0


def cmd_gradcheck(args) -> int:
    if args.instances == 0:
        print("no instances requested; no parameters checked")
        return 0
    config = _resolve(args)
    results = run_gradient_checks(instances=args.instances, seed=config.seed,
                                  corrupt=args.corrupt)
    failed = False
    for path, err in results.items():
        ok = err < GRADCHECK_TOLERANCE
        failed = failed or not ok
        print(f"{path:20s} max_rel_err={err:.3e} tol={GRADCHECK_TOLERANCE:.0e} "
              f"{'PASS' if ok else 'FAIL'}")
    if failed:
        raise NumericError("analytic gradients disagree with finite differences")
    return 0


def cmd_retention(args) -> int:
    table = load_score_table(args.table)
    report = retention_report(table)
    mismatches = []
    for model, (per_benchmark, average) in report.items():
        for benchmark, value in per_benchmark.items():
            print(f"{model:15s} {benchmark:8s} retention={value:7.2f}%")
        print(f"{model:15s} {'Avg.':8s} retention={average:7.2f}%")
        expected = EXPECTED_AVERAGES.get(model)
        if expected is not None and abs(average - expected) > AVERAGE_TOLERANCE:
            mismatches.append(f"{model}: got {average:.3f}, expected {expected}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "benchmark", "retention_pct"])
            for model, (per_benchmark, average) in report.items():
                for benchmark, value in per_benchmark.items():
                    writer.writerow([model, benchmark, f"{value:.4f}"])
                writer.writerow([model, "Avg.", f"{average:.4f}"])
        print(f"wrote retention report to {args.out}")
    if mismatches:
        raise NumericError("published averages not reproduced: " + "; ".join(mismatches))
    return 0


def cmd_allocate(args) -> int:
    config = _resolve(args)
    params = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    candidates = config.candidate_set()
    if params.out_dim != len(candidates):
        raise FormatError(
            f"checkpoint predicts {params.out_dim} candidates but config has {len(candidates)}"
        )
    template = parse_tokens(args.template)
    expected_dim = 2 * dataset.scenes[0][0].dim + 2 if len(dataset) else None
    if expected_dim is not None and params.in_dim != expected_dim:
        raise FormatError(
            f"checkpoint expects feature length {params.in_dim}, dataset yields {expected_dim}"
        )

    rows = []
    for index, (spec, patches, attention) in enumerate(dataset.scenes):
        feats = assemble_features(patches, attention, config.tau_e)
        policy = predict_policy(params, feats)
        count = infer_count(policy, candidates)
        expanded = expand(template, count)
        rows.append((index, spec.complexity_dial, feats.entropy, feats.attention_variance,
                     policy.probs, count, len(expanded)))
        print(f"scene {index}: dial={spec.complexity_dial:.2f} H={feats.entropy:.3f} "
              f"VarA={feats.attention_variance:.5f} K={count} expanded_len={len(expanded)}")

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            prob_cols = [f"pi_{k}" for k in candidates.counts]
            writer.writerow(["scene", "dial", "entropy", "attention_variance",
                             *prob_cols, "count", "expanded_length"])
            for index, dial, entropy, var_a, probs, count, length in rows:
                writer.writerow([index, f"{dial:.10g}", f"{entropy:.10g}", f"{var_a:.10g}",
                                 *[f"{p:.10g}" for p in probs], count, length])
        print(f"wrote allocation report to {args.out}")
    return 0


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "gradcheck": cmd_gradcheck,
    "retention": cmd_retention,
    "allocate": cmd_allocate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())
