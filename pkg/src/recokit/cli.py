"""Command-line interface.

Subcommands map one-to-one onto pipeline stages::

    recokit synth      generate a synthetic interactions CSV
    recokit split      split interactions into train/[validation/]test CSVs
    recokit train      fit a model and save it
    recokit recommend  write predictions and top-k recommendations
    recokit evaluate   compute the metric report as JSON
    recokit tune       grid or random hyperparameter search
    recokit run        the whole workflow from one config file

Command-line flags override values from ``--config``.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import parse_config, read_config
from .exceptions import ConfigError, RecokitError
from .interactions import generate_synthetic, load_interactions, write_interactions
from .models import load_model, make_model, save_model
from .pipeline import (
    EXIT_CODES,
    StageError,
    distinct_users,
    dump_json,
    evaluate_files,
    load_data,
    run_pipeline,
    run_tuning,
    write_predictions,
    write_recommendations,
    write_split,
)
from .splitters import split as split_data

EX_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _ratios(text):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _param(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        value = json.loads(value)
    except json.JSONDecodeError:
        pass
    return name, value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline TOML config file")
    common.add_argument("--seed", type=int, help="base seed (overrides config)")
    common.add_argument("--output", help="output file or directory")
    common.add_argument("--workers", type=int, help="parallel workers for tuning")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="recokit", description="Recommender toolkit command line.")
    parser.add_argument("--version", action="version", version=f"recokit {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic interactions")
    for name, typ in (("n-users", int), ("n-items", int), ("rank", int), ("density", float),
                      ("noise-sigma", float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--rating-range", type=_ratios)
    p.add_argument("--factors-output", help="also save planted factors (.npz)")

    p = sub.add_parser("split", parents=[common], help="split interactions into parts")
    p.add_argument("--input", help="interactions CSV (else the config's data source)")
    p.add_argument("--method", choices=("random", "chrono", "stratified"))
    p.add_argument("--ratios", type=_ratios)
    p.add_argument("--group-by", choices=("user", "item"))
    p.add_argument("--min-interactions", type=int)

    p = sub.add_parser("train", parents=[common], help="fit a model")
    p.add_argument("--train", required=True, help="training interactions CSV")
    p.add_argument("--algorithm")
    p.add_argument("--param", type=_param, action="append", default=[],
                   metavar="NAME=VALUE", help="model hyperparameter (repeatable)")

    p = sub.add_parser("recommend", parents=[common],
                       help="write predictions.csv and recommendations.csv")
    p.add_argument("--model", required=True)
    p.add_argument("--truth", required=True, help="interactions whose users/pairs to score")
    p.add_argument("--k", type=int)
    p.add_argument("--keep-seen", action="store_true", help="do not remove training items")

    p = sub.add_parser("evaluate", parents=[common], help="compute metrics as JSON")
    p.add_argument("--truth", required=True)
    p.add_argument("--recs")
    p.add_argument("--predictions")
    p.add_argument("--train", action="append", default=[],
                   help="training CSV defining the catalog (repeatable)")
    p.add_argument("--k", type=int)
    p.add_argument("--relevance-threshold", type=float)

    p = sub.add_parser("tune", parents=[common], help="hyperparameter search")
    p.add_argument("--train", required=True)
    p.add_argument("--validation", required=True)
    p.add_argument("--strategy", choices=("grid", "random"))
    p.add_argument("--budget", type=int)

    sub.add_parser("run", parents=[common], help="run the full pipeline")
    return parser


def _raw_config(args):
    return copy.deepcopy(read_config(args.config)) if args.config else {}


def _finish_config(raw, args, require_data=False):
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    return parse_config(raw, require_data=require_data)


def _set(raw, section, key, value):
    if value is not None:
        raw.setdefault(section, {})[key] = value


def cmd_synth(args):
    raw = _raw_config(args)
    synth = raw.setdefault("data", {}).setdefault("synthetic", {})
    raw["data"].pop("path", None)
    for key in ("n_users", "n_items", "rank", "density", "noise_sigma", "rating_range"):
        if getattr(args, key) is not None:
            synth[key] = getattr(args, key)
    cfg = _finish_config(raw, args)
    data = generate_synthetic(cfg.synthetic_spec())
    out = args.output or "synthetic.csv"
    write_interactions(data.interactions, out)
    if args.factors_output:
        with open(args.factors_output, "wb") as f:
            np.savez(f, user_factors=data.user_factors, item_factors=data.item_factors)
    print(out)
    return 0


def cmd_split(args):
    raw = _raw_config(args)
    if args.input:
        raw["data"] = {"path": args.input}
    _set(raw, "split", "method", args.method)
    _set(raw, "split", "ratios", args.ratios)
    _set(raw, "split", "group_by", args.group_by)
    _set(raw, "split", "min_interactions", args.min_interactions)
    cfg = _finish_config(raw, args, require_data=True)
    try:
        data = load_data(cfg)
    except (RecokitError, OSError) as exc:
        raise StageError("data", exc) from exc
    try:
        parts = split_data(data, cfg.split_method, cfg.split_spec()).parts
        paths = write_split(parts, args.output or cfg.output)
    except (RecokitError, OSError) as exc:
        raise StageError("split", exc) from exc
    print("\n".join(paths))
    return 0


def cmd_train(args):
    raw = _raw_config(args)
    _set(raw, "model", "algorithm", args.algorithm)
    if args.param:
        raw.setdefault("model", {}).setdefault("params", {}).update(dict(args.param))
    cfg = _finish_config(raw, args)
    try:
        train = load_interactions(args.train)
    except (RecokitError, OSError) as exc:
        raise StageError("data", exc) from exc
    try:
        model = make_model(cfg.algorithm, **cfg.model_kwargs()).fit(train)
        out = args.output or os.path.join(cfg.output, "model.npz")
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        save_model(model, out)
    except (RecokitError, OSError, ValueError, TypeError) as exc:
        raise StageError("train", exc) from exc
    print(out)
    return 0


def cmd_recommend(args):
    raw = _raw_config(args)
    _set(raw, "evaluate", "k", args.k)
    cfg = _finish_config(raw, args)
    try:
        model = load_model(args.model)
        truth = load_interactions(args.truth)
    except (RecokitError, OSError) as exc:
        raise StageError("data", exc) from exc
    outdir = args.output or cfg.output
    os.makedirs(outdir, exist_ok=True)
    pred_path = os.path.join(outdir, "predictions.csv")
    recs_path = os.path.join(outdir, "recommendations.csv")
    try:
        write_predictions(model, truth, pred_path)
        write_recommendations(model, distinct_users(truth), cfg.k, recs_path,
                              remove_seen=not args.keep_seen)
    except (RecokitError, ValueError) as exc:
        raise StageError("train", exc) from exc
    print(pred_path)
    print(recs_path)
    return 0


def cmd_evaluate(args):
    raw = _raw_config(args)
    _set(raw, "evaluate", "k", args.k)
    _set(raw, "evaluate", "relevance_threshold", args.relevance_threshold)
    cfg = _finish_config(raw, args)
    if not (args.recs or args.predictions):
        raise UsageError("evaluate needs --recs and/or --predictions")
    try:
        report = evaluate_files(args.truth, args.recs, args.predictions, args.train, cfg.k,
                                cfg.relevance_threshold)
    except (RecokitError, OSError, ValueError) as exc:
        raise StageError("evaluate", exc) from exc
    text = dump_json(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    sys.stdout.write(text)
    return 0


def cmd_tune(args):
    raw = _raw_config(args)
    _set(raw, "tune", "strategy", args.strategy)
    _set(raw, "tune", "budget", args.budget)
    if "tune" not in raw:
        raise ConfigError("tune needs a [tune] section in --config")
    # the validation file provides the middle part; ratio shape is irrelevant here
    raw.setdefault("split", {})["ratios"] = raw.get("split", {}).get("ratios", [0.6, 0.2, 0.2])
    cfg = _finish_config(raw, args)
    try:
        train = load_interactions(args.train)
        validation = load_interactions(args.validation)
    except (RecokitError, OSError) as exc:
        raise StageError("data", exc) from exc
    outdir = args.output or cfg.output
    os.makedirs(outdir, exist_ok=True)
    try:
        result, paths = run_tuning(cfg, train, validation, outdir, cfg.workers)
    except (RecokitError, OSError, ValueError) as exc:
        raise StageError("tune", exc) from exc
    print(json.dumps(result.best.to_dict(), sort_keys=True))
    return 0


def cmd_run(args):
    if not args.config:
        raise UsageError("run requires --config")
    raw = _raw_config(args)
    if args.output:
        raw["output"] = args.output
    cfg = _finish_config(raw, args, require_data=True)
    manifest = run_pipeline(cfg)
    print(os.path.join(cfg.output, "manifest.json"))
    return 0 if manifest else 1


COMMANDS = {
    "synth": cmd_synth, "split": cmd_split, "train": cmd_train, "recommend": cmd_recommend,
    "evaluate": cmd_evaluate, "tune": cmd_tune, "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EX_USAGE
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EX_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EX_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"recokit: error: {exc}\n")
        return EX_USAGE
    except StageError as exc:
        sys.stderr.write(f"recokit: {exc}\n")
        return exc.exit_code
    except (ConfigError, RecokitError, ValueError, TypeError) as exc:
        sys.stderr.write(f"recokit: config error: {exc}\n")
        return EXIT_CODES["config"]


if __name__ == "__main__":
    sys.exit(main())
