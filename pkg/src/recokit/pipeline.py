"""End-to-end workflow: load, split, (tune,) train, evaluate, report.

Each stage is exposed as a function so the CLI can run stages separately
over intermediate files.  :func:`run_pipeline` goes through the same files
(evaluation reads back the CSVs it wrote), which is what makes a staged run
and a one-shot run produce identical metrics.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
import time
from collections import OrderedDict

from . import __version__
from .config import PipelineConfig
from .exceptions import DataError, RecokitError
from .interactions import InteractionSet, generate_synthetic, load_interactions, write_interactions
from .metrics import (
    REPORT_KEYS,
    build_ranked_lists,
    evaluate_ranking,
    evaluate_rating,
    join_rating_pairs,
    metric_report,
)
from .models import make_model, save_model
from .splitters import split as split_data
from .tuning import grid_search, random_search

_log = logging.getLogger(__name__)

EXIT_CODES = {"config": 1, "data": 2, "split": 3, "train": 4, "tune": 5, "evaluate": 6}
PART_NAMES = {2: ("train", "test"), 3: ("train", "validation", "test")}


class StageError(RecokitError):
    """A pipeline stage failed; ``exit_code`` identifies the stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.exit_code = EXIT_CODES[stage]
        self.cause = cause
        super().__init__(f"{stage} stage failed: {cause}")


class _stage:
    """Context manager that times a stage and wraps its failures."""

    def __init__(self, name, timings):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = round(time.perf_counter() - self.start, 6)
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, exc) from exc
        return False


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def load_data(cfg: PipelineConfig) -> InteractionSet:
    if cfg.synthetic is not None:
        return generate_synthetic(cfg.synthetic_spec()).interactions
    if cfg.data_path is None:
        raise DataError("no data source configured")
    return load_interactions(cfg.data_path, cfg.schema, cfg.delimiter)


def write_split(parts, outdir) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for name, part in zip(PART_NAMES[len(parts)], parts):
        path = os.path.join(outdir, f"{name}.csv")
        write_interactions(part, path)
        paths.append(path)
    return paths


def merge_sets(*sets: InteractionSet) -> InteractionSet:
    """Concatenate sets in order, re-indexing by first appearance."""
    return InteractionSet.from_records(rec for s in sets for rec in s)


def distinct_users(data: InteractionSet) -> list[str]:
    return list(dict.fromkeys(data.user_ids[u] for u in data.users.tolist()))


def write_predictions(model, truth: InteractionSet, path):
    """Score every (user, item) pair of ``truth``, one CSV row per interaction."""
    users = [truth.user_ids[u] for u in truth.users.tolist()]
    items = [truth.item_ids[i] for i in truth.items.tolist()]
    scores = model.predict(list(zip(users, items))).tolist()
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["user_id", "item_id", "score"])
        for row in zip(users, items, scores):
            w.writerow([row[0], row[1], repr(row[2])])


def write_recommendations(model, users, k, path, remove_seen=True):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["user_id", "item_id", "score", "rank"])
        for user in users:
            for rank, (item, score) in enumerate(model.recommend(user, k, remove_seen), 1):
                w.writerow([user, item, repr(score), rank])


def read_predictions(path):
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        try:
            return [(r["user_id"], r["item_id"], float(r["score"])) for r in reader]
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: bad predictions file ({exc})") from None


def read_recommendations(path) -> dict:
    """User -> list of items ordered by the file's rank column."""
    ranked = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        try:
            for r in reader:
                ranked.setdefault(r["user_id"], []).append((int(r["rank"]), r["item_id"]))
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: bad recommendations file ({exc})") from None
    return {u: [item for _, item in sorted(lst)] for u, lst in ranked.items()}


def evaluate_files(truth_path, recs_path=None, predictions_path=None, catalog_paths=(),
                   k=10, relevance_threshold=None) -> dict:
    """Compute the full metric report from CSV artifacts.

    The catalog for coverage is the set of items in ``catalog_paths`` (the
    training data); without them it falls back to the items in the truth and
    recommendation files.
    """
    truth = load_interactions(truth_path)
    rating = ranking = None
    if predictions_path:
        rating = evaluate_rating(join_rating_pairs(truth, read_predictions(predictions_path)))
    if recs_path:
        recs = read_recommendations(recs_path)
        catalog = set()
        for path in catalog_paths:
            catalog.update(load_interactions(path).item_ids)
        if not catalog_paths:
            catalog.update(truth.item_ids)
            for items in recs.values():
                catalog.update(items)
        lists = build_ranked_lists(truth, recs, len(catalog), relevance_threshold)
        ranking = evaluate_ranking(lists, k)
    else:
        ranking = {"k": k}
    return metric_report(rating, ranking)


def run_tuning(cfg: PipelineConfig, train, validation, outdir, workers=1):
    space = cfg.param_space()
    objective = cfg.objective()
    seed = cfg.tune_seed()
    if cfg.tune.get("strategy", "grid") == "grid":
        kwargs = {"budget": cfg.tune["budget"]} if "budget" in cfg.tune else {}
        result = grid_search(space, train, validation, objective, seed=seed, workers=workers,
                             **kwargs)
    else:
        result = random_search(space, cfg.tune.get("budget", 10), train, validation, objective,
                               seed=seed, workers=workers)
    trials_path = os.path.join(outdir, "trials.jsonl")
    with open(trials_path, "w", encoding="utf-8", newline="\n") as f:
        for t in result.trials:
            f.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")
    summary = {
        "strategy": cfg.tune.get("strategy", "grid"),
        "objective": objective.metric,
        "direction": objective.direction,
        "n_trials": len(result.trials),
        "n_failed": sum(t.failed for t in result.trials),
        "best": result.best.to_dict() if result.best else None,
    }
    summary_path = os.path.join(outdir, "tuning_summary.json")
    _atomic_write(summary_path, dump_json(summary))
    if result.best is None:
        raise RecokitError("every tuning trial failed")
    return result, [trials_path, summary_path]


def run_pipeline(cfg: PipelineConfig, workers=None) -> dict:
    """Run every stage and return the manifest written to ``manifest.json``.

    Failures raise :class:`StageError` carrying the stage's exit code.
    """
    workers = workers or cfg.workers
    outdir = cfg.output
    timings = OrderedDict()
    artifacts = []
    with _stage("config", timings):
        os.makedirs(outdir, exist_ok=True)
        spec = cfg.split_spec()

    with _stage("data", timings):
        data = load_data(cfg)
        _log.info("loaded %r", data)

    with _stage("split", timings):
        parts = split_data(data, cfg.split_method, spec).parts
        split_paths = write_split(parts, outdir)
        artifacts += split_paths
        # continue from the written files so staged runs see identical inputs
        parts = [load_interactions(p) for p in split_paths]
    train, test = parts[0], parts[-1]

    params = cfg.model_kwargs()
    fit_on = train
    if cfg.tune is not None:
        with _stage("tune", timings):
            result, tune_paths = run_tuning(cfg, train, parts[1], outdir, workers)
            artifacts += tune_paths
            params = {**params, **result.best.params}
            if cfg.tune.get("retrain_on_validation", True):
                fit_on = merge_sets(train, parts[1])

    with _stage("train", timings):
        model = make_model(cfg.algorithm, **params).fit(fit_on)
        model_path = os.path.join(outdir, "model.npz")
        save_model(model, model_path)
        artifacts.append(model_path)
        pred_path = os.path.join(outdir, "predictions.csv")
        recs_path = os.path.join(outdir, "recommendations.csv")
        write_predictions(model, test, pred_path)
        write_recommendations(model, distinct_users(test), cfg.k, recs_path)
        artifacts += [pred_path, recs_path]

    with _stage("evaluate", timings):
        catalog = split_paths[:2] if fit_on is not train else split_paths[:1]
        report = evaluate_files(split_paths[-1], recs_path, pred_path, catalog, cfg.k,
                                cfg.relevance_threshold)
        metrics_path = os.path.join(outdir, "metrics.json")
        _atomic_write(metrics_path, dump_json(report))
        artifacts.append(metrics_path)

    manifest = {
        "toolkit_version": __version__,
        "config_hash": cfg.config_hash(),
        "stage_seconds": dict(timings),
        "artifacts": [os.path.basename(p) for p in artifacts],
        "metrics": report,
    }
    _atomic_write(os.path.join(outdir, "manifest.json"), dump_json(manifest))
    return manifest


__all__ = [
    "EXIT_CODES", "REPORT_KEYS", "StageError", "evaluate_files", "load_data", "merge_sets",
    "read_recommendations", "run_pipeline", "run_tuning", "write_predictions",
    "write_recommendations", "write_split",
]
