"""Pipeline configuration: TOML schema, strict validation, seed derivation.

Unknown keys are rejected at every level so a misspelt hyperparameter fails
loudly instead of silently falling back to a default.  A minimal file::

    seed = 42
    output = "runs/als"

    [data.synthetic]
    n_users = 200
    n_items = 100
    rank = 3

    [split]
    method = "stratified"
    ratios = [0.8, 0.2]

    [model]
    algorithm = "als"
    params = { factors = 3 }

    [evaluate]
    k = 10
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ._rng import mix
from .exceptions import ConfigError, InvalidSpec
from .interactions import DEFAULT_SCHEMA, SyntheticSpec
from .models import ALGORITHMS
from .splitters import METHODS, SplitSpec
from .tuning import Objective, ParamSpace

_TOP_KEYS = {"seed", "output", "workers", "data", "split", "model", "tune", "evaluate"}
_DATA_KEYS = {"path", "delimiter", "schema", "synthetic"}
_SCHEMA_KEYS = set(DEFAULT_SCHEMA)
_SYNTH_KEYS = {"n_users", "n_items", "rank", "density", "noise_sigma", "rating_range", "seed",
               "time_window"}
_SPLIT_KEYS = {"method", "ratios", "seed", "group_by", "min_interactions"}
_MODEL_KEYS = {"algorithm", "params"}
_TUNE_KEYS = {"strategy", "space", "budget", "objective", "direction", "retrain_on_validation"}
_EVAL_KEYS = {"k", "relevance_threshold"}


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected a table")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


@dataclass
class PipelineConfig:
    seed: int = 0
    output: str = "recokit-output"
    workers: int = 1
    data_path: str | None = None
    delimiter: str = ","
    schema: dict = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    synthetic: dict | None = None
    split_method: str = "random"
    split: dict = field(default_factory=dict)
    algorithm: str = "als"
    model_params: dict = field(default_factory=dict)
    tune: dict | None = None
    k: int = 10
    relevance_threshold: float | None = None
    raw: dict = field(default_factory=dict, repr=False)

    # derived seeds: explicit values in the file win over the base seed

    def synthetic_spec(self) -> SyntheticSpec:
        params = dict(self.synthetic)
        params.setdefault("seed", mix(self.seed, "synthetic"))
        for key in ("rating_range", "time_window"):
            if key in params:
                params[key] = tuple(params[key])
        return SyntheticSpec(**params)

    def split_spec(self) -> SplitSpec:
        params = dict(self.split)
        params.setdefault("seed", mix(self.seed, "split"))
        return SplitSpec(**params)

    def model_kwargs(self) -> dict:
        params = dict(self.model_params)
        cls = ALGORITHMS[self.algorithm]
        if "seed" in cls().get_params() and "seed" not in params:
            params["seed"] = mix(self.seed, "model")
        return params

    def tune_seed(self) -> int:
        return mix(self.seed, "tune")

    def param_space(self) -> ParamSpace:
        return ParamSpace(self.algorithm, copy.deepcopy(self.tune["space"]),
                          fixed=dict(self.model_params))

    def objective(self) -> Objective:
        return Objective(self.tune.get("objective", "ndcg_at_k"), self.tune.get("direction"),
                         self.k, self.relevance_threshold)

    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    """SHA-256 of the canonical JSON form; stable under key reordering."""
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_config(raw: dict, require_data=True) -> PipelineConfig:
    """Validate a configuration mapping and build a :class:`PipelineConfig`.

    ``require_data=False`` admits files without a ``[data]`` table, for the
    single-stage commands that read their inputs from the command line.
    """
    raw = copy.deepcopy(raw)
    _check_keys(raw, _TOP_KEYS, "config")
    cfg = PipelineConfig(raw=raw)
    if "seed" in raw:
        if not isinstance(raw["seed"], int) or isinstance(raw["seed"], bool):
            raise ConfigError("seed must be an integer")
        cfg.seed = raw["seed"]
    if "output" in raw:
        cfg.output = str(raw["output"])
    if "workers" in raw:
        cfg.workers = int(raw["workers"])

    data = raw.get("data", {})
    _check_keys(data, _DATA_KEYS, "data")
    has_path, has_synth = "path" in data, "synthetic" in data
    if has_path and has_synth or (require_data and not (has_path or has_synth)):
        raise ConfigError("data: exactly one of 'path' or 'synthetic' is required")
    if has_path:
        cfg.data_path = str(data["path"])
        cfg.delimiter = data.get("delimiter", ",")
        schema = data.get("schema", {})
        _check_keys(schema, _SCHEMA_KEYS, "data.schema")
        cfg.schema.update(schema)
    elif has_synth:
        _check_keys(data["synthetic"], _SYNTH_KEYS, "data.synthetic")
        cfg.synthetic = dict(data["synthetic"])

    split = dict(raw.get("split", {}))
    _check_keys(split, _SPLIT_KEYS, "split")
    cfg.split_method = split.pop("method", "random")
    if cfg.split_method not in METHODS:
        raise ConfigError(f"split.method must be one of {METHODS}, got {cfg.split_method!r}")
    cfg.split = split

    model = raw.get("model", {})
    _check_keys(model, _MODEL_KEYS, "model")
    cfg.algorithm = model.get("algorithm", "als")
    if cfg.algorithm not in ALGORITHMS:
        raise ConfigError(f"model.algorithm must be one of {sorted(ALGORITHMS)}")
    cfg.model_params = dict(model.get("params", {}))
    valid_params = set(ALGORITHMS[cfg.algorithm]().get_params())
    unknown = sorted(set(cfg.model_params) - valid_params)
    if unknown:
        raise ConfigError(f"model.params: unknown parameter(s) {', '.join(unknown)} "
                          f"for {cfg.algorithm}")

    ev = raw.get("evaluate", {})
    _check_keys(ev, _EVAL_KEYS, "evaluate")
    cfg.k = ev.get("k", 10)
    if not isinstance(cfg.k, int) or cfg.k < 1:
        raise ConfigError("evaluate.k must be a positive integer")
    cfg.relevance_threshold = ev.get("relevance_threshold")

    if "tune" in raw:
        tune = raw["tune"]
        _check_keys(tune, _TUNE_KEYS, "tune")
        if tune.get("strategy", "grid") not in ("grid", "random"):
            raise ConfigError("tune.strategy must be 'grid' or 'random'")
        if not tune.get("space"):
            raise ConfigError("tune.space must define at least one axis")
        unknown = sorted(set(tune["space"]) - valid_params)
        if unknown:
            raise ConfigError(f"tune.space: unknown parameter(s) {', '.join(unknown)}")
        cfg.tune = dict(tune)

    # construct derived objects now so bad values surface as config errors
    try:
        if cfg.synthetic is not None:
            cfg.synthetic_spec().validate()
        spec = cfg.split_spec()
        if cfg.tune is not None:
            if len(spec.ratios) != 3:
                raise ConfigError("tune requires three split ratios (train/validation/test)")
            cfg.param_space()
            cfg.objective()
    except (InvalidSpec, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg


def read_config(path) -> dict:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path, require_data=True) -> PipelineConfig:
    return parse_config(read_config(path), require_data)
