"""Experiment configuration: one JSON document, validated before any compute."""

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError
from .streams import FAMILIES, gen_synthetic_stream, load_jsonl_stream, permute_order
from .trainer import TrainConfig, parse_arm

SYNTHETIC_KEYS = {
    "family": str,
    "num_tasks": int,
    "n_train": int,
    "n_test": int,
    "seed": (int, type(None)),
    "num_features": int,
    "num_classes": int,
    "class_sep": (int, float),
    "noise": (int, float),
    "max_angle": (int, float),
    "mean_shift": (int, float),
}
TRAIN_KEYS = {
    "epochs": int,
    "batch_size": int,
    "lr": (int, float),
    "optimizer": str,
    "momentum": (int, float),
    "rank": int,
    "granularity": (str, type(None)),
    "k_fraction": (int, float),
    "lambda_floor": (int, float),
    "fixed_alpha": (int, float, type(None)),
    "r_h": (int, float),
    "r_g": (int, float),
    "encoder": str,
    "encoder_dim": int,
    "base_scale": (int, float),
    "eval_all": bool,
}
TOP_KEYS = {"stream", "arms", "seeds", "orders", "output_dir", "delta_rule", "save_checkpoints"} | set(TRAIN_KEYS)
RATIO_KEYS = ("k_fraction", "lambda_floor", "r_h", "r_g")


@dataclass
class ExperimentConfig:
    stream: dict
    arms: list
    seeds: list
    orders: list
    output_dir: str
    train: dict
    delta_rule: str = "spread"
    save_checkpoints: bool = True

    def train_config(self, seed):
        delta_scale = 0.8 if self.delta_rule == "spread" else None
        return TrainConfig(seed=seed, delta_scale=delta_scale, **self.train)

    def build_stream(self, seed):
        spec = dict(self.stream)
        if "manifest" in spec:
            return load_jsonl_stream(spec["manifest"])
        if spec.get("seed") is None:
            spec["seed"] = seed
        num_tasks = spec.pop("num_tasks")
        return gen_synthetic_stream(num_tasks, **spec)

    def to_json(self):
        doc = {
            "stream": self.stream,
            "arms": self.arms,
            "seeds": self.seeds,
            "orders": self.orders,
            "output_dir": self.output_dir,
            "delta_rule": self.delta_rule,
            "save_checkpoints": self.save_checkpoints,
        }
        doc.update(self.train)
        return doc


def order_label(order):
    if order == "identity":
        return "identity"
    if isinstance(order, int):
        return f"shuffle{order}"
    return "perm-" + "-".join(str(p) for p in order)


def apply_order(stream, order):
    if order == "identity":
        return stream
    if isinstance(order, int):
        return permute_order(stream, seed=order)
    return permute_order(stream, permutation=order)


def _check_type(key, value, kinds):
    kinds = kinds if isinstance(kinds, tuple) else (kinds,)
    if isinstance(value, bool) and bool not in kinds:
        raise ConfigurationError(f"{key}: unexpected type bool")
    if not isinstance(value, kinds):
        raise ConfigurationError(f"{key}: unexpected type {type(value).__name__}")


def parse_config(doc, base_dir=None):
    """Validate a config mapping; every error message starts with the offending field."""
    if not isinstance(doc, dict):
        raise ConfigurationError("config: top level must be a JSON object")
    unknown = sorted(set(doc) - TOP_KEYS)
    if unknown:
        raise ConfigurationError(f"{unknown[0]}: unknown key")

    stream = doc.get("stream")
    if not isinstance(stream, dict):
        raise ConfigurationError("stream: required object")
    if "manifest" in stream:
        extra = sorted(set(stream) - {"manifest"})
        if extra:
            raise ConfigurationError(f"stream.{extra[0]}: unknown key for a manifest stream")
        path = Path(stream["manifest"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        stream = {"manifest": str(path)}
    else:
        for key, value in stream.items():
            if key not in SYNTHETIC_KEYS:
                raise ConfigurationError(f"stream.{key}: unknown key")
            _check_type(f"stream.{key}", value, SYNTHETIC_KEYS[key])
        if "num_tasks" not in stream:
            raise ConfigurationError("stream.num_tasks: required")
        if stream["num_tasks"] < 2:
            raise ConfigurationError("stream.num_tasks: must be >= 2")
        if stream.get("family", "rotated-gaussians") not in FAMILIES:
            raise ConfigurationError(f"stream.family: must be one of {', '.join(FAMILIES)}")
        for key in ("n_train", "n_test", "num_features", "num_classes"):
            if key in stream and stream[key] < 1:
                raise ConfigurationError(f"stream.{key}: must be >= 1")

    arms = doc.get("arms", ["long-cl"])
    if isinstance(arms, str):
        arms = [arms]
    if not isinstance(arms, list) or not arms:
        raise ConfigurationError("arms: must be a nonempty list")
    for arm in arms:
        try:
            parse_arm(arm)
        except ConfigurationError as exc:
            raise ConfigurationError(f"arms: {exc}") from None

    seeds = doc.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigurationError("seeds: must be a nonempty list of integers")

    orders = doc.get("orders", ["identity"])
    if not isinstance(orders, list) or not orders:
        raise ConfigurationError("orders: must be a nonempty list")
    for order in orders:
        ok = order == "identity" or (isinstance(order, int) and not isinstance(order, bool))
        ok = ok or (isinstance(order, list) and all(isinstance(p, int) for p in order))
        if not ok:
            raise ConfigurationError(f"orders: {order!r} is not 'identity', a shuffle seed or a permutation")
        if isinstance(order, list) and "num_tasks" in stream:
            if sorted(order) != list(range(stream["num_tasks"])):
                raise ConfigurationError(f"orders: {order} is not a permutation of {stream['num_tasks']} tasks")

    train = {}
    for key, kinds in TRAIN_KEYS.items():
        if key in doc:
            _check_type(key, doc[key], kinds)
            train[key] = doc[key]
    for key in RATIO_KEYS:
        if key in train and not 0 < train[key] <= 1:
            raise ConfigurationError(f"{key}: must be in (0, 1], got {train[key]}")
    if train.get("fixed_alpha") is not None and not 0 <= train["fixed_alpha"] <= 1:
        raise ConfigurationError(f"fixed_alpha: must be in [0, 1], got {train['fixed_alpha']}")
    if train.get("epochs", 0) < 0:
        raise ConfigurationError("epochs: must be >= 0")
    for key in ("batch_size", "rank", "encoder_dim"):
        if key in train and train[key] < 1:
            raise ConfigurationError(f"{key}: must be >= 1")
    if "lr" in train and not (train["lr"] > 0 and math.isfinite(train["lr"])):
        raise ConfigurationError("lr: must be a positive number")
    if train.get("optimizer", "sgd") not in ("sgd", "adam"):
        raise ConfigurationError("optimizer: must be 'sgd' or 'adam'")
    if train.get("encoder", "random-projection") not in ("identity", "random-projection"):
        raise ConfigurationError("encoder: must be 'identity' or 'random-projection'")
    if "granularity" in train and train["granularity"] is not None:
        g = train["granularity"]
        if not (g in ("scalar", "segment") or g.startswith("row:")):
            raise ConfigurationError("granularity: must be 'scalar', 'segment' or 'row:<width>'")

    delta_rule = doc.get("delta_rule", "spread")
    if delta_rule not in ("spread", "off"):
        raise ConfigurationError("delta_rule: must be 'spread' or 'off'")
    output_dir = doc.get("output_dir", "runs")
    if not isinstance(output_dir, str):
        raise ConfigurationError("output_dir: must be a string")
    save_checkpoints = doc.get("save_checkpoints", True)
    if not isinstance(save_checkpoints, bool):
        raise ConfigurationError("save_checkpoints: must be a boolean")

    return ExperimentConfig(stream, list(arms), list(seeds), list(orders), output_dir, train, delta_rule, save_checkpoints)


def load_config(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"config: {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(doc, base_dir=path.parent)

