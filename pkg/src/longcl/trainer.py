"""Sequential continual-learning loop wiring memory management and consolidation together."""

import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .memcon import FrozenEncoder, PrototypeStore, consolidate
from .memman import MemManConfig, TaskMask, memman_step
from .metrics import PerfMatrix
from .model import ToyModel
from .params import make_partition

METHODS = ("vanilla", "uniform-replay", "memman-only", "memcon-only", "long-cl")
_FIXED_ALPHA = re.compile(r"^long-cl-alpha(\d*\.?\d+)$")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    batch_size: int = 16
    lr: float = 0.05
    optimizer: str = "sgd"
    momentum: float = 0.0
    seed: int = 0
    rank: int = 4
    granularity: Optional[str] = None
    k_fraction: float = 0.10
    lambda_floor: float = 0.30
    fixed_alpha: Optional[float] = None
    r_h: float = 0.10
    r_g: float = 0.10
    delta_scale: Optional[float] = 0.8
    encoder: str = "random-projection"
    encoder_dim: int = 32
    base_scale: float = 0.1
    eval_all: bool = True

    def __post_init__(self):
        for name in ("k_fraction", "r_h", "r_g", "lambda_floor"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ConfigurationError(f"{name} must be in (0, 1], got {value}")
        if self.fixed_alpha is not None and not 0 <= self.fixed_alpha <= 1:
            raise ConfigurationError(f"fixed_alpha must be in [0, 1], got {self.fixed_alpha}")
        if self.epochs < 0 or self.batch_size < 1 or self.rank < 1 or self.lr <= 0:
            raise ConfigurationError("epochs >= 0, batch_size >= 1, rank >= 1 and lr > 0 are required")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")


def parse_arm(arm):
    """``(method, fixed_alpha)`` for an arm name; ``long-cl-alpha0.5`` pins alpha to 0.5."""
    m = _FIXED_ALPHA.match(arm)
    if m:
        return "long-cl", float(m.group(1))
    if arm not in METHODS:
        raise ConfigurationError(f"unknown arm {arm!r}")
    return arm, None


def _rng(seed, *stream):
    return np.random.default_rng([seed, *stream])


class _Adam:
    def __init__(self, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = self.v = None
        self.step_count = 0

    def step(self, w, g):
        if self.m is None:
            self.m, self.v = np.zeros_like(w), np.zeros_like(w)
        self.step_count += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        mhat = self.m / (1 - self.b1**self.step_count)
        vhat = self.v / (1 - self.b2**self.step_count)
        return w - self.lr * mhat / (np.sqrt(vhat) + self.eps)


class _SGD:
    def __init__(self, lr, momentum=0.0):
        self.lr, self.momentum = lr, momentum
        self.buf = None

    def step(self, w, g):
        if self.momentum:
            self.buf = g if self.buf is None else self.momentum * self.buf + g
            g = self.buf
        return w - self.lr * g


def train_task(model, x, y, replay, cfg, rng):
    """Minibatch descent on the task data plus every replayed record.

    ``replay`` is a list of ``(x, y)`` pairs. The combined set is shuffled
    once per epoch. Returns the tuned model; the base weight is untouched.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise PreconditionError("cannot train on an empty dataset")
    if x.shape[1] != model.num_features:
        raise ConfigurationError(f"model expects {model.num_features} features, data has {x.shape[1]}")
    if replay:
        x = np.concatenate([x] + [r[0] for r in replay])
        y = np.concatenate([y] + [r[1] for r in replay])
    w = model.adapter.values.copy()
    opt = _Adam(cfg.lr) if cfg.optimizer == "adam" else _SGD(cfg.lr, cfg.momentum)
    n = len(y)
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            _, g = model.loss_and_grad(x[idx], y[idx], w)
            w = opt.step(w, g)
    return model.with_adapter(model.adapter.with_values(w))


def evaluate(model, x, y):
    y = np.asarray(y)
    if len(y) == 0:
        raise PreconditionError("cannot evaluate on an empty split")
    return float(np.count_nonzero(model.predict(x) == y) / len(y))


@dataclass
class RunResult:
    method: str
    matrix: PerfMatrix
    masks: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    tuned: list = field(default_factory=list)
    events: list = field(default_factory=list)
    initial: Optional[ToyModel] = None
    final: Optional[ToyModel] = None


def run_stream(stream, method, cfg):
    """Train sequentially over ``stream`` and evaluate after every task.

    ``method`` is one of ``METHODS`` or a ``long-cl-alpha<x>`` arm.
    Per task: prototype -> train -> (memory management) -> (consolidation)
    -> evaluation on every task's test split.
    """
    method, fixed_alpha = parse_arm(method)
    if fixed_alpha is not None:
        cfg = replace(cfg, fixed_alpha=fixed_alpha)
    if len(stream) < 2:
        raise PreconditionError("a stream needs at least 2 tasks")
    use_memman = method in ("memman-only", "long-cl")
    selects = method in ("memcon-only", "long-cl", "uniform-replay")

    model = ToyModel.init(stream.num_features, stream.num_classes, cfg.rank, cfg.seed, cfg.base_scale)
    granularity = cfg.granularity or f"row:{cfg.rank}"
    partition = make_partition(len(model.adapter), granularity, model.adapter.segments)
    encoder = FrozenEncoder(stream.num_features, cfg.encoder_dim, cfg.encoder, seed=[cfg.seed, 23])
    mm_cfg = MemManConfig(cfg.k_fraction, cfg.lambda_floor, cfg.fixed_alpha)

    m = len(stream)
    result = RunResult(method, PerfMatrix(m), initial=model)
    prototypes = PrototypeStore()
    mask = TaskMask.empty(partition.n_units)
    replay = []

    for t, task in enumerate(stream.tasks, start=1):
        result.events.append({"event": "task_start", "task": t, "task_id": task.task_id})
        emb = encoder(task.x_train)
        prototypes.append(emb)

        tuned = train_task(model, task.x_train, task.y_train, replay, cfg, _rng(cfg.seed, 1, t))

        result.tuned.append(tuned.adapter)
        event = {"event": "task_end", "task": t, "task_id": task.task_id}
        if use_memman:
            step = memman_step(model.adapter, tuned.adapter, partition, mask, prototypes, t, mm_cfg)
            mask = step.mask
            model = model.with_adapter(step.params)
            result.masks.append(mask)
            result.alphas.append(step.alpha)
            event.update(alpha=step.alpha, n_selected=int(step.selected.size), mask_popcount=mask.popcount)
        else:
            model = tuned

        if selects:
            ids = np.arange(len(task.y_train))
            buf, report = consolidate(
                t, ids, task.x_train, task.y_train, emb, prototypes, cfg.r_h, cfg.r_g, cfg.delta_scale
            )
            if method == "uniform-replay":
                pick = np.sort(_rng(cfg.seed, 2, t).choice(ids, size=len(buf), replace=False))
                replay.append((task.x_train[pick], task.y_train[pick]))
            else:
                replay.append((buf.x, buf.y))
                result.reports.append(report)
            event.update(
                n_hard=len(report.hard_ids), n_diff=len(report.diff_ids), delta=report.delta, buffer_size=len(buf)
            )
        result.events.append(event)
        result.checkpoints.append(model.adapter)

        upto = m if cfg.eval_all else t
        for k in range(upto):
            other = stream.tasks[k]
            result.matrix.record(t - 1, k, evaluate(model, other.x_test, other.y_test))

    result.final = model
    return result
