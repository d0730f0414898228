"""Long-term memory consolidation: prototypes, hard/differential selection, replay buffers."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, PreconditionError, ShapeError


class FrozenEncoder:
    """Fixed feature map used for prototypes and sample selection.

    ``kind="random-projection"`` draws a Gaussian ``(in_dim, out_dim)``
    matrix from ``seed`` once; ``kind="identity"`` passes features through.
    The encoder never changes after construction.
    """

    def __init__(self, in_dim, out_dim=32, kind="random-projection", seed=0):
        if kind not in ("identity", "random-projection"):
            raise ConfigurationError(f"unknown encoder kind {kind!r}")
        self.in_dim = int(in_dim)
        self.kind = kind
        self.seed = seed
        if kind == "identity":
            self.out_dim = self.in_dim
            self.matrix = None
        else:
            self.out_dim = int(out_dim)
            rng = np.random.default_rng(seed)
            self.matrix = rng.standard_normal((self.in_dim, self.out_dim)) / math.sqrt(self.out_dim)
            self.matrix.setflags(write=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"encoder expects {self.in_dim} features, got {x.shape[-1]}")
        if self.matrix is None:
            return x.copy()
        return x @ self.matrix


def embed(sample, encoder):
    return encoder(sample)


def compute_prototype(embeddings):
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] == 0:
        raise PreconditionError("cannot compute the prototype of an empty task")
    return emb.mean(axis=0)


@dataclass
class PrototypeStore:
    """Per-task mean embeddings, appended once per task in stream order."""

    prototypes: list = field(default_factory=list)
    counts: list = field(default_factory=list)

    def append(self, embeddings):
        proto = compute_prototype(embeddings)
        if self.prototypes and proto.shape != self.prototypes[0].shape:
            raise ShapeError("prototype dimension changed within a run")
        self.prototypes.append(proto)
        self.counts.append(len(embeddings))
        return proto

    def __len__(self):
        return len(self.prototypes)

    def as_array(self, upto=None):
        protos = self.prototypes if upto is None else self.prototypes[:upto]
        if not protos:
            return np.empty((0, 0))
        return np.stack(protos)


def _count(ratio, n, name):
    if not 0 < ratio <= 1:
        raise ConfigurationError(f"{name} must be in (0, 1], got {ratio}")
    return math.ceil(ratio * n)


def select_hard(ids, embeddings, prototype, r_h):
    """Indices (into ``ids``) of the farthest samples from the task prototype.

    Returns ``(positions, scores)`` with positions ordered by descending
    distance, ties broken by lower sample id.
    """
    ids = np.asarray(ids)
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.shape[0] == 0:
        raise PreconditionError("cannot select from an empty task")
    k = _count(r_h, emb.shape[0], "r_h")
    dist = kernels.pairwise_dist(emb, np.asarray(prototype, dtype=np.float64)[None, :])[:, 0]
    order = _id_order(ids)
    pos = order[kernels.topk(dist[order], k, True)]
    return pos, dist[pos]


def compute_delta(prototypes, scale=0.8):
    """``scale * D_max / 2`` over all stored prototypes; 0 with fewer than two."""
    protos = prototypes.as_array() if isinstance(prototypes, PrototypeStore) else np.asarray(prototypes)
    if protos.shape[0] < 2:
        return 0.0
    d_max = float(kernels.pairwise_dist(protos, protos).max())
    return scale * d_max / 2.0


def select_differential(ids, embeddings, prev_prototypes, r_g, delta):
    """Samples closest in total to all earlier prototypes, away from each one.

    Only samples whose distance to every earlier prototype is at least
    ``delta`` are eligible. Returns ``(positions, cumulative, min_dist)``,
    ordered by ascending cumulative distance, ties by lower sample id.
    """
    ids = np.asarray(ids)
    emb = np.asarray(embeddings, dtype=np.float64)
    protos = np.asarray(prev_prototypes, dtype=np.float64)
    empty = np.empty(0, dtype=np.int64), np.empty(0), np.empty(0)
    if protos.ndim != 2 or protos.shape[0] == 0:
        return empty
    if emb.shape[0] == 0:
        raise PreconditionError("cannot select from an empty task")
    k = _count(r_g, emb.shape[0], "r_g")
    dist = kernels.pairwise_dist(emb, protos)
    cumulative = dist.sum(axis=1)
    min_dist = dist.min(axis=1)
    order = _id_order(ids)
    eligible = order[min_dist[order] >= delta]
    if eligible.size == 0:
        return empty
    pos = eligible[kernels.topk(cumulative[eligible], k, False)]
    return pos, cumulative[pos], min_dist[pos]


def _id_order(ids):
    # kernels break ties by array position; sorting by id first makes that the id rule
    return np.argsort(ids, kind="stable")


@dataclass
class ReplayBuffer:
    """One task's deduplicated replay records, hard-selected ids first."""

    task: int
    ids: np.ndarray
    x: np.ndarray
    y: np.ndarray
    tags: list
    hard_scores: dict
    diff_scores: dict

    def __len__(self):
        return int(self.ids.size)


@dataclass
class SelectionReport:
    task: int
    hard_ids: list
    hard_scores: list
    diff_ids: list
    diff_scores: list
    diff_min_dist: list
    delta: float
    buffer_ids: list
    buffer_tags: list

    def to_json(self):
        return {
            "task": self.task,
            "delta": self.delta,
            "hard": {"ids": self.hard_ids, "scores": self.hard_scores},
            "diff": {"ids": self.diff_ids, "scores": self.diff_scores, "min_dist": self.diff_min_dist},
            "buffer": {"ids": self.buffer_ids, "tags": self.buffer_tags},
        }


def build_buffer(task, ids, x, y, hard_pos, hard_scores, diff_pos, diff_scores):
    """Union of hard and differential picks; a record picked by both is tagged ``both``."""
    ids = np.asarray(ids)
    hard = {int(p): float(s) for p, s in zip(hard_pos, hard_scores)}
    diff = {int(p): float(s) for p, s in zip(diff_pos, diff_scores)}
    positions = [int(p) for p in hard_pos] + [int(p) for p in diff_pos if int(p) not in hard]
    tags = []
    for p in positions:
        if p in hard and p in diff:
            tags.append("both")
        elif p in hard:
            tags.append("hard")
        else:
            tags.append("diff")
    positions = np.asarray(positions, dtype=np.int64)
    return ReplayBuffer(
        task=task,
        ids=ids[positions],
        x=np.asarray(x)[positions],
        y=np.asarray(y)[positions],
        tags=tags,
        hard_scores={int(ids[p]): s for p, s in hard.items()},
        diff_scores={int(ids[p]): s for p, s in diff.items()},
    )


def consolidate(task, ids, x, y, embeddings, prototypes, r_h, r_g, delta_scale=0.8):
    """Hard + differential selection for the newest task in ``prototypes``.

    ``prototypes`` must already hold the current task's prototype as its
    last entry. ``delta_scale=None`` turns the distance floor off.
    """
    t = len(prototypes)
    hard_pos, hard_scores = select_hard(ids, embeddings, prototypes.prototypes[-1], r_h)
    delta = 0.0 if delta_scale is None else compute_delta(prototypes, delta_scale)
    diff_pos, diff_scores, diff_min = select_differential(
        ids, embeddings, prototypes.as_array(t - 1), r_g, delta
    )
    buf = build_buffer(task, ids, x, y, hard_pos, hard_scores, diff_pos, diff_scores)
    ids = np.asarray(ids)
    report = SelectionReport(
        task=task,
        hard_ids=[int(i) for i in ids[hard_pos]],
        hard_scores=[float(s) for s in hard_scores],
        diff_ids=[int(i) for i in ids[diff_pos]],
        diff_scores=[float(s) for s in diff_scores],
        diff_min_dist=[float(s) for s in diff_min],
        delta=float(delta),
        buffer_ids=[int(i) for i in buf.ids],
        buffer_tags=list(buf.tags),
    )
    return buf, report
