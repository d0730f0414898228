"""Task-core memory management: drift top-K indexing, cumulative masks and adaptive fusion."""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import ConfigurationError, PreconditionError, ShapeError
from .params import ParamVector, compute_drift


@dataclass(frozen=True, eq=False)
class TaskMask:
    bits: np.ndarray
    task_counter: int = 0

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True).ravel()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def empty(cls, n_units):
        return cls(np.zeros(n_units, dtype=bool), 0)

    def __len__(self):
        return self.bits.size

    def __eq__(self, other):
        if not isinstance(other, TaskMask):
            return NotImplemented
        return self.task_counter == other.task_counter and np.array_equal(self.bits, other.bits)

    __hash__ = None

    @property
    def popcount(self):
        return int(self.bits.sum())

    def to_bitstring(self):
        return "".join("1" if b else "0" for b in self.bits)


@dataclass(frozen=True)
class FusionPlan:
    alpha: float
    lambda_floor: float
    beta: np.ndarray


@dataclass(frozen=True)
class MemManConfig:
    k_fraction: float = 0.10
    lambda_floor: float = 0.30
    fixed_alpha: Optional[float] = None


class MemManStep(NamedTuple):
    params: ParamVector
    mask: TaskMask
    alpha: Optional[float]
    selected: np.ndarray


def select_topk_units(drift, k_fraction):
    """Indices of the ``ceil(k_fraction * N)`` largest drifts, ties to the lower index."""
    drift = np.asarray(drift, dtype=np.float64)
    if drift.size == 0:
        raise ConfigurationError("drift list is empty")
    if not 0 < k_fraction <= 1:
        raise ConfigurationError(f"k_fraction must be in (0, 1], got {k_fraction}")
    k = math.ceil(k_fraction * drift.size)
    return kernels.topk(drift, k, True)


def update_mask(prev, selected):
    selected = np.asarray(selected, dtype=np.int64)
    n = len(prev)
    if selected.size and (selected.min() < 0 or selected.max() >= n):
        raise ShapeError(f"unit index out of range [0, {n})")
    bits = prev.bits.copy()
    bits[selected] = True
    return TaskMask(bits, prev.task_counter + 1)


def compute_alpha(prototypes, t, lambda_floor):
    """Novelty of prototype ``t`` against prototypes ``1..t-1``, clamped to ``[lambda_floor, 1]``.

    ``t`` is 1-based. The ratio compares the current prototype's summed
    distance to all earlier ones with the summed pairwise distance among
    the earlier ones. An empty (t = 2) or zero denominator counts as
    maximal novelty (1).
    """
    if t < 2:
        raise PreconditionError("alpha is defined from the second task on")
    protos = prototypes.as_array(t) if hasattr(prototypes, "as_array") else np.asarray(prototypes)[:t]
    if protos.shape[0] < t:
        raise PreconditionError(f"need {t} prototypes, store holds {protos.shape[0]}")
    raw = 1.0
    if t > 2:
        hist = protos[: t - 1]
        num = float(kernels.pairwise_dist(protos[t - 1 : t], hist).sum())
        pair = kernels.pairwise_dist(hist, hist)
        den = float(pair[np.triu_indices(t - 1, k=1)].sum())
        if den > 0.0:
            raw = num / den
    return min(max(raw, lambda_floor), 1.0)


def compose_beta(alpha, mask, lambda_floor=0.0):
    if not 0.0 <= alpha <= 1.0:
        raise PreconditionError(f"alpha must be in [0, 1], got {alpha}")
    beta = np.where(mask.bits, alpha, 1.0 - alpha)
    return FusionPlan(float(alpha), lambda_floor, beta)


def fuse_params(prev, curr, plan, part):
    """Coordinatewise ``beta * curr + (1 - beta) * prev``; each unit's beta covers all its scalars."""
    prev.check_combinable(curr)
    if part.size != len(prev):
        raise ShapeError(f"partition covers {part.size} values, vectors have {len(prev)}")
    beta = np.asarray(plan.beta, dtype=np.float64)
    if beta.size != part.n_units:
        raise ShapeError(f"beta has {beta.size} entries for {part.n_units} units")
    return prev.with_values(kernels.fuse(prev.values, curr.values, beta, part.starts, part.stops))


def memman_step(prev_model, tuned_model, partition, mask, prototypes, t, config):
    """One task transition.

    At ``t == 1`` the tuned parameters pass through unchanged and the mask is
    seeded from drift against ``prev_model`` (the pre-stream initialisation).
    Later tasks run drift -> top-K -> mask OR -> alpha -> beta -> fusion.
    """
    if t < 1:
        raise PreconditionError("task index is 1-based")
    drift = compute_drift(prev_model, tuned_model, partition)
    selected = select_topk_units(drift, config.k_fraction)
    new_mask = update_mask(mask, selected)
    if t == 1:
        return MemManStep(tuned_model, new_mask, None, selected)
    if config.fixed_alpha is not None:
        alpha = float(config.fixed_alpha)
    else:
        alpha = compute_alpha(prototypes, t, config.lambda_floor)
    plan = compose_beta(alpha, new_mask, config.lambda_floor)
    fused = fuse_params(prev_model, tuned_model, plan, partition)
    return MemManStep(fused, new_mask, alpha, selected)
