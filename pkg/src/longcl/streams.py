"""Task streams: synthetic generators, JSONL ingestion and order permutation."""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, IngestionError

FAMILIES = ("rotated-gaussians", "permuted-features", "drifting-means")


@dataclass(frozen=True, eq=False)
class TaskDataset:
    task_id: str
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    num_classes: int

    def __post_init__(self):
        if len(self.y_train) == 0 or len(self.y_test) == 0:
            raise ConfigurationError(f"task {self.task_id}: train and test splits must be nonempty")
        for y in (self.y_train, self.y_test):
            if y.min() < 0 or y.max() >= self.num_classes:
                raise ConfigurationError(f"task {self.task_id}: label outside [0, {self.num_classes})")

    @property
    def num_features(self):
        return self.x_train.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TaskDataset):
            return NotImplemented
        return (
            self.task_id == other.task_id
            and self.num_classes == other.num_classes
            and np.array_equal(self.x_train, other.x_train)
            and np.array_equal(self.y_train, other.y_train)
            and np.array_equal(self.x_test, other.x_test)
            and np.array_equal(self.y_test, other.y_test)
        )

    __hash__ = None


@dataclass(frozen=True)
class TaskStream:
    tasks: tuple
    order: tuple = ()
    seed: object = None
    spec: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.order:
            object.__setattr__(self, "order", tuple(range(len(self.tasks))))

    def __len__(self):
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    @property
    def num_features(self):
        return self.tasks[0].num_features

    @property
    def num_classes(self):
        return max(t.num_classes for t in self.tasks)


def _rotation_blocks(x, angle):
    """Rotate every consecutive coordinate pair by ``angle``; an odd last coordinate is kept."""
    out = x.copy()
    c, s = math.cos(angle), math.sin(angle)
    n_pairs = x.shape[-1] // 2
    a = x[..., 0 : 2 * n_pairs : 2]
    b = x[..., 1 : 2 * n_pairs : 2]
    out[..., 0 : 2 * n_pairs : 2] = c * a - s * b
    out[..., 1 : 2 * n_pairs : 2] = s * a + c * b
    return out


def gen_synthetic_stream(
    num_tasks,
    family="rotated-gaussians",
    n_train=500,
    n_test=200,
    seed=0,
    num_features=16,
    num_classes=4,
    class_sep=3.0,
    noise=1.0,
    max_angle=math.pi / 2,
    mean_shift=1.0,
):
    """Generate ``num_tasks`` related classification tasks over a shared label space.

    Every task draws balanced Gaussian classes around a fixed set of
    class means, then transforms them by a task-indexed amount:

    * ``rotated-gaussians``: rotation by ``t * max_angle / (M - 1)`` in each
      coordinate plane (0, 1), (2, 3), ...
    * ``permuted-features``: a seeded random feature permutation per task
      (identity for the first task).
    * ``drifting-means``: class means translated by ``t * mean_shift``
      along a fixed random unit direction.
    """
    if num_tasks < 2:
        raise ConfigurationError("a stream needs at least 2 tasks")
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown family {family!r}; choose from {FAMILIES}")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((num_classes, num_features))
    means *= class_sep / np.linalg.norm(means, axis=1, keepdims=True)
    direction = rng.standard_normal(num_features)
    direction /= np.linalg.norm(direction)

    tasks = []
    for t in range(num_tasks):
        task_rng = np.random.default_rng([seed, t])
        splits = []
        for n in (n_train, n_test):
            y = np.arange(n) % num_classes
            task_rng.shuffle(y)
            x = means[y] + noise * task_rng.standard_normal((n, num_features))
            splits.append((x, y.astype(np.int64)))
        if family == "rotated-gaussians":
            angle = t * max_angle / (num_tasks - 1)
            splits = [(_rotation_blocks(x, angle), y) for x, y in splits]
        elif family == "permuted-features":
            perm = np.arange(num_features) if t == 0 else task_rng.permutation(num_features)
            splits = [(x[:, perm], y) for x, y in splits]
        else:
            splits = [(x + t * mean_shift * direction, y) for x, y in splits]
        (xtr, ytr), (xte, yte) = splits
        tasks.append(TaskDataset(f"task_{t + 1}", xtr, ytr, xte, yte, num_classes))

    spec = {
        "kind": "synthetic",
        "family": family,
        "num_tasks": num_tasks,
        "n_train": n_train,
        "n_test": n_test,
        "seed": seed,
        "num_features": num_features,
        "num_classes": num_classes,
        "class_sep": class_sep,
        "noise": noise,
        "max_angle": max_angle,
        "mean_shift": mean_shift,
    }
    return TaskStream(tuple(tasks), seed=seed, spec=spec)


def _read_jsonl(path, num_features):
    path = Path(path)
    if not path.is_file():
        raise IngestionError("file not found", path)
    xs, ys = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"malformed JSON ({exc.msg})", path, lineno) from None
            if not isinstance(rec, dict) or "x" not in rec or "y" not in rec:
                raise IngestionError('record must be an object with "x" and "y"', path, lineno)
            x, y = rec["x"], rec["y"]
            if not isinstance(x, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
                raise IngestionError('"x" must be a list of numbers', path, lineno)
            if not isinstance(y, int) or isinstance(y, bool):
                raise IngestionError('"y" must be an integer', path, lineno)
            if num_features[0] is None:
                num_features[0] = len(x)
            elif len(x) != num_features[0]:
                raise IngestionError(f"expected {num_features[0]} features, got {len(x)}", path, lineno)
            if not all(math.isfinite(v) for v in x):
                raise IngestionError("non-finite feature value", path, lineno)
            xs.append(x)
            ys.append((y, lineno))
    if not xs:
        raise IngestionError("empty dataset", path)
    return np.asarray(xs, dtype=np.float64), ys


def load_jsonl_stream(manifest_path):
    """Read a manifest of per-task JSONL splits.

    The manifest is either ``{task_id: {"train": ..., "test": ...}, ...}``
    or ``{"num_classes": C, "tasks": {...}}``. Paths are relative to the
    manifest. Without ``num_classes`` the class count is the largest label
    seen plus one.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise IngestionError("manifest not found", manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestionError(f"malformed manifest ({exc.msg})", manifest_path) from None
    num_classes = None
    if isinstance(manifest, dict) and "tasks" in manifest:
        num_classes = manifest.get("num_classes")
        manifest = manifest["tasks"]
    if not isinstance(manifest, dict) or len(manifest) < 2:
        raise IngestionError("manifest must map at least 2 task ids to splits", manifest_path)

    base = manifest_path.parent
    num_features = [None]
    raw = []
    for task_id, entry in manifest.items():
        if not isinstance(entry, dict) or "train" not in entry or "test" not in entry:
            raise IngestionError(f"task {task_id!r} needs 'train' and 'test' paths", manifest_path)
        splits = []
        for key in ("train", "test"):
            path = base / entry[key]
            x, ys = _read_jsonl(path, num_features)
            splits.append((path, x, ys))
        raw.append((str(task_id), splits))

    if num_classes is None:
        num_classes = 1 + max(y for _, splits in raw for _, _, ys in splits for y, _ in ys)
    tasks = []
    for task_id, splits in raw:
        arrays = []
        for path, x, ys in splits:
            for y, lineno in ys:
                if not 0 <= y < num_classes:
                    raise IngestionError(f"label {y} outside [0, {num_classes})", path, lineno)
            arrays.extend([x, np.asarray([y for y, _ in ys], dtype=np.int64)])
        xtr, ytr, xte, yte = arrays
        train_rows = {row.tobytes() for row in xtr}
        for row, (_, lineno) in zip(xte, splits[1][2]):
            if row.tobytes() in train_rows:
                raise IngestionError("test record duplicates a training record", splits[1][0], lineno)
        tasks.append(TaskDataset(task_id, xtr, ytr, xte, yte, int(num_classes)))
    spec = {"kind": "manifest", "path": str(manifest_path)}
    return TaskStream(tuple(tasks), spec=spec)


def permute_order(stream, permutation=None, seed=None):
    """Reorder tasks by ``permutation`` (new position -> old position) or a seeded shuffle."""
    m = len(stream)
    if permutation is None:
        if seed is None:
            raise ConfigurationError("give a permutation or a seed")
        permutation = np.random.default_rng(seed).permutation(m)
    perm = [int(p) for p in permutation]
    if len(perm) != m or sorted(perm) != list(range(m)):
        raise ConfigurationError(f"{perm} is not a permutation of {m} tasks")
    tasks = tuple(stream.tasks[p] for p in perm)
    order = tuple(stream.order[p] for p in perm)
    return replace(stream, tasks=tasks, order=order)


def inverse_permutation(permutation):
    inv = [0] * len(permutation)
    for new, old in enumerate(permutation):
        inv[old] = new
    return inv
