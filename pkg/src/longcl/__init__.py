"""Long-horizon continual learning: drift-indexed parameter fusion and prototype-based replay."""

from .errors import ConfigurationError, IngestionError, LongCLError, PreconditionError, ShapeError
from .memcon import FrozenEncoder, PrototypeStore, compute_delta, compute_prototype, select_differential, select_hard
from .memman import TaskMask, compose_beta, compute_alpha, fuse_params, memman_step, select_topk_units, update_mask
from .metrics import PerfMatrix, compute_af, compute_ap, export_matrix, read_matrix
from .params import ParamVector, UnitPartition, compute_drift, make_partition
from .streams import TaskDataset, TaskStream, gen_synthetic_stream, load_jsonl_stream, permute_order
from .trainer import TrainConfig, evaluate, run_stream, train_task

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "FrozenEncoder",
    "IngestionError",
    "LongCLError",
    "ParamVector",
    "PerfMatrix",
    "PreconditionError",
    "PrototypeStore",
    "ShapeError",
    "TaskDataset",
    "TaskMask",
    "TaskStream",
    "TrainConfig",
    "UnitPartition",
    "compose_beta",
    "compute_af",
    "compute_alpha",
    "compute_ap",
    "compute_delta",
    "compute_drift",
    "compute_prototype",
    "evaluate",
    "export_matrix",
    "fuse_params",
    "gen_synthetic_stream",
    "load_jsonl_stream",
    "make_partition",
    "memman_step",
    "permute_order",
    "read_matrix",
    "run_stream",
    "select_differential",
    "select_hard",
    "select_topk_units",
    "train_task",
    "update_mask",
]
