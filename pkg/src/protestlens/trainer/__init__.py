"""Training loop, evaluation, metrics and the checkpoint format."""

from .checkpoint import checkpoint_listing, load_checkpoint, read_header, save_checkpoint
from .data import ImageDataset, TextDataset
from .loop import TrainConfig, lr_at, train, write_history
from .metrics import EvalReport, binary_metrics, evaluate, report_from_predictions

__all__ = [
    "checkpoint_listing", "load_checkpoint", "read_header", "save_checkpoint", "ImageDataset",
    "TextDataset", "TrainConfig", "lr_at", "train", "write_history", "EvalReport", "binary_metrics",
    "evaluate", "report_from_predictions",
]
