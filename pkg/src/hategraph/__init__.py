"""Node-level ordinal forecasting of hateful replies on discussion reply trees."""

from .discussion import (
    Comment,
    DiscussionGraph,
    ThreadFormatError,
    load_thread,
    parse_thread,
    snapshot_at_depth,
    tree_distance,
)
from .encoder import EncoderSpec, HashingEncoder, encode, encode_graph
from .kernels import available_backends, get_backend, use_backend
from .models import Model, load_checkpoint, save_checkpoint
from .streaming import evaluate_graphs, metrics, render_report, stream_predict
from .synthgen import GenSpec, ambiguity_audit, generate, oracle_label
from .training import TrainConfig, gradient_check, grads, loss, step, train

__version__ = "0.1.0"

__all__ = [
    "Comment",
    "DiscussionGraph",
    "EncoderSpec",
    "GenSpec",
    "HashingEncoder",
    "Model",
    "ThreadFormatError",
    "TrainConfig",
    "ambiguity_audit",
    "available_backends",
    "encode",
    "encode_graph",
    "evaluate_graphs",
    "generate",
    "get_backend",
    "gradient_check",
    "grads",
    "load_checkpoint",
    "load_thread",
    "loss",
    "metrics",
    "oracle_label",
    "parse_thread",
    "render_report",
    "save_checkpoint",
    "snapshot_at_depth",
    "step",
    "stream_predict",
    "train",
    "tree_distance",
    "use_backend",
]
