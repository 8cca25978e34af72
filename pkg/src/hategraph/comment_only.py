"""Comment-only scorer: a two-layer network mapping one comment's features to (0, 1).

Scores are turned into the 0-4 scale with five width-0.2 bins.  For training
against ordinal labels the score is also expressed as five soft-bin logits,
``-sharpness * (score - centre_c)**2`` with bin centres 0.1, 0.3, ..., 0.9, so
the same losses apply to all model kinds.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .common import GraphInputs, uniform_init
from .layers import sigmoid

KIND = "comment_only"
BIN_EDGES = np.array([0.2, 0.4, 0.6, 0.8])
BIN_CENTRES = np.array([0.1, 0.3, 0.5, 0.7, 0.9])


@dataclass(frozen=True)
class CommentOnlyConfig:
    input_dim: int = 64
    hidden_dim: int = 32
    bin_sharpness: float = 50.0

    def __post_init__(self) -> None:
        for name in ("input_dim", "hidden_dim"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not self.bin_sharpness > 0:
            raise ValueError("bin_sharpness must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CommentOnlyConfig":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_dim=int(d["hidden_dim"]),
            bin_sharpness=float(d.get("bin_sharpness", 50.0)),
        )


def param_shapes(cfg: CommentOnlyConfig) -> dict[str, tuple[int, ...]]:
    return {
        "hidden.W": (cfg.input_dim, cfg.hidden_dim),
        "hidden.b": (cfg.hidden_dim,),
        "out.W": (cfg.hidden_dim, 1),
        "out.b": (1,),
    }


def init_params(cfg: CommentOnlyConfig, rng: np.random.Generator, init_scale: float = 1.0):
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = uniform_init(rng, shape, shape[0], init_scale)
    return params


def _check_width(cfg: CommentOnlyConfig, features: np.ndarray) -> None:
    if features.shape[-1] != cfg.input_dim:
        raise ValueError(f"feature width {features.shape[-1]} != input_dim {cfg.input_dim}")


def comment_scores(params, cfg: CommentOnlyConfig, features: np.ndarray) -> np.ndarray:
    """Score in (0, 1) for every row of ``features``."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    _check_width(cfg, features)
    return _score(params, features)[1]


def _score(params, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # einsum keeps each row's arithmetic independent of how many rows there
    # are; BLAS matmul does not, and a node's score must not depend on which
    # other comments are present
    hid = np.tanh(np.einsum("ni,ih->nh", x, params["hidden.W"]) + params["hidden.b"])
    return hid, sigmoid(np.einsum("nh,h->n", hid, params["out.W"][:, 0]) + params["out.b"][0])


def comment_score(params, cfg: CommentOnlyConfig, feature: np.ndarray) -> float:
    return float(comment_scores(params, cfg, feature)[0])


def map_to_bins(p) -> int | np.ndarray:
    """Bins [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1] -> 0..4."""
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"score must be a finite value in [0, 1], got {p!r}")
    bins = np.searchsorted(BIN_EDGES, arr, side="right")
    return int(bins) if bins.ndim == 0 else bins


def forward(params, cfg: CommentOnlyConfig, inputs: GraphInputs, keep_cache: bool = True):
    x = inputs.features
    _check_width(cfg, x)
    hid, score = _score(params, x)
    gap = score[:, None] - BIN_CENTRES
    logits = -cfg.bin_sharpness * gap * gap
    return logits, ((x, hid, score, gap) if keep_cache else None)


def backward(params, cfg: CommentOnlyConfig, cache, dlogits):
    x, hid, score, gap = cache
    dscore = (dlogits * (-2.0 * cfg.bin_sharpness) * gap).sum(axis=1)
    du = dscore * score * (1.0 - score)
    dhid = np.outer(du, params["out.W"][:, 0]) * (1.0 - hid * hid)
    return {
        "hidden.W": x.T @ dhid,
        "hidden.b": dhid.sum(axis=0),
        "out.W": (hid.T @ du)[:, None],
        "out.b": np.array([du.sum()]),
    }

