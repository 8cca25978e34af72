"""Graph attention restricted to direct reply neighbours.

Each node attends over itself, its parent and its children.  With ``L`` layers
a node's output depends only on nodes within ``L`` hops.  Residual layers and
the five-logit readout mirror the graph transformer so the two differ only in
attention reach.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .common import GraphInputs, OrdinalPrediction, uniform_init
from .discussion import DiscussionGraph, NUM_LABELS
from .layers import check_finite, elu, elu_backward

KIND = "gat"
NEGATIVE_SLOPE = 0.2


@dataclass(frozen=True)
class GatConfig:
    input_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    model_dim: int = 32

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.model_dim % self.num_heads:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}"
            )

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GatConfig":
        return cls(**{k: int(v) for k, v in d.items()})


def param_shapes(cfg: GatConfig) -> dict[str, tuple[int, ...]]:
    d, H, dh = cfg.model_dim, cfg.num_heads, cfg.head_dim
    shapes: dict[str, tuple[int, ...]] = {"input.W": (cfg.input_dim, d), "input.b": (d,)}
    for l in range(cfg.num_layers):
        shapes[f"layer{l}.W"] = (d, d)
        shapes[f"layer{l}.a_src"] = (H, dh)
        shapes[f"layer{l}.a_dst"] = (H, dh)
    shapes["readout.W"] = (d, NUM_LABELS)
    shapes["readout.b"] = (NUM_LABELS,)
    return shapes


def init_params(cfg: GatConfig, rng: np.random.Generator, init_scale: float = 1.0):
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif ".a_" in name:
            params[name] = uniform_init(rng, shape, shape[1], init_scale)
        else:
            params[name] = uniform_init(rng, shape, shape[0], init_scale)
    return params


def _check_inputs(cfg: GatConfig, inputs: GraphInputs) -> None:
    if inputs.features.shape[1] != cfg.input_dim:
        raise ValueError(
            f"features have width {inputs.features.shape[1]}, expected {cfg.input_dim}"
        )


def forward(params, cfg: GatConfig, inputs: GraphInputs, keep_cache: bool = True):
    _check_inputs(cfg, inputs)
    x = inputs.features
    n = x.shape[0]
    H, dh, d = cfg.num_heads, cfg.head_dim, cfg.model_dim
    indptr, indices = inputs.neighbors()

    h = x @ params["input.W"] + params["input.b"]
    layers = []
    for l in range(cfg.num_layers):
        p = f"layer{l}."
        z = (h @ params[p + "W"]).reshape(n, H, dh).transpose(1, 0, 2)
        s_src = np.einsum("hnd,hd->hn", z, params[p + "a_src"])
        s_dst = np.einsum("hnd,hd->hn", z, params[p + "a_dst"])
        out, acache = kernels.neighbor_attention(z, s_src, s_dst, indptr, indices, NEGATIVE_SLOPE)
        act, ecache = elu(out.transpose(1, 0, 2).reshape(n, d))
        layers.append((h, z, acache, ecache))
        h = h + act
    logits = h @ params["readout.W"] + params["readout.b"]
    return logits, ((x, layers, h) if keep_cache else None)


def backward(params, cfg: GatConfig, cache, dlogits):
    x, layers, h = cache
    n = x.shape[0]
    H, dh, d = cfg.num_heads, cfg.head_dim, cfg.model_dim
    grads = {"readout.W": h.T @ dlogits, "readout.b": dlogits.sum(axis=0)}
    dh_ = dlogits @ params["readout.W"].T
    for l in reversed(range(cfg.num_layers)):
        p = f"layer{l}."
        h_in, z, acache, ecache = layers[l]
        dout = elu_backward(dh_, ecache).reshape(n, H, dh).transpose(1, 0, 2)
        dz, ds_src, ds_dst = kernels.neighbor_attention_backward(dout, acache)
        a_src, a_dst = params[p + "a_src"], params[p + "a_dst"]
        grads[p + "a_src"] = np.einsum("hn,hnd->hd", ds_src, z)
        grads[p + "a_dst"] = np.einsum("hn,hnd->hd", ds_dst, z)
        dz = dz + ds_src[:, :, None] * a_src[:, None, :] + ds_dst[:, :, None] * a_dst[:, None, :]
        dzf = dz.transpose(1, 0, 2).reshape(n, d)
        grads[p + "W"] = h_in.T @ dzf
        dh_ = dh_ + dzf @ params[p + "W"].T
    grads["input.W"] = x.T @ dh_
    grads["input.b"] = dh_.sum(axis=0)
    return grads


def gat_forward(params, cfg: GatConfig, features, g: DiscussionGraph) -> OrdinalPrediction:
    check_finite(params)
    logits, _ = forward(params, cfg, GraphInputs.from_graph(g, features), keep_cache=False)
    return OrdinalPrediction.from_logits(logits)


def attention_weights(params, cfg: GatConfig, inputs: GraphInputs) -> list[np.ndarray]:
    """Per layer, dense ``(heads, n, n)`` attention matrices (zero off the mask)."""
    _, cache = forward(params, cfg, inputs)
    return [kernels.neighbor_attention_weights(layer[2]) for layer in cache[1]]
