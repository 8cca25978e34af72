"""Graph transformer over discussion trees.

Every node attends to every other node.  Tree structure enters in two places:
a learned scalar per (head, clamped tree distance) added to the attention
logits, and learned vectors per clamped in/out degree added to the projected
input features.  Blocks are pre-norm (LayerNorm -> attention -> residual,
LayerNorm -> GELU feed-forward -> residual); a final LayerNorm and a linear
readout yield five ordinal logits per node.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .common import GraphInputs, OrdinalPrediction, uniform_init
from .discussion import NUM_LABELS
from .layers import check_finite, gelu, gelu_backward, layernorm, layernorm_backward

KIND = "graphormer"


@dataclass(frozen=True)
class GraphormerConfig:
    input_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    model_dim: int = 32
    ffn_dim: int = 64
    max_distance: int = 8
    max_degree: int = 16

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
    def from_dict(cls, d: dict) -> "GraphormerConfig":
        return cls(**{k: int(v) for k, v in d.items()})


def param_shapes(cfg: GraphormerConfig) -> dict[str, tuple[int, ...]]:
    d, f = cfg.model_dim, cfg.ffn_dim
    shapes: dict[str, tuple[int, ...]] = {
        "input.W": (cfg.input_dim, d),
        "input.b": (d,),
        "centrality.in": (cfg.max_degree + 1, d),
        "centrality.out": (cfg.max_degree + 1, d),
        "spatial.bias": (cfg.num_heads, cfg.max_distance + 1),
    }
    for l in range(cfg.num_layers):
        p = f"layer{l}."
        shapes.update(
            {
                p + "ln1.g": (d,),
                p + "ln1.b": (d,),
                p + "attn.Wq": (d, d),
                p + "attn.bq": (d,),
                p + "attn.Wk": (d, d),
                p + "attn.Wv": (d, d),
                p + "attn.bv": (d,),
                p + "attn.Wo": (d, d),
                p + "attn.bo": (d,),
                p + "ln2.g": (d,),
                p + "ln2.b": (d,),
                p + "ffn.W1": (d, f),
                p + "ffn.b1": (f,),
                p + "ffn.W2": (f, d),
                p + "ffn.b2": (d,),
            }
        )
    shapes["final_ln.g"] = (d,)
    shapes["final_ln.b"] = (d,)
    shapes["readout.W"] = (d, NUM_LABELS)
    shapes["readout.b"] = (NUM_LABELS,)
    return shapes


def init_params(cfg: GraphormerConfig, rng: np.random.Generator, init_scale: float = 1.0):
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[1]
        if leaf.startswith("W"):
            params[name] = uniform_init(rng, shape, shape[0], init_scale)
        elif name.startswith("centrality"):
            params[name] = uniform_init(rng, shape, cfg.model_dim, init_scale)
        elif leaf == "g":
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return params


def _forward(params, cfg: GraphormerConfig, features, dist, in_deg, out_deg, keep):
    n = features.shape[0]
    H, dh, d = cfg.num_heads, cfg.head_dim, cfg.model_dim
    scale = 1.0 / np.sqrt(dh)
    din = np.minimum(in_deg, cfg.max_degree)
    dout = np.minimum(out_deg, cfg.max_degree)
    bias = params["spatial.bias"]

    h = (
        features @ params["input.W"]
        + params["input.b"]
        + params["centrality.in"][din]
        + params["centrality.out"][dout]
    )
    layers = []
    for l in range(cfg.num_layers):
        p = f"layer{l}."
        a, ln1 = layernorm(h, params[p + "ln1.g"], params[p + "ln1.b"])
        qh = (a @ params[p + "attn.Wq"] + params[p + "attn.bq"]).reshape(n, H, dh).transpose(1, 0, 2)
        kh = (a @ params[p + "attn.Wk"]).reshape(n, H, dh).transpose(1, 0, 2)
        vh = (a @ params[p + "attn.Wv"] + params[p + "attn.bv"]).reshape(n, H, dh).transpose(1, 0, 2)
        attn = kernels.biased_softmax((qh @ kh.transpose(0, 2, 1)) * scale, bias, dist)
        o = (attn @ vh).transpose(1, 0, 2).reshape(n, d)
        h = h + o @ params[p + "attn.Wo"] + params[p + "attn.bo"]
        c, ln2 = layernorm(h, params[p + "ln2.g"], params[p + "ln2.b"])
        act, gc = gelu(c @ params[p + "ffn.W1"] + params[p + "ffn.b1"])
        h = h + act @ params[p + "ffn.W2"] + params[p + "ffn.b2"]
        if keep:
            layers.append((a, ln1, qh, kh, vh, attn, o, c, ln2, act, gc))
    hf, lnf = layernorm(h, params["final_ln.g"], params["final_ln.b"])
    logits = hf @ params["readout.W"] + params["readout.b"]
    cache = (features, dist, din, dout, layers, hf, lnf) if keep else None
    return logits, cache


def _backward(params, cfg: GraphormerConfig, cache, dlogits):
    features, dist, din, dout, layers, hf, lnf = cache
    n = features.shape[0]
    H, dh, d = cfg.num_heads, cfg.head_dim, cfg.model_dim
    scale = 1.0 / np.sqrt(dh)
    grads = {}
    grads["readout.W"] = hf.T @ dlogits
    grads["readout.b"] = dlogits.sum(axis=0)
    dh_, grads["final_ln.g"], grads["final_ln.b"] = layernorm_backward(
        dlogits @ params["readout.W"].T, lnf
    )
    dbias = np.zeros_like(params["spatial.bias"])

    for l in reversed(range(cfg.num_layers)):
        p = f"layer{l}."
        a, ln1, qh, kh, vh, attn, o, c, ln2, act, gc = layers[l]
        # feed-forward block
        grads[p + "ffn.W2"] = act.T @ dh_
        grads[p + "ffn.b2"] = dh_.sum(axis=0)
        du = gelu_backward(dh_ @ params[p + "ffn.W2"].T, gc)
        grads[p + "ffn.W1"] = c.T @ du
        grads[p + "ffn.b1"] = du.sum(axis=0)
        dc = du @ params[p + "ffn.W1"].T
        dx, grads[p + "ln2.g"], grads[p + "ln2.b"] = layernorm_backward(dc, ln2)
        dh_ = dh_ + dx
        # attention block
        grads[p + "attn.Wo"] = o.T @ dh_
        grads[p + "attn.bo"] = dh_.sum(axis=0)
        do = (dh_ @ params[p + "attn.Wo"].T).reshape(n, H, dh).transpose(1, 0, 2)
        dattn = do @ vh.transpose(0, 2, 1)
        dvh = attn.transpose(0, 2, 1) @ do
        ds, db = kernels.biased_softmax_backward(attn, dattn, dist, dbias.shape[1])
        dbias += db
        ds *= scale
        dqh = ds @ kh
        dkh = ds.transpose(0, 2, 1) @ qh
        dq = dqh.transpose(1, 0, 2).reshape(n, d)
        dk = dkh.transpose(1, 0, 2).reshape(n, d)
        dv = dvh.transpose(1, 0, 2).reshape(n, d)
        grads[p + "attn.Wq"] = a.T @ dq
        grads[p + "attn.bq"] = dq.sum(axis=0)
        grads[p + "attn.Wk"] = a.T @ dk
        grads[p + "attn.Wv"] = a.T @ dv
        grads[p + "attn.bv"] = dv.sum(axis=0)
        da = (
            dq @ params[p + "attn.Wq"].T
            + dk @ params[p + "attn.Wk"].T
            + dv @ params[p + "attn.Wv"].T
        )
        dx, grads[p + "ln1.g"], grads[p + "ln1.b"] = layernorm_backward(da, ln1)
        dh_ = dh_ + dx

    grads["spatial.bias"] = dbias
    grads["input.W"] = features.T @ dh_
    grads["input.b"] = dh_.sum(axis=0)
    cin = np.zeros_like(params["centrality.in"])
    cout = np.zeros_like(params["centrality.out"])
    np.add.at(cin, din, dh_)
    np.add.at(cout, dout, dh_)
    grads["centrality.in"] = cin
    grads["centrality.out"] = cout
    return grads


def _check_inputs(cfg: GraphormerConfig, features, dist, in_deg, out_deg) -> None:
    n = features.shape[0]
    if features.ndim != 2 or features.shape[1] != cfg.input_dim:
        raise ValueError(f"features have shape {features.shape}, expected (n, {cfg.input_dim})")
    if dist.shape != (n, n):
        raise ValueError(f"distance matrix has shape {dist.shape}, expected ({n}, {n})")
    if n and (dist.min() < 0 or dist.max() > cfg.max_distance):
        raise ValueError(f"distances must be clamped to [0, {cfg.max_distance}]")
    if in_deg.shape != (n,) or out_deg.shape != (n,):
        raise ValueError("degree arrays must have one entry per node")


def forward(params, cfg: GraphormerConfig, inputs: GraphInputs, keep_cache: bool = True):
    """Logits ``(n, 5)`` and a backward cache for one graph."""
    dist = np.minimum(inputs.distances(), cfg.max_distance)
    _check_inputs(cfg, inputs.features, dist, inputs.in_degree, inputs.out_degree)
    return _forward(
        params, cfg, inputs.features, dist, inputs.in_degree, inputs.out_degree, keep_cache
    )


def backward(params, cfg: GraphormerConfig, cache, dlogits):
    return _backward(params, cfg, cache, dlogits)


def graphormer_forward(params, cfg: GraphormerConfig, features, distances, degrees):
    """Ordinal prediction for every node.

    ``distances`` must come from :func:`~hategraph.common.build_distance_matrix`
    with ``cfg.max_distance``; ``degrees`` holds one ``(in, out)`` pair per node.
    """
    check_finite(params)
    features = np.asarray(features, dtype=np.float64)
    dist = np.asarray(distances, dtype=np.int64)
    degs = np.asarray(degrees, dtype=np.int64).reshape(-1, 2)
    in_deg, out_deg = degs[:, 0], degs[:, 1]
    _check_inputs(cfg, features, dist, in_deg, out_deg)
    logits, _ = _forward(params, cfg, features, dist, in_deg, out_deg, keep=False)
    return OrdinalPrediction.from_logits(logits)


def attention_weights(params, cfg: GraphormerConfig, inputs: GraphInputs) -> list[np.ndarray]:
    """Per layer, the ``(heads, n, n)`` attention matrices."""
    _, cache = forward(params, cfg, inputs)
    return [layer[5] for layer in cache[4]]
