"""Forward/backward pairs for the dense building blocks shared by the models."""

from __future__ import annotations

import numpy as np

LN_EPS = 1e-5
_GELU_C = np.sqrt(2.0 / np.pi)


def layernorm(x: np.ndarray, gain: np.ndarray, offset: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * gain + offset, (xhat, inv, gain)


def layernorm_backward(dy: np.ndarray, cache):
    xhat, inv, gain = cache
    dgain = (dy * xhat).sum(axis=0)
    doffset = dy.sum(axis=0)
    dxhat = dy * gain
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgain, doffset


def gelu(x: np.ndarray):
    """Tanh-approximated GELU."""
    u = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(dy: np.ndarray, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def elu(x: np.ndarray):
    neg = np.expm1(np.minimum(x, 0.0))
    return np.where(x > 0, x, neg), (x, neg)


def elu_backward(dy: np.ndarray, cache):
    x, neg = cache
    return np.where(x > 0, dy, dy * (neg + 1.0))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def check_finite(params: dict[str, np.ndarray], what: str = "parameter") -> None:
    for name, arr in params.items():
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite {what} detected in {name!r}")
