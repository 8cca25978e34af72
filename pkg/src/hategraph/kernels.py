"""Backend selection for the hot kernels.

The compiled ``_kernels`` extension is used when it imports; otherwise the
NumPy implementations in ``_fallback`` are used.  Setting ``HATEGRAPH_NO_EXT=1``
skips the extension.  :func:`use_backend` switches at runtime (tests and the
benchmark run both).
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from types import ModuleType

from . import _fallback

_native: ModuleType | None = None
if os.environ.get("HATEGRAPH_NO_EXT") != "1":
    try:
        from . import _kernels as _native
    except ImportError:  # extension not built
        _native = None

BACKENDS: dict[str, ModuleType] = {"python": _fallback}
if _native is not None:
    BACKENDS["cython"] = _native

_active: ModuleType = _native if _native is not None else _fallback


def available_backends() -> list[str]:
    return list(BACKENDS)


def get_backend() -> str:
    return "python" if _active is _fallback else "cython"


def use_backend(name: str) -> None:
    global _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    _active = BACKENDS[name]


@contextmanager
def backend(name: str):
    previous = get_backend()
    use_backend(name)
    try:
        yield
    finally:
        use_backend(previous)


def tree_distances(parents):
    return _active.tree_distances(parents)


def biased_softmax(scores, bias, dist):
    return _active.biased_softmax(scores, bias, dist)


def biased_softmax_backward(probs, dprobs, dist, num_bias):
    return _active.biased_softmax_backward(probs, dprobs, dist, num_bias)


def neighbor_attention(z, s_src, s_dst, indptr, indices, slope):
    return _active.neighbor_attention(z, s_src, s_dst, indptr, indices, slope)


def neighbor_attention_backward(dout, cache):
    # caches carry their producer's layout; route by cache shape
    if len(cache) == 4:
        return _fallback.neighbor_attention_backward(dout, cache)
    return _native.neighbor_attention_backward(dout, cache)


def neighbor_attention_weights(cache):
    if len(cache) == 4:
        return _fallback.neighbor_attention_weights(cache)
    return _native.neighbor_attention_weights(cache)
