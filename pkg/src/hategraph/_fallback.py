"""Pure NumPy versions of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` module.  Attention
caches are backend specific and must be passed back to the backward function of
the backend that produced them.
"""

from __future__ import annotations

import numpy as np


def tree_distances(parents: np.ndarray) -> np.ndarray:
    """All-pairs hop distances of a rooted tree given as a parent-index array.

    Walks nodes in breadth-first order: for a child ``c`` of ``p``, every node
    outside the subtree of ``c`` is one hop farther from ``c`` than from ``p``
    and every node inside it is one hop closer.
    """
    parents = np.asarray(parents, dtype=np.int64)
    n = parents.shape[0]
    kids: list[list[int]] = [[] for _ in range(n)]
    root = -1
    for c in range(n):
        p = parents[c]
        if p < 0:
            root = c
        else:
            kids[p].append(c)
    order = [root]
    for u in order:
        order.extend(kids[u])

    # ancestor-or-self indicator, anc[v, a] is True when a lies on root..v
    anc = np.zeros((n, n), dtype=bool)
    dist = np.zeros((n, n), dtype=np.int64)
    anc[root, root] = True
    depth = np.zeros(n, dtype=np.int64)
    for u in order[1:]:
        p = parents[u]
        anc[u] = anc[p]
        anc[u, u] = True
        depth[u] = depth[p] + 1
    dist[root] = depth
    for u in order[1:]:
        p = parents[u]
        inside = anc[:, u]
        dist[u] = np.where(inside, dist[p] - 1, dist[p] + 1)
    return dist


def biased_softmax(scores: np.ndarray, bias: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Row softmax of ``scores[h] + bias[h, dist]`` for every head ``h``."""
    logits = scores + bias[:, dist]
    logits -= logits.max(axis=-1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=-1, keepdims=True)
    return logits


def biased_softmax_backward(
    probs: np.ndarray, dprobs: np.ndarray, dist: np.ndarray, num_bias: int
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`biased_softmax` w.r.t. scores and the bias table."""
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    flat = dist.ravel()
    dbias = np.stack(
        [np.bincount(flat, weights=ds.ravel(), minlength=num_bias) for ds in dscores]
    )
    return dscores, dbias


def _dense_mask(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    n = indptr.shape[0] - 1
    mask = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    mask[rows, indices] = True
    return mask


def neighbor_attention(
    z: np.ndarray,
    s_src: np.ndarray,
    s_dst: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    slope: float,
):
    """Leaky-rectified additive attention restricted to a neighbour list.

    ``z`` is ``(heads, n, head_dim)``; ``s_src``/``s_dst`` are ``(heads, n)``
    per-node score halves.  Returns the aggregated ``(heads, n, head_dim)``
    values and a cache for :func:`neighbor_attention_backward`.
    """
    mask = _dense_mask(indptr, indices)
    raw = s_src[:, :, None] + s_dst[:, None, :]
    act = np.where(raw > 0, raw, slope * raw)
    act = np.where(mask, act, -np.inf)
    act -= act.max(axis=-1, keepdims=True)
    np.exp(act, out=act)
    act /= act.sum(axis=-1, keepdims=True)
    out = act @ z
    return out, (act, raw, z, slope)


def neighbor_attention_backward(dout: np.ndarray, cache):
    attn, raw, z, slope = cache
    dattn = dout @ z.transpose(0, 2, 1)
    dz = attn.transpose(0, 2, 1) @ dout
    dact = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    draw = np.where(raw > 0, dact, slope * dact)
    return dz, draw.sum(axis=-1), draw.sum(axis=-2)


def neighbor_attention_weights(cache) -> np.ndarray:
    return cache[0].copy()
