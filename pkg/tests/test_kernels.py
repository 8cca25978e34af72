import numpy as np
import pytest

from conftest import bfs_distances
from hategraph import kernels
from hategraph import _fallback
from hategraph.common import GraphInputs, build_distance_matrix
from hategraph.synthgen import random_thread


def test_backend_registry():
    assert "python" in kernels.available_backends()
    with kernels.backend("python"):
        assert kernels.get_backend() == "python"
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_distances_match_bfs(each_backend):
    rng = np.random.default_rng(0)
    for n in (1, 2, 30, 57):
        g = random_thread(rng, n)
        assert np.array_equal(kernels.tree_distances(g.parent_indices()), bfs_distances(g))


def test_clamped_distance_matrix(each_backend, table):
    t1 = table(1)
    d = build_distance_matrix(t1, 8)
    assert d[0, 6] == 6
    assert np.array_equal(d, d.T)
    assert not np.diag(d).any()
    one = build_distance_matrix(t1, 1)
    assert np.array_equal(one, 1 - np.eye(7, dtype=one.dtype))
    g = random_thread(np.random.default_rng(5), 30)
    assert np.array_equal(build_distance_matrix(g, 3), np.minimum(bfs_distances(g), 3))


def _case(n, heads=3, seed=0):
    rng = np.random.default_rng(seed)
    g = random_thread(rng, n)
    dist = np.minimum(GraphInputs.from_graph(g, np.zeros((n, 1))).distances(), 4)
    return rng, g, dist


def test_biased_softmax_rows_sum_to_one(each_backend):
    rng, g, dist = _case(12)
    probs = kernels.biased_softmax(rng.normal(size=(3, 12, 12)) * 10, rng.normal(size=(3, 5)), dist)
    assert np.allclose(probs.sum(axis=-1), 1.0, atol=1e-12)
    assert (probs >= 0).all()


def test_biased_softmax_backward_matches_differences(each_backend):
    rng, g, dist = _case(6)
    scores = rng.normal(size=(2, 6, 6))
    bias = rng.normal(size=(2, 5))
    weight = rng.normal(size=(2, 6, 6))

    def f(s, b):
        return float((kernels.biased_softmax(s, b, dist) * weight).sum())

    probs = kernels.biased_softmax(scores, bias, dist)
    dscores, dbias = kernels.biased_softmax_backward(probs, weight, dist, 5)
    h = 1e-6
    for idx in [(0, 1, 2), (1, 5, 0), (1, 3, 3)]:
        e = np.zeros_like(scores)
        e[idx] = h
        assert abs((f(scores + e, bias) - f(scores - e, bias)) / (2 * h) - dscores[idx]) < 1e-7
    for idx in np.ndindex(bias.shape):
        e = np.zeros_like(bias)
        e[idx] = h
        assert abs((f(scores, bias + e) - f(scores, bias - e)) / (2 * h) - dbias[idx]) < 1e-7


def test_neighbor_attention_masks_and_normalises(each_backend):
    rng, g, _ = _case(15)
    inputs = GraphInputs.from_graph(g, np.zeros((15, 1)))
    indptr, indices = inputs.neighbors()
    z = rng.normal(size=(2, 15, 4))
    s_src, s_dst = rng.normal(size=(2, 15)), rng.normal(size=(2, 15))
    out, cache = kernels.neighbor_attention(z, s_src, s_dst, indptr, indices, 0.2)
    w = kernels.neighbor_attention_weights(cache)
    assert np.allclose(w.sum(axis=-1), 1.0, atol=1e-12)
    allowed = np.zeros((15, 15), dtype=bool)
    for i in range(15):
        allowed[i, indices[indptr[i] : indptr[i + 1]]] = True
    assert not w[:, ~allowed].any()
    assert np.allclose(out, w @ z)


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_backends_agree():
    from hategraph import _kernels

    rng, g, dist = _case(25, seed=3)
    parents = g.parent_indices()
    assert np.array_equal(_kernels.tree_distances(parents), _fallback.tree_distances(parents))
    scores, bias = rng.normal(size=(4, 25, 25)), rng.normal(size=(4, 5))
    p1 = _kernels.biased_softmax(scores, bias, dist)
    p2 = _fallback.biased_softmax(scores, bias, dist)
    assert np.allclose(p1, p2, rtol=0, atol=1e-14)
    dp = rng.normal(size=p1.shape)
    for a, b in zip(_kernels.biased_softmax_backward(p1, dp, dist, 5), _fallback.biased_softmax_backward(p2, dp, dist, 5)):
        assert np.allclose(a, b, rtol=0, atol=1e-12)

    indptr, indices = GraphInputs.from_graph(g, np.zeros((25, 1))).neighbors()
    z = rng.normal(size=(4, 25, 3))
    s_src, s_dst = rng.normal(size=(4, 25)), rng.normal(size=(4, 25))
    o1, c1 = _kernels.neighbor_attention(z, s_src, s_dst, indptr, indices, 0.2)
    o2, c2 = _fallback.neighbor_attention(z, s_src, s_dst, indptr, indices, 0.2)
    assert np.allclose(o1, o2, rtol=0, atol=1e-13)
    dout = rng.normal(size=o1.shape)
    for a, b in zip(_kernels.neighbor_attention_backward(dout, c1), _fallback.neighbor_attention_backward(dout, c2)):
        assert np.allclose(a, b, rtol=0, atol=1e-12)
