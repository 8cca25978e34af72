import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import chain, star
from hategraph.comment_only import (
    CommentOnlyConfig,
    comment_score,
    comment_scores,
    init_params as comment_init,
    map_to_bins,
)
from hategraph.common import GraphInputs
from hategraph.discussion import Comment, DiscussionGraph
from hategraph.encoder import EncoderSpec, encode_graph
from hategraph.gat import GatConfig, attention_weights, gat_forward, init_params as gat_init, param_shapes
from hategraph.synthgen import random_thread


def _gat(seed=0, **kw):
    cfg = GatConfig(input_dim=16, **kw)
    rng = np.random.default_rng(seed)
    params = {k: rng.normal(0, 0.5, s) for k, s in param_shapes(cfg).items()}
    return cfg, params


def _features(g, seed=1):
    return np.random.default_rng(seed).normal(size=(len(g), 16))


# -- gat -----------------------------------------------------------------------


def test_gat_single_node_attends_to_itself(each_backend):
    g = DiscussionGraph.from_comments([Comment("a", None, "x")])
    cfg, params = _gat()
    for w in attention_weights(params, cfg, GraphInputs.from_graph(g, _features(g))):
        assert np.array_equal(w, np.ones((cfg.num_heads, 1, 1)))


def test_gat_star_leaf_ignores_siblings(each_backend):
    g = star(4)
    cfg, params = _gat(num_layers=1)
    x = _features(g)
    y = x.copy()
    y[2] += 3.0  # sibling of leaf l0 (row 1)
    a = gat_forward(params, cfg, x, g).logits
    b = gat_forward(params, cfg, y, g).logits
    assert np.array_equal(a[1], b[1])
    assert not np.array_equal(a[0], b[0])


def test_gat_chain_receptive_field(each_backend):
    g = chain(7)
    cfg, params = _gat(num_layers=2)
    x = _features(g)
    y = x.copy()
    y[0] += 3.0
    a = gat_forward(params, cfg, x, g).logits
    b = gat_forward(params, cfg, y, g).logits
    assert not np.array_equal(a[2], b[2])
    assert np.array_equal(a[3:], b[3:])


def test_gat_attention_is_masked(each_backend):
    g = random_thread(np.random.default_rng(3), 18)
    cfg, params = _gat()
    inputs = GraphInputs.from_graph(g, _features(g))
    allowed = np.eye(18, dtype=bool)
    for c in g.comments:
        if c.parent_id is not None:
            i, j = g.index_of(c.id), g.index_of(c.parent_id)
            allowed[i, j] = allowed[j, i] = True
    for w in attention_weights(params, cfg, inputs):
        assert not w[:, ~allowed].any()
        assert np.allclose(w.sum(axis=-1), 1.0, atol=1e-9)


def test_gat_locality_is_bitwise(each_backend):
    rng = np.random.default_rng(8)
    cfg, params = _gat(num_layers=2)
    for _ in range(10):
        g = random_thread(rng, 25)
        x = _features(g, int(rng.integers(1 << 30)))
        target = int(rng.integers(25))
        dist = GraphInputs.from_graph(g, x).distances()[target]
        y = x.copy()
        far = dist > 2
        y[far] += rng.normal(size=(int(far.sum()), 16))
        a = gat_forward(params, cfg, x, g).logits[target]
        b = gat_forward(params, cfg, y, g).logits[target]
        assert np.array_equal(a, b)


def test_gat_config_validation():
    with pytest.raises(ValueError):
        GatConfig(model_dim=10, num_heads=4)
    cfg = GatConfig(input_dim=3)
    assert GatConfig.from_dict(cfg.to_dict()) == cfg
    params = gat_init(cfg, np.random.default_rng(0))
    assert {k: v.shape for k, v in params.items()} == param_shapes(cfg)


def test_gat_checks_finiteness_and_width():
    g = chain(3)
    cfg, params = _gat()
    with pytest.raises(ValueError):
        gat_forward(params, cfg, np.zeros((3, 5)), g)
    params["layer0.a_src"][0, 0] = np.nan
    with pytest.raises(FloatingPointError, match="layer0.a_src"):
        gat_forward(params, cfg, np.zeros((3, 16)), g)


# -- comment only ----------------------------------------------------------------


def test_zero_weights_score_one_half():
    cfg = CommentOnlyConfig(input_dim=8)
    params = {k: np.zeros_like(v) for k, v in comment_init(cfg, np.random.default_rng(0)).items()}
    assert comment_score(params, cfg, np.ones(8)) == 0.5


def test_scores_match_scalar_recomputation():
    cfg = CommentOnlyConfig(input_dim=6, hidden_dim=4)
    rng = np.random.default_rng(1)
    params = {k: rng.normal(size=v.shape) for k, v in comment_init(cfg, rng).items()}
    xs = rng.normal(size=(20, 6))
    got = comment_scores(params, cfg, xs)
    for x, s in zip(xs, got):
        hidden = [
            math.tanh(sum(x[i] * params["hidden.W"][i, j] for i in range(6)) + params["hidden.b"][j]) for j in range(4)
        ]
        u = sum(hidden[j] * params["out.W"][j, 0] for j in range(4)) + params["out.b"][0]
        assert abs(s - 1 / (1 + math.exp(-u))) <= 1e-12
        assert 0 < s < 1


def test_identical_features_identical_scores():
    cfg = CommentOnlyConfig(input_dim=4)
    params = comment_init(cfg, np.random.default_rng(2))
    x = np.random.default_rng(3).normal(size=4)
    assert comment_scores(params, cfg, np.stack([x, x, x])).tolist() == [comment_score(params, cfg, x)] * 3


def test_comment_score_ignores_everything_but_own_text():
    enc = EncoderSpec(dim=16)
    cfg = CommentOnlyConfig(input_dim=16)
    params = comment_init(cfg, np.random.default_rng(4))
    g = random_thread(np.random.default_rng(5), 30)
    full = comment_scores(params, cfg, encode_graph(g, enc))
    for k in (0, 7, 29):
        alone = DiscussionGraph.from_comments([Comment("x", None, g.comments[k].text)])
        assert comment_scores(params, cfg, encode_graph(alone, enc))[0] == full[k]


@pytest.mark.parametrize("p, label", [(0.15, 0), (1.0, 4), (0.40, 2), (0.0, 0), (0.2, 1), (0.8, 4), (0.7999, 3)])
def test_bin_examples(p, label):
    assert map_to_bins(p) == label


@pytest.mark.parametrize("p", [-0.01, 1.01, float("nan"), float("inf")])
def test_bin_rejects_out_of_range(p):
    with pytest.raises(ValueError):
        map_to_bins(p)


@given(st.floats(0, 1), st.floats(0, 1))
def test_bins_are_monotone(a, b):
    lo, hi = sorted((a, b))
    assert map_to_bins(lo) <= map_to_bins(hi)


def test_bin_edges():
    assert [map_to_bins(0.2 * k) for k in range(5)] == [0, 1, 2, 3, 4]
    assert {map_to_bins(p) for p in np.linspace(0, 1, 101)} == {0, 1, 2, 3, 4}
