import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, bfs_distances, chain, star
from hategraph.discussion import (
    MAX_NODES,
    Comment,
    DiscussionGraph,
    ThreadFormatError,
    degrees,
    dump_thread,
    load_thread,
    parse_thread,
    relabel,
    snapshot_at_depth,
    tree_distance,
)
from hategraph.synthgen import random_thread


def _thread(*rows, **extra):
    return json.dumps(
        {"id": "t", **extra, "comments": [dict(zip(("id", "parent_id", "text", "label"), r)) for r in rows]}
    )


@st.composite
def trees(draw, max_nodes=12):
    n = draw(st.integers(1, max_nodes))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_thread(np.random.default_rng(seed), n)


def test_table1_fixture_is_a_chain(table):
    g = table(1)
    assert len(g) == 7
    assert [g.depth[i] for i in g.ids] == list(range(7))
    assert g.community == "r/gay"
    assert all(c.gold_label is None for c in g.comments)


def test_table2_fixture_is_a_star(table):
    g = table(2)
    assert len(g.children[g.root_id]) == 4
    assert sorted(g.depth[i] for i in g.ids) == [0, 1, 1, 1, 1]
    assert degrees(g)[g.root_id] == (0, 4)


def test_all_fixtures_parse():
    for k in range(1, 6):
        g = load_thread(FIXTURES / f"table{k}.json")
        assert g.thread_id == f"table{k}"


def test_child_order_follows_file_order():
    g = parse_thread(_thread(("a", None, "x"), ("c", "a", "y"), ("b", "a", "z")))
    assert g.children["a"] == ("c", "b")
    assert g.preorder() == ["a", "c", "b"]


@pytest.mark.parametrize(
    "payload, fragment, offender",
    [
        (_thread(("a", "b", "x"), ("b", "a", "y")), "no root", None),
        (_thread(("a", None, "x"), ("b", None, "y")), "multiple roots", "b"),
        (_thread(("a", None, "x"), ("b", "zz", "y")), "dangling", "b"),
        (_thread(("a", None, "x"), ("b", "c", "y"), ("c", "b", "z")), "cycle", "b"),
        (_thread(("a", None, "x"), ("a", "a", "y")), "duplicate", "a"),
        (_thread(("a", None, "x"), ("b", "a", "y", 5)), "label", "b"),
        (_thread(("a", None, "x"), ("b", "b", "y")), "itself", "b"),
    ],
)
def test_invalid_threads_name_the_offender(payload, fragment, offender):
    with pytest.raises(ThreadFormatError) as err:
        parse_thread(payload)
    assert fragment in str(err.value)
    assert err.value.comment_id == offender


@pytest.mark.parametrize("payload", ["{", "[]", '{"comments": 3}', '{"comments": [1]}', b"\xff\xfe"])
def test_malformed_files_are_rejected(payload):
    with pytest.raises(ThreadFormatError):
        parse_thread(payload)


def test_boolean_label_is_rejected():
    with pytest.raises(ThreadFormatError):
        parse_thread(_thread(("a", None, "x", True)))


def test_size_limit():
    rows = [Comment("c0", None, "")] + [Comment(f"c{i}", f"c{i - 1}", "") for i in range(1, MAX_NODES + 1)]
    with pytest.raises(ThreadFormatError, match="at most"):
        DiscussionGraph.from_comments(rows)


def test_round_trip_preserves_everything(table):
    g = random_thread(np.random.default_rng(1), 25)
    again = parse_thread(dump_thread(g))
    assert again.same_structure(g)
    assert [c.text for c in again.comments] == [c.text for c in g.comments]
    assert again.gold_labels() == g.gold_labels()
    t3 = table(3)
    assert parse_thread(dump_thread(t3)).comments == t3.comments


def test_unicode_survives_round_trip():
    g = parse_thread(_thread(("a", None, "naïve café ✓"), ("b", "a", "日本語")))
    assert parse_thread(dump_thread(g).encode("utf-8")).comment("b").text == "日本語"


def test_tree_distance_small_cases():
    g = chain(4)
    assert tree_distance(g, "n0", "n2") == 2
    assert tree_distance(g, "n3", "n3") == 0
    with pytest.raises(KeyError):
        tree_distance(g, "n0", "missing")


def test_tree_distance_matches_bfs_on_200_pairs():
    rng = np.random.default_rng(42)
    g = random_thread(rng, 50)
    oracle = bfs_distances(g)
    ids = g.ids
    for _ in range(200):
        a, b = rng.integers(50, size=2)
        assert tree_distance(g, ids[a], ids[b]) == oracle[a, b]


@settings(max_examples=40, deadline=None)
@given(trees())
def test_tree_distance_is_a_metric(g):
    ids = g.ids
    d = {(u, v): tree_distance(g, u, v) for u in ids for v in ids}
    for u in ids:
        for v in ids:
            assert d[u, v] == d[v, u]
            assert (d[u, v] == 0) == (u == v)
            for w in ids:
                assert d[u, w] <= d[u, v] + d[v, w]


def test_snapshot_examples(table):
    t1 = table(1)
    assert snapshot_at_depth(t1, 1).graph.ids == ["c0", "c1"]
    assert snapshot_at_depth(t1, t1.max_depth).graph is t1
    assert snapshot_at_depth(table(2), 0).graph.ids == ["c0"]
    with pytest.raises(ValueError):
        snapshot_at_depth(t1, -1)


@settings(max_examples=40, deadline=None)
@given(trees(20), st.integers(0, 8), st.integers(0, 8))
def test_snapshots_compose(g, a, b):
    nested = snapshot_at_depth(snapshot_at_depth(g, a).graph, b).graph
    direct = snapshot_at_depth(g, min(a, b)).graph
    assert nested.same_structure(direct)
    assert nested.comments == direct.comments


@settings(max_examples=40, deadline=None)
@given(trees(20), st.integers(0, 8))
def test_snapshot_visibility(g, d):
    snap = snapshot_at_depth(g, d)
    assert snap.horizon == d
    assert set(snap.graph.ids) == {i for i in g.ids if g.depth[i] <= d}
    assert snap.graph.ids == [i for i in g.ids if g.depth[i] <= d]


def test_degrees():
    g = chain(5)
    deg = degrees(g)
    assert deg["n0"] == (0, 1)
    assert deg["n2"] == (1, 1)
    assert deg["n4"] == (1, 0)
    s = star(3)
    assert all(degrees(s)[f"l{i}"] == (1, 0) for i in range(3))


def test_relabel_keeps_structure():
    g = random_thread(np.random.default_rng(3), 15)
    perm = np.random.default_rng(4).permutation(15)
    h = relabel(g, perm)
    assert h.ids == [g.ids[i] for i in perm]
    assert all(h.parent(i) == g.parent(i) for i in g.ids)
    assert all(h.depth[i] == g.depth[i] for i in g.ids)
