import json
from collections import Counter, defaultdict

import numpy as np
import pytest

from hategraph.discussion import Comment, DiscussionGraph
from hategraph.encoder import EncoderSpec
from hategraph.models import Model, default_config
from hategraph.synthgen import (
    CONTENTIOUS,
    TOPICS,
    GenSpec,
    SyntheticCorpus,
    ambiguity_audit,
    generate,
    load_corpus,
    oracle_label,
    text_only_ceiling,
    write_corpus,
)


@pytest.fixture(scope="module")
def census():
    return generate(GenSpec(seed=7, num_graphs=2000))


def test_generation_is_deterministic():
    a, b = generate(GenSpec(seed=5, num_graphs=30)), generate(GenSpec(seed=5, num_graphs=30))
    assert [[(c.id, c.parent_id, c.text, c.gold_label) for c in g.comments] for g in a.graphs] == [
        [(c.id, c.parent_id, c.text, c.gold_label) for c in g.comments] for g in b.graphs
    ]
    assert a.manifest == b.manifest
    c = generate(GenSpec(seed=6, num_graphs=30))
    assert a.manifest != c.manifest


def test_no_triggers_means_benign_labels():
    corpus = generate(GenSpec(seed=1, num_graphs=50, trigger_rate=0.0))
    assert all(not e["triggers"] and not e["continuations"] for e in corpus.manifest.values())
    assert {c.gold_label for g in corpus.graphs for c in g.comments} <= {0, 1}
    report = ambiguity_audit(corpus)
    assert report.ok and report.trigger_count == 0 and report.text_only_ceiling == 0.0


def test_census(census):
    topics = Counter(e["topic"] for e in census.manifest.values())
    assert abs(topics[CONTENTIOUS] / 2000 - 0.5) <= 0.03
    seen = defaultdict(set)
    for g in census.graphs:
        entry = census.manifest[g.thread_id]
        for tid in entry["triggers"]:
            seen[g.comment(tid).text].add(entry["topic"])
            assert g.depth[tid] >= census.spec.dependence_distance
        for cid in entry["continuations"]:
            assert g.parent(cid) in entry["triggers"]
    assert seen and all(s == set(TOPICS) for s in seen.values())
    for g in census.graphs:
        depth = g.max_depth
        assert 4 <= depth <= 7  # backbone depth plus one continuation level


def test_audit_passes_on_default_corpus(census):
    report = ambiguity_audit(census)
    assert report.ok, report.violations[:3]
    assert report.trigger_count > 500
    assert 0.4 <= report.text_only_ceiling <= 0.65


def test_labels_follow_the_oracle(census):
    for g in census.graphs[:300]:
        entry = census.manifest[g.thread_id]
        for c in g.comments:
            assert c.gold_label == oracle_label(g, c.id, entry, census.spec)


def test_trigger_labels_depend_on_topic(census):
    for g in census.graphs:
        entry = census.manifest[g.thread_id]
        for tid in entry["triggers"]:
            label = g.comment(tid).gold_label
            if entry["topic"] == CONTENTIOUS:
                assert label in (3, 4)
            else:
                assert label <= 2


def test_oracle_rejects_bad_manifests(census):
    g = census.graphs[0]
    with pytest.raises(KeyError):
        oracle_label(g, "nope", census.manifest[g.thread_id])
    with pytest.raises(ValueError):
        oracle_label(g, "c0", {"topic": "topic_z", "triggers": [], "continuations": []})


def _one_topic_corpus():
    base = generate(GenSpec(seed=3, num_graphs=60))
    graphs, manifest = [], {}
    for g in base.graphs:
        entry = base.manifest[g.thread_id]
        if entry["topic"] == CONTENTIOUS:
            graphs.append(g)
            manifest[g.thread_id] = entry
    return SyntheticCorpus(graphs, manifest, base.spec)


def test_audit_flags_single_topic_texts():
    report = ambiguity_audit(_one_topic_corpus())
    assert not report.ok
    assert {v["check"] for v in report.violations} >= {"both_topics"}


def test_audit_flags_shallow_triggers():
    base = generate(GenSpec(seed=4, num_graphs=40))
    g = next(g for g in base.graphs if base.manifest[g.thread_id]["triggers"])
    entry = dict(base.manifest[g.thread_id])
    entry["triggers"] = ["c1"]
    corpus = SyntheticCorpus([g], {g.thread_id: entry}, base.spec)
    assert any(v["check"] == "distance" for v in ambiguity_audit(corpus).violations)
    with pytest.raises(ValueError):
        ambiguity_audit(SyntheticCorpus([], {}, base.spec))


def test_text_only_ceiling_examples():
    assert text_only_ceiling([], []) == 0.0
    assert text_only_ceiling(["a", "a", "b"], [1, 1, 2]) == 1.0
    assert text_only_ceiling(["a", "a", "a", "a"], [3, 4, 4, 3]) == 0.5


@pytest.mark.parametrize(
    "kw",
    [
        {"dependence_distance": 9},
        {"dependence_distance": 2},
        {"depth_range": (3, 5)},
        {"depth_range": (6, 5)},
        {"trigger_rate": 1.0},
        {"num_graphs": 0},
        {"branching_range": (0, 2)},
        {"depth_range": (4, 8), "dependence_distance": 5},
    ],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        generate(GenSpec(**kw))


def test_spec_dict_round_trip():
    spec = GenSpec(seed=2, num_graphs=10, trigger_rate=0.1)
    back = GenSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert back == spec and back.digest() == spec.digest()


def test_corpus_files_round_trip(tmp_path):
    corpus = generate(GenSpec(seed=9, num_graphs=12))
    write_corpus(corpus, tmp_path)
    back = load_corpus(tmp_path)
    assert back.spec == corpus.spec and back.manifest == corpus.manifest
    for a, b in zip(corpus.graphs, back.graphs):
        assert [(c.id, c.parent_id, c.text, c.gold_label) for c in a.comments] == [
            (c.id, c.parent_id, c.text, c.gold_label) for c in b.comments
        ]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    manifest["format_version"] = 3
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(ValueError):
        load_corpus(tmp_path)


def test_topic_is_invisible_to_a_two_layer_gat(census, each_backend):
    model = Model.initialize("gat", default_config("gat", 64), EncoderSpec(), np.random.default_rng(0))
    checked = 0
    for g in census.graphs[:80]:
        entry = census.manifest[g.thread_id]
        if not entry["triggers"]:
            continue
        other = next(t for t in TOPICS if t != entry["topic"])
        flipped = DiscussionGraph.from_comments(
            [
                Comment(c.id, c.parent_id, c.text.replace(entry["topic"], other) if c.id == g.root_id else c.text)
                for c in g.comments
            ]
        )
        a, b = model.predict_graph(g).logits, model.predict_graph(flipped).logits
        idx = [g.index_of(t) for t in entry["triggers"]]
        assert np.array_equal(a[idx], b[idx])
        assert not np.array_equal(a[g.index_of(g.root_id)], b[g.index_of(g.root_id)])
        checked += len(idx)
    assert checked > 10
