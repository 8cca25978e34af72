"""Synthetic discussion corpora with planted long-range context dependence.

Every generated thread opens with a post carrying one topic token,
``topic_c`` (contentious) or ``topic_b`` (benign).  Some comments deep in the
tree are *triggers*: fixed sentences whose label depends on that topic, which
sits at least ``dependence_distance`` hops away.  Each trigger gets one to
three replies drawn from a shared pool of *continuation* sentences.  Under a
contentious topic those replies are hateful (label 2) and the trigger is rated
3 or 4 by how many of them follow it; under a benign topic the same sentences
are read as in-group banter and every trigger and continuation keeps a fixed
low label (0 or 1) tied to its sentence.

The neighbourhood of a trigger within ``dependence_distance - 1`` hops is drawn
the same way under both topics, so neither the trigger's text nor anything a
model with a smaller receptive field can see tells the two topics apart.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .discussion import Comment, DiscussionGraph, dump_thread, load_thread

TOPICS = ("topic_b", "topic_c")
CONTENTIOUS = "topic_c"
ROOT_LABEL = 0
HATEFUL_LABEL = 2

FILLER = (
    "today", "really", "people", "thread", "video", "song", "game", "news",
    "week", "photo", "story", "idea", "look", "fun", "friend", "time",
    "link", "update", "weekend", "show", "music", "city", "team", "season",
)
BENIGN = (
    ("thanks for sharing this", 0),
    ("i agree with that point", 0),
    ("nice find honestly", 0),
    ("this made my day", 0),
    ("good point well said", 0),
    ("i learned something new", 0),
    ("not sure i buy that", 1),
    ("that seems a bit much", 1),
    ("kind of annoying tbh", 1),
    ("meh not impressed at all", 1),
    ("this argument is getting old", 1),
    ("calm down everyone please", 1),
)
TRIGGERS = (
    ("so what do we all really think about them", 0),
    ("someone should finally say what everyone is thinking", 1),
    ("you know exactly what they are like", 1),
    ("we all know where this is going", 0),
    ("time to say it out loud", 1),
    ("funny how it is always the same crowd", 0),
)
CONTINUATIONS = (
    ("f*ck every last one of them", 1),
    ("they are all tr*sh and everyone knows it", 1),
    ("get those cl*wns out of here", 0),
    ("disgusting pests the lot of them", 1),
    ("b*stards never change", 0),
    ("send them all back where they came from", 1),
)


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    num_graphs: int = 2000
    depth_range: tuple[int, int] = (4, 6)
    branching_range: tuple[int, int] = (1, 3)
    trigger_rate: float = 0.25
    dependence_distance: int = 3
    max_replies: int = 3
    benign_templates: tuple = BENIGN
    trigger_templates: tuple = TRIGGERS
    continuation_templates: tuple = CONTINUATIONS
    filler: tuple = FILLER

    def validate(self) -> None:
        dmin, dmax = self.depth_range
        bmin, bmax = self.branching_range
        if self.num_graphs < 1:
            raise ValueError("num_graphs must be positive")
        if dmin < 4 or dmax < dmin:
            raise ValueError(f"depth_range {self.depth_range} must satisfy 4 <= min <= max")
        if bmin < 1 or bmax < bmin:
            raise ValueError(f"branching_range {self.branching_range} must satisfy 1 <= min <= max")
        if not 0.0 <= self.trigger_rate < 1.0:
            raise ValueError("trigger_rate must lie in [0, 1)")
        if self.dependence_distance < 3:
            raise ValueError("dependence_distance must be >= 3")
        if self.dependence_distance > dmax:
            raise ValueError(
                f"unsatisfiable: dependence_distance {self.dependence_distance} exceeds "
                f"maximum depth {dmax}"
            )
        if self.dependence_distance > dmin:
            raise ValueError(
                f"dependence_distance {self.dependence_distance} exceeds minimum depth {dmin}; "
                "some graphs could not host a trigger"
            )
        if self.max_replies < 1:
            raise ValueError("max_replies must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("benign_templates", "trigger_templates", "continuation_templates"):
            d[key] = [list(t) for t in d[key]]
        d["filler"] = list(self.filler)
        d["depth_range"] = list(self.depth_range)
        d["branching_range"] = list(self.branching_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenSpec":
        d = dict(d)
        for key in ("benign_templates", "trigger_templates", "continuation_templates"):
            if key in d:
                d[key] = tuple((str(t), int(lbl)) for t, lbl in d[key])
        for key in ("depth_range", "branching_range"):
            if key in d:
                d[key] = tuple(int(v) for v in d[key])
        if "filler" in d:
            d["filler"] = tuple(d["filler"])
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass
class SyntheticCorpus:
    graphs: list[DiscussionGraph]
    manifest: dict  # graph id -> {"topic", "triggers", "continuations"}
    spec: GenSpec = field(default_factory=GenSpec)

    def __len__(self) -> int:
        return len(self.graphs)

    def split(self, n_train: int) -> tuple["SyntheticCorpus", "SyntheticCorpus"]:
        a, b = self.graphs[:n_train], self.graphs[n_train:]
        return (
            SyntheticCorpus(a, {g.thread_id: self.manifest[g.thread_id] for g in a}, self.spec),
            SyntheticCorpus(b, {g.thread_id: self.manifest[g.thread_id] for g in b}, self.spec),
        )

    def trigger_ids(self, g: DiscussionGraph) -> list[str]:
        return list(self.manifest[g.thread_id]["triggers"])


# -- generation --------------------------------------------------------------


class _Node:
    __slots__ = ("text", "role", "children")

    def __init__(self, text: str, role: str) -> None:
        self.text = text
        self.role = role
        self.children: list[_Node] = []


def _benign_text(rng: np.random.Generator, spec: GenSpec) -> str:
    template = spec.benign_templates[rng.integers(len(spec.benign_templates))][0]
    extra = rng.choice(len(spec.filler), size=rng.integers(0, 3), replace=False)
    return " ".join([template, *(spec.filler[i] for i in extra)])


def _root_text(rng: np.random.Generator, spec: GenSpec, topic: str) -> str:
    words = [spec.filler[i] for i in rng.choice(len(spec.filler), size=6, replace=False)]
    words.insert(int(rng.integers(0, 7)), topic)
    return " ".join(words)


def _build_tree(rng: np.random.Generator, spec: GenSpec, topic: str) -> _Node:
    dmin, dmax = spec.depth_range
    bmin, bmax = spec.branching_range
    target = int(rng.integers(dmin, dmax + 1))
    root = _Node(_root_text(rng, spec, topic), "root")

    def grow(node: _Node, depth: int, spine: bool) -> None:
        if depth < target:
            if spine:
                width = int(rng.integers(bmin, bmax + 1))
                spine_at = int(rng.integers(width))
                for k in range(width):
                    child = _Node(_benign_text(rng, spec), "benign")
                    node.children.append(child)
                    grow(child, depth + 1, k == spine_at)
            elif rng.random() < 0.5:
                child = _Node(_benign_text(rng, spec), "benign")
                node.children.append(child)
                grow(child, depth + 1, False)
        # a trigger hangs off nodes whose children land at depth >= D
        if spec.dependence_distance - 1 <= depth < target and rng.random() < spec.trigger_rate:
            text = spec.trigger_templates[rng.integers(len(spec.trigger_templates))][0]
            trigger = _Node(text, "trigger")
            for _ in range(int(rng.integers(1, spec.max_replies + 1))):
                reply = spec.continuation_templates[rng.integers(len(spec.continuation_templates))][0]
                trigger.children.append(_Node(reply, "continuation"))
            node.children.insert(int(rng.integers(len(node.children) + 1)), trigger)

    grow(root, 0, True)
    return root


def generate(spec: GenSpec) -> SyntheticCorpus:
    """Generate a labeled corpus; identical specs give identical corpora."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    width = len(str(spec.num_graphs - 1))
    graphs, manifest = [], {}
    for gi in range(spec.num_graphs):
        gid = f"synth-{gi:0{width}d}"
        topic = TOPICS[int(rng.integers(2))]
        root = _build_tree(rng, spec, topic)

        rows: list[tuple[str, str | None, _Node]] = []
        stack: list[tuple[_Node, str | None]] = [(root, None)]
        while stack:
            node, parent = stack.pop()
            cid = f"c{len(rows)}"
            rows.append((cid, parent, node))
            stack.extend((child, cid) for child in reversed(node.children))

        entry = {
            "topic": topic,
            "triggers": [cid for cid, _, node in rows if node.role == "trigger"],
            "continuations": [cid for cid, _, node in rows if node.role == "continuation"],
        }
        unlabeled = DiscussionGraph.from_comments(
            [Comment(cid, parent, node.text) for cid, parent, node in rows], thread_id=gid
        )
        labels = {cid: oracle_label(unlabeled, cid, entry, spec) for cid, _, _ in rows}
        graphs.append(
            DiscussionGraph.from_comments(
                [Comment(cid, parent, node.text, labels[cid]) for cid, parent, node in rows],
                thread_id=gid,
                community="synthetic",
            )
        )
        manifest[gid] = entry
    return SyntheticCorpus(graphs, manifest, spec)


def random_thread(
    rng: np.random.Generator, n: int, labeled: bool = True, thread_id: str = "random"
) -> DiscussionGraph:
    """Uniform random recursive tree of ``n`` comments with filler texts.

    Node ``k`` replies to a uniformly chosen earlier node, so ids ``c0``..
    ``c{n-1}`` are listed parent-first.  Labels, when requested, are uniform
    over 0..4 and carry no meaning.
    """
    if n < 1:
        raise ValueError("a thread needs at least one comment")
    comments = []
    for k in range(n):
        parent = None if k == 0 else f"c{int(rng.integers(k))}"
        words = rng.choice(len(FILLER), size=int(rng.integers(2, 6)), replace=False)
        label = int(rng.integers(5)) if labeled else None
        comments.append(Comment(f"c{k}", parent, " ".join(FILLER[i] for i in words), label))
    return DiscussionGraph.from_comments(comments, thread_id=thread_id)


# -- labeling rule -----------------------------------------------------------


def _lookup(table, text: str, prefix: bool = False) -> int | None:
    for template, label in table:
        if text == template or (prefix and text.startswith(template + " ")):
            return label
    return None


def oracle_label(g: DiscussionGraph, node: str, entry: dict, spec: GenSpec | None = None) -> int:
    """Gold label of ``node`` from the generator's rule, given its manifest entry."""
    spec = spec or GenSpec()
    if node not in g:
        raise KeyError(f"unknown comment id {node!r}")
    roles = set(entry["triggers"]) | set(entry["continuations"])
    if not roles <= set(g.ids) or entry["topic"] not in TOPICS:
        raise ValueError(f"manifest does not match graph {g.thread_id!r}")
    contentious = entry["topic"] == CONTENTIOUS
    text = g.comment(node).text

    if node in entry["triggers"]:
        if contentious:
            hateful = 0
            stack = list(g.children[node])
            while stack:
                u = stack.pop()
                hateful += u in entry["continuations"]
                stack.extend(g.children[u])
            return 3 if hateful < 2 else 4
        label = _lookup(spec.trigger_templates, text)
    elif node in entry["continuations"]:
        if contentious:
            return HATEFUL_LABEL
        label = _lookup(spec.continuation_templates, text)
    elif node == g.root_id:
        return ROOT_LABEL
    else:
        label = _lookup(spec.benign_templates, text, prefix=True)
    if label is None:
        raise ValueError(f"comment {node!r} in {g.thread_id!r} matches no template of its role")
    return label


# -- audit -------------------------------------------------------------------


@dataclass
class AuditReport:
    violations: list[dict]
    trigger_count: int
    text_only_ceiling: float  # best accuracy any function of trigger text can reach
    max_class_share: dict[str, float]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return asdict(self)


def text_only_ceiling(texts: list[str], labels: list[int]) -> float:
    """Accuracy of the per-text majority label (an upper bound for text-only predictors)."""
    if not texts:
        return 0.0
    by_text: dict[str, Counter] = defaultdict(Counter)
    for t, y in zip(texts, labels):
        by_text[t][y] += 1
    return sum(c.most_common(1)[0][1] for c in by_text.values()) / len(texts)


def ambiguity_audit(corpus: SyntheticCorpus, max_share: float = 0.6) -> AuditReport:
    if not corpus.graphs:
        raise ValueError("empty corpus")
    topics: dict[str, set] = defaultdict(set)
    labels: dict[str, Counter] = defaultdict(Counter)
    violations = []
    texts, golds = [], []
    for g in corpus.graphs:
        entry = corpus.manifest[g.thread_id]
        for tid in entry["triggers"]:
            c = g.comment(tid)
            topics[c.text].add(entry["topic"])
            labels[c.text][c.gold_label] += 1
            texts.append(c.text)
            golds.append(c.gold_label)
            if g.depth[tid] < corpus.spec.dependence_distance:
                violations.append(
                    {"check": "distance", "graph": g.thread_id, "trigger": tid,
                     "detail": f"trigger at distance {g.depth[tid]} from the post"}
                )
    shares = {}
    for text in sorted(topics):
        if len(topics[text]) < 2:
            violations.append(
                {"check": "both_topics", "text": text,
                 "detail": f"only seen under {sorted(topics[text])}"}
            )
        counts = labels[text]
        share = max(counts.values()) / sum(counts.values())
        shares[text] = share
        if len(counts) < 2 or share > max_share:
            violations.append(
                {"check": "label_balance", "text": text,
                 "detail": f"label counts {dict(sorted(counts.items()))}, max share {share:.3f}"}
            )
    return AuditReport(violations, len(texts), text_only_ceiling(texts, golds), shares)


# -- corpus files ------------------------------------------------------------


def write_corpus(corpus: SyntheticCorpus, directory) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for g in corpus.graphs:
        (out / f"{g.thread_id}.json").write_text(dump_thread(g) + "\n", encoding="utf-8")
    manifest = {
        "format_version": 1,
        "spec": corpus.spec.to_dict(),
        "spec_hash": corpus.spec.digest(),
        "graphs": {g.thread_id: corpus.manifest[g.thread_id] for g in corpus.graphs},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def load_corpus(directory) -> SyntheticCorpus:
    root = Path(directory)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format_version") != 1:
        raise ValueError("unsupported manifest format_version")
    spec = GenSpec.from_dict(manifest["spec"])
    graphs = [load_thread(root / f"{gid}.json") for gid in manifest["graphs"]]
    return SyntheticCorpus(graphs, dict(manifest["graphs"]), spec)
