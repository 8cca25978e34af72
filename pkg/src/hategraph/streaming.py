"""Depth-wise streaming prediction, evaluation metrics and table reports.

Graph models are run on successively deeper truncations of a thread, starting
from the post plus its direct replies, so a prediction made at horizon ``d``
never sees comments deeper than ``d``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .comment_only import KIND as COMMENT_ONLY
from .discussion import NUM_LABELS, DiscussionGraph, snapshot_at_depth, thread_from_dict, thread_to_dict
from .encoder import EncoderSpec
from .models import Model

ELLIPSIS = "[...]"


class EncoderMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TrajectoryEntry:
    horizon: int
    label: int
    probabilities: tuple[float, ...]


@dataclass
class NodeTrajectory:
    node_id: str
    depth: int
    entries: list[TrajectoryEntry] = field(default_factory=list)

    @property
    def final(self) -> TrajectoryEntry:
        return self.entries[-1]

    @property
    def first(self) -> TrajectoryEntry:
        return self.entries[0]

    def at(self, horizon: int) -> TrajectoryEntry | None:
        for e in self.entries:
            if e.horizon == horizon:
                return e
        return None

    def labels(self) -> list[int]:
        return [e.label for e in self.entries]


Trajectories = dict[str, NodeTrajectory]


def horizons(g: DiscussionGraph) -> range:
    """Horizons the protocol visits: 1 .. max depth (a lone post gets horizon 1)."""
    return range(1, max(1, g.max_depth) + 1)


def stream_predict(model: Model, g: DiscussionGraph, encoder: EncoderSpec | None = None) -> Trajectories:
    if encoder is not None and encoder != model.encoder:
        raise EncoderMismatchError(
            f"model was trained with {model.encoder}, evaluation requested {encoder}"
        )
    out = {c.id: NodeTrajectory(c.id, g.depth[c.id]) for c in g.comments}
    hs = horizons(g)

    if model.kind == COMMENT_ONLY:
        # one score per comment from its own text, repeated at every horizon
        pred = model.predict_graph(g)
        for i, c in enumerate(g.comments):
            label, probs = int(pred.labels[i]), tuple(pred.probabilities[i].tolist())
            out[c.id].entries.extend(
                TrajectoryEntry(d, label, probs) for d in hs if d >= g.depth[c.id]
            )
        return out

    for d in hs:
        snap = snapshot_at_depth(g, d).graph
        pred = model.predict_graph(snap)
        for i, c in enumerate(snap.comments):
            out[c.id].entries.append(
                TrajectoryEntry(d, int(pred.labels[i]), tuple(pred.probabilities[i].tolist()))
            )
    return out


# -- metrics -----------------------------------------------------------------


@dataclass
class EvalMetrics:
    accuracy: float
    mae: float
    confusion: np.ndarray  # rows gold, columns predicted
    support: np.ndarray
    predicted_counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mae": self.mae,
            "total": self.total,
            "confusion": self.confusion.tolist(),
            "support": self.support.tolist(),
            "predicted_counts": self.predicted_counts.tolist(),
        }


def score_pairs(gold: Sequence[int], predicted: Sequence[int]) -> EvalMetrics:
    gold = np.asarray(gold, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if gold.shape != predicted.shape:
        raise ValueError("gold and predicted label counts differ")
    if gold.size == 0:
        raise ValueError("nothing to score")
    for arr in (gold, predicted):
        if arr.min() < 0 or arr.max() >= NUM_LABELS:
            raise ValueError("labels must lie in 0..4")
    confusion = np.zeros((NUM_LABELS, NUM_LABELS), dtype=np.int64)
    np.add.at(confusion, (gold, predicted), 1)
    return EvalMetrics(
        accuracy=float(np.trace(confusion) / gold.size),
        mae=float(np.mean(np.abs(gold - predicted))),
        confusion=confusion,
        support=confusion.sum(axis=1),
        predicted_counts=confusion.sum(axis=0),
    )


def select(trajectories: Trajectories, at: str | int = "final") -> dict[str, int]:
    """Node id -> label at ``at``: ``"final"``, ``"appearance"`` or a horizon."""
    out = {}
    for nid, traj in trajectories.items():
        if at == "final":
            out[nid] = traj.final.label
        elif at == "appearance":
            out[nid] = traj.first.label
        else:
            entry = traj.at(int(at))
            if entry is not None:
                out[nid] = entry.label
    return out


def metrics(
    trajectories: Trajectories,
    gold: Mapping[str, int],
    at: str | int = "final",
    node_ids: Iterable[str] | None = None,
) -> EvalMetrics:
    chosen = select(trajectories, at)
    ids = list(chosen) if node_ids is None else [i for i in node_ids if i in chosen]
    missing = [i for i in ids if gold.get(i) is None]
    if missing:
        raise ValueError(f"missing gold labels for {missing[:5]}")
    return score_pairs([gold[i] for i in ids], [chosen[i] for i in ids])


def _predict_one(args) -> Trajectories:
    model, thread = args
    return stream_predict(model, thread_from_dict(thread))


def stream_corpus(model: Model, graphs: Sequence[DiscussionGraph], workers: int = 0) -> list[Trajectories]:
    """Trajectories for every graph, in input order.

    ``workers > 1`` spreads graphs over processes; results are gathered in
    input order so the output does not depend on scheduling.
    """
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            jobs = [(model, thread_to_dict(g)) for g in graphs]
            return list(pool.map(_predict_one, jobs, chunksize=8))
    return [stream_predict(model, g) for g in graphs]


def evaluate_graphs(
    model: Model,
    graphs: Sequence[DiscussionGraph],
    focus: Mapping[str, Sequence[str]] | None = None,
    workers: int = 0,
) -> dict:
    """Final, appearance and per-horizon metrics over labeled graphs.

    ``focus`` maps graph ids to node ids scored separately under ``"focus"``
    (trigger nodes of a synthetic corpus, say).
    """
    graphs = [g for g in graphs if g.is_fully_labeled()]
    if not graphs:
        raise ValueError("no fully labeled graphs to evaluate")
    trajs = stream_corpus(model, graphs, workers)
    pairs: dict[str | int, tuple[list[int], list[int]]] = {}

    def add(key, gold, pred):
        bucket = pairs.setdefault(key, ([], []))
        bucket[0].append(gold)
        bucket[1].append(pred)

    for g, tr in zip(graphs, trajs):
        gold = g.gold_labels()
        wanted = set(focus.get(g.thread_id, ())) if focus else set()
        for nid, traj in tr.items():
            add("final", gold[nid], traj.final.label)
            add("appearance", gold[nid], traj.first.label)
            for e in traj.entries:
                add(e.horizon, gold[nid], e.label)
            if nid in wanted:
                add("focus", gold[nid], traj.final.label)

    out = {
        "format_version": 1,
        "model_kind": model.kind,
        "graphs": len(graphs),
        "final": score_pairs(*pairs["final"]).to_dict(),
        "appearance": score_pairs(*pairs["appearance"]).to_dict(),
        "per_horizon": {
            str(k): score_pairs(*v).to_dict() for k, v in sorted((k, v) for k, v in pairs.items() if isinstance(k, int))
        },
    }
    if "focus" in pairs:
        out["focus"] = score_pairs(*pairs["focus"]).to_dict()
    return out


# -- reports -----------------------------------------------------------------


def _letters(k: int) -> str:
    s = ""
    k += 1
    while k:
        k, r = divmod(k - 1, 26)
        s = chr(ord("a") + r) + s
    return s


def depth_labels(g: DiscussionGraph) -> list[tuple[str, str]]:
    """``(node id, label)`` in pre-order; levels holding several comments get letters."""
    order = g.preorder()
    per_depth: dict[int, int] = {}
    for nid in order:
        per_depth[g.depth[nid]] = per_depth.get(g.depth[nid], 0) + 1
    seen: dict[int, int] = {}
    out = []
    for nid in order:
        d = g.depth[nid]
        if per_depth[d] > 1:
            out.append((nid, f"{d}{_letters(seen.get(d, 0))}"))
            seen[d] = seen.get(d, 0) + 1
        else:
            out.append((nid, str(d)))
    return out


def _truncate(text: str, width: int) -> str:
    text = " ".join(text.split())
    if len(text) <= width:
        return text
    return text[:width].rstrip() + " " + ELLIPSIS


def report_rows(
    g: DiscussionGraph,
    models: Mapping[str, Trajectories],
    width: int = 80,
    at: str | int = "final",
) -> tuple[list[str], list[list]]:
    header = ["Depth", "Text", *models]
    chosen = {}
    for name, trajs in models.items():
        if set(trajs) != set(g.ids):
            raise ValueError(f"trajectories for {name!r} do not cover this graph's comments")
        chosen[name] = select(trajs, at)
    rows = []
    for nid, label in depth_labels(g):
        row = [label, _truncate(g.comment(nid).text, width)]
        row.extend(chosen[name].get(nid, "") for name in models)
        rows.append(row)
    return header, rows


def render_report(
    g: DiscussionGraph,
    models: Mapping[str, Trajectories],
    fmt: str = "markdown",
    width: int = 80,
    at: str | int = "final",
) -> str:
    header, rows = report_rows(g, models, width, at)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_NONNUMERIC, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "markdown":
        def cells(row):
            return "| " + " | ".join(str(v).replace("|", "\\|") for v in row) + " |"

        lines = [cells(header), "|" + "|".join("---" for _ in header) + "|"]
        lines.extend(cells(r) for r in rows)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
