"""Reply-tree data model for discussion threads.

A thread file holds one discussion as a JSON object::

    {"id": "...", "community": "...", "comments": [
        {"id": "c0", "parent_id": null, "text": "...", "label": 2, "author": "..."},
        ...]}

Exactly one comment has a null ``parent_id``; it is the initial post and sits at
depth 0.  Node order everywhere in this package is the order comments appear in
the file.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_NODES = 4096
NUM_LABELS = 5


class ThreadFormatError(ValueError):
    """Raised when a thread file or comment collection is not a valid reply tree."""

    def __init__(self, message: str, comment_id: str | None = None) -> None:
        if comment_id is not None:
            message = f"{message} (comment id {comment_id!r})"
        super().__init__(message)
        self.comment_id = comment_id


@dataclass(frozen=True)
class Comment:
    id: str
    parent_id: str | None
    text: str
    gold_label: int | None = None
    author: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ThreadFormatError("comment id must be a nonempty string", None)
        if self.parent_id is not None and not isinstance(self.parent_id, str):
            raise ThreadFormatError("parent_id must be a string or null", self.id)
        if not isinstance(self.text, str):
            raise ThreadFormatError("text must be a string", self.id)
        label = self.gold_label
        if label is not None:
            if isinstance(label, bool) or not isinstance(label, int) or not 0 <= label < NUM_LABELS:
                raise ThreadFormatError(f"gold label {label!r} outside 0..4", self.id)


@dataclass(frozen=True, eq=False)
class DiscussionGraph:
    """An immutable rooted reply tree.

    Build one with :meth:`from_comments` (or :func:`parse_thread`); the raw
    constructor trusts its arguments.
    """

    comments: tuple[Comment, ...]
    root_id: str
    children: Mapping[str, tuple[str, ...]]
    depth: Mapping[str, int]
    thread_id: str = ""
    community: str | None = None
    _index: Mapping[str, int] = field(default=MappingProxyType({}), repr=False)

    @classmethod
    def from_comments(
        cls,
        comments: Iterable[Comment],
        thread_id: str = "",
        community: str | None = None,
    ) -> "DiscussionGraph":
        comments = tuple(comments)
        if not comments:
            raise ThreadFormatError("thread has no comments")
        if len(comments) > MAX_NODES:
            raise ThreadFormatError(
                f"thread has {len(comments)} comments; at most {MAX_NODES} are supported"
            )
        index: dict[str, int] = {}
        for i, c in enumerate(comments):
            if c.id in index:
                raise ThreadFormatError("duplicate comment id", c.id)
            index[c.id] = i

        roots = [c.id for c in comments if c.parent_id is None]
        if not roots:
            raise ThreadFormatError("no root: every comment has a parent_id")
        if len(roots) > 1:
            raise ThreadFormatError(f"multiple roots: {roots}", roots[1])

        children: dict[str, list[str]] = {c.id: [] for c in comments}
        for c in comments:
            if c.parent_id is None:
                continue
            if c.parent_id not in index:
                raise ThreadFormatError(f"dangling parent_id {c.parent_id!r}", c.id)
            if c.parent_id == c.id:
                raise ThreadFormatError("comment replies to itself", c.id)
            children[c.parent_id].append(c.id)

        root = roots[0]
        depth = {root: 0}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in children[u]:
                depth[v] = depth[u] + 1
                queue.append(v)
        if len(depth) != len(comments):
            stuck = next(c.id for c in comments if c.id not in depth)
            raise ThreadFormatError("reply cycle detected", stuck)

        return cls(
            comments=comments,
            root_id=root,
            children=MappingProxyType({k: tuple(v) for k, v in children.items()}),
            depth=MappingProxyType(depth),
            thread_id=thread_id,
            community=community,
            _index=MappingProxyType(index),
        )

    def __len__(self) -> int:
        return len(self.comments)

    def __contains__(self, comment_id: object) -> bool:
        return comment_id in self._index

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.comments]

    @property
    def max_depth(self) -> int:
        return max(self.depth.values())

    def index_of(self, comment_id: str) -> int:
        try:
            return self._index[comment_id]
        except KeyError:
            raise KeyError(f"unknown comment id {comment_id!r}") from None

    def comment(self, comment_id: str) -> Comment:
        return self.comments[self.index_of(comment_id)]

    def parent(self, comment_id: str) -> str | None:
        return self.comment(comment_id).parent_id

    def parent_indices(self) -> np.ndarray:
        """Index of each node's parent in node order, ``-1`` for the root."""
        return np.array(
            [-1 if c.parent_id is None else self._index[c.parent_id] for c in self.comments],
            dtype=np.int64,
        )

    def depths(self) -> np.ndarray:
        return np.array([self.depth[c.id] for c in self.comments], dtype=np.int64)

    def gold_labels(self) -> dict[str, int]:
        return {c.id: c.gold_label for c in self.comments if c.gold_label is not None}

    def is_fully_labeled(self) -> bool:
        return all(c.gold_label is not None for c in self.comments)

    def preorder(self) -> list[str]:
        """Depth-first pre-order, children visited in file order."""
        out: list[str] = []
        stack = [self.root_id]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(reversed(self.children[u]))
        return out

    def same_structure(self, other: "DiscussionGraph") -> bool:
        return self.comments == other.comments and self.root_id == other.root_id


@dataclass(frozen=True)
class DepthSnapshot:
    graph: DiscussionGraph
    horizon: int


def parse_thread(data: bytes | str) -> DiscussionGraph:
    """Parse thread-file content into a validated :class:`DiscussionGraph`."""
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ThreadFormatError(f"malformed thread file: {exc}") from None
    return thread_from_dict(obj)


def thread_from_dict(obj: object) -> DiscussionGraph:
    if not isinstance(obj, dict):
        raise ThreadFormatError("thread file must hold a JSON object")
    raw = obj.get("comments")
    if not isinstance(raw, list):
        raise ThreadFormatError("thread file needs a 'comments' array")
    thread_id = obj.get("id", "")
    if not isinstance(thread_id, str):
        raise ThreadFormatError("thread 'id' must be a string")
    community = obj.get("community")
    if community is not None and not isinstance(community, str):
        raise ThreadFormatError("'community' must be a string")

    comments = []
    for item in raw:
        if not isinstance(item, dict):
            raise ThreadFormatError("each comment must be a JSON object")
        cid = item.get("id")
        if "parent_id" not in item:
            raise ThreadFormatError("comment is missing 'parent_id'", cid if isinstance(cid, str) else None)
        comments.append(
            Comment(
                id=cid,
                parent_id=item["parent_id"],
                text=item.get("text", ""),
                gold_label=item.get("label"),
                author=item.get("author"),
            )
        )
    return DiscussionGraph.from_comments(comments, thread_id=thread_id, community=community)


def thread_to_dict(g: DiscussionGraph) -> dict:
    out: dict = {"id": g.thread_id}
    if g.community is not None:
        out["community"] = g.community
    rows = []
    for c in g.comments:
        row: dict = {"id": c.id, "parent_id": c.parent_id, "text": c.text}
        if c.gold_label is not None:
            row["label"] = c.gold_label
        if c.author is not None:
            row["author"] = c.author
        rows.append(row)
    out["comments"] = rows
    return out


def dump_thread(g: DiscussionGraph) -> str:
    return json.dumps(thread_to_dict(g), ensure_ascii=False, indent=1)


def load_thread(path) -> DiscussionGraph:
    with open(path, "rb") as fh:
        return parse_thread(fh.read())


def tree_distance(g: DiscussionGraph, u: str, v: str) -> int:
    """Number of edges on the undirected path between ``u`` and ``v``."""
    for x in (u, v):
        if x not in g:
            raise KeyError(f"unknown comment id {x!r}")
    a, b = u, v
    while g.depth[a] > g.depth[b]:
        a = g.parent(a)
    while g.depth[b] > g.depth[a]:
        b = g.parent(b)
    while a != b:
        a, b = g.parent(a), g.parent(b)
    return g.depth[u] + g.depth[v] - 2 * g.depth[a]


def snapshot_at_depth(g: DiscussionGraph, d: int) -> DepthSnapshot:
    if d < 0:
        raise ValueError(f"snapshot depth must be >= 0, got {d}")
    if d >= g.max_depth:
        return DepthSnapshot(g, d)
    kept = [c for c in g.comments if g.depth[c.id] <= d]
    sub = DiscussionGraph.from_comments(kept, thread_id=g.thread_id, community=g.community)
    return DepthSnapshot(sub, d)


def degrees(g: DiscussionGraph) -> dict[str, tuple[int, int]]:
    """Per node ``(in_degree, out_degree)`` along reply edges (parent -> child)."""
    return {
        c.id: (0 if c.parent_id is None else 1, len(g.children[c.id])) for c in g.comments
    }


def degree_arrays(g: DiscussionGraph) -> tuple[np.ndarray, np.ndarray]:
    in_deg = np.array([0 if c.parent_id is None else 1 for c in g.comments], dtype=np.int64)
    out_deg = np.array([len(g.children[c.id]) for c in g.comments], dtype=np.int64)
    return in_deg, out_deg


def relabel(g: DiscussionGraph, order: Sequence[int]) -> DiscussionGraph:
    """Same tree with nodes listed in ``order`` (a permutation of node indices)."""
    return DiscussionGraph.from_comments(
        [g.comments[i] for i in order], thread_id=g.thread_id, community=g.community
    )
