from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from hategraph import kernels
from hategraph.discussion import Comment, DiscussionGraph, load_thread

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test belongs to")
    config.addinivalue_line("markers", "slow: long-running experiment")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        num, title = marker.args
        entry = _criteria.setdefault(num, {"title": title, "failed": [], "ran": 0})
        entry["ran"] += 1
        if not rep.passed:
            entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        entry = _criteria[num]
        status = "FAIL" if entry["failed"] else "PASS"
        line = f"criterion {num} ({entry['title']}): {status}"
        if entry["failed"]:
            line += " - failing checks: " + ", ".join(entry["failed"])
        terminalreporter.write_line(line)


@pytest.fixture(params=kernels.available_backends())
def each_backend(request):
    with kernels.backend(request.param):
        yield request.param


@pytest.fixture
def table(request):
    def load(k: int) -> DiscussionGraph:
        return load_thread(FIXTURES / f"table{k}.json")

    return load


def chain(n: int, labeled: bool = False) -> DiscussionGraph:
    comments = [
        Comment(f"n{i}", None if i == 0 else f"n{i - 1}", f"comment number {i}", i % 5 if labeled else None)
        for i in range(n)
    ]
    return DiscussionGraph.from_comments(comments, thread_id="chain")


def star(k: int) -> DiscussionGraph:
    comments = [Comment("r", None, "the post")]
    comments += [Comment(f"l{i}", "r", f"reply {i}") for i in range(k)]
    return DiscussionGraph.from_comments(comments, thread_id="star")


def bfs_distances(g: DiscussionGraph) -> np.ndarray:
    """All-pairs distances by breadth-first search over the undirected tree."""
    ids = g.ids
    adj = {i: set() for i in ids}
    for c in g.comments:
        if c.parent_id is not None:
            adj[c.id].add(c.parent_id)
            adj[c.parent_id].add(c.id)
    out = np.zeros((len(ids), len(ids)), dtype=np.int64)
    for a, src in enumerate(ids):
        seen = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in seen:
                        seen[v] = seen[u] + 1
                        nxt.append(v)
            frontier = nxt
        for b, dst in enumerate(ids):
            out[a, b] = seen[dst]
    return out
