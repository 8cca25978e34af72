"""Per-graph model inputs, ordinal predictions and parameter initialisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .discussion import NUM_LABELS, DiscussionGraph, degree_arrays
from .layers import softmax


class GraphInputs:
    """Everything a model needs from one graph, derived once and reused.

    Distances and neighbour lists are computed lazily since each model kind
    needs only one of them.
    """

    def __init__(
        self,
        features: np.ndarray,
        parents: np.ndarray,
        in_degree: np.ndarray | None = None,
        out_degree: np.ndarray | None = None,
    ) -> None:
        self.features = np.asarray(features, dtype=np.float64)
        self.parents = np.asarray(parents, dtype=np.int64)
        n = self.parents.shape[0]
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(
                f"feature matrix has shape {self.features.shape}, expected ({n}, dim)"
            )
        if in_degree is None or out_degree is None:
            in_degree = (self.parents >= 0).astype(np.int64)
            out_degree = np.bincount(self.parents[self.parents >= 0], minlength=n)
        self.in_degree = np.asarray(in_degree, dtype=np.int64)
        self.out_degree = np.asarray(out_degree, dtype=np.int64)
        self._dist: np.ndarray | None = None
        self._csr: tuple[np.ndarray, np.ndarray] | None = None

    @classmethod
    def from_graph(cls, g: DiscussionGraph, features: np.ndarray) -> "GraphInputs":
        in_deg, out_deg = degree_arrays(g)
        return cls(features, g.parent_indices(), in_deg, out_deg)

    def __len__(self) -> int:
        return self.parents.shape[0]

    def distances(self) -> np.ndarray:
        """Unclamped all-pairs tree distances."""
        if self._dist is None:
            self._dist = kernels.tree_distances(self.parents)
        return self._dist

    def neighbors(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR lists of parent, children and self for every node, ascending."""
        if self._csr is None:
            n = len(self)
            rows = [[i] for i in range(n)]
            for c, p in enumerate(self.parents):
                if p >= 0:
                    rows[c].append(int(p))
                    rows[p].append(c)
            rows = [sorted(r) for r in rows]
            indptr = np.zeros(n + 1, dtype=np.int64)
            indptr[1:] = np.cumsum([len(r) for r in rows])
            self._csr = (indptr, np.fromiter((j for r in rows for j in r), dtype=np.int64))
        return self._csr

    def with_features(self, features: np.ndarray) -> "GraphInputs":
        out = GraphInputs(features, self.parents, self.in_degree, self.out_degree)
        out._dist, out._csr = self._dist, self._csr
        return out


def build_distance_matrix(g: DiscussionGraph, max_distance: int) -> np.ndarray:
    """Pairwise tree distances clamped at ``max_distance``."""
    if max_distance < 1:
        raise ValueError("max_distance must be >= 1")
    return np.minimum(kernels.tree_distances(g.parent_indices()), max_distance)


@dataclass(frozen=True)
class OrdinalPrediction:
    logits: np.ndarray  # (n, 5)
    probabilities: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "OrdinalPrediction":
        return cls(logits, softmax(logits), predict(logits))


def predict(logits: np.ndarray) -> np.ndarray:
    """Argmax label per node; ties go to the lowest index."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    if logits.shape[-1] != NUM_LABELS:
        raise ValueError(f"expected {NUM_LABELS} logits per node, got {logits.shape[-1]}")
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logit")
    return logits.argmax(axis=-1)


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, scale: float):
    s = scale / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)
