"""Per-comment text embeddings.

The default encoder is signed feature hashing over lowercase tokens.  Models
only ever see the resulting ``(n_nodes, dim)`` float64 matrix, so any object
with a ``dim`` attribute and an ``encode(text)`` method can replace it.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Protocol

import numpy as np

from .discussion import DiscussionGraph

MAX_DIM = 1024
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class EncoderSpec:
    dim: int = 64
    hash_seed: int = 1
    normalize: bool = True

    def __post_init__(self) -> None:
        if not 2 <= self.dim <= MAX_DIM:
            raise ValueError(f"encoder dim must be in [2, {MAX_DIM}], got {self.dim}")
        if not 0 <= self.hash_seed <= _MASK64:
            raise ValueError("hash_seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderSpec":
        return cls(dim=int(d["dim"]), hash_seed=int(d["hash_seed"]), normalize=bool(d["normalize"]))


class TextEncoder(Protocol):
    dim: int

    def encode(self, text: str) -> np.ndarray: ...


def tokenize(text: str) -> list[str]:
    # unicode letters and digits count as alphanumeric
    out = []
    buf = []
    for ch in text.lower():
        if ch.isalnum() or ch == "*":
            buf.append(ch)
        elif buf:
            out.append("".join(buf))
            buf = []
    if buf:
        out.append("".join(buf))
    return out


@lru_cache(maxsize=1 << 16)
def token_slot(token: str, dim: int, seed: int) -> tuple[int, int]:
    """Bucket index and sign for one token."""
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
    ).digest()
    h = int.from_bytes(digest, "little")
    return h % dim, (1 if h >> 63 == 0 else -1)


def encode(text: str, spec: EncoderSpec) -> np.ndarray:
    vec = np.zeros(spec.dim)
    for tok in tokenize(text):
        idx, sign = token_slot(tok, spec.dim, spec.hash_seed)
        vec[idx] += sign
    if spec.normalize:
        norm = np.sqrt(vec @ vec)
        if norm > 0:
            vec /= norm
    return vec


class HashingEncoder:
    """Hashed bag-of-tokens encoder bound to one :class:`EncoderSpec`."""

    def __init__(self, spec: EncoderSpec | None = None) -> None:
        self.spec = spec or EncoderSpec()
        self.dim = self.spec.dim

    def encode(self, text: str) -> np.ndarray:
        return encode(text, self.spec)


def encode_graph(g: DiscussionGraph, encoder: EncoderSpec | TextEncoder) -> np.ndarray:
    """Feature matrix with one row per node, in graph order."""
    if isinstance(encoder, EncoderSpec):
        encoder = HashingEncoder(encoder)
    out = np.empty((len(g), encoder.dim))
    for i, c in enumerate(g.comments):
        out[i] = encoder.encode(c.text)
    return out
