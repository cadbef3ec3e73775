"""Word-embedding table and the cosine primitive used for label grouping.

Embeddings come from a GloVe-style text file: one token per line followed by
D whitespace-separated floats. Multi-word labels ("parked on") resolve to the
unweighted mean of their constituent word vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable token -> vector map with a fixed dimensionality."""

    dim: int
    entries: dict[str, np.ndarray]

    def vector(self, token: str) -> np.ndarray:
        try:
            return self.entries[token]
        except KeyError:
            raise KeyError(f"token {token!r} not in embedding table") from None

    def __contains__(self, token: str) -> bool:
        return token in self.entries


def load_embeddings(path, vocab) -> EmbeddingTable:
    """Parse an embedding file and resolve every token in ``vocab``.

    Raises :class:`DataFormatError` on inconsistent dimensions or unparseable
    lines, ``KeyError`` naming the first missing token, and ``ValueError``
    when a requested vector (or a constituent word vector) is all-zero.
    """
    raw: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if not values:
                raise DataFormatError(f"{path}:{lineno}: no vector for token {token!r}")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: non-numeric vector component"
                ) from None
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {dim} components, got {vec.size}"
                )
            raw[token] = vec
    if dim is None:
        raise DataFormatError(f"{path}: empty embedding file")

    entries: dict[str, np.ndarray] = {}
    for item in vocab:
        words = item.split()
        for w in words:
            if w not in raw:
                raise KeyError(f"vocab token {item!r}: no embedding for word {w!r}")
            if not np.any(raw[w]):
                raise ValueError(f"word {w!r} has an all-zero embedding vector")
        if len(words) == 1:
            vec = raw[words[0]].copy()
        else:
            vec = np.mean([raw[w] for w in words], axis=0)
        if not np.any(vec):
            raise ValueError(f"vocab token {item!r} resolves to the zero vector")
        entries[item] = vec
    return EmbeddingTable(dim=dim, entries=entries)


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two nonzero vectors, in [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0.0 or norm_v == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm input")
    return float(np.dot(u, v) / (norm_u * norm_v))
