"""Deterministic text features and similarity math.

The default embedder is a hashed bag-of-words: tokens are hashed into a
fixed number of buckets, counts are accumulated, and the vector is
L2-normalized.  It is fully deterministic across processes and platforms,
which the benchmark layer relies on.  Real encoder backends can be plugged
in through the :class:`EncoderOracle` interface.
"""

from __future__ import annotations

import json
import re
from typing import Dict, Iterable, List

import numpy as np

DEFAULT_EMBEDDING_DIM = 256

# FNV-1a 64-bit, fixed so bucket assignment never depends on the process.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Prefix marking an opaque image token, e.g. "img:red_alarm_clock".
IMAGE_TOKEN_PREFIX = "img:"


def tokenize(text: str) -> List[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


def token_bucket(token: str, dim: int) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _FNV_MASK
    return h % dim


def embed_text(text: str, dim: int = DEFAULT_EMBEDDING_DIM) -> np.ndarray:
    """Embed ``text`` as an L2-normalized hashed bag-of-words vector.

    Empty or tokenless input returns the all-zero sentinel vector; callers
    treat that as "no feature" rather than a valid direction.
    """
    if dim <= 0:
        raise ValueError(f"embedding dim must be positive, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        vec[token_bucket(token, dim)] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec
    return vec / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("cosine_similarity expects 1-D vectors")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        raise ValueError("feature vectors must be finite")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm input")
    return float(np.dot(a, b) / (na * nb))


def is_zero_feature(vec: np.ndarray) -> bool:
    return not np.any(np.asarray(vec))


def strip_image_prefix(token: str) -> str:
    if token.startswith(IMAGE_TOKEN_PREFIX):
        return token[len(IMAGE_TOKEN_PREFIX):]
    return token


class EncoderOracle:
    """Interface for text/image feature backends.

    ``encode_text`` maps a natural-language descriptor to a feature vector;
    ``encode_query_image`` maps an opaque image token.  Both must return
    vectors of the same dimension for one scene.
    """

    def encode_text(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def encode_query_image(self, image_token: str) -> np.ndarray:
        raise NotImplementedError


class HashingEncoder(EncoderOracle):
    """Default deterministic encoder backed by :func:`embed_text`.

    Image tokens are treated as underscore-joined descriptions, so
    ``img:red_alarm_clock`` lands in the same bucket pattern as the text
    "red alarm clock".
    """

    def __init__(self, dim: int = DEFAULT_EMBEDDING_DIM):
        if dim <= 0:
            raise ValueError(f"embedding dim must be positive, got {dim}")
        self.dim = dim

    def encode_text(self, text: str) -> np.ndarray:
        return embed_text(text, self.dim)

    def encode_query_image(self, image_token: str) -> np.ndarray:
        return embed_text(strip_image_prefix(image_token), self.dim)


def load_feature_table(path: str) -> Dict[str, np.ndarray]:
    """Read an ``id -> vector`` JSON table (same numeric format as scenes)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("feature table must be a JSON object of id -> vector")
    table: Dict[str, np.ndarray] = {}
    dims = set()
    for key, values in raw.items():
        vec = np.asarray(values, dtype=np.float64)
        if vec.ndim != 1:
            raise ValueError(f"feature for {key!r} is not a flat vector")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"feature for {key!r} has non-finite entries")
        dims.add(vec.shape[0])
        table[key] = vec
    if len(dims) > 1:
        raise ValueError(f"inconsistent feature dimensions in table: {sorted(dims)}")
    return table


def save_feature_table(table: Dict[str, np.ndarray], path: str) -> None:
    payload = {key: [float(x) for x in np.asarray(vec)] for key, vec in table.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def bucket_collisions(words: Iterable[str], dim: int = DEFAULT_EMBEDDING_DIM) -> List[tuple]:
    """Return word pairs sharing a hash bucket.  Used to vet vocabularies."""
    seen: Dict[int, str] = {}
    collisions = []
    for word in words:
        b = token_bucket(word, dim)
        if b in seen and seen[b] != word:
            collisions.append((seen[b], word))
        else:
            seen[b] = word
    return collisions
