"""Frozen per-token, per-layer embeddings: file format and providers.

E3C-EMB v1 layout, little-endian: magic ``E3CE``, u32 version, u32 n,
u32 L, u32 d, u16 doc-id byte length, doc-id bytes (UTF-8), then n*L*d
IEEE-754 float32 values in token-major, layer-second, dimension-last
order.

The synthetic provider generates deterministic embeddings keyed by
(doc_id, token index, layer) so desk-scale experiments are reproducible
without any pretrained encoder.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Document

MAGIC = b"E3CE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<III H")  # n, L, d, doc-id byte length (after magic+version)


class EmbeddingFormatError(ValueError):
    """Bad E3C-EMB file or embeddings inconsistent with their document."""


@dataclass(frozen=True)
class LayeredEmbeddings:
    doc_id: str
    values: np.ndarray  # (n, L, d) float32

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 3:
            raise EmbeddingFormatError("embedding array must be n x L x d")
        n, layers, dim = values.shape
        if layers < 1 or dim < 1:
            raise EmbeddingFormatError("embedding L and d must be >= 1")
        if not np.all(np.isfinite(values)):
            raise EmbeddingFormatError(
                f"embeddings for {self.doc_id!r} contain non-finite values"
            )
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def layers(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def truncated(self, max_tokens: int) -> "LayeredEmbeddings":
        if self.n <= max_tokens:
            return self
        return LayeredEmbeddings(self.doc_id, self.values[:max_tokens])


def write_embeddings(emb: LayeredEmbeddings, path) -> None:
    doc_id_bytes = emb.doc_id.encode("utf-8")
    if len(doc_id_bytes) > 0xFFFF:
        raise EmbeddingFormatError("doc_id too long for the E3C-EMB header")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(_HEADER.pack(emb.n, emb.layers, emb.dim, len(doc_id_bytes)))
        fh.write(doc_id_bytes)
        fh.write(emb.values.astype("<f4", copy=False).tobytes(order="C"))


def load_embeddings(path, doc: Document) -> LayeredEmbeddings:
    """Read an E3C-EMB file and cross-check it against ``doc``."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 + 4 + _HEADER.size:
        raise EmbeddingFormatError(f"{path}: truncated header")
    if raw[:4] != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {raw[:4]!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FORMAT_VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported version {version}")
    n, layers, dim, id_len = _HEADER.unpack_from(raw, 8)
    offset = 8 + _HEADER.size
    if len(raw) < offset + id_len:
        raise EmbeddingFormatError(f"{path}: truncated doc id")
    doc_id = raw[offset:offset + id_len].decode("utf-8")
    offset += id_len
    expected = n * layers * dim * 4
    payload = raw[offset:]
    if len(payload) != expected:
        raise EmbeddingFormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    if n != len(doc.tokens):
        raise EmbeddingFormatError(
            f"{path}: embeddings cover {n} tokens but document "
            f"{doc.doc_id!r} has {len(doc.tokens)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(n, layers, dim)
    return LayeredEmbeddings(doc_id, values.copy())


def _keyed_rng(*parts) -> np.random.Generator:
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))


def type_direction(seed: int, event_type: int, dim: int) -> np.ndarray:
    """Unit vector attached to one event type; shared across documents."""
    vec = _keyed_rng(seed, "type", event_type, dim).standard_normal(dim)
    return (vec / np.linalg.norm(vec)).astype(np.float32)


def synth_embeddings(doc: Document, seed: int, layers: int, dim: int,
                     type_signal: float = 0.0) -> LayeredEmbeddings:
    """Deterministic pseudo-embeddings for a document.

    Values come from a PRNG keyed by (doc_id, token index, layer). When
    ``type_signal`` > 0, tokens at gold mention positions additionally get
    ``type_signal`` times a type-keyed unit direction (the same direction
    on every layer), which makes the corpus learnable at desk scale.
    """
    if layers < 1 or dim < 1:
        raise ValueError("layers and dim must be >= 1")
    n = len(doc.tokens)
    values = np.empty((n, layers, dim), dtype=np.float32)
    for i in range(n):
        for j in range(layers):
            rng = _keyed_rng(seed, "tok", doc.doc_id, i, j)
            values[i, j] = rng.standard_normal(dim).astype(np.float32)
    if type_signal > 0.0:
        for m in doc.mentions:
            direction = type_direction(seed, m.event_type, dim)
            values[m.token_index] += np.float32(type_signal) * direction
    return LayeredEmbeddings(doc.doc_id, values)


class DirectoryEmbeddings:
    """Loads ``<dir>/<doc_id>.e3ce``, truncating to the document length."""

    def __init__(self, root):
        self.root = Path(root)

    def path_for(self, doc_id: str) -> Path:
        return self.root / f"{doc_id}.e3ce"

    def get(self, doc: Document) -> LayeredEmbeddings:
        return load_embeddings(self.path_for(doc.doc_id), doc)


class SynthEmbeddings:
    """Generates (and caches) synthetic embeddings on demand."""

    def __init__(self, seed: int, layers: int, dim: int, type_signal: float = 0.0):
        self.seed = seed
        self.layers = layers
        self.dim = dim
        self.type_signal = type_signal
        self._cache: dict[tuple[str, int], LayeredEmbeddings] = {}

    def get(self, doc: Document) -> LayeredEmbeddings:
        key = (doc.doc_id, len(doc.tokens))
        if key not in self._cache:
            self._cache[key] = synth_embeddings(
                doc, self.seed, self.layers, self.dim, self.type_signal
            )
        return self._cache[key]


class InMemoryEmbeddings:
    """Dict-backed source, mainly for tests."""

    def __init__(self, by_doc_id: dict[str, LayeredEmbeddings]):
        self.by_doc_id = dict(by_doc_id)

    def get(self, doc: Document) -> LayeredEmbeddings:
        return self.by_doc_id[doc.doc_id]
