"""Lexical and dense indices over chunk sets, with on-disk persistence and
a composable multi-index graph for cross-document routing.

Indices are build-then-freeze: mutable while ingesting, then safe to share
across concurrent searches. Dense search is exact (no ANN) — corpora are
desk-scale and exactness keeps rankings reproducible.
"""

from __future__ import annotations

import json
import math
import os
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .chunker import Chunk, chunks_from_jsonl, chunks_to_jsonl
from .errors import DimensionMismatch, EmptyGraph

BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN_RE.findall(text)]


class ChunkIndex:
    """BM25 postings plus optional dense vectors over one chunk set."""

    def __init__(
        self,
        chunks: Sequence[Chunk],
        vectors: Optional[np.ndarray] = None,
        descriptor: str = "",
        embed_model_id: str = "",
    ) -> None:
        self.chunks: list[Chunk] = list(chunks)
        self.by_id: dict[str, Chunk] = {c.id: c for c in self.chunks}
        self.descriptor = descriptor
        self.embed_model_id = embed_model_id

        self.postings: dict[str, list[tuple[int, int]]] = {}
        self.doc_len: list[int] = []
        for ordinal, chunk in enumerate(self.chunks):
            tf = Counter(tokenize(chunk.text))
            self.doc_len.append(sum(tf.values()))
            for term, count in tf.items():
                self.postings.setdefault(term, []).append((ordinal, count))
        self.avgdl = sum(self.doc_len) / len(self.doc_len) if self.doc_len else 0.0

        if vectors is not None:
            vectors = np.asarray(vectors, dtype=np.float32)
            if vectors.shape[0] != len(self.chunks):
                raise ValueError("vector count does not match chunk count")
        self.vectors = vectors

    @classmethod
    def build(
        cls,
        chunks: Sequence[Chunk],
        embedder=None,
        descriptor: str = "",
        embed_model_id: str = "",
    ) -> "ChunkIndex":
        vectors = None
        if embedder is not None and chunks:
            vectors = np.asarray(embedder.embed([c.text for c in chunks]), dtype=np.float32)
            if not embed_model_id:
                embed_model_id = type(embedder).__name__
        return cls(chunks, vectors=vectors, descriptor=descriptor, embed_model_id=embed_model_id)

    @property
    def dim(self) -> Optional[int]:
        return None if self.vectors is None else int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.chunks)

    # ── search ──────────────────────────────────────────────────────── #

    def _bm25_scores(self, query: str) -> dict[int, float]:
        n_docs = len(self.chunks)
        scores: dict[int, float] = {}
        for term in tokenize(query):
            postings = self.postings.get(term)
            if not postings:
                continue
            df = len(postings)
            idf = math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)
            for ordinal, tf in postings:
                denom = tf + BM25_K1 * (1 - BM25_B + BM25_B * self.doc_len[ordinal] / self.avgdl)
                scores[ordinal] = scores.get(ordinal, 0.0) + idf * tf * (BM25_K1 + 1) / denom
        return scores

    def _rank(self, scores: dict[int, float]) -> list[tuple[int, float]]:
        # descending score; ties by ascending doc_position then chunk id
        return sorted(
            scores.items(),
            key=lambda kv: (-kv[1], self.chunks[kv[0]].doc_position, self.chunks[kv[0]].id),
        )


def bm25_search(
    index: ChunkIndex, query: str, top_n: int = 100, min_norm_score: float = 0.6
) -> list[tuple[str, float]]:
    """Top-n chunks by raw BM25, then drop candidates whose min-max-normalized
    score (over the candidate pool) falls below the threshold.

    Raw BM25 is unbounded, so the threshold operates on a per-query min-max
    normalization; when all candidates tie, every normalized score is 1.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    if not 0.0 <= min_norm_score <= 1.0:
        raise ValueError("min_norm_score must be in [0, 1]")
    if len(index) == 0:
        return []
    ranked = index._rank(index._bm25_scores(query))[:top_n]
    if not ranked:
        return []
    raw = [s for _, s in ranked]
    lo, hi = min(raw), max(raw)
    out: list[tuple[str, float]] = []
    for ordinal, score in ranked:
        norm = 1.0 if hi == lo else (score - lo) / (hi - lo)
        if norm >= min_norm_score:
            out.append((index.chunks[ordinal].id, score))
    return out


def dense_search(
    index: ChunkIndex, query_vector: np.ndarray, top_n: int = 100
) -> list[tuple[str, float]]:
    """Exact cosine-similarity top-n; no threshold."""
    if index.vectors is None or len(index) == 0:
        return []
    q = np.asarray(query_vector, dtype=np.float32).reshape(-1)
    if q.shape[0] != index.vectors.shape[1]:
        raise DimensionMismatch(
            f"query dim {q.shape[0]} != index dim {index.vectors.shape[1]}"
        )
    qn = np.linalg.norm(q)
    vn = np.linalg.norm(index.vectors, axis=1)
    denom = np.where((qn * vn) == 0, 1.0, qn * vn)
    cosines = (index.vectors @ q) / denom
    ranked = sorted(
        enumerate(cosines.tolist()),
        key=lambda kv: (-kv[1], index.chunks[kv[0]].doc_position, index.chunks[kv[0]].id),
    )[:top_n]
    return [(index.chunks[i].id, c) for i, c in ranked]


# ── persistence ──────────────────────────────────────────────────────── #

_MAGIC = b"CEPX"


def save_index(index: ChunkIndex, directory: str) -> None:
    """Write chunks.jsonl, postings.bin, vectors.f32, and meta.json.

    postings.bin layout (little-endian): magic, u32 doc count, u32 doc
    lengths, u32 term count, then per term: u16 utf-8 length + bytes,
    u32 posting count, and delta-encoded (u32 ordinal delta, u32 tf) pairs.
    """
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "chunks.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(chunks_to_jsonl(index.chunks))

    with open(os.path.join(directory, "postings.bin"), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(index.doc_len)))
        for length in index.doc_len:
            fh.write(struct.pack("<I", length))
        terms = sorted(index.postings)
        fh.write(struct.pack("<I", len(terms)))
        for term in terms:
            raw = term.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            postings = index.postings[term]
            fh.write(struct.pack("<I", len(postings)))
            prev = 0
            for ordinal, tf in postings:
                fh.write(struct.pack("<II", ordinal - prev, tf))
                prev = ordinal

    if index.vectors is not None:
        index.vectors.astype("<f4").tofile(os.path.join(directory, "vectors.f32"))

    meta = {
        "d": index.dim,
        "embed_model_id": index.embed_model_id,
        "descriptor": index.descriptor,
        "chunk_count": len(index.chunks),
        "term_count": len(index.postings),
    }
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, ensure_ascii=False, indent=2)


def load_index(directory: str) -> ChunkIndex:
    with open(os.path.join(directory, "chunks.jsonl"), encoding="utf-8") as fh:
        chunks = chunks_from_jsonl(fh.read())
    with open(os.path.join(directory, "meta.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    vectors = None
    vec_path = os.path.join(directory, "vectors.f32")
    if meta.get("d") and os.path.exists(vec_path):
        vectors = np.fromfile(vec_path, dtype="<f4").reshape(-1, meta["d"])
    index = ChunkIndex(
        chunks,
        vectors=vectors,
        descriptor=meta.get("descriptor", ""),
        embed_model_id=meta.get("embed_model_id", ""),
    )
    # verify the persisted postings decode to the rebuilt table
    with open(os.path.join(directory, "postings.bin"), "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("postings.bin: bad magic")
        (n_docs,) = struct.unpack("<I", fh.read(4))
        doc_len = list(struct.unpack(f"<{n_docs}I", fh.read(4 * n_docs))) if n_docs else []
        (n_terms,) = struct.unpack("<I", fh.read(4))
        postings: dict[str, list[tuple[int, int]]] = {}
        for _ in range(n_terms):
            (tlen,) = struct.unpack("<H", fh.read(2))
            term = fh.read(tlen).decode("utf-8")
            (plen,) = struct.unpack("<I", fh.read(4))
            entries = []
            prev = 0
            for _ in range(plen):
                delta, tf = struct.unpack("<II", fh.read(8))
                prev += delta
                entries.append((prev, tf))
            postings[term] = entries
    index.postings = postings
    index.doc_len = doc_len
    index.avgdl = sum(doc_len) / len(doc_len) if doc_len else 0.0
    return index


# ── composable corpus graph ──────────────────────────────────────────── #


@dataclass
class GraphLeaf:
    index: ChunkIndex
    descriptor: str
    label: str = ""  # e.g. the class of examples this leaf holds


@dataclass
class GraphGroup:
    children: list[Union["GraphGroup", GraphLeaf]]
    descriptor: str
    label: str = ""


@dataclass
class CorpusGraph:
    root: GraphGroup
    comparisons: int = field(default=0, compare=False)  # instrumentation, reset per query


def route_query(graph: CorpusGraph, query_vector: np.ndarray, embedder) -> GraphLeaf:
    """Recursive descent: at each level pick the child whose descriptor
    embedding is most cosine-similar to the query."""
    graph.comparisons = 0
    node: Union[GraphGroup, GraphLeaf] = graph.root
    q = np.asarray(query_vector, dtype=np.float64).reshape(-1)
    qn = np.linalg.norm(q) or 1.0
    while isinstance(node, GraphGroup):
        if not node.children:
            raise EmptyGraph("graph group has no children")
        descs = [c.descriptor for c in node.children]
        vecs = np.asarray(embedder.embed(descs), dtype=np.float64)
        norms = np.linalg.norm(vecs, axis=1)
        norms[norms == 0] = 1.0
        sims = (vecs @ q) / (norms * qn)
        graph.comparisons += 1
        node = node.children[int(np.argmax(sims))]
    return node


def cross_document_examples(
    graph: CorpusGraph, query: str, embedder, top_k: int = 3
) -> list[tuple[Chunk, str]]:
    """Route to the most relevant leaf, then return its top-k dense hits with
    their stored labels, for few-shot assembly."""
    qvec = np.asarray(embedder.embed([query]))[0]
    leaf = route_query(graph, qvec, embedder)
    hits = dense_search(leaf.index, qvec, top_n=top_k)
    return [(leaf.index.by_id[cid], leaf.label) for cid, _ in hits]
