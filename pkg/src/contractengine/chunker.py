"""Contextual chunk generation over a document tree.

Each non-root node yields up to three chunks: the node alone, the node
prefixed with its ancestors, and the node followed by its descendants.
The merged set is deduplicated on normalized text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .doctree import DocumentTree, NodeKind, normalize_ws

SEPARATOR = "\n"  # between concatenated node texts; keeps clause boundaries tokenizable


class ChunkKind(str, Enum):
    NODE_LEVEL = "node_level"
    ANCESTOR_AWARE = "ancestor_aware"
    DESCENDANT_AWARE = "descendant_aware"


_KIND_ORDER = {k: i for i, k in enumerate(ChunkKind)}


@dataclass(frozen=True)
class Chunk:
    id: str
    kind: ChunkKind
    text: str
    core_span: tuple[int, int]  # always the originating node's span
    node_path: tuple[str, ...]  # ancestor labels from root down
    doc_position: int
    filename: str
    summary: str = ""


def make_chunks(tree: DocumentTree, kind: ChunkKind) -> list[Chunk]:
    """One chunk per non-root node of the requested kind."""
    summary = tree.summary or ""
    chunks: list[Chunk] = []
    for position, node in enumerate(tree.document_order()):
        if kind is ChunkKind.NODE_LEVEL:
            text = node.text
        elif kind is ChunkKind.ANCESTOR_AWARE:
            parts = [a.text for a in tree.ancestors(node.id) if a.text]
            parts.append(node.text)
            text = SEPARATOR.join(parts)
        else:
            parts = [node.text]
            parts.extend(d.text for d in tree.descendants(node.id) if d.text)
            text = SEPARATOR.join(parts)
        if not text.strip():
            continue
        path = tuple(a.label or normalize_ws(a.text)[:40] for a in tree.ancestors(node.id))
        chunks.append(
            Chunk(
                id=f"{node.id}/{kind.value}",
                kind=kind,
                text=text,
                core_span=node.span,
                node_path=path,
                doc_position=position,
                filename=tree.filename,
                summary=summary,
            )
        )
    return chunks


def dedup_chunks(
    chunks: Iterable[Chunk],
    embedder=None,
    cosine_threshold: Optional[float] = None,
) -> list[Chunk]:
    """Drop chunks whose normalized text duplicates an earlier chunk.

    Optionally also drops near-duplicates by embedding cosine when an
    embedder and threshold are supplied.
    """
    ordered = sorted(chunks, key=lambda c: (c.doc_position, _KIND_ORDER[c.kind]))
    seen: set[str] = set()
    survivors: list[Chunk] = []
    for c in ordered:
        key = normalize_ws(c.text).casefold()
        if key in seen:
            continue
        seen.add(key)
        survivors.append(c)

    if embedder is not None and cosine_threshold is not None and len(survivors) > 1:
        vecs = embedder.embed([c.text for c in survivors])
        vecs = np.asarray(vecs, dtype=np.float64)
        norms = np.linalg.norm(vecs, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        unit = vecs / norms
        keep: list[Chunk] = []
        kept_vecs: list[np.ndarray] = []
        for c, v in zip(survivors, unit):
            if any(float(v @ kv) >= cosine_threshold for kv in kept_vecs):
                continue
            keep.append(c)
            kept_vecs.append(v)
        survivors = keep
    return survivors


def assemble_chunk_set(
    tree: DocumentTree,
    embedder=None,
    cosine_threshold: Optional[float] = None,
) -> list[Chunk]:
    """Union of all three chunk kinds, deduplicated and deterministically
    ordered by (doc_position, kind)."""
    merged: list[Chunk] = []
    for kind in ChunkKind:
        merged.extend(make_chunks(tree, kind))
    return dedup_chunks(merged, embedder=embedder, cosine_threshold=cosine_threshold)


def chunks_to_jsonl(chunks: Iterable[Chunk]) -> str:
    """One chunk per line; UTF-8, LF line endings."""
    lines = []
    for c in chunks:
        lines.append(
            json.dumps(
                {
                    "id": c.id,
                    "kind": c.kind.value,
                    "text": c.text,
                    "core_start": c.core_span[0],
                    "core_end": c.core_span[1],
                    "node_path": list(c.node_path),
                    "doc_position": c.doc_position,
                    "filename": c.filename,
                    "summary": c.summary,
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def chunks_from_jsonl(payload: str) -> list[Chunk]:
    chunks = []
    for line in payload.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        chunks.append(
            Chunk(
                id=d["id"],
                kind=ChunkKind(d["kind"]),
                text=d["text"],
                core_span=(d["core_start"], d["core_end"]),
                node_path=tuple(d["node_path"]),
                doc_position=d["doc_position"],
                filename=d["filename"],
                summary=d.get("summary", ""),
            )
        )
    return chunks
