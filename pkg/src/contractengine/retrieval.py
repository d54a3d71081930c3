"""In-document retrieval pipeline: hybrid lexical + dense search fused with
reciprocal rank fusion, cross-encoder reranking with sigmoid thresholding,
context stripping back to original spans, and optional model-based sub-span
filtering.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from math import exp
from typing import Mapping, Optional, Sequence

from .chunker import Chunk
from .errors import SpanOutOfBounds, UpstreamError
from .index import ChunkIndex, bm25_search, dense_search

logger = logging.getLogger(__name__)


@dataclass
class RetrievalConfig:
    bm25_top_n: int = 100
    bm25_min_norm_score: float = 0.6
    dense_top_n: int = 100
    rrf_weights: Optional[list[float]] = None  # None = equal weights
    rrf_k: int = 60
    fused_top_n: int = 64
    rerank_keep: int = 64
    sigmoid_threshold: float = 0.5
    answer_top_k: int = 10
    llm_filter: bool = False

    def __post_init__(self) -> None:
        for name in ("bm25_top_n", "dense_top_n", "fused_top_n", "rerank_keep", "answer_top_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.bm25_min_norm_score <= 1.0:
            raise ValueError("bm25_min_norm_score must be in [0, 1]")
        if not 0.0 <= self.sigmoid_threshold <= 1.0:
            raise ValueError("sigmoid_threshold must be in [0, 1]")
        if self.rrf_weights is not None:
            if any(w < 0 for w in self.rrf_weights) or not any(self.rrf_weights):
                raise ValueError("rrf_weights must be nonnegative and not all zero")


@dataclass
class SpanHit:
    text: str
    core_span: tuple[int, int]
    filename: str
    node_path: tuple[str, ...]
    fused_rank: int
    rerank_score_raw: float
    rerank_score_norm: float


@dataclass
class RetrievalResult:
    spans: list[SpanHit] = field(default_factory=list)
    nl_answer: Optional[str] = None
    stage_trace: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "spans": [
                    {
                        "text": s.text,
                        "start": s.core_span[0],
                        "end": s.core_span[1],
                        "filename": s.filename,
                        "node_path": list(s.node_path),
                        "fused_rank": s.fused_rank,
                        "rerank_score_raw": s.rerank_score_raw,
                        "rerank_score_norm": s.rerank_score_norm,
                    }
                    for s in self.spans
                ],
                "nl_answer": self.nl_answer,
                "stage_trace": self.stage_trace,
            },
            ensure_ascii=False,
        )


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    z = exp(x)
    return z / (1.0 + z)


def rrf_fuse(
    rankings: Sequence[Sequence[str]],
    weights: Optional[Sequence[float]] = None,
    rrf_k: int = 60,
) -> list[tuple[str, float]]:
    """score(d) = sum_i w_i / (rrf_k + rank_i(d)), ranks 1-based; a document
    absent from a ranking contributes nothing for it. Ties break by id."""
    if not rankings:
        raise ValueError("rankings must be nonempty")
    if weights is None:
        weights = [1.0] * len(rankings)
    if len(weights) != len(rankings):
        raise ValueError("one weight per ranking required")
    scores: dict[str, float] = {}
    for ranking, w in zip(rankings, weights):
        if len(set(ranking)) != len(ranking):
            raise ValueError("ranking contains duplicate ids")
        for rank, doc_id in enumerate(ranking, start=1):
            scores[doc_id] = scores.get(doc_id, 0.0) + w / (rrf_k + rank)
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def rerank_and_threshold(
    query: str,
    candidates: Sequence[Chunk],
    rerank_client,
    config: RetrievalConfig,
) -> list[tuple[Chunk, float, float]]:
    """Score (query, text) jointly, sigmoid-normalize, drop below threshold,
    keep at most rerank_keep. Returns (chunk, raw, norm) sorted by norm desc."""
    if not candidates:
        return []
    try:
        raw_scores = rerank_client.score(query, [c.text for c in candidates])
    except UpstreamError:
        raise
    except Exception as exc:
        raise UpstreamError(f"rerank client failed: {exc}") from exc
    scored = [
        (chunk, raw, sigmoid(raw))
        for chunk, raw in zip(candidates, raw_scores)
    ]
    kept = [t for t in scored if t[2] >= config.sigmoid_threshold]
    kept.sort(key=lambda t: (-t[2], t[0].doc_position, t[0].id))
    return kept[: config.rerank_keep]


def strip_context(chunk: Chunk, source_text: str) -> str:
    """Return the source substring at the chunk's core span, discarding any
    ancestor/descendant context regardless of chunk kind."""
    start, end = chunk.core_span
    if start < 0 or end > len(source_text) or start > end:
        raise SpanOutOfBounds(f"span {chunk.core_span} outside source of length {len(source_text)}")
    return source_text[start:end]


def llm_filter(
    query: str,
    top_spans: Sequence[SpanHit],
    chat_client,
) -> list[SpanHit]:
    """One chat call extracting the most relevant sub-span per input span.

    Sub-spans must occur verbatim in their parent span; anything the model
    invents is dropped with a warning. Parent ordering is preserved.
    """
    if not top_spans:
        return []
    numbered = "\n\n".join(f"[{i}] {s.text}" for i, s in enumerate(top_spans))
    completion = chat_client.complete(
        [
            {
                "role": "system",
                "content": (
                    "For each numbered passage, extract the sub-span most relevant "
                    "to the question, copied verbatim. Reply with a JSON array of "
                    'objects {"index": int, "text": str}.'
                ),
            },
            {"role": "user", "content": f"Question: {query}\n\nPassages:\n{numbered}"},
        ],
        role="filter",
    )
    try:
        extracted = json.loads(completion)
    except json.JSONDecodeError:
        logger.warning("sub-span filter returned non-JSON output; keeping original spans")
        return list(top_spans)
    out: list[SpanHit] = []
    by_index: dict[int, str] = {}
    for item in extracted if isinstance(extracted, list) else []:
        try:
            by_index[int(item["index"])] = str(item["text"])
        except (KeyError, TypeError, ValueError):
            continue
    for i, parent in enumerate(top_spans):
        sub = by_index.get(i)
        if sub is None:
            continue
        offset = parent.text.find(sub)
        if offset < 0:
            logger.warning("filtered sub-span not found verbatim in parent; dropped")
            continue
        start = parent.core_span[0] + offset
        out.append(
            SpanHit(
                text=sub,
                core_span=(start, start + len(sub)),
                filename=parent.filename,
                node_path=parent.node_path,
                fused_rank=parent.fused_rank,
                rerank_score_raw=parent.rerank_score_raw,
                rerank_score_norm=parent.rerank_score_norm,
            )
        )
    return out


_EMPTY_TRACE = {
    "bm25": 0,
    "dense": 0,
    "candidates": 0,
    "fused": 0,
    "reranked": 0,
    "kept": 0,
    "final": 0,
}


def optimize_query(question: str, chat_client, tool_descriptions: Optional[str] = None) -> str:
    """Single chat call rewriting the question into a search query; the
    prompt doubles as the tool-selection step when tools are described."""
    system = (
        "Rewrite the user's legal question into a concise search query over the "
        "contract. Reply with the query text only."
    )
    if tool_descriptions:
        system += (
            " Available retrieval tools:\n" + tool_descriptions + "\n"
            'If a tool other than in-document search fits better, reply with JSON '
            '{"tool": name, "query": text} instead.'
        )
    return chat_client.complete(
        [{"role": "system", "content": system}, {"role": "user", "content": question}],
        role="researcher_query_extract",
    ).strip()


def retrieve(
    query: str,
    index: ChunkIndex,
    sources: Mapping[str, str],
    embedder,
    rerank_client,
    chat_client=None,
    config: Optional[RetrievalConfig] = None,
    pre_optimized_query: Optional[str] = None,
) -> RetrievalResult:
    """Full in-document pipeline. ``sources`` maps filename to source text
    for context stripping. When ``pre_optimized_query`` is given the query
    extraction chat call is skipped (the caller already made it)."""
    config = config or RetrievalConfig()
    if len(index) == 0:
        return RetrievalResult(stage_trace=dict(_EMPTY_TRACE))

    if pre_optimized_query is not None:
        search_query = pre_optimized_query
    elif chat_client is not None:
        search_query = optimize_query(query, chat_client)
    else:
        search_query = query

    lexical = bm25_search(index, search_query, config.bm25_top_n, config.bm25_min_norm_score)
    qvec = embedder.embed([search_query])[0]
    dense = dense_search(index, qvec, config.dense_top_n)

    rankings = [[cid for cid, _ in lexical], [cid for cid, _ in dense]]
    rankings = [r for r in rankings if r] or [[]]
    if rankings == [[]]:
        trace = dict(_EMPTY_TRACE)
        trace["bm25"], trace["dense"] = len(lexical), len(dense)
        return RetrievalResult(stage_trace=trace)
    fused = rrf_fuse(rankings, config.rrf_weights, config.rrf_k)
    fused_top = fused[: config.fused_top_n]
    candidates = [index.by_id[cid] for cid, _ in fused_top]
    fused_rank = {cid: r for r, (cid, _) in enumerate(fused_top, start=1)}

    reranked = rerank_and_threshold(query, candidates, rerank_client, config)

    spans: list[SpanHit] = []
    for chunk, raw, norm in reranked:
        source = sources.get(chunk.filename, "")
        spans.append(
            SpanHit(
                text=strip_context(chunk, source),
                core_span=chunk.core_span,
                filename=chunk.filename,
                node_path=chunk.node_path,
                fused_rank=fused_rank[chunk.id],
                rerank_score_raw=raw,
                rerank_score_norm=norm,
            )
        )

    final = spans
    if config.llm_filter and chat_client is not None:
        final = llm_filter(query, spans[: config.answer_top_k], chat_client)

    trace = {
        "bm25": len(lexical),
        "dense": len(dense),
        "candidates": len(fused),
        "fused": len(fused_top),
        "reranked": len(reranked),
        "kept": len(spans),
        "final": len(final),
    }
    return RetrievalResult(spans=final, stage_trace=trace)
