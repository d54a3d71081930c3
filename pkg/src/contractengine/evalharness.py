"""Retrieval benchmarking: character- and span-overlap precision/recall at
k, perfect-retrieval upper bounds, and retrieved-character volume stats.

Corpus layout on disk: a directory holding ``cases.jsonl`` (one case per
line: {case_id, query, document_id, spans: [[start, end), ...]}) and the
documents as raw UTF-8 text files named by document_id.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .chunker import assemble_chunk_set
from .doctree import parse_document
from .errors import EmptyGroundTruth, EngineError
from .index import ChunkIndex
from .retrieval import RetrievalConfig, retrieve

logger = logging.getLogger(__name__)

DEFAULT_K_GRID = (1, 2, 4, 8, 16, 32, 64)

Span = tuple[int, int]


@dataclass
class BenchmarkCase:
    case_id: str
    query: str
    document_id: str
    ground_truth: list[Span]

    def __post_init__(self) -> None:
        merged = merge_spans(self.ground_truth)
        if len(merged) != len(self.ground_truth):
            logger.warning("case %s: overlapping ground-truth spans merged", self.case_id)
        self.ground_truth = merged


def merge_spans(spans: Sequence[Span]) -> list[Span]:
    """Normalize to sorted, non-overlapping half-open intervals."""
    cleaned = sorted((int(a), int(b)) for a, b in spans if b > a)
    out: list[Span] = []
    for a, b in cleaned:
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _char_count(spans: Sequence[Span]) -> int:
    return sum(b - a for a, b in spans)


def _intersection_size(a: Sequence[Span], b: Sequence[Span]) -> int:
    total = 0
    for a0, a1 in a:
        for b0, b1 in b:
            total += max(0, min(a1, b1) - max(a0, b0))
    return total


def char_pr_at_k(
    retrieved: Sequence[Span], truth: Sequence[Span], k: int
) -> tuple[float, float]:
    """Precision/recall over the characters covered by the top-k retrieved
    spans (each character counted once) against the ground-truth characters."""
    if k < 1:
        raise ValueError("k must be >= 1")
    truth_merged = merge_spans(truth)
    if not truth_merged:
        raise EmptyGroundTruth("ground truth has no characters")
    top = merge_spans(retrieved[:k])
    retrieved_chars = _char_count(top)
    overlap = _intersection_size(top, truth_merged)
    precision = overlap / retrieved_chars if retrieved_chars else 0.0
    recall = overlap / _char_count(truth_merged)
    return precision, recall


def span_pr_at_k(
    retrieved: Sequence[Span], truth: Sequence[Span], k: int
) -> tuple[float, float]:
    """Binary overlap metrics: a retrieved span is a hit if it overlaps any
    ground-truth span. Recall counts ground-truth spans overlapped by at
    least one of the top-k retrieved spans."""
    if k < 1:
        raise ValueError("k must be >= 1")
    truth_list = merge_spans(truth)
    if not truth_list:
        raise EmptyGroundTruth("ground truth has no spans")
    top = list(retrieved[:k])
    if not top:
        return 0.0, 0.0
    hits = sum(
        1 for r in top if any(min(r[1], t[1]) > max(r[0], t[0]) for t in truth_list)
    )
    covered = sum(
        1 for t in truth_list if any(min(r[1], t[1]) > max(r[0], t[0]) for r in top)
    )
    return hits / min(k, len(top)), covered / len(truth_list)


def perfect_oracle(case: BenchmarkCase) -> list[Span]:
    """Upper-bound retrieval: the ground-truth spans themselves, in order."""
    return list(case.ground_truth)


def char_volume_stats(
    results: Sequence[Sequence[Span]], k_grid: Sequence[int] = DEFAULT_K_GRID
) -> dict[int, float]:
    """Arithmetic mean of total characters in the top-k spans across cases."""
    out: dict[int, float] = {}
    for k in k_grid:
        if not results:
            out[k] = 0.0
            continue
        out[k] = sum(_char_count(r[:k]) for r in results) / len(results)
    return out


@dataclass
class MetricsReport:
    k_grid: tuple[int, ...]
    precision_char: dict[int, float] = field(default_factory=dict)
    recall_char: dict[int, float] = field(default_factory=dict)
    precision_span: dict[int, float] = field(default_factory=dict)
    recall_span: dict[int, float] = field(default_factory=dict)
    avg_chars_retrieved: dict[int, float] = field(default_factory=dict)
    n_cases: int = 0
    failures: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "k_grid": list(self.k_grid),
                "precision_char": {str(k): v for k, v in self.precision_char.items()},
                "recall_char": {str(k): v for k, v in self.recall_char.items()},
                "precision_span": {str(k): v for k, v in self.precision_span.items()},
                "recall_span": {str(k): v for k, v in self.recall_span.items()},
                "avg_chars_retrieved": {str(k): v for k, v in self.avg_chars_retrieved.items()},
                "n_cases": self.n_cases,
                "failures": self.failures,
            },
            indent=2,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["k", "precision_char", "recall_char", "precision_span", "recall_span", "avg_chars_retrieved"]
        )
        for k in self.k_grid:
            writer.writerow(
                [
                    k,
                    f"{self.precision_char[k]:.6f}",
                    f"{self.recall_char[k]:.6f}",
                    f"{self.precision_span[k]:.6f}",
                    f"{self.recall_span[k]:.6f}",
                    f"{self.avg_chars_retrieved[k]:.6f}",
                ]
            )
        return buf.getvalue()


def load_corpus(corpus_dir: str) -> tuple[list[BenchmarkCase], dict[str, str]]:
    cases_path = os.path.join(corpus_dir, "cases.jsonl")
    if not os.path.exists(cases_path):
        raise EngineError(f"no cases.jsonl in {corpus_dir}")
    cases: list[BenchmarkCase] = []
    with open(cases_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            cases.append(
                BenchmarkCase(
                    case_id=str(d["case_id"]),
                    query=d["query"],
                    document_id=d["document_id"],
                    ground_truth=[tuple(s) for s in d["spans"]],
                )
            )
    if not cases:
        raise EngineError(f"empty corpus: no cases in {cases_path}")
    documents: dict[str, str] = {}
    for doc_id in {c.document_id for c in cases}:
        path = os.path.join(corpus_dir, doc_id)
        with open(path, encoding="utf-8") as fh:
            documents[doc_id] = fh.read()
    return cases, documents


def aggregate(
    per_case_spans: dict[str, list[Span]],
    cases: Sequence[BenchmarkCase],
    k_grid: Sequence[int] = DEFAULT_K_GRID,
    failures: Optional[list[str]] = None,
) -> MetricsReport:
    """Deterministic fold over cases in input order."""
    report = MetricsReport(k_grid=tuple(k_grid), n_cases=len(per_case_spans), failures=failures or [])
    evaluated = [c for c in cases if c.case_id in per_case_spans]
    for k in k_grid:
        pc = rc = ps = rs = 0.0
        for case in evaluated:
            spans = per_case_spans[case.case_id]
            p1, r1 = char_pr_at_k(spans, case.ground_truth, k)
            p2, r2 = span_pr_at_k(spans, case.ground_truth, k)
            pc += p1
            rc += r1
            ps += p2
            rs += r2
        n = len(evaluated) or 1
        report.precision_char[k] = pc / n
        report.recall_char[k] = rc / n
        report.precision_span[k] = ps / n
        report.recall_span[k] = rs / n
    report.avg_chars_retrieved = char_volume_stats(
        [per_case_spans[c.case_id] for c in evaluated], k_grid
    )
    return report


def run_benchmark(
    corpus_dir: str,
    embedder,
    rerank_client,
    chat_client=None,
    config: Optional[RetrievalConfig] = None,
    k_grid: Sequence[int] = DEFAULT_K_GRID,
    output_dir: Optional[str] = None,
) -> MetricsReport:
    """Index each document, submit each query straight to the retrieval
    pipeline (no interrogation loop), and aggregate both metric families.

    Per-case errors are collected in the report, not fatal.
    """
    config = config or RetrievalConfig()
    cases, documents = load_corpus(corpus_dir)

    indexes: dict[str, ChunkIndex] = {}
    for doc_id, text in documents.items():
        tree = parse_document(text, filename=doc_id)
        chunks = assemble_chunk_set(tree)
        indexes[doc_id] = ChunkIndex.build(chunks, embedder=embedder, descriptor=doc_id)

    per_case: dict[str, list[Span]] = {}
    failures: list[str] = []
    for case in cases:
        try:
            result = retrieve(
                case.query,
                indexes[case.document_id],
                {case.document_id: documents[case.document_id]},
                embedder,
                rerank_client,
                chat_client=chat_client,
                config=config,
            )
            per_case[case.case_id] = [s.core_span for s in result.spans]
        except EngineError as exc:
            failures.append(f"{case.case_id}: {exc}")

    report = aggregate(per_case, cases, k_grid, failures)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        with open(os.path.join(output_dir, "metrics.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
        with open(os.path.join(output_dir, "metrics.json"), "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    return report
