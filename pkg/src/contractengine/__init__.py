"""Contract-analysis engine: hierarchical document parsing, hybrid
lexical/dense retrieval with rank fusion and reranking, and an iterative
interrogation loop producing citation-grounded legal reports."""

from .agents import (
    ArchivistSession,
    InterrogationState,
    ResearchResources,
    UserBrief,
    interrogator_next_question,
    refine_report,
    researcher_answer,
    run_interrogation,
)
from .chunker import Chunk, ChunkKind, assemble_chunk_set, make_chunks
from .doctree import (
    DocumentTree,
    ParseOptions,
    SectionNode,
    build_hierarchy,
    detect_sections,
    parse_document,
    summarize_document,
)
from .engine import Engine, EngineConfig
from .evalharness import (
    BenchmarkCase,
    MetricsReport,
    char_pr_at_k,
    char_volume_stats,
    perfect_oracle,
    run_benchmark,
    span_pr_at_k,
)
from .gateway import (
    CostLedger,
    HashEmbedder,
    LexicalOverlapReranker,
    ProviderProfile,
    ScriptedChatClient,
    expected_call_count,
)
from .index import (
    ChunkIndex,
    CorpusGraph,
    bm25_search,
    cross_document_examples,
    dense_search,
    load_index,
    route_query,
    save_index,
)
from .report import Report, extract_nli_label, parse_report_markdown, render_report_markdown
from .retrieval import (
    RetrievalConfig,
    RetrievalResult,
    llm_filter,
    rerank_and_threshold,
    retrieve,
    rrf_fuse,
    strip_context,
)

__version__ = "0.1.0"
