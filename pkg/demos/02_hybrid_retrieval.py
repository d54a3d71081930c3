"""
Hybrid retrieval: lexical + dense fusion, reranking, span stripping
===================================================================

Builds an in-memory index over a contract and traces a query through the
full pipeline (BM25, cosine search, reciprocal-rank fusion, reranking,
sigmoid thresholding, context stripping) using the deterministic offline
embedder and reranker. Run with: python3 demos/02_hybrid_retrieval.py
"""

from contractengine import (
    ChunkIndex,
    HashEmbedder,
    LexicalOverlapReranker,
    RetrievalConfig,
    assemble_chunk_set,
    bm25_search,
    parse_document,
    retrieve,
)

CONTRACT = """\
1. Payment terms
1.1 The buyer pays invoices within thirty days of receipt.
2. Confidentiality obligations
2.1 The receiving party protects confidential information carefully.
3. Termination rights
3.1 Either party may terminate upon ninety days written notice.
"""

embedder = HashEmbedder(dim=64)
tree = parse_document(CONTRACT, filename="c.txt")
index = ChunkIndex.build(assemble_chunk_set(tree), embedder=embedder)

query = "how much notice to terminate the agreement"

# the lexical branch alone, with raw scores
print("BM25 branch:")
for cid, score in bm25_search(index, query, top_n=5, min_norm_score=0.0)[:5]:
    print(f"  {score:7.3f}  {cid}")

# the whole pipeline; spans come back stripped to their core node text
result = retrieve(
    query,
    index,
    {"c.txt": CONTRACT},
    embedder,
    LexicalOverlapReranker(),
    pre_optimized_query="terminate ninety days written notice",
    config=RetrievalConfig(sigmoid_threshold=0.0),
)

print("\nstage trace:", result.stage_trace)
print("\ntop spans:")
for s in result.spans[:3]:
    print(f"  norm={s.rerank_score_norm:.3f}  [{s.core_span[0]}:{s.core_span[1]}]  {s.text.strip()!r}")
