"""
The interrogation loop end to end, fully offline
================================================

Runs brief collection, the question/research/refine loop, and report
rendering against scripted chat completions — no network, no model keys.
The cost ledger at the end matches the closed-form call budget.
Run with: python3 demos/03_mock_interrogation.py
"""

import json

from contractengine import (
    ArchivistSession,
    ChunkIndex,
    CostLedger,
    HashEmbedder,
    LexicalOverlapReranker,
    ResearchResources,
    RetrievalConfig,
    ScriptedChatClient,
    assemble_chunk_set,
    expected_call_count,
    parse_document,
    render_report_markdown,
    run_interrogation,
)

CONTRACT = """\
1. Payment terms
1.1 The buyer pays invoices within thirty days of receipt.
2. Termination rights
2.1 Either party may terminate upon ninety days written notice.
"""

REPORT_MD = """## Title: Termination notice requirements

### Summary:
Either party may exit the agreement with sufficient notice [1].

### Legal Reasoning & Analysis:
Clause 2.1 grants a unilateral termination right conditioned on ninety
days written notice [1].

### Preliminary Answer & Direction for Further Research:
Yes — termination is available to both parties on ninety days notice [1].

### Gaps & Next Questions:
- Does any clause shorten the notice period for material breach?

### Sources:
1. "Either party may terminate upon ninety days written notice." — Clause 2.1 — contract.txt
"""

ledger = CostLedger()
chat = ScriptedChatClient(
    [
        "Got it. Which clause concerns you?",  # archivist turn 1
        json.dumps({"query": "Can we terminate the contract early?"}),  # finalize
        "What notice period applies to termination?",  # interrogator question
        "terminate ninety days written notice",  # researcher query extraction
        REPORT_MD,  # report refinement
        "Thank you, I am now in a position to answer the question with confidence.",
    ],
    ledger=ledger,
)

session = ArchivistSession()
print("archivist:", session.converse("I want out of this contract.", chat))
brief = session.finalize(chat)
print("brief:", brief)

embedder = HashEmbedder(dim=64)
tree = parse_document(CONTRACT, filename="contract.txt")
resources = ResearchResources(
    index=ChunkIndex.build(assemble_chunk_set(tree), embedder=embedder),
    sources={"contract.txt": CONTRACT},
)

report, state = run_interrogation(
    brief,
    resources,
    chat,
    embedder,
    LexicalOverlapReranker(),
    config=RetrievalConfig(sigmoid_threshold=0.0),
)

print(f"\nstopped by: {state.stopped_by} after {len(state.turns)} turn(s)")
print(render_report_markdown(report))

# one archivist turn, one finalize, one interrogation round of three calls;
# stopping on the confidence phrase costs one extra question call beyond the
# per-round budget (a turn-cap stop costs none)
budget = expected_call_count(n_turns=1, d_int=len(state.turns))
print(f"ledger: {ledger.count()} calls = budget {budget} + 1 stop check")
