import json

import pytest

from contractengine.agents import (
    ArchivistSession,
    InterrogationState,
    ResearchResources,
    StopDecision,
    Turn,
    UserBrief,
    archivist_converse,
    interrogator_next_question,
    refine_report,
    researcher_answer,
    run_interrogation,
)
from contractengine.chunker import assemble_chunk_set
from contractengine.doctree import parse_document
from contractengine.errors import EngineError, SchemaViolation, UpstreamError
from contractengine.gateway import (
    CostLedger,
    HashEmbedder,
    LexicalOverlapReranker,
    RuleChatClient,
    ScriptedChatClient,
)
from contractengine.index import ChunkIndex, CorpusGraph, GraphGroup, GraphLeaf
from contractengine.retrieval import RetrievalConfig, RetrievalResult, SpanHit, sigmoid

from test_index import make_chunk
from test_report import GOOD_MD

CONTRACT = (
    "1. Payment terms\n"
    "1.1 The buyer pays invoices within thirty days of receipt.\n"
    "2. Confidentiality obligations\n"
    "2.1 The receiving party protects confidential information carefully.\n"
    "3. Termination rights\n"
    "3.1 Either party may terminate upon ninety days written notice.\n"
)


@pytest.fixture
def resources():
    embedder = HashEmbedder(dim=64)
    tree = parse_document(CONTRACT, filename="c.txt")
    chunks = assemble_chunk_set(tree)
    index = ChunkIndex.build(chunks, embedder=embedder)
    return ResearchResources(index=index, sources={"c.txt": CONTRACT}), embedder


# ── archivist ────────────────────────────────────────────────────────── #


def test_archivist_two_turns_plus_finalize_is_three_records():
    ledger = CostLedger()
    chat = ScriptedChatClient(
        [
            "What contract is this about?",
            "Any special instructions?",
            json.dumps({"query": "Can the buyer terminate early?", "context": "NDA", "instructions": ""}),
        ],
        ledger=ledger,
    )
    session = ArchivistSession()
    archivist_converse(session, "I have a question about my NDA.", chat)
    archivist_converse(session, "Can the buyer terminate early?", chat)
    brief = archivist_converse(session, None, chat)
    assert isinstance(brief, UserBrief)
    assert brief.query == "Can the buyer terminate early?"
    assert brief.context == "NDA"
    assert ledger.count("archivist_turn") == 2
    assert ledger.count("archivist_finalize") == 1
    assert ledger.count() == 3
    assert session.n_turns == 2


def test_archivist_non_json_finalize_falls_back_to_text():
    chat = ScriptedChatClient(["noted", "Is the notice period ninety days?"])
    session = ArchivistSession()
    session.converse("notice question", chat)
    brief = session.finalize(chat)
    assert brief.query == "Is the notice period ninety days?"


def test_archivist_empty_session_cannot_finalize():
    with pytest.raises(EngineError):
        ArchivistSession().finalize(ScriptedChatClient(["{}"]))


def test_archivist_finalized_session_rejects_more_turns():
    chat = ScriptedChatClient(["ok", '{"query": "q"}'])
    session = ArchivistSession()
    session.converse("q", chat)
    session.finalize(chat)
    with pytest.raises(EngineError):
        session.converse("more", chat)


def test_brief_requires_query():
    with pytest.raises(ValueError):
        UserBrief(query="   ")


# ── researcher ───────────────────────────────────────────────────────── #


def test_researcher_one_call_without_nl_response(resources):
    res, embedder = resources
    ledger = CostLedger()
    chat = ScriptedChatClient(["terminate ninety days notice"], ledger=ledger)
    answer = researcher_answer(
        "How can a party terminate?", res, chat, embedder, LexicalOverlapReranker(),
        config=RetrievalConfig(sigmoid_threshold=0.0),
    )
    assert ledger.count() == 1
    assert ledger.records[0].role == "researcher_query_extract"
    assert answer.result.nl_answer is None
    assert "ninety days" in answer.result.spans[0].text


def test_researcher_two_calls_with_nl_response(resources):
    res, embedder = resources
    ledger = CostLedger()
    chat = ScriptedChatClient(
        ["terminate ninety days notice", "Either party may terminate on ninety days notice."],
        ledger=ledger,
    )
    answer = researcher_answer(
        "How can a party terminate?", res, chat, embedder, LexicalOverlapReranker(),
        config=RetrievalConfig(sigmoid_threshold=0.0), nl_response=True,
    )
    assert ledger.count() == 2
    assert ledger.count("researcher_nl_response") == 1
    assert answer.result.nl_answer.startswith("Either party")


def test_researcher_cross_document_attaches_examples(resources):
    res, embedder = resources
    leaf = GraphLeaf(
        index=ChunkIndex.build([make_chunk(0, "the clause supports the claim")], embedder=embedder),
        descriptor="entailment examples",
        label="entailment",
    )
    res = ResearchResources(
        index=res.index,
        sources=res.sources,
        graph=CorpusGraph(root=GraphGroup(children=[leaf], descriptor="all")),
    )
    chat = ScriptedChatClient([json.dumps({"tool": "cross_document", "query": "supportive clause"})])
    answer = researcher_answer(
        "Is the claim supported?", res, chat, embedder, LexicalOverlapReranker(),
        config=RetrievalConfig(sigmoid_threshold=0.0),
    )
    assert answer.tool == "cross_document"
    assert answer.examples and answer.examples[0][1] == "entailment"


# ── interrogator ─────────────────────────────────────────────────────── #


def make_state(d_max=5, turns=()):
    state = InterrogationState(brief=UserBrief(query="Can the buyer terminate?"), d_max=d_max)
    for q in turns:
        state.turns.append(Turn(question=q, research_answer=RetrievalResult()))
    return state


def test_interrogator_returns_question():
    out = interrogator_next_question(make_state(), ScriptedChatClient(["What is the notice period?"]))
    assert out == "What is the notice period?"


def test_interrogator_stop_phrase_case_insensitive():
    out = interrogator_next_question(
        make_state(),
        ScriptedChatClient(["Thank you, I AM NOW IN A POSITION TO ANSWER the question."]),
    )
    assert isinstance(out, StopDecision)
    assert out.reason == "confidence_phrase"


def test_interrogator_turn_cap_checked_before_any_call():
    # an exhausted client raises on any call, so hitting the cap must not call it
    out = interrogator_next_question(make_state(d_max=1, turns=["q1"]), ScriptedChatClient([]))
    assert isinstance(out, StopDecision)
    assert out.reason == "turn_cap"


def test_interrogator_duplicate_regeneration_then_cap():
    ledger = CostLedger()
    chat = ScriptedChatClient(["q1", "q1", "q1", "q1"], ledger=ledger)
    out = interrogator_next_question(make_state(turns=["q1"]), chat)
    assert isinstance(out, StopDecision)
    assert out.reason == "turn_cap"
    assert ledger.count() == 3  # initial attempt + two regenerations


def test_interrogator_regeneration_recovers():
    chat = ScriptedChatClient(["", "q2"])
    assert interrogator_next_question(make_state(turns=["q1"]), chat) == "q2"


# ── report refinement ────────────────────────────────────────────────── #


def turn_with_evidence():
    hit = SpanHit(
        text="Either party may terminate upon ninety days written notice.",
        core_span=(0, 59),
        filename="c.txt",
        node_path=("3. Termination rights", "3.1"),
        fused_rank=1,
        rerank_score_raw=2.0,
        rerank_score_norm=sigmoid(2.0),
    )
    return Turn(
        question="What is the termination notice period?",
        research_answer=RetrievalResult(spans=[hit]),
    )


def test_refine_report_valid_completion():
    chat = ScriptedChatClient([GOOD_MD])
    report = refine_report(make_state(), turn_with_evidence(), chat)
    assert report.title
    assert report.sources


def test_refine_report_repair_path():
    ledger = CostLedger()
    chat = ScriptedChatClient(["not even markdown", GOOD_MD], ledger=ledger)
    report = refine_report(make_state(), turn_with_evidence(), chat)
    assert report.title
    assert ledger.count("report_refine") == 2


def test_refine_report_double_failure_raises():
    chat = ScriptedChatClient(["garbage", "still garbage"])
    with pytest.raises(SchemaViolation):
        refine_report(make_state(), turn_with_evidence(), chat)


# ── full loop ────────────────────────────────────────────────────────── #


def test_run_interrogation_one_turn_then_confidence(resources):
    res, embedder = resources
    ledger = CostLedger()
    chat = ScriptedChatClient(
        [
            "What is the termination notice period?",
            "terminate ninety days notice",
            GOOD_MD,
            "Thank you, I am now in a position to answer the question with confidence.",
        ],
        ledger=ledger,
    )
    report, state = run_interrogation(
        UserBrief(query="Can either party terminate?"),
        res,
        chat,
        embedder,
        LexicalOverlapReranker(),
        config=RetrievalConfig(sigmoid_threshold=0.0),
    )
    assert state.stopped_by == "confidence_phrase"
    assert len(state.turns) == 1
    assert report.title
    assert ledger.count() == 4


def test_run_interrogation_turn_cap_with_never_stopping_client(resources):
    res, embedder = resources
    counter = {"q": 0}

    def responder(messages, role):
        if role == "interrogator_question":
            counter["q"] += 1
            return f"Unique question number {counter['q']}?"
        if role == "researcher_query_extract":
            return "termination notice"
        return GOOD_MD

    ledger = CostLedger()
    chat = RuleChatClient(responder, ledger=ledger)
    report, state = run_interrogation(
        UserBrief(query="Can either party terminate?"),
        res,
        chat,
        embedder,
        LexicalOverlapReranker(),
        d_max=2,
        config=RetrievalConfig(sigmoid_threshold=0.0),
    )
    assert state.stopped_by == "turn_cap"
    assert len(state.turns) == 2
    # cost model: no archivist here, 2 rounds * 3 calls each
    assert ledger.count() == 6


def test_run_interrogation_on_turn_callback(resources):
    res, embedder = resources
    seen = []
    chat = ScriptedChatClient(
        [
            "What is the termination notice period?",
            "terminate ninety days notice",
            GOOD_MD,
            "Thank you, I am now in a position to answer the question with confidence.",
        ]
    )
    run_interrogation(
        UserBrief(query="q"),
        res,
        chat,
        embedder,
        LexicalOverlapReranker(),
        config=RetrievalConfig(sigmoid_threshold=0.0),
        on_turn=lambda s: seen.append(len(s.turns)),
    )
    assert seen == [1]


def test_run_interrogation_error_attaches_partial_state(resources):
    res, embedder = resources
    chat = ScriptedChatClient(["What is the notice period?"])  # exhausts mid-round
    with pytest.raises(UpstreamError) as excinfo:
        run_interrogation(
            UserBrief(query="q"), res, chat, embedder, LexicalOverlapReranker()
        )
    assert isinstance(excinfo.value.state, InterrogationState)
    assert excinfo.value.state.turns == []


def test_run_interrogation_rejects_bad_d_max(resources):
    res, embedder = resources
    with pytest.raises(ValueError):
        run_interrogation(
            UserBrief(query="q"), res, ScriptedChatClient([]), embedder,
            LexicalOverlapReranker(), d_max=0,
        )
