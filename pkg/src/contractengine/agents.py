"""The three agent state machines: user-brief collection and ingestion,
retrieval-backed answering, and the iterative question/report loop.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

from .errors import EngineError, SchemaViolation, UpstreamError
from .index import ChunkIndex, CorpusGraph, cross_document_examples
from .report import (
    Report,
    parse_report_markdown,
    render_report_markdown,
    validate_report,
)
from .retrieval import RetrievalConfig, RetrievalResult, retrieve

logger = logging.getLogger(__name__)

# the distinctive clause of the scripted completion sentence that signals
# the questioner is done; matched case-insensitively as a substring
STOP_PHRASE = "i am now in a position to answer"
DEFAULT_D_MAX = 5
MAX_QUESTION_RETRIES = 2


@dataclass
class UserBrief:
    query: str
    context: str = ""
    instructions: str = ""

    def __post_init__(self) -> None:
        if not self.query.strip():
            raise ValueError("brief query must be nonempty")


@dataclass
class Turn:
    question: str
    research_answer: RetrievalResult


@dataclass
class StopDecision:
    reason: str  # confidence_phrase | turn_cap


@dataclass
class InterrogationState:
    brief: UserBrief
    d_max: int = DEFAULT_D_MAX
    turns: list[Turn] = field(default_factory=list)
    report: Optional[Report] = None
    stopped_by: str = "none"  # confidence_phrase | turn_cap | none


# ── Archivist ────────────────────────────────────────────────────────── #


class ArchivistSession:
    """Dialogue with the user to assemble a complete brief; each user
    message costs one chat call, finalization one more."""

    def __init__(self) -> None:
        self.messages: list[dict] = []
        self.brief: Optional[UserBrief] = None

    @property
    def n_turns(self) -> int:
        return sum(1 for m in self.messages if m["role"] == "user")

    def converse(self, user_message: str, chat_client) -> str:
        if self.brief is not None:
            raise EngineError("session already finalized")
        self.messages.append({"role": "user", "content": user_message})
        reply = chat_client.complete(
            [
                {
                    "role": "system",
                    "content": (
                        "You intake legal questions about a contract. Ask for any "
                        "missing detail (the question itself, background context, "
                        "special instructions); be brief."
                    ),
                }
            ]
            + self.messages,
            role="archivist_turn",
        )
        self.messages.append({"role": "assistant", "content": reply})
        return reply

    def finalize(self, chat_client) -> UserBrief:
        if not any(m["role"] == "user" for m in self.messages):
            raise EngineError("cannot finalize an empty session: a query is required")
        completion = chat_client.complete(
            [
                {
                    "role": "system",
                    "content": (
                        "Distill the conversation into JSON "
                        '{"query": str, "context": str, "instructions": str}. '
                        "The query is the user's legal question."
                    ),
                }
            ]
            + self.messages,
            role="archivist_finalize",
        )
        try:
            data = json.loads(completion)
            brief = UserBrief(
                query=str(data["query"]),
                context=str(data.get("context", "")),
                instructions=str(data.get("instructions", "")),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            # non-JSON completion: treat it as the distilled query itself
            text = completion.strip()
            if not text:
                raise SchemaViolation("finalize completion empty; query required")
            brief = UserBrief(query=text)
        self.brief = brief
        return brief


def archivist_converse(
    session: ArchivistSession, user_message: Optional[str], chat_client
) -> Union[str, UserBrief]:
    """One dialogue step; pass ``user_message=None`` to finalize."""
    if user_message is None:
        return session.finalize(chat_client)
    return session.converse(user_message, chat_client)


# ── Researcher ───────────────────────────────────────────────────────── #


@dataclass
class ResearchResources:
    index: ChunkIndex
    sources: Mapping[str, str]
    graph: Optional[CorpusGraph] = None  # cross-document few-shot examples
    extra_tools: dict[str, Callable[[str], RetrievalResult]] = field(default_factory=dict)


@dataclass
class ResearchAnswer:
    result: RetrievalResult
    examples: list = field(default_factory=list)  # (chunk, label) few-shot pairs
    tool: str = "in_document"


def _tool_descriptions(resources: ResearchResources) -> Optional[str]:
    tools = ["in_document: hybrid search inside the contract under analysis"]
    if resources.graph is not None:
        tools.append("cross_document: labeled example passages from other contracts")
    tools.extend(f"{name}: external tool" for name in resources.extra_tools)
    return "\n".join(tools) if len(tools) > 1 else None


def researcher_answer(
    question: str,
    resources: ResearchResources,
    chat_client,
    embedder,
    rerank_client,
    config: Optional[RetrievalConfig] = None,
    nl_response: bool = False,
) -> ResearchAnswer:
    """Answer one interrogation question.

    Tool selection is folded into the single query-extraction call; an
    optional second call summarizes the stripped spans in prose.
    """
    config = config or RetrievalConfig()
    from .retrieval import optimize_query

    completion = optimize_query(question, chat_client, _tool_descriptions(resources))
    tool, search_query = "in_document", completion
    try:
        data = json.loads(completion)
        if isinstance(data, dict) and "tool" in data:
            tool = str(data["tool"])
            search_query = str(data.get("query", question))
    except json.JSONDecodeError:
        pass
    if not search_query.strip():
        search_query = question

    examples: list = []
    if tool == "cross_document" and resources.graph is not None:
        examples = cross_document_examples(resources.graph, search_query, embedder)

    result = retrieve(
        question,
        resources.index,
        resources.sources,
        embedder,
        rerank_client,
        chat_client=chat_client,
        config=config,
        pre_optimized_query=search_query,
    )

    if nl_response:
        evidence = "\n\n".join(s.text for s in result.spans[: config.answer_top_k])
        result.nl_answer = chat_client.complete(
            [
                {
                    "role": "system",
                    "content": (
                        "Answer the question using only the evidence passages; "
                        "quote the passages you rely on."
                    ),
                },
                {"role": "user", "content": f"Question: {question}\n\nEvidence:\n{evidence}"},
            ],
            role="researcher_nl_response",
        )
    return ResearchAnswer(result=result, examples=examples, tool=tool)


# ── Interrogator ─────────────────────────────────────────────────────── #


def _question_messages(state: InterrogationState) -> list[dict]:
    prior = "\n".join(f"- {t.question}" for t in state.turns) or "(none yet)"
    report_md = render_report_markdown(state.report, with_disclaimer=False) if state.report else "(no draft yet)"
    remaining = state.d_max - len(state.turns)
    system = (
        "You are a meticulous legal interrogator questioning a researcher who can "
        "search the contract. Ask one precise question at a time that fills the "
        "biggest gap in the draft report. Avoid redundancy with prior questions. "
        f"You have {remaining} questions remaining.\n"
        "When the draft already answers the user's question with confidence, reply "
        'exactly: "Thank you, I am now in a position to answer the question with '
        'confidence."'
    )
    user = (
        f"Legal question: {state.brief.query}\n"
        f"Context: {state.brief.context or '(none)'}\n"
        f"Instructions: {state.brief.instructions or '(none)'}\n\n"
        f"Draft report:\n{report_md}\n\n"
        f"Questions asked so far:\n{prior}\n\n"
        "Ask your next question."
    )
    return [{"role": "system", "content": system}, {"role": "user", "content": user}]


def interrogator_next_question(
    state: InterrogationState, chat_client
) -> Union[str, StopDecision]:
    """Next question, or a stop decision when the confidence phrase fires or
    the turn budget is spent. Empty or byte-identical repeat questions are
    regenerated at most twice, then treated as a turn-cap stop."""
    if state.stopped_by != "none":
        raise EngineError("interrogation already stopped")
    if len(state.turns) >= state.d_max:
        return StopDecision("turn_cap")
    previous = {t.question for t in state.turns}
    for _ in range(MAX_QUESTION_RETRIES + 1):
        completion = chat_client.complete(_question_messages(state), role="interrogator_question")
        if STOP_PHRASE in completion.lower():
            return StopDecision("confidence_phrase")
        question = completion.strip()
        if question and question not in previous:
            return question
        logger.warning("degenerate question (empty or duplicate); regenerating")
    return StopDecision("turn_cap")


def refine_report(state: InterrogationState, new_turn: Turn, chat_client) -> Report:
    """Fold one question/answer exchange into the draft, replacing it
    wholesale. One repair re-prompt is attempted on parse failure."""
    evidence_lines = []
    for i, span in enumerate(new_turn.research_answer.spans, start=1):
        locator = " > ".join(new_turn.research_answer.spans[i - 1].node_path) or "document"
        evidence_lines.append(f'[{i}] "{span.text}" ({locator}; {span.filename})')
    answer_text = new_turn.research_answer.nl_answer or "\n".join(evidence_lines) or "(no evidence found)"
    existing = (
        render_report_markdown(state.report, with_disclaimer=False)
        if state.report
        else "(no existing report; write the first draft)"
    )
    system = (
        "You are a legal technical writer maintaining a structured report in "
        "markdown. Rewrite it as one coherent, updated version — never append. "
        "Use exactly these headings:\n"
        "## Title:\n### Summary:\n### Legal Reasoning & Analysis:\n"
        "### Preliminary Answer & Direction for Further Research:\n"
        "### Gaps & Next Questions:\n### Sources:\n"
        "Number sources consecutively from 1 and include a verbatim quote plus a "
        "locator (clause/section) for each. Cite them inline as [n]. "
        "Keep it under roughly 500 words."
    )
    user = (
        f"Legal question: {state.brief.query}\n"
        f"Context: {state.brief.context or '(none)'}\n\n"
        f"Existing report:\n{existing}\n\n"
        f"New exchange:\nQ: {new_turn.question}\nA: {answer_text}\n\n"
        "Produce the refined report."
    )
    completion = chat_client.complete(
        [{"role": "system", "content": system}, {"role": "user", "content": user}],
        role="report_refine",
    )
    allow_empty_gaps = state.stopped_by == "confidence_phrase"
    try:
        report = parse_report_markdown(completion)
        validate_report(report, allow_empty_gaps=allow_empty_gaps)
        return report
    except SchemaViolation as first_error:
        repair = chat_client.complete(
            [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
                {"role": "assistant", "content": completion},
                {
                    "role": "user",
                    "content": (
                        f"That report is malformed ({first_error}). Re-emit it with "
                        "all six headings present and sources numbered from 1."
                    ),
                },
            ],
            role="report_refine",
        )
        report = parse_report_markdown(repair)
        validate_report(report, allow_empty_gaps=allow_empty_gaps)
        return report


def run_interrogation(
    brief: UserBrief,
    resources: ResearchResources,
    chat_client,
    embedder,
    rerank_client,
    d_max: int = DEFAULT_D_MAX,
    config: Optional[RetrievalConfig] = None,
    nl_response: bool = False,
    on_turn: Optional[Callable[[InterrogationState], None]] = None,
) -> tuple[Report, InterrogationState]:
    """Question/research/refine until the confidence phrase or the turn cap.

    Partial state is preserved on error (attached to the raised exception as
    ``state`` when possible).
    """
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    state = InterrogationState(brief=brief, d_max=d_max)
    try:
        while True:
            outcome = interrogator_next_question(state, chat_client)
            if isinstance(outcome, StopDecision):
                state.stopped_by = outcome.reason
                break
            answer = researcher_answer(
                outcome,
                resources,
                chat_client,
                embedder,
                rerank_client,
                config=config,
                nl_response=nl_response,
            )
            turn = Turn(question=outcome, research_answer=answer.result)
            state.report = refine_report(state, turn, chat_client)
            state.turns.append(turn)
            if on_turn is not None:
                on_turn(state)
    except EngineError as exc:
        exc.state = state  # type: ignore[attr-defined]
        raise
    if state.report is None:
        raise SchemaViolation("interrogation produced no report")
    return state.report, state
