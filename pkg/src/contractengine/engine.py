"""Document store and session orchestration over a plain-file storage root.

No database: documents, indices, and sessions are JSON/flat files, which
keeps on-premise deployment trivial.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional

from .agents import (
    ArchivistSession,
    ResearchResources,
    UserBrief,
    run_interrogation,
)
from .chunker import assemble_chunk_set
from .doctree import parse_document
from .errors import ConfigError, EngineError
from .gateway import (
    ChatClient,
    CostLedger,
    HashEmbedder,
    HttpChatClient,
    LexicalOverlapReranker,
    ProviderProfile,
    ReplayChatClient,
)
from .index import ChunkIndex, load_index, save_index
from .report import Report, render_report_markdown
from .retrieval import RetrievalConfig


@dataclass
class EngineConfig:
    storage_root: str = "./storage"
    d_max: int = 5
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    embed_dim: int = 64
    bind_host: str = "127.0.0.1"
    bind_port: int = 8420
    api_token_env_var: str = "CONTRACTENGINE_API_TOKEN"
    chat_profile: Optional[ProviderProfile] = None
    cassette_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.d_max < 1:
            raise ConfigError("d_max must be >= 1")

    @classmethod
    def from_file(cls, path: str) -> "EngineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        retrieval = RetrievalConfig(**data.pop("retrieval", {}))
        profile = data.pop("chat_profile", None)
        cfg = cls(
            retrieval=retrieval,
            chat_profile=ProviderProfile(**profile) if profile else None,
            **data,
        )
        return cfg.with_env_overrides()

    def with_env_overrides(self) -> "EngineConfig":
        root = os.environ.get("CONTRACTENGINE_STORAGE_ROOT")
        if root:
            self.storage_root = root
        d_max = os.environ.get("CONTRACTENGINE_D_MAX")
        if d_max:
            self.d_max = int(d_max)
        return self


class Engine:
    """Binds parsing, chunking, indexing, and interrogation to a storage
    root and a set of model clients."""

    def __init__(
        self,
        config: Optional[EngineConfig] = None,
        chat_client: Optional[ChatClient] = None,
        embedder=None,
        rerank_client=None,
    ) -> None:
        self.config = config or EngineConfig()
        self.ledger = CostLedger()
        self.chat = chat_client or self._default_chat()
        self.embedder = embedder or HashEmbedder(dim=self.config.embed_dim)
        self.reranker = rerank_client or LexicalOverlapReranker()
        self._sessions: dict[str, dict] = {}
        self._lock = threading.Lock()
        os.makedirs(self._docs_dir, exist_ok=True)
        os.makedirs(self._sessions_dir, exist_ok=True)

    def _default_chat(self) -> ChatClient:
        if self.config.cassette_path:
            return ReplayChatClient(self.config.cassette_path, ledger=self.ledger)
        if self.config.chat_profile:
            return HttpChatClient(self.config.chat_profile, ledger=self.ledger)
        raise ConfigError(
            "no chat client configured: set chat_profile or cassette_path, "
            "or inject a client"
        )

    @property
    def _docs_dir(self) -> str:
        return os.path.join(self.config.storage_root, "documents")

    @property
    def _sessions_dir(self) -> str:
        return os.path.join(self.config.storage_root, "sessions")

    # ── documents ──────────────────────────────────────────────────── #

    def ingest(self, text: str, filename: str = "document.txt") -> dict:
        doc_id = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
        doc_dir = os.path.join(self._docs_dir, doc_id)
        os.makedirs(doc_dir, exist_ok=True)
        with open(os.path.join(doc_dir, "source.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
        tree = parse_document(text, filename=filename)
        with open(os.path.join(doc_dir, "tree.json"), "w", encoding="utf-8") as fh:
            fh.write(tree.to_json())
        chunks = assemble_chunk_set(tree)
        index = ChunkIndex.build(chunks, embedder=self.embedder, descriptor=filename)
        save_index(index, os.path.join(doc_dir, "index"))
        meta = {
            "document_id": doc_id,
            "filename": filename,
            "parse_mode": tree.parse_mode.value,
            "chunk_count": len(chunks),
            "warnings": tree.warnings,
        }
        with open(os.path.join(doc_dir, "doc.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh)
        return meta

    def document_meta(self, doc_id: str) -> dict:
        path = os.path.join(self._docs_dir, doc_id, "doc.json")
        if not os.path.exists(path):
            raise EngineError(f"unknown document {doc_id}")
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def document_resources(self, doc_id: str) -> ResearchResources:
        doc_dir = os.path.join(self._docs_dir, doc_id)
        if not os.path.isdir(doc_dir):
            raise EngineError(f"unknown document {doc_id}")
        index = load_index(os.path.join(doc_dir, "index"))
        with open(os.path.join(doc_dir, "source.txt"), encoding="utf-8") as fh:
            source = fh.read()
        meta = self.document_meta(doc_id)
        return ResearchResources(index=index, sources={meta["filename"]: source})

    def document_chunks_jsonl(self, doc_id: str) -> str:
        path = os.path.join(self._docs_dir, doc_id, "index", "chunks.jsonl")
        if not os.path.exists(path):
            raise EngineError(f"unknown document {doc_id}")
        with open(path, encoding="utf-8") as fh:
            return fh.read()

    # ── sessions ───────────────────────────────────────────────────── #

    def create_session(self, document_id: str) -> str:
        self.document_meta(document_id)  # existence check
        session_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._sessions[session_id] = {
                "id": session_id,
                "document_id": document_id,
                "archivist": ArchivistSession(),
                "brief": None,
                "state": None,
                "report": None,
                "status": "collecting",
                "error": None,
            }
        self._persist_session(session_id)
        return session_id

    def _session(self, session_id: str) -> dict:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise EngineError(f"unknown session {session_id}")
        return session

    def _persist_session(self, session_id: str) -> None:
        session = self._session(session_id)
        snapshot = {
            "id": session["id"],
            "document_id": session["document_id"],
            "status": session["status"],
            "brief": session["brief"].__dict__ if session["brief"] else None,
            "report": session["report"].to_dict() if session["report"] else None,
            "error": session["error"],
        }
        path = os.path.join(self._sessions_dir, f"{session_id}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(snapshot, fh, ensure_ascii=False)

    def post_message(self, session_id: str, text: Optional[str]) -> dict:
        """Archivist dialogue step; ``text=None`` finalizes the brief."""
        session = self._session(session_id)
        archivist: ArchivistSession = session["archivist"]
        if text is None:
            brief = archivist.finalize(self.chat)
            session["brief"] = brief
            session["status"] = "briefed"
            self._persist_session(session_id)
            return {"brief": brief.__dict__}
        reply = archivist.converse(text, self.chat)
        self._persist_session(session_id)
        return {"reply": reply}

    def interrogate(self, session_id: str, d_max: Optional[int] = None) -> None:
        """Run the loop synchronously; callers wanting async wrap this in a
        thread (the HTTP layer does)."""
        session = self._session(session_id)
        brief: Optional[UserBrief] = session["brief"]
        if brief is None:
            raise EngineError("session has no finalized brief")
        resources = self.document_resources(session["document_id"])
        session["status"] = "interrogating"
        try:
            report, state = run_interrogation(
                brief,
                resources,
                self.chat,
                self.embedder,
                self.reranker,
                d_max=d_max or self.config.d_max,
                config=self.config.retrieval,
                on_turn=lambda st: self._record_progress(session_id, st),
            )
            session["report"] = report
            session["state"] = state
            session["status"] = "done"
        except EngineError as exc:
            session["state"] = getattr(exc, "state", None)
            session["status"] = "error"
            session["error"] = str(exc)
            self._persist_session(session_id)
            raise
        self._persist_session(session_id)

    def _record_progress(self, session_id: str, state) -> None:
        session = self._session(session_id)
        session["state"] = state
        session["report"] = state.report

    def progress(self, session_id: str) -> dict:
        session = self._session(session_id)
        state = session["state"]
        return {
            "status": session["status"],
            "turns": [t.question for t in state.turns] if state else [],
            "draft_title": state.report.title if state and state.report else None,
            "stopped_by": state.stopped_by if state else "none",
            "error": session["error"],
        }

    def report(self, session_id: str) -> tuple[Report, str]:
        session = self._session(session_id)
        report: Optional[Report] = session["report"]
        if report is None:
            raise EngineError("no report for session yet")
        return report, render_report_markdown(report)
