"""HTTP service over the engine: ingestion, sessions, interrogation,
reports, and benchmarking.

Long operations (interrogation) are asynchronous: POST returns immediately
and progress is polled. Errors return structured bodies
``{code, stage, message}``.
"""

from __future__ import annotations

import os
import threading
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import Engine, EngineConfig
from .errors import EngineError
from .evalharness import DEFAULT_K_GRID, run_benchmark


class DocumentIn(BaseModel):
    text: str
    filename: str = "document.txt"


class MessageIn(BaseModel):
    text: Optional[str] = None  # None finalizes the brief


class SessionIn(BaseModel):
    document_id: str


class InterrogateIn(BaseModel):
    d_max: Optional[int] = None


class EvalIn(BaseModel):
    corpus_dir: str
    k_grid: Optional[list[int]] = None


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="contractengine")
    token_env = engine.config.api_token_env_var

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        expected = os.environ.get(token_env)
        if expected and request.url.path != "/health":
            supplied = request.headers.get("Authorization", "").removeprefix("Bearer ").strip()
            if supplied != expected:
                return JSONResponse(
                    status_code=401,
                    content={"code": 401, "stage": "auth", "message": "invalid API token"},
                )
        return await call_next(request)

    @app.exception_handler(EngineError)
    async def engine_error_handler(_request: Request, exc: EngineError):
        status = 404 if "unknown" in str(exc) or "no report" in str(exc) else 422
        return JSONResponse(
            status_code=status,
            content={"code": status, "stage": exc.stage, "message": str(exc)},
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/documents", status_code=201)
    def post_document(body: DocumentIn):
        meta = engine.ingest(body.text, filename=body.filename)
        return {
            "document_id": meta["document_id"],
            "parse_mode": meta["parse_mode"],
            "chunk_count": meta["chunk_count"],
        }

    @app.get("/documents/{doc_id}")
    def get_document(doc_id: str):
        return engine.document_meta(doc_id)

    @app.post("/sessions", status_code=201)
    def post_session(body: SessionIn):
        session_id = engine.create_session(body.document_id)
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn):
        return engine.post_message(session_id, body.text)

    @app.post("/sessions/{session_id}/interrogate", status_code=202)
    def post_interrogate(session_id: str, body: InterrogateIn):
        engine._session(session_id)  # 404 before spawning the worker
        worker = threading.Thread(
            target=_run_quietly, args=(engine, session_id, body.d_max), daemon=True
        )
        worker.start()
        return {"session_id": session_id, "status": "interrogating"}

    @app.get("/sessions/{session_id}/progress")
    def get_progress(session_id: str):
        return engine.progress(session_id)

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str):
        report, markdown = engine.report(session_id)
        return {"markdown": markdown, "report": report.to_dict()}

    @app.post("/eval")
    def post_eval(body: EvalIn):
        metrics = run_benchmark(
            body.corpus_dir,
            engine.embedder,
            engine.reranker,
            chat_client=None,
            config=engine.config.retrieval,
            k_grid=body.k_grid or DEFAULT_K_GRID,
        )
        import json as _json

        return _json.loads(metrics.to_json())

    return app


def _run_quietly(engine: Engine, session_id: str, d_max: Optional[int]) -> None:
    try:
        engine.interrogate(session_id, d_max=d_max)
    except EngineError:
        pass  # surfaced via the session's status/error fields


def serve(config: EngineConfig, engine: Optional[Engine] = None) -> None:
    import uvicorn

    app = create_app(engine or Engine(config))
    uvicorn.run(app, host=config.bind_host, port=config.bind_port)
