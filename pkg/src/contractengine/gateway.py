"""Provider-agnostic model clients, deterministic offline stand-ins, and
the per-call cost ledger.

The ledger's record count realizes the closed-form call budget
``expected_call_count``: (n_turns + 1) archivist calls, one optional
model-based parsing call, and per interrogation round one question call,
one query-extraction call, one report-refinement call, and one optional
natural-language response call.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np

from .errors import AuthError, UpstreamError, UpstreamTimeout

LEDGER_ROLES = (
    "archivist_turn",
    "archivist_finalize",
    "llm_parse",
    "interrogator_question",
    "researcher_query_extract",
    "researcher_nl_response",
    "report_refine",
    "summarize",
    "filter",
)


@dataclass(frozen=True)
class CallRecord:
    role: str
    wall_time: float
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None


class CostLedger:
    """Append-only, thread-safe accounting of model calls."""

    def __init__(self) -> None:
        self._records: list[CallRecord] = []
        self._lock = threading.Lock()

    def append(self, record: CallRecord) -> None:
        with self._lock:
            self._records.append(record)

    @property
    def records(self) -> tuple[CallRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def count(self, role: Optional[str] = None) -> int:
        records = self.records
        if role is None:
            return len(records)
        return sum(1 for r in records if r.role == role)

    def total_wall_time(self) -> float:
        return sum(r.wall_time for r in self.records)


def expected_call_count(
    n_turns: int, d_int: int, llm_parsing: bool = False, nl_response: bool = False
) -> int:
    """Closed-form number of chat calls for a full pipeline run."""
    if n_turns < 0 or d_int < 0:
        raise ValueError("n_turns and d_int must be nonnegative")
    archivist = (n_turns + 1) + (1 if llm_parsing else 0)
    per_round = 2 + 1 + (1 if nl_response else 0)
    return archivist + d_int * per_round


# ── Client protocols ─────────────────────────────────────────────────── #


class ChatClient(Protocol):
    def complete(self, messages: Sequence[dict], role: str) -> str: ...


class EmbedClient(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class RerankClient(Protocol):
    def score(self, query: str, passages: Sequence[str]) -> list[float]: ...


@dataclass
class ProviderProfile:
    base_url: str
    model_id: str
    auth_token_env_var: str = ""
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 0.0  # deterministic completions by default


def _canonical_request_hash(messages: Sequence[dict], role: str) -> str:
    payload = json.dumps({"role": role, "messages": list(messages)}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ── HTTP clients ─────────────────────────────────────────────────────── #


class HttpChatClient:
    """Chat-completion client for the common open inference-server wire
    format (POST {base_url}/chat/completions)."""

    def __init__(
        self,
        profile: ProviderProfile,
        ledger: Optional[CostLedger] = None,
        transport: Optional[Callable[[str, dict, dict, float], dict]] = None,
    ) -> None:
        self.profile = profile
        self.ledger = ledger
        self._transport = transport or self._default_transport

    @staticmethod
    def _default_transport(url: str, body: dict, headers: dict, timeout: float) -> dict:
        import httpx

        resp = httpx.post(url, json=body, headers=headers, timeout=timeout)
        resp.raise_for_status()
        return resp.json()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        env = self.profile.auth_token_env_var
        if env:
            token = os.environ.get(env)
            if not token:
                raise AuthError(f"auth token env var {env!r} is not set")
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, messages: Sequence[dict], role: str) -> str:
        headers = self._headers()  # raises AuthError before any network use
        url = self.profile.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.profile.model_id,
            "messages": list(messages),
            "temperature": self.profile.temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self.profile.max_retries + 1):
            start = time.monotonic()
            try:
                data = self._transport(url, body, headers, self.profile.timeout)
                elapsed = time.monotonic() - start
                usage = data.get("usage") or {}
                if self.ledger is not None:
                    self.ledger.append(
                        CallRecord(
                            role=role,
                            wall_time=elapsed,
                            prompt_tokens=usage.get("prompt_tokens"),
                            completion_tokens=usage.get("completion_tokens"),
                        )
                    )
                return data["choices"][0]["message"]["content"]
            except TimeoutError as exc:
                last_error = exc
            except Exception as exc:  # provider/network failure; retry with backoff
                last_error = exc
            if attempt < self.profile.max_retries:
                time.sleep(min(2.0**attempt * 0.1, 5.0))
        if isinstance(last_error, TimeoutError):
            raise UpstreamTimeout(str(last_error)) from last_error
        raise UpstreamError(str(last_error)) from last_error


class HttpEmbedClient:
    """Embedding client (POST {base_url}/embeddings)."""

    def __init__(self, profile: ProviderProfile, dim: int) -> None:
        self.profile = profile
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        import httpx

        headers = {"Content-Type": "application/json"}
        env = self.profile.auth_token_env_var
        if env:
            token = os.environ.get(env)
            if not token:
                raise AuthError(f"auth token env var {env!r} is not set")
            headers["Authorization"] = f"Bearer {token}"
        url = self.profile.base_url.rstrip("/") + "/embeddings"
        try:
            resp = httpx.post(
                url,
                json={"model": self.profile.model_id, "input": list(texts)},
                headers=headers,
                timeout=self.profile.timeout,
            )
            resp.raise_for_status()
            data = resp.json()
        except AuthError:
            raise
        except Exception as exc:
            raise UpstreamError(str(exc)) from exc
        return np.asarray([row["embedding"] for row in data["data"]], dtype=np.float32)


# ── Deterministic offline clients ────────────────────────────────────── #


class ScriptedChatClient:
    """Replays a fixed sequence of completions; raises when exhausted."""

    def __init__(self, completions: Iterable[str], ledger: Optional[CostLedger] = None) -> None:
        self._completions = list(completions)
        self._cursor = 0
        self.ledger = ledger
        self.transcript: list[tuple[str, list[dict]]] = []

    def complete(self, messages: Sequence[dict], role: str) -> str:
        if self._cursor >= len(self._completions):
            raise UpstreamError("scripted client exhausted")
        completion = self._completions[self._cursor]
        self._cursor += 1
        self.transcript.append((role, list(messages)))
        if self.ledger is not None:
            self.ledger.append(CallRecord(role=role, wall_time=0.0))
        return completion


class RuleChatClient:
    """Computes completions from a caller-supplied function of (messages, role)."""

    def __init__(
        self,
        responder: Callable[[Sequence[dict], str], str],
        ledger: Optional[CostLedger] = None,
    ) -> None:
        self._responder = responder
        self.ledger = ledger
        self.transcript: list[tuple[str, list[dict]]] = []

    def complete(self, messages: Sequence[dict], role: str) -> str:
        completion = self._responder(messages, role)
        self.transcript.append((role, list(messages)))
        if self.ledger is not None:
            self.ledger.append(CallRecord(role=role, wall_time=0.0))
        return completion


class HashEmbedder:
    """Seeded bag-of-words projection: deterministic, offline, and sensitive
    to lexical overlap. Each token hashes to a fixed pseudo-random direction;
    a text's vector is the L2-normalized sum over its token multiset."""

    def __init__(self, dim: int = 64, seed: int = 0) -> None:
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            vec = rng.standard_normal(self.dim)
            self._cache[token] = vec
        return vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            tokens = [t.lower() for t in text.split()]
            for t in tokens:
                out[i] += self._token_vector("".join(c for c in t if c.isalnum()))
            norm = np.linalg.norm(out[i])
            if norm > 0:
                out[i] /= norm
        return out.astype(np.float32)


class LexicalOverlapReranker:
    """Raw score grows with the fraction of query tokens present in the
    passage, minus a small length penalty so focused passages outrank
    context-padded ones covering the same terms. Full coverage maps well
    above zero and zero coverage below, so sigmoid thresholding at 0.5
    keeps lexical matches only."""

    def __init__(self, scale: float = 5.0, offset: float = 1.0, length_penalty: float = 0.01) -> None:
        self.scale = scale
        self.offset = offset
        self.length_penalty = length_penalty

    @staticmethod
    def _tokens(text: str) -> set[str]:
        return {"".join(c for c in t if c.isalnum()).lower() for t in text.split()} - {""}

    def score(self, query: str, passages: Sequence[str]) -> list[float]:
        q = self._tokens(query)
        scores = []
        for p in passages:
            toks = self._tokens(p)
            coverage = len(q & toks) / len(q) if q else 0.0
            scores.append(self.scale * coverage - self.offset - self.length_penalty * len(toks))
        return scores


class HttpRerankClient:
    """Cross-encoder scoring over HTTP (POST {base_url}/rerank)."""

    def __init__(self, profile: ProviderProfile) -> None:
        self.profile = profile

    def score(self, query: str, passages: Sequence[str]) -> list[float]:
        import httpx

        url = self.profile.base_url.rstrip("/") + "/rerank"
        try:
            resp = httpx.post(
                url,
                json={
                    "model": self.profile.model_id,
                    "query": query,
                    "documents": list(passages),
                },
                timeout=self.profile.timeout,
            )
            resp.raise_for_status()
            data = resp.json()
        except Exception as exc:
            raise UpstreamError(str(exc)) from exc
        ranked = sorted(data["results"], key=lambda r: r["index"])
        return [float(r["relevance_score"]) for r in ranked]


# ── Record / replay cassettes ────────────────────────────────────────── #


class RecordingChatClient:
    """Wraps another chat client and appends {request hash, response} JSONL
    records usable for offline replay."""

    def __init__(self, inner: ChatClient, cassette_path: str) -> None:
        self.inner = inner
        self.cassette_path = cassette_path

    def complete(self, messages: Sequence[dict], role: str) -> str:
        completion = self.inner.complete(messages, role)
        entry = {"hash": _canonical_request_hash(messages, role), "response": completion}
        with open(self.cassette_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return completion


class ReplayChatClient:
    """Serves completions from a recorded cassette; requests are matched by
    canonical hash, duplicates served in recording order."""

    def __init__(self, cassette_path: str, ledger: Optional[CostLedger] = None) -> None:
        self._responses: dict[str, list[str]] = {}
        with open(cassette_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                self._responses.setdefault(entry["hash"], []).append(entry["response"])
        self.ledger = ledger

    def complete(self, messages: Sequence[dict], role: str) -> str:
        key = _canonical_request_hash(messages, role)
        queue = self._responses.get(key)
        if not queue:
            raise UpstreamError("no cassette entry for request")
        completion = queue.pop(0)
        if self.ledger is not None:
            self.ledger.append(CallRecord(role=role, wall_time=0.0))
        return completion
