"""Frontdoor: runtime assembly, session store, and the HTTP API.

``CopilotRuntime`` wires the engine together from a key/value config (all
paths default to the bundled data) and is shared by the CLI and the HTTP
app, so both surfaces produce identical core payloads. Request bodies are
parsed manually to keep the error contract exact: 400 malformed, 404
unknown ids, 409 parameter posts to a session that is not awaiting them,
503 when the LLM backend is unreachable.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from . import kb as kb_mod
from .agents import DiagnosisConfig, DiagnosisEngine, load_profiles
from .diagtree import HistoricalCase, load_tree_dir
from .errors import (BackendUnavailable, EmptyAlert, InvalidEncoding,
                     UnknownAnswerId, UnsupportedFormat)
from .llm import Backend, ScriptedBackend, backend_from_env
from .mock_tools import MockToolServer, load_scenarios
from .qa import QaService
from .retrieval import Retriever
from .safety import RuleClassifier, SafetyGate, load_lexicon_file
from .tools import ToolRegistry, ToolSession

SESSION_TTL_S = 3600.0
STREAM_CHUNK_CHARS = 64


def _data_path(name: str) -> Path:
    return Path(str(resources.files("dbcopilot.data").joinpath(name)))


@dataclass
class AppConfig:
    """Key/value configuration; unset paths fall back to bundled data."""

    port: int = 8080
    kb_path: str | None = None
    corpus_dir: str | None = None
    tools_path: str | None = None
    trees_dir: str | None = None
    agents_path: str | None = None
    lexicon_path: str | None = None
    patterns_path: str | None = None
    synonyms_path: str | None = None
    history_path: str | None = None
    feedback_path: str = "feedback.jsonl"
    scenario: str = "high_io"
    scenarios_path: str | None = None
    tools_base_url: str | None = None   # None -> start the in-process mock
    llm_script: str | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "AppConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**raw)


class CopilotRuntime:
    """Everything the frontdoor needs, assembled once and swapped atomically
    on knowledge-base updates."""

    def __init__(self, config: AppConfig | None = None, llm: Backend | None = None,
                 registry: ToolRegistry | None = None):
        self.config = config or AppConfig()
        cfg = self.config

        if cfg.kb_path and Path(cfg.kb_path).exists():
            self.kb = kb_mod.KnowledgeBase.load_manifest(cfg.kb_path)
        else:
            corpus = cfg.corpus_dir or str(_data_path("corpus"))
            self.kb = kb_mod.ingest_directory(corpus)

        self.gate = SafetyGate(
            lexicon=load_lexicon_file(cfg.lexicon_path or _data_path("lexicon.txt")),
            classifier=RuleClassifier.from_file(
                cfg.patterns_path or _data_path("classifier_patterns.json")),
        )
        self.synonyms = json.loads(Path(
            cfg.synonyms_path or _data_path("synonyms.json")).read_text(encoding="utf-8"))

        self.llm = llm or backend_from_env() or ScriptedBackend.from_file(
            cfg.llm_script or _data_path("scripts/demo.json"))

        self.mock_server: MockToolServer | None = None
        base_url = cfg.tools_base_url
        if registry is None:
            if base_url is None:
                self.mock_server = MockToolServer(
                    load_scenarios(cfg.scenarios_path), cfg.scenario).start()
                base_url = self.mock_server.base_url
            registry = ToolRegistry.from_file(
                cfg.tools_path or _data_path("tools.json"), base_url=base_url)
        self.registry = registry

        self.trees = load_tree_dir(cfg.trees_dir or _data_path("trees"))
        for tree in self.trees:
            tree.validate_against(self.registry)
        self.profiles = load_profiles(cfg.agents_path or _data_path("agents.json"))
        history_path = cfg.history_path or _data_path("history.json")
        self.history = [HistoricalCase(**raw) for raw in
                        json.loads(Path(history_path).read_text(encoding="utf-8"))]

        self.retriever = Retriever(self.kb)
        self.qa = QaService(self.kb, self.llm, self.gate, synonyms=self.synonyms,
                            feedback_path=cfg.feedback_path, retriever=self.retriever)
        self._kb_lock = threading.Lock()

    def diagnosis_config(self) -> DiagnosisConfig:
        return DiagnosisConfig(
            profiles=self.profiles,
            registry=self.registry,
            tree_library=self.trees,
            llm=self.llm,
            history=self.history,
        )

    def add_document(self, doc_id: str, format: str, source: str,
                     version_tag: str, content: str) -> int:
        """Chunk one document, dedup against the store, swap atomically."""
        doc = kb_mod.parse_document(content.encode("utf-8"), format, doc_id,
                                    source, version_tag)
        with self._kb_lock:
            if any(c.doc_id == doc_id for c in self.kb.chunks):
                raise ValueError(f"doc_id already ingested: {doc_id}")
            merged = kb_mod.deduplicate(self.kb.chunks + kb_mod.split_into_chunks(doc))
            new_kb = kb_mod.KnowledgeBase(merged)
            added = len(new_kb) - len(self.kb)
            retriever = Retriever(new_kb)
            # swap: readers see the old triple or the new one, never a mix
            self.kb = new_kb
            self.retriever = retriever
            self.qa = QaService(new_kb, self.llm, self.gate, synonyms=self.synonyms,
                                feedback_path=self.config.feedback_path,
                                retriever=retriever)
        return added

    def close(self) -> None:
        if self.mock_server is not None:
            self.mock_server.stop()


@dataclass
class DiagnosisSession:
    session_id: str
    engine: DiagnosisEngine
    created_at: float = field(default_factory=time.time)
    last_access: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def state(self) -> str:
        return self.engine.state

    def touch(self) -> None:
        self.last_access = time.time()


class SessionStore:
    def __init__(self, ttl_s: float = SESSION_TTL_S):
        self.ttl_s = ttl_s
        self._sessions: dict[str, DiagnosisSession] = {}
        self._lock = threading.Lock()

    def create(self, engine: DiagnosisEngine) -> DiagnosisSession:
        session = DiagnosisSession(session_id=uuid.uuid4().hex[:16], engine=engine)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> DiagnosisSession | None:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                return None
            if time.time() - session.last_access > self.ttl_s:
                del self._sessions[session_id]
                return None
            session.touch()
            return session


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


async def _read_json(request: Request) -> dict | None:
    try:
        body = await request.json()
    except Exception:
        return None
    return body if isinstance(body, dict) else None


def build_app(runtime: CopilotRuntime | None = None) -> FastAPI:
    runtime = runtime or CopilotRuntime()
    app = FastAPI(title="dbcopilot", docs_url=None, redoc_url=None)
    # the console may be served from another origin; it must also be able to
    # read the streaming metadata headers
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Answer-Id", "X-Refused", "X-Sources"],
    )
    app.state.runtime = runtime
    sessions = SessionStore()
    app.state.sessions = sessions

    @app.post("/api/ask")
    async def ask(request: Request):
        body = await _read_json(request)
        if body is None or not isinstance(body.get("question"), str) \
                or not body["question"].strip():
            return _error(400, "body must be a JSON object with a 'question' string")
        try:
            answer = runtime.qa.answer_question(body["question"])
        except BackendUnavailable as exc:
            return _error(503, str(exc))
        payload = {
            "answer_id": answer.answer_id,
            "text": answer.text,
            "refused": answer.refused,
            "sources": [s.to_dict() for s in answer.sources],
        }
        if request.query_params.get("stream") == "1":
            text = answer.text

            def chunks():
                for i in range(0, len(text), STREAM_CHUNK_CHARS):
                    yield text[i:i + STREAM_CHUNK_CHARS]

            headers = {
                "X-Answer-Id": answer.answer_id,
                "X-Refused": "1" if answer.refused else "0",
                "X-Sources": json.dumps(payload["sources"]),
            }
            return StreamingResponse(chunks(), media_type="text/markdown",
                                     headers=headers)
        return JSONResponse(payload)

    @app.post("/api/feedback")
    async def feedback(request: Request):
        body = await _read_json(request)
        if body is None or "answer_id" not in body or "verdict" not in body:
            return _error(400, "body must carry answer_id and verdict")
        if body["verdict"] not in ("helpful", "missing_solution"):
            return _error(400, "verdict must be helpful or missing_solution")
        try:
            runtime.qa.record_feedback(body["answer_id"], body["verdict"],
                                       body.get("note", ""))
        except UnknownAnswerId:
            return _error(404, f"unknown answer_id: {body['answer_id']}")
        return JSONResponse({"ok": True})

    @app.post("/api/diagnose")
    async def diagnose(request: Request):
        body = await _read_json(request)
        if body is None or not isinstance(body.get("alert"), str):
            return _error(400, "body must carry an 'alert' string")
        try:
            engine = DiagnosisEngine(body["alert"], runtime.diagnosis_config(),
                                     session=ToolSession(session_id="pending"))
        except EmptyAlert:
            return _error(400, "alert must be non-empty")
        session = sessions.create(engine)
        engine.session.session_id = session.session_id
        try:
            with session.lock:
                engine.run_until_blocked()
        except BackendUnavailable as exc:
            return _error(503, str(exc))
        return JSONResponse({"session_id": session.session_id})

    @app.get("/api/diagnose/{session_id}")
    async def poll(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, f"unknown session: {session_id}")
        engine = session.engine
        payload: dict = {
            "state": engine.state,
            "trace_so_far": engine.trace,
        }
        if engine.state == "awaiting_params":
            payload["pending_params"] = [
                {"name": p.name, "type": p.type, "required": p.required,
                 "enum_values": p.enum_values}
                for p in engine.pending_params
            ]
        if engine.report is not None:
            report = engine.report.to_dict()
            report["markdown"] = engine.report.to_markdown()
            payload["report"] = report
        return JSONResponse(payload)

    @app.post("/api/session/{session_id}/params")
    async def post_params(session_id: str, request: Request):
        body = await _read_json(request)
        if body is None or not isinstance(body.get("values"), dict):
            return _error(400, "body must carry a 'values' object")
        session = sessions.get(session_id)
        if session is None:
            return _error(404, f"unknown session: {session_id}")
        with session.lock:
            if session.engine.state != "awaiting_params":
                return _error(409, f"session is {session.engine.state}, "
                                   f"not awaiting parameters")
            try:
                session.engine.resume(body["values"])
            except BackendUnavailable as exc:
                return _error(503, str(exc))
        return JSONResponse({"ok": True})

    @app.post("/api/kb/documents")
    async def add_document(request: Request):
        body = await _read_json(request)
        required = ("doc_id", "format", "source", "version_tag", "content")
        if body is None or any(not isinstance(body.get(k), str) for k in required):
            return _error(400, f"body must carry strings: {', '.join(required)}")
        try:
            added = runtime.add_document(body["doc_id"], body["format"],
                                         body["source"], body["version_tag"],
                                         body["content"])
        except (UnsupportedFormat, InvalidEncoding, ValueError) as exc:
            return _error(400, str(exc))
        return JSONResponse({"chunks_added": added})

    @app.get("/api/health")
    async def health():
        return JSONResponse({
            "ok": True,
            "kb_chunks": len(runtime.kb),
            "tools_registered": len(runtime.registry),
        })

    return app
