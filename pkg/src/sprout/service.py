"""HTTP + server-sent-events surface over the engine, tree operations, node
space and store.

Per-project mutations are serialized behind one lock; an autopilot run owns
the project exclusively (mutations 409 while it runs) but reads and event
subscriptions stay live so clients watch generation in real time. Events
carry a per-project, gapless, strictly increasing sequence number; late
subscribers get a full Snapshot first.
"""

from __future__ import annotations

import asyncio
import json
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel

from . import nodespace, treeops
from .engine import AgentEngine, GenerationBudget
from .errors import (
    Conflict,
    EmptyRewrite,
    GatewayError,
    IntentMismatch,
    InvalidArgument,
    LengthMismatch,
    MissingField,
    ModelReturnedSingleParagraph,
    NonContiguousSelection,
    NotFound,
    NotOnActiveChain,
    RootSelected,
    SchemaError,
    SproutError,
    UnparseableResponse,
)
from .events import EventKind
from .gateway import Gateway
from .model import CodeRange, SourceDocument, validate_tree
from .nodespace import DetailLevel, NodePoint, RefineSpec
from .prompts import PromptTemplateSet
from .store import Project, export_markdown, project_to_dict

_STATUS_BY_ERROR = (
    (NotFound, 404),
    (Conflict, 409),
    (NonContiguousSelection, 400),
    (RootSelected, 400),
    (IntentMismatch, 400),
    (NotOnActiveChain, 400),
    (MissingField, 400),
    (LengthMismatch, 400),
    (SchemaError, 400),
    (InvalidArgument, 400),
    (ModelReturnedSingleParagraph, 502),
    (EmptyRewrite, 502),
    (UnparseableResponse, 502),
    (GatewayError, 502),
)


@dataclass
class ProjectSession:
    """One project plus its event fan-out and run state."""

    project: Project
    engine: AgentEngine
    lock: threading.RLock = field(default_factory=threading.RLock)
    seq: int = 0
    subscribers: list[asyncio.Queue] = field(default_factory=list)
    autopilot_running: bool = False
    pause_flag: threading.Event = field(default_factory=threading.Event)
    idempotency: dict[str, tuple[int, Any]] = field(default_factory=dict)
    cached_points: list[NodePoint] | None = None
    loop: asyncio.AbstractEventLoop | None = None

    def emit(self, kind: str, payload: dict) -> None:
        with self.lock:
            self.seq += 1
            event = {"seq": self.seq, "kind": kind, "payload": payload}
            if self.loop is not None:
                for queue in list(self.subscribers):
                    self.loop.call_soon_threadsafe(queue.put_nowait, event)

    def subscribe(self) -> tuple[dict, asyncio.Queue]:
        """Atomically snapshot state and register a queue: everything after
        the snapshot arrives with consecutive seq numbers."""
        queue: asyncio.Queue = asyncio.Queue()
        with self.lock:
            snapshot = {"seq": self.seq, "project": project_to_dict(self.project)}
            self.subscribers.append(queue)
        return snapshot, queue

    def unsubscribe(self, queue: asyncio.Queue) -> None:
        with self.lock:
            if queue in self.subscribers:
                self.subscribers.remove(queue)


class CreateProjectBody(BaseModel):
    id: str | None = None
    language: str | None = None
    source: str | None = None
    seed: int = 0


class SourceBody(BaseModel):
    language: str
    text: str


class BudgetBody(BaseModel):
    max_steps: int = 8
    candidates_per_step: int = 3
    votes_per_step: int = 3


class RangeBody(BaseModel):
    start: int
    end: int


class GroupBody(BaseModel):
    node_ids: list[str]


class NodeBody(BaseModel):
    node_id: str


class ExtendBody(BaseModel):
    node_id: str
    choice: str


class RefineBody(BaseModel):
    style: str | None = None
    detail: str | None = None
    custom_prompt: str | None = None


class AdoptBody(BaseModel):
    alternative_id: str


def _error_status(exc: SproutError) -> int:
    for kind, status in _STATUS_BY_ERROR:
        if isinstance(exc, kind):
            return status
    return 400


def _sse(kind: str, data: dict) -> str:
    return f"event: {kind}\ndata: {json.dumps(data, sort_keys=True)}\n\n"


def create_app(gateway: Gateway, templates: PromptTemplateSet | None = None) -> FastAPI:
    app = FastAPI(title="sprout")
    sessions: dict[str, ProjectSession] = {}
    app.state.sessions = sessions

    @app.exception_handler(SproutError)
    async def handle_domain_error(request: Request, exc: SproutError):
        return JSONResponse(
            status_code=_error_status(exc),
            content={
                "code": type(exc).__name__,
                "message": str(exc),
                "detail": {"path": str(request.url.path)},
            },
        )

    def get_session(project_id: str) -> ProjectSession:
        session = sessions.get(project_id)
        if session is None:
            raise NotFound(f"unknown project: {project_id}")
        return session

    def guard_writable(session: ProjectSession) -> None:
        if session.autopilot_running:
            raise Conflict("an autopilot run owns this project; pause it first")

    def idempotent(session: ProjectSession, key: str | None, compute):
        if key:
            with session.lock:
                if key in session.idempotency:
                    return session.idempotency[key][1]
        result = compute()
        if key:
            with session.lock:
                session.idempotency[key] = (200, result)
        return result

    def project_body(session: ProjectSession) -> dict:
        body = project_to_dict(session.project)
        assert not validate_tree(session.project.tree)
        return body

    @app.get("/healthz")
    def healthz():
        return PlainTextResponse("ok")

    @app.post("/projects")
    def create_project(
        body: CreateProjectBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        project_id = body.id or uuid.uuid4().hex[:12]
        if project_id in sessions:
            if idempotency_key and idempotency_key in sessions[project_id].idempotency:
                return sessions[project_id].idempotency[idempotency_key][1]
            raise InvalidArgument(f"project exists: {project_id}")
        source = None
        if body.source is not None:
            source = SourceDocument(language_tag=body.language or "text", text=body.source)
        project = Project(id=project_id, seed=body.seed, source=source)
        session = ProjectSession(project=project, engine=AgentEngine(gateway, templates, seed=body.seed))
        try:
            session.loop = asyncio.get_running_loop()
        except RuntimeError:
            session.loop = None
        project.event_sink = session.emit
        sessions[project_id] = session
        result = project_body(session)
        if idempotency_key:
            session.idempotency[idempotency_key] = (200, result)
        return result

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        session = get_session(project_id)
        with session.lock:
            return project_body(session)

    @app.put("/projects/{project_id}/source")
    def put_source(
        project_id: str,
        body: SourceBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(project_id)

        def compute():
            with session.lock:
                guard_writable(session)
                if len(session.project.tree.nodes) > 1:
                    # anchors cite line numbers; the source is immutable once used
                    raise Conflict("source is immutable once the tree references it")
                session.project.source = SourceDocument(
                    language_tag=body.language, text=body.text
                )
                return project_body(session)

        return idempotent(session, idempotency_key, compute)

    @app.post("/projects/{project_id}/autopilot")
    def start_autopilot(project_id: str, body: BudgetBody):
        session = get_session(project_id)
        budget = GenerationBudget(
            max_steps=body.max_steps,
            candidates_per_step=body.candidates_per_step,
            votes_per_step=body.votes_per_step,
        )
        with session.lock:
            if session.autopilot_running:
                return JSONResponse(
                    status_code=409,
                    content={
                        "code": "AutopilotRunning",
                        "message": "an autopilot run is already active",
                        "detail": {},
                    },
                )
            session.project.require_source()
            session.autopilot_running = True
            session.pause_flag.clear()

        def run():
            try:
                session.engine.run_autopilot(
                    session.project, budget, events=session.emit, pause=session.pause_flag
                )
            except Exception:
                pass  # the Error event has already been emitted
            finally:
                with session.lock:
                    session.autopilot_running = False

        threading.Thread(target=run, daemon=True, name=f"autopilot-{project_id}").start()
        return {"running": True}

    @app.post("/projects/{project_id}/pause")
    def pause(project_id: str):
        session = get_session(project_id)
        session.pause_flag.set()
        return {"paused": True}

    @app.post("/projects/{project_id}/generate-for-selection")
    def generate_for_selection(
        project_id: str,
        body: RangeBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(project_id)

        def compute():
            with session.lock:
                guard_writable(session)
                node = session.engine.generate_for_selection(
                    session.project, CodeRange(body.start, body.end)
                )
                return {"node_id": node.id, "project": project_body(session)}

        return idempotent(session, idempotency_key, compute)

    @app.post("/projects/{project_id}/nodes/group")
    def group(
        project_id: str,
        body: GroupBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(project_id)

        def compute():
            with session.lock:
                guard_writable(session)
                fork = treeops.group_nodes(session.project, body.node_ids, session.engine)
                return {
                    "fork_parent": fork.fork_parent,
                    "new_nodes": fork.new_nodes,
                    "copied_suffix": fork.copied_suffix,
                    "project": project_body(session),
                }

        return idempotent(session, idempotency_key, compute)

    @app.post("/projects/{project_id}/nodes/split")
    def split(
        project_id: str,
        body: NodeBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(project_id)

        def compute():
            with session.lock:
                guard_writable(session)
                fork = treeops.split_node(session.project, body.node_id, session.engine)
                return {
                    "fork_parent": fork.fork_parent,
                    "new_nodes": fork.new_nodes,
                    "copied_suffix": fork.copied_suffix,
                    "project": project_body(session),
                }

        return idempotent(session, idempotency_key, compute)

    @app.post("/projects/{project_id}/nodes/trim")
    def trim(
        project_id: str,
        body: NodeBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(project_id)

        def compute():
            with session.lock:
                guard_writable(session)
                removed = treeops.trim_node(session.project, body.node_id)
                return {"removed": removed, "project": project_body(session)}

        return idempotent(session, idempotency_key, compute)

    @app.post("/projects/{project_id}/chain/assemble")
    def assemble(
        project_id: str,
        body: NodeBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(project_id)

        def compute():
            with session.lock:
                guard_writable(session)
                chain = treeops.assemble_quick(session.project, body.node_id)
                return {"chain": chain, "project": project_body(session)}

        return idempotent(session, idempotency_key, compute)

    @app.get("/projects/{project_id}/choices/{node_id}")
    def choices(project_id: str, node_id: str, top_k: int = 3):
        session = get_session(project_id)
        with session.lock:
            entries = treeops.enumerate_choices(session.project, node_id, top_k=top_k)
        return {
            "choices": [
                {
                    "id": c.id,
                    "kind": c.kind,
                    "action": c.action.value,
                    "votes": c.votes,
                    "reason": c.reason,
                    "label": c.label,
                }
                for c in entries
            ]
        }

    @app.post("/projects/{project_id}/chain/extend")
    def extend(
        project_id: str,
        body: ExtendBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(project_id)

        def compute():
            with session.lock:
                guard_writable(session)
                node_id = treeops.extend_step(
                    session.project, body.node_id, body.choice, session.engine
                )
                return {"node_id": node_id, "project": project_body(session)}

        return idempotent(session, idempotency_key, compute)

    @app.get("/projects/{project_id}/node-space")
    def node_space(project_id: str):
        session = get_session(project_id)
        with session.lock:
            if len(session.project.tree.nodes) <= 1:
                return {"points": [], "stale": False}
            try:
                points = nodespace.refresh_points(session.project, session.engine.gateway)
                session.cached_points = points
                stale = False
            except GatewayError:
                points = session.cached_points or []
                stale = True
            origins = {
                nid: node.origin.value for nid, node in session.project.tree.nodes.items()
            }
        return {
            "points": [
                {
                    "node_id": p.node_id,
                    "x": p.position[0],
                    "y": p.position[1],
                    "intent": {
                        "action": p.intent.action.value,
                        "target": (
                            {
                                "start_line": p.intent.target.start_line,
                                "end_line": p.intent.target.end_line,
                            }
                            if p.intent.target is not None
                            else None
                        ),
                    },
                    "origin": origins.get(p.node_id, "Agent"),
                }
                for p in points
            ],
            "stale": stale,
        }

    @app.post("/projects/{project_id}/nodes/{node_id}/refine")
    def refine(
        project_id: str,
        node_id: str,
        body: RefineBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(project_id)
        detail = None
        if body.detail is not None:
            try:
                detail = DetailLevel(body.detail)
            except ValueError:
                raise InvalidArgument("detail must be 'Shorter' or 'Longer'") from None
        spec = RefineSpec(style=body.style, detail=detail, custom_prompt=body.custom_prompt)

        def compute():
            with session.lock:
                guard_writable(session)
                new_id = nodespace.refine_node(session.project, node_id, spec, session.engine)
                return {"node_id": new_id, "project": project_body(session)}

        return idempotent(session, idempotency_key, compute)

    @app.post("/projects/{project_id}/nodes/{node_id}/adopt")
    def adopt(
        project_id: str,
        node_id: str,
        body: AdoptBody,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(project_id)

        def compute():
            with session.lock:
                guard_writable(session)
                chain = nodespace.adopt_alternative(
                    session.project, node_id, body.alternative_id
                )
                return {"chain": chain, "project": project_body(session)}

        return idempotent(session, idempotency_key, compute)

    @app.get("/projects/{project_id}/export.md")
    def export(project_id: str):
        session = get_session(project_id)
        with session.lock:
            markdown = export_markdown(session.project)
        return PlainTextResponse(markdown, media_type="text/markdown")

    @app.get("/projects/{project_id}/events")
    async def events(project_id: str):
        session = get_session(project_id)
        if session.loop is None:
            session.loop = asyncio.get_running_loop()
        snapshot, queue = await asyncio.to_thread(session.subscribe)

        async def stream():
            try:
                yield _sse(EventKind.SNAPSHOT.value, snapshot)
                while True:
                    event = await queue.get()
                    yield _sse(
                        event["kind"], {"seq": event["seq"], "payload": event["payload"]}
                    )
            finally:
                session.unsubscribe(queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def serve(
    gateway: Gateway,
    bind: str = "127.0.0.1:8000",
    templates: PromptTemplateSet | None = None,
) -> None:
    """Run the service until interrupted."""
    import uvicorn

    host, _, port = bind.partition(":")
    app = create_app(gateway, templates)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="warning")
