"""HTTP session service: live conversations over a JSON API.

One session holds one dialogue. Turns within a session are serialized by a
per-session lock; the user model is persisted atomically when a session
reaches a terminal state (and at first contact for new users).
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .catalog import Catalog
from .config import EngineConfig
from .datagen import bundled_demo_catalog
from .dialogue import DialogueSession, load_messages
from .storage import ModelStore


class CreateSessionRequest(BaseModel):
    user_id: str = Field(min_length=1, max_length=64, pattern=r"^[A-Za-z0-9._-]+$")


class CreateSessionResponse(BaseModel):
    session_id: str
    prompt: str


class UtteranceRequest(BaseModel):
    text: str = Field(min_length=1, max_length=500)


class ItemCard(BaseModel):
    id: str
    name: str
    address: str
    phone: str


class UtteranceResponse(BaseModel):
    move: str
    prompt: str
    item: ItemCard | None = None
    # Sample values accompanying a provide-values move (quick replies).
    values: list[str] | None = None
    terminal: bool = False
    terminal_status: str | None = None


class SessionSnapshot(BaseModel):
    session_id: str
    user_id: str
    constrained: list[str]
    rejected: list[str]
    fixed: list[str]
    number_of_items: int
    last_system_move: str | None
    last_user_move: str | None
    last_prompt: str | None
    last_item: ItemCard | None = None
    terminal: bool
    created_at: float


@dataclass
class Session:
    session_id: str
    user_id: str
    dialogue: DialogueSession
    created_at: float
    last_prompt: str | None = None
    last_item: dict | None = None
    closed: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionManager:
    """Owns live sessions and the model store behind them."""

    def __init__(self, catalog: Catalog, store: ModelStore, config: EngineConfig):
        self.catalog = catalog
        self.store = store
        self.config = config
        self.messages = load_messages()
        self.sessions: dict[str, Session] = {}
        self._guard = threading.Lock()

    def create_session(self, user_id: str) -> Session:
        with self.store.lock_for(user_id):
            model = self.store.load_or_init(
                user_id,
                self.catalog.schema,
                self.config.update_policy(),
                [item.id for item in self.catalog.items],
            )
        dialogue = DialogueSession(
            self.catalog,
            model,
            params=self.config.similarity_params(),
            policy=self.config.update_policy(),
            constrain_strategy=self.config.constrain_strategy,
            relax_strategy=self.config.relax_strategy,
            messages=self.messages,
            dparams=self.config.diversity_params(),
        )
        session = Session(
            session_id=secrets.token_urlsafe(16),
            user_id=user_id,
            dialogue=dialogue,
            created_at=time.time(),
        )
        _move, rendered = dialogue.prompt()
        session.last_prompt = rendered.text
        session.last_item = rendered.item_card
        with self._guard:
            self.sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._guard:
            session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def post_utterance(self, session_id: str, text: str) -> UtteranceResponse:
        session = self.get(session_id)
        with session.lock:
            if session.closed:
                raise ValueError("session is closed")
            dialogue = session.dialogue
            dialogue.respond(text)
            if dialogue.terminal is not None:
                self._finish(session)
                return UtteranceResponse(
                    move="done",
                    prompt=dialogue.messages["done"],
                    terminal=True,
                    terminal_status=dialogue.terminal,
                )
            move, rendered = dialogue.prompt()
            session.last_prompt = rendered.text
            session.last_item = rendered.item_card
            card = ItemCard(**rendered.item_card) if rendered.item_card else None
            return UtteranceResponse(
                move=move.act.value,
                prompt=rendered.text,
                item=card,
                values=list(move.values) or None,
            )

    def close_session(self, session_id: str):
        """Terminate a session as a quit."""
        session = self.get(session_id)
        with session.lock:
            if not session.closed:
                session.dialogue.force_quit()
                self._finish(session)

    def _finish(self, session: Session):
        session.closed = True
        if self.config.adapt:
            with self.store.lock_for(session.user_id):
                self.store.save(session.dialogue.model)

    def snapshot(self, session_id: str) -> SessionSnapshot:
        session = self.get(session_id)
        if session.closed:
            raise ValueError("session is closed")
        state = session.dialogue.state
        return SessionSnapshot(
            session_id=session.session_id,
            user_id=session.user_id,
            constrained=sorted(state.constrained),
            rejected=sorted(state.rejected),
            fixed=sorted(state.fixed),
            number_of_items=state.number_of_items,
            last_system_move=str(state.system_act.value) if state.system_act else None,
            last_user_move=str(state.user_move) if state.user_move else None,
            last_prompt=session.last_prompt,
            last_item=ItemCard(**session.last_item) if session.last_item else None,
            terminal=session.closed,
            created_at=session.created_at,
        )


def create_app(
    catalog: Catalog | None = None,
    store: ModelStore | None = None,
    config: EngineConfig | None = None,
) -> FastAPI:
    config = config or EngineConfig()
    if catalog is None:
        if config.schema_path and config.items_path:
            from pathlib import Path

            from .catalog import load_catalog

            catalog = load_catalog(
                Path(config.schema_path).read_text(),
                Path(config.items_path).read_text(),
            )
        else:
            catalog = bundled_demo_catalog()
    store = store or ModelStore(config.data_dir)
    manager = SessionManager(catalog, store, config)
    app = FastAPI(title="advisor", version="0.1.0")
    app.state.manager = manager

    @app.post("/api/sessions", response_model=CreateSessionResponse, status_code=201)
    def create_session(body: CreateSessionRequest):
        session = manager.create_session(body.user_id)
        return CreateSessionResponse(session_id=session.session_id, prompt=session.last_prompt)

    @app.post("/api/sessions/{session_id}/utterances", response_model=UtteranceResponse)
    def post_utterance(session_id: str, body: UtteranceRequest):
        try:
            return manager.post_utterance(session_id, body.text)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/api/sessions/{session_id}", response_model=SessionSnapshot)
    def get_session(session_id: str):
        try:
            return manager.snapshot(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        except ValueError as exc:
            raise HTTPException(status_code=410, detail=str(exc))

    @app.delete("/api/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        try:
            manager.close_session(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        return Response(status_code=204)

    @app.get("/api/users/{user_id}/model")
    def get_user_model(user_id: str):
        try:
            path = manager.store.path_for(user_id)
        except Exception:
            raise HTTPException(status_code=400, detail="invalid user id")
        if not path.exists():
            raise HTTPException(status_code=404, detail="no model for user")
        return json.loads(path.read_text())

    return app
