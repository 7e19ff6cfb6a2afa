"""Live testing-session service: the online greedy advisor over HTTP/JSON.

A session wraps one instance plus the history recorded so far.  The flow is
recommend -> lab reports an outcome -> beliefs update -> repeat until the
budget runs out.  Operators may record pools other than the recommendation;
any consistent history is accepted.  Sessions live in an in-process store
with per-session locks and an optional append-only JSON-lines journal.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .core import History, Instance, Outcome, Pool, make_pool
from .errors import (InconsistentHistoryError, NothingToTestError, ParameterError,
                     PoolwiseError)
from .inference import BeliefState
from .planning import belief_for, greedy_step_with_value
from .serialize import dumps_canonical, history_to_list, instance_from_dict, instance_to_dict


@dataclass
class Session:
    id: str
    instance: Instance
    history: History
    belief: BeliefState
    welfare_so_far: float
    created: float
    updated: float


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _welfare(instance: Instance, belief: BeliefState) -> float:
    return float(sum(instance.agents[i].utility for i in belief.confirmed_healthy))


class SessionStore:
    """In-process session registry; mutations per session are serialized."""

    def __init__(self, journal_path: Optional[Union[str, Path]] = None):
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._journal_path = Path(journal_path) if journal_path else None

    def _journal(self, event: dict) -> None:
        if self._journal_path is None:
            return
        with open(self._journal_path, "a") as fh:
            fh.write(dumps_canonical(event) + "\n")

    def create(self, instance: Instance) -> Session:
        belief = belief_for(instance, (), "auto")
        now = time.time()
        session = Session(id=uuid.uuid4().hex, instance=instance, history=(),
                          belief=belief, welfare_so_far=_welfare(instance, belief),
                          created=now, updated=now)
        with self._registry_lock:
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()
        self._journal({"event": "create", "session": session.id,
                       "instance": instance_to_dict(instance)})
        return session

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, "not_found", f"no session {session_id}")
        return session

    def recommend(self, session_id: str) -> tuple[Pool, float]:
        """Greedy next pool and its immediate expected welfare; read-only."""
        session = self.get(session_id)
        if len(session.history) >= session.instance.budget:
            raise ApiError(409, "budget_exhausted", "testing budget exhausted")
        try:
            return greedy_step_with_value(session.instance, session.history, "auto")
        except NothingToTestError as exc:
            raise ApiError(409, "nothing_to_test", str(exc)) from exc

    def record_outcome(self, session_id: str, pool: Pool, outcome: Outcome) -> tuple[Session, BeliefState]:
        """Append (pool, outcome); returns the updated session and the belief
        it held before the outcome (for newly-resolved diffs)."""
        session = self.get(session_id)
        with self._locks[session_id]:
            if len(session.history) >= session.instance.budget:
                raise ApiError(409, "budget_exhausted", "testing budget exhausted")
            try:
                pool = make_pool(pool, n=session.instance.n,
                                 pool_cap=session.instance.pool_cap)
            except (ParameterError, PoolwiseError) as exc:
                raise ApiError(422, "bad_pool", str(exc)) from exc
            history = session.history + ((pool, outcome),)
            try:
                belief = belief_for(session.instance, history, "auto")
            except InconsistentHistoryError as exc:
                raise ApiError(422, "inconsistent_outcome", str(exc)) from exc
            previous = session.belief
            session.history = history
            session.belief = belief
            session.welfare_so_far = _welfare(session.instance, belief)
            session.updated = time.time()
        self._journal({"event": "outcome", "session": session.id,
                       "pool": list(pool), "result": outcome.value})
        return session, previous


def session_state(session: Session) -> dict:
    return {
        "id": session.id,
        "instance": instance_to_dict(session.instance),
        "history": history_to_list(session.history),
        "marginals": list(session.belief.marginals),
        "confirmed_healthy": sorted(session.belief.confirmed_healthy),
        "confirmed_infected": sorted(session.belief.confirmed_infected),
        "welfare_so_far": session.welfare_so_far,
        "remaining_budget": session.instance.budget - len(session.history),
    }


def create_app(store: Optional[SessionStore] = None,
               frontend_dir: Optional[Union[str, Path]] = None) -> FastAPI:
    app = FastAPI(title="poolwise session service")
    app.state.store = store or SessionStore()

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    async def read_json(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception as exc:
            raise ApiError(400, "bad_json", "request body is not valid JSON") from exc
        if not isinstance(body, dict):
            raise ApiError(400, "bad_json", "request body must be a JSON object")
        return body

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await read_json(request)
        try:
            instance = instance_from_dict(body)
        except (ParameterError, PoolwiseError) as exc:
            raise ApiError(400, "bad_instance", str(exc)) from exc
        session = app.state.store.create(instance)
        return session_state(session)

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        return session_state(app.state.store.get(session_id))

    @app.get("/sessions/{session_id}/recommendation")
    async def get_recommendation(session_id: str):
        pool, value = app.state.store.recommend(session_id)
        return {"pool": list(pool), "value": value}

    @app.post("/sessions/{session_id}/outcomes")
    async def post_outcome(request: Request, session_id: str):
        body = await read_json(request)
        if "pool" not in body or "result" not in body:
            raise ApiError(422, "bad_outcome", "body must carry 'pool' and 'result'")
        try:
            outcome = Outcome(body["result"])
        except ValueError as exc:
            raise ApiError(422, "bad_outcome",
                           "result must be 'neg' or 'pos'") from exc
        if not isinstance(body["pool"], list):
            raise ApiError(422, "bad_pool", "pool must be a list of agent ids")
        session, previous = app.state.store.record_outcome(session_id, tuple(body["pool"]), outcome)
        state = session_state(session)
        state["newly_confirmed_healthy"] = sorted(
            session.belief.confirmed_healthy - previous.confirmed_healthy)
        state["newly_confirmed_infected"] = sorted(
            session.belief.confirmed_infected - previous.confirmed_infected)
        return state

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="console")

    return app
