"""HTTP consultation service: interactive, label-free acquisition sessions.

The service suggests the next tests ranked by the agent's Q-values and
surfaces "stop and predict" as a recommendation flag; the human decides.
Session payloads never carry labels and no rewards are ever computed here.
Each session keeps an append-only event log whose replay through the
environment reproduces the final probabilities exactly.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field, replace

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .agent import encode_state
from .data import standardize_value
from .env import AcquisitionEnv, EnvConfig, EnvError
from .guesser import GuesserModel


class ServiceError(Exception):
    def __init__(self, code, message, details=None, status=400):
        self.code = code
        self.message = message
        self.details = details or []
        self.status = status


def _err(code, message, details=None):
    status = {"VALIDATION": 422, "NOT_FOUND": 404, "CONFLICT": 409, "BUDGET": 400}[code]
    return ServiceError(code, message, details, status)


# ---------------------------------------------------------------------------
# Payload models (no label fields anywhere: deployment has no ground truth)
# ---------------------------------------------------------------------------


class CreateSessionRequest(BaseModel):
    features: dict  # free feature name -> value
    budget: float | None = None


class ObserveRequest(BaseModel):
    feature: str
    value: float | list | dict | None = None
    unavailable: bool = False


class SuggestionItem(BaseModel):
    feature: str
    features: list
    cost: float
    q_value: float
    rank: int


class SuggestionResponse(BaseModel):
    suggestions: list
    stop_recommended: bool
    remaining_budget: float
    probabilities: list


class SessionStateResponse(BaseModel):
    session_id: str
    probabilities: list
    remaining_budget: float
    n_valid_actions: int


class ObserveResponse(BaseModel):
    probabilities: list
    remaining_budget: float
    revealed: list
    acquisition_done: bool


class FinalizeResponse(BaseModel):
    probabilities: list
    predicted_class: int
    total_cost: float
    revealed: list


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------


@dataclass
class Session:
    id: str
    record: object
    episode: object
    events: list = field(default_factory=list)
    finalized: bool = False
    created_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class ServiceBundle:
    schema: object
    guesser: GuesserModel
    qnet: object  # trained online Q-net
    env_config: EnvConfig
    default_k: int = 3


def _label_free_record(schema, values):
    from .data import PatientRecord

    return PatientRecord(id=f"session-{uuid.uuid4().hex[:8]}", label=None, values=values)


def _validate_value(spec, value):
    if spec.modality == "numeric":
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise _err("VALIDATION", f"feature {spec.name!r} expects a number", [spec.name])
        return float(value)
    if spec.modality == "timeseries":
        if not isinstance(value, list) or not value or not all(
            isinstance(v, (int, float)) for v in value
        ):
            raise _err("VALIDATION", f"feature {spec.name!r} expects a number list", [spec.name])
        return np.asarray(value, dtype=np.float64)
    if not isinstance(value, list) or len(value) != spec.slot_width:
        raise _err(
            "VALIDATION",
            f"feature {spec.name!r} expects a {spec.slot_width}-wide vector",
            [spec.name],
        )
    return np.asarray(value, dtype=np.float64)


class SessionManager:
    def __init__(self, bundle, log_dir=None):
        self.bundle = bundle
        self.env = AcquisitionEnv(bundle.schema, bundle.guesser, bundle.env_config)
        self.sessions = {}
        self.registry_lock = threading.Lock()
        self.log_dir = log_dir
        self.stats = None
        if bundle.guesser.input_stats:
            from .data import StandardStats

            self.stats = StandardStats(
                mean=bundle.guesser.input_stats["mean"],
                std=bundle.guesser.input_stats["std"],
            )

    def _standardize(self, spec, value):
        return standardize_value(spec, value, self.stats)

    def get(self, session_id):
        with self.registry_lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise _err("NOT_FOUND", f"unknown session {session_id!r}")
        return session

    def create(self, req):
        schema = self.bundle.schema
        free_names = [schema.features[j].name for j in schema.free_indices]
        missing = [n for n in free_names if n not in req.features]
        if missing:
            raise _err("VALIDATION", "missing free features", missing)
        extra = [n for n in req.features if n not in free_names]
        if extra:
            raise _err("VALIDATION", "only free features may be supplied at creation", extra)
        values = {}
        for name in free_names:
            spec = schema.features[schema.index(name)]
            raw = req.features[name]
            values[name] = self._standardize(spec, _validate_value(spec, raw))
        budget = self.bundle.env_config.budget if req.budget is None else req.budget
        if budget < 0:
            raise _err("VALIDATION", "budget must be >= 0", ["budget"])
        record = _label_free_record(schema, values)
        env = self._env_for(budget)
        episode = env.reset(record)
        session = Session(id=uuid.uuid4().hex, record=record, episode=episode)
        session.events.append(
            {"type": "created", "budget": budget, "features": dict(req.features), "ts": time.time()}
        )
        with self.registry_lock:
            self.sessions[session.id] = session
        self._persist(session)
        return session, env

    def _env_for(self, budget):
        if budget == self.bundle.env_config.budget:
            return self.env
        cfg = replace(self.bundle.env_config, budget=budget)
        return AcquisitionEnv(self.bundle.schema, self.bundle.guesser, cfg)

    def env_for_session(self, session):
        return self._env_for(session.events[0]["budget"])

    def suggestion(self, session, k):
        env = self.env_for_session(session)
        ep = session.episode
        if session.finalized:
            raise _err("CONFLICT", "session already finalized")
        if ep.done:
            return SuggestionResponse(
                suggestions=[],
                stop_recommended=True,
                remaining_budget=float(ep.state.budget),
                probabilities=[float(p) for p in ep.probs],
            )
        valid = env.valid_actions(ep)
        enc = encode_state(ep, env.guesser, env.config.budget)
        q, _ = self.bundle.qnet.forward(enc)
        ranked = sorted(valid, key=lambda a: -q[a])
        stop = ranked[0] == env.guess_action
        items = []
        for rank, a in enumerate(r for r in ranked if r != env.guess_action):
            if rank >= k:
                break
            act = env.actions[a]
            items.append(
                SuggestionItem(
                    feature=act.name,
                    features=[env.schema.features[j].name for j in act.features],
                    cost=act.cost,
                    q_value=float(q[a]),
                    rank=rank + 1,
                ).model_dump()
            )
        session.events.append({"type": "suggested", "k": k, "shown": [i["feature"] for i in items], "ts": time.time()})
        self._persist(session)
        return SuggestionResponse(
            suggestions=items,
            stop_recommended=stop,
            remaining_budget=float(ep.state.budget),
            probabilities=[float(p) for p in ep.probs],
        )

    def observe(self, session, req):
        if session.finalized:
            raise _err("CONFLICT", "session already finalized")
        env = self.env_for_session(session)
        ep = session.episode
        action = next(
            (a for a, act in enumerate(env.actions) if act.name == req.feature), None
        )
        if action is None:
            raise _err("NOT_FOUND", f"unknown feature or panel {req.feature!r}")
        act = env.actions[action]
        if req.unavailable:
            if any(ep.state.mask[j] == 1.0 for j in act.features):
                raise _err("CONFLICT", f"{req.feature!r} already observed")
            session.episode = env.mark_unavailable(ep, action)
            session.events.append({"type": "unavailable", "feature": req.feature, "ts": time.time()})
            self._persist(session)
            return ObserveResponse(
                probabilities=[float(p) for p in session.episode.probs],
                remaining_budget=float(session.episode.state.budget),
                revealed=self._revealed(session.episode),
                acquisition_done=session.episode.done,
            )
        if ep.done:
            raise _err("CONFLICT", "acquisition already finished for this session")
        if any(ep.state.mask[j] == 1.0 for j in act.features):
            raise _err("CONFLICT", f"{req.feature!r} already observed")
        if action in ep.unavailable:
            raise _err("CONFLICT", f"{req.feature!r} was marked unavailable")
        if act.cost > ep.state.budget:
            raise _err(
                "BUDGET",
                f"cost {act.cost} exceeds remaining budget {ep.state.budget}",
                [{"remaining_budget": ep.state.budget, "cost": act.cost}],
            )
        # write the (standardized) values into the session record, then step
        if len(act.features) > 1:
            if not isinstance(req.value, dict):
                raise _err("VALIDATION", f"panel {req.feature!r} expects per-feature values")
            member_names = [env.schema.features[j].name for j in act.features]
            missing = [n for n in member_names if n not in req.value]
            if missing:
                raise _err("VALIDATION", "missing panel member values", missing)
            for name in member_names:
                spec = env.schema.features[env.schema.index(name)]
                session.record.values[name] = self._standardize(
                    spec, _validate_value(spec, req.value[name])
                )
        else:
            spec = env.schema.features[act.features[0]]
            session.record.values[spec.name] = self._standardize(
                spec, _validate_value(spec, req.value)
            )
        try:
            session.episode, _, _, _ = env.step(ep, action)
        except EnvError as exc:
            raise _err("CONFLICT", str(exc))
        session.events.append(
            {"type": "observed", "feature": req.feature, "value": req.value, "cost": act.cost, "ts": time.time()}
        )
        self._persist(session)
        return ObserveResponse(
            probabilities=[float(p) for p in session.episode.probs],
            remaining_budget=float(session.episode.state.budget),
            revealed=self._revealed(session.episode),
            acquisition_done=session.episode.done,
        )

    def finalize(self, session):
        if session.finalized:
            raise _err("CONFLICT", "session already finalized")
        session.finalized = True
        session.events.append({"type": "finalized", "ts": time.time()})
        self._persist(session)
        ep = session.episode
        return FinalizeResponse(
            probabilities=[float(p) for p in ep.probs],
            predicted_class=int(np.argmax(ep.probs)),
            total_cost=float(ep.spent),
            revealed=self._revealed(ep),
        )

    def _revealed(self, ep):
        return [
            self.bundle.schema.features[j].name
            for j in range(self.bundle.schema.d)
            if ep.state.mask[j] == 1.0
        ]

    def _persist(self, session):
        if not self.log_dir:
            return
        path = f"{self.log_dir}/{session.id}.jsonl"
        with open(path, "w") as fh:
            for event in session.events:
                fh.write(json.dumps(event) + "\n")


def replay_session_log(schema, guesser, env_config, events):
    """Re-run a session's event log through the environment.

    Returns the final class probabilities; used as the audit/replay oracle.
    """
    from .data import PatientRecord

    created = events[0]
    assert created["type"] == "created"
    stats = None
    if guesser.input_stats:
        from .data import StandardStats

        stats = StandardStats(
            mean=guesser.input_stats["mean"], std=guesser.input_stats["std"]
        )
    values = {}
    for name, raw in created["features"].items():
        spec = schema.features[schema.index(name)]
        values[name] = standardize_value(spec, _coerce(spec, raw), stats)
    record = PatientRecord(id="replay", label=None, values=values)
    cfg = replace(env_config, budget=created["budget"])
    env = AcquisitionEnv(schema, guesser, cfg)
    ep = env.reset(record)
    actions_by_name = {act.name: a for a, act in enumerate(env.actions)}
    for event in events[1:]:
        if event["type"] == "observed":
            action = actions_by_name[event["feature"]]
            act = env.actions[action]
            if len(act.features) > 1:
                for j in act.features:
                    name = schema.features[j].name
                    spec = schema.features[j]
                    record.values[name] = standardize_value(
                        spec, _coerce(spec, event["value"][name]), stats
                    )
            else:
                spec = schema.features[act.features[0]]
                record.values[spec.name] = standardize_value(
                    spec, _coerce(spec, event["value"]), stats
                )
            ep, _, _, _ = env.step(ep, action)
        elif event["type"] == "unavailable":
            ep = env.mark_unavailable(ep, actions_by_name[event["feature"]])
    return ep.probs


def _coerce(spec, raw):
    if spec.modality == "numeric":
        return float(raw)
    return np.asarray(raw, dtype=np.float64)


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------


def create_app(bundle, log_dir=None):
    app = FastAPI(title="featacq consultation service")
    # the browser console is served separately; allow cross-origin calls
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    manager = SessionManager(bundle, log_dir=log_dir)
    app.state.manager = manager

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "details": exc.details},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "schema_hash": bundle.guesser.schema_hash}

    @app.get("/schema")
    def schema():
        doc = bundle.schema.to_doc()
        doc["default_budget"] = bundle.env_config.budget
        doc["actions"] = [
            {"name": a.name, "features": [bundle.schema.features[j].name for j in a.features], "cost": a.cost}
            for a in manager.env.actions
        ]
        return doc

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        session, env = manager.create(req)
        with session.lock:
            return SessionStateResponse(
                session_id=session.id,
                probabilities=[float(p) for p in session.episode.probs],
                remaining_budget=float(session.episode.state.budget),
                n_valid_actions=len(env.valid_actions(session.episode))
                if not session.episode.done
                else 1,
            )

    @app.get("/sessions/{session_id}/suggestion")
    def get_suggestion(session_id: str, k: int | None = None):
        session = manager.get(session_id)
        with session.lock:
            return manager.suggestion(session, k or bundle.default_k)

    @app.post("/sessions/{session_id}/observe")
    def observe(session_id: str, req: ObserveRequest):
        session = manager.get(session_id)
        with session.lock:
            return manager.observe(session, req)

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str):
        session = manager.get(session_id)
        with session.lock:
            return manager.finalize(session)

    @app.get("/sessions/{session_id}/log")
    def get_log(session_id: str):
        session = manager.get(session_id)
        with session.lock:
            return {
                "session_id": session.id,
                "finalized": session.finalized,
                "events": list(session.events),
            }

    return app
