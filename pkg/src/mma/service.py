"""HTTP facade and file-backed store.

Studies live as their source text under ``data/studies``; sessions are
append-only JSONL event logs under ``data/sessions``, fsynced per event
and rebuilt by replay on startup.  Every JSON response carries a
``format: 1`` envelope field; machine-readable error codes are stable.
"""

from __future__ import annotations

import csv
import io
import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .congruence import EmptyTruth
from .dsl import (
    CONDITIONS,
    MenuExhausted,
    ParseIssue,
    Study,
    parse_study,
)
from .generation import CoverageUnsatisfiable
from .session import (
    DuplicateSequence,
    IllegalTransition,
    MenuViolation,
    MissingStarted,
    PayloadError,
    PhaseTooEarly,
    SequenceGap,
    SessionError,
    SessionEvent,
    SessionState,
    StudyMismatch,
    apply_event,
    create_session,
    event_to_line,
    log_header_line,
    parse_log,
    replay,
    report_to_dict,
    session_report,
    step_view,
)

CSV_HEADER = (
    "session_id,condition,seed,n_observations,"
    "pre_recall,pre_precision,pre_relation_acc,pre_composite,"
    "post_recall,post_precision,post_relation_acc,post_composite,"
    "delta_composite,pred_acc_pre,pred_acc_post,completed"
)


class NotFound(Exception):
    pass


class ValidationFailed(Exception):
    def __init__(self, issues: Tuple[ParseIssue, ...]):
        super().__init__("study does not validate")
        self.issues = issues


@dataclass
class StudyRecord:
    study_id: str
    name: str
    source: str
    study: Study
    created_at: float


@dataclass
class SessionRecord:
    session_id: str
    study_id: str
    state: SessionState
    path: str
    created_ts: int
    lock: threading.Lock = field(default_factory=threading.Lock)


def _fsync_write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())


def _fsync_append(path: str, text: str) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())


def now_ms() -> int:
    return int(time.time() * 1000)


class Store:
    """All studies and sessions, mirrored to disk for crash recovery."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        self.studies_dir = os.path.join(data_dir, "studies")
        self.sessions_dir = os.path.join(data_dir, "sessions")
        os.makedirs(self.studies_dir, exist_ok=True)
        os.makedirs(self.sessions_dir, exist_ok=True)
        self._studies: Dict[str, StudyRecord] = {}
        self._sessions: Dict[str, SessionRecord] = {}
        self._create_lock = threading.Lock()
        self._load()

    def _load(self) -> None:
        for entry in sorted(os.listdir(self.studies_dir)):
            if not entry.endswith(".study"):
                continue
            study_id = entry[: -len(".study")]
            with open(os.path.join(self.studies_dir, entry), "r", encoding="utf-8") as fh:
                source = fh.read()
            meta_path = os.path.join(self.studies_dir, study_id + ".meta.json")
            name, created_at = study_id, 0.0
            if os.path.exists(meta_path):
                with open(meta_path, "r", encoding="utf-8") as fh:
                    meta = json.load(fh)
                name = meta.get("name", name)
                created_at = meta.get("created_at", 0.0)
            result = parse_study(source)
            if result.study is None:
                raise RuntimeError(f"stored study {study_id} no longer parses")
            self._studies[study_id] = StudyRecord(study_id, name, source, result.study, created_at)
        for entry in sorted(os.listdir(self.sessions_dir)):
            if not entry.endswith(".log"):
                continue
            session_id = entry[: -len(".log")]
            path = os.path.join(self.sessions_dir, entry)
            with open(path, "r", encoding="utf-8") as fh:
                events = parse_log(fh.read())
            study_id = events[0].payload.get("study_id", "")
            record = self._studies.get(study_id)
            if record is None:
                raise RuntimeError(f"session {session_id} references unknown study {study_id!r}")
            state = replay(events, record.study)
            self._sessions[session_id] = SessionRecord(
                session_id=session_id,
                study_id=study_id,
                state=state,
                path=path,
                created_ts=events[0].ts,
            )

    # -- studies

    def create_study(self, name: str, source: str) -> str:
        result = parse_study(source)
        if result.study is None:
            raise ValidationFailed(result.issues)
        with self._create_lock:
            study_id = secrets.token_urlsafe(12)
            while study_id in self._studies:
                study_id = secrets.token_urlsafe(12)
            created_at = time.time()
            _fsync_write(os.path.join(self.studies_dir, study_id + ".study"), source)
            _fsync_write(
                os.path.join(self.studies_dir, study_id + ".meta.json"),
                json.dumps(
                    {"format": 1, "study_id": study_id, "name": name, "created_at": created_at},
                    sort_keys=True,
                ),
            )
            self._studies[study_id] = StudyRecord(study_id, name, source, result.study, created_at)
            return study_id

    def get_study(self, study_id: str) -> StudyRecord:
        record = self._studies.get(study_id)
        if record is None:
            raise NotFound(f"unknown study {study_id!r}")
        return record

    # -- sessions

    def create_session(self, study_id: str, condition: str, seed: int, ts: Optional[int] = None) -> str:
        study = self.get_study(study_id).study
        with self._create_lock:
            session_id = secrets.token_urlsafe(16)
            while session_id in self._sessions:
                session_id = secrets.token_urlsafe(16)
        ts = now_ms() if ts is None else ts
        state = create_session(
            study, condition, seed, session_id=session_id, ts=ts, study_id=study_id
        )
        path = os.path.join(self.sessions_dir, session_id + ".log")
        _fsync_write(path, log_header_line() + "\n" + event_to_line(state.events[0]) + "\n")
        self._sessions[session_id] = SessionRecord(
            session_id=session_id, study_id=study_id, state=state, path=path, created_ts=ts
        )
        return session_id

    def get_session(self, session_id: str) -> SessionRecord:
        record = self._sessions.get(session_id)
        if record is None:
            raise NotFound(f"unknown session {session_id!r}")
        return record

    def apply_session_event(
        self, session_id: str, seq: int, kind: str, payload: Dict, ts: Optional[int] = None
    ) -> SessionRecord:
        record = self.get_session(session_id)
        study = self.get_study(record.study_id).study
        event = SessionEvent(seq=seq, ts=now_ms() if ts is None else ts, kind=kind, payload=payload)
        with record.lock:
            new_state = apply_event(record.state, event, study)
            _fsync_append(record.path, event_to_line(event) + "\n")
            record.state = new_state
        return record

    def sessions_of_study(self, study_id: str) -> List[SessionRecord]:
        self.get_study(study_id)
        records = [r for r in self._sessions.values() if r.study_id == study_id]
        records.sort(key=lambda r: (r.created_ts, r.session_id))
        return records


# ---------------------------------------------------------------------------
# CSV export


def _metric(x: Optional[float]) -> str:
    return "" if x is None else repr(round(x, 4))


def export_csv(store: Store, study_id: str) -> str:
    """One row per session that finished round 1, ordered by creation."""
    record = store.get_study(study_id)
    study = record.study
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for session in store.sessions_of_study(study_id):
        try:
            report = session_report(session.state, study.truth, study.features)
        except PhaseTooEarly:
            continue
        post = report.post
        delta = report.delta
        writer.writerow(
            [
                report.session_id,
                report.condition,
                str(report.seed),
                str(report.n_observations),
                _metric(report.pre.element_recall),
                _metric(report.pre.element_precision),
                _metric(report.pre.relation_accuracy),
                _metric(report.pre.composite),
                _metric(post.element_recall if post else None),
                _metric(post.element_precision if post else None),
                _metric(post.relation_accuracy if post else None),
                _metric(post.composite if post else None),
                _metric(delta.composite if delta else None),
                _metric(report.accuracy_round1),
                _metric(report.accuracy_round2),
                "true" if report.completed else "false",
            ]
        )
    return out.getvalue()


# ---------------------------------------------------------------------------
# HTTP layer


def _envelope(doc: Dict, status: int = 200) -> JSONResponse:
    return JSONResponse(dict(doc, format=1), status_code=status)


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return _envelope(dict({"code": code, "message": message}, **extra), status=status)


def _map_session_error(exc: SessionError) -> JSONResponse:
    if isinstance(exc, (IllegalTransition, DuplicateSequence, SequenceGap, PhaseTooEarly)):
        code = {
            IllegalTransition: "illegal_transition",
            DuplicateSequence: "duplicate_sequence",
            SequenceGap: "sequence_gap",
            PhaseTooEarly: "phase_too_early",
        }[type(exc)]
        return _error(409, code, str(exc))
    if isinstance(exc, MenuViolation):
        return _error(422, "menu_violation", str(exc))
    if isinstance(exc, (MissingStarted, StudyMismatch)):
        return _error(409, "log_conflict", str(exc))
    return _error(400, "bad_payload", str(exc))


async def _json_body(request: Request) -> Optional[Dict]:
    try:
        body = await request.json()
    except Exception:
        return None
    return body if isinstance(body, dict) else None


def create_app(store: Store, assets_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="mma", docs_url=None, redoc_url=None, openapi_url=None)

    @app.post("/api/studies")
    async def create_study(request: Request) -> Response:
        body = await _json_body(request)
        if body is None or not isinstance(body.get("source"), str):
            return _error(400, "bad_request", "expected JSON body with 'name' and 'source'")
        name = body.get("name")
        if not isinstance(name, str) or not name:
            return _error(400, "bad_request", "'name' must be a non-empty string")
        try:
            study_id = store.create_study(name, body["source"])
        except ValidationFailed as exc:
            issues = [
                {"line": i.line, "col": i.column, "message": i.message} for i in exc.issues
            ]
            return _envelope({"issues": issues}, status=422)
        return _envelope({"study_id": study_id}, status=201)

    @app.get("/api/studies/{study_id}")
    async def get_study(study_id: str) -> Response:
        try:
            record = store.get_study(study_id)
        except NotFound as exc:
            return _error(404, "not_found", str(exc))
        study = record.study
        features = []
        for f in study.features:
            doc: Dict = {"name": f.name, "kind": f.kind}
            if f.kind == "numeric":
                doc.update(minimum=f.minimum, maximum=f.maximum, step=f.step)
            if f.kind == "categorical":
                doc["values"] = list(f.values)
            if f.unit:
                doc["unit"] = f.unit
            features.append(doc)
        params = study.observation_params
        return _envelope(
            {
                "name": record.name,
                "classes": list(study.classes),
                "features": features,
                "observation_params": {
                    "count": params.count,
                    "demonstrate_each": params.demonstrate_each,
                    "seed": params.seed,
                },
            }
        )

    @app.post("/api/sessions")
    async def create_session_route(request: Request) -> Response:
        body = await _json_body(request)
        if body is None:
            return _error(400, "bad_request", "expected a JSON body")
        study_id = body.get("study_id")
        condition = body.get("condition")
        seed = body.get("seed")
        if not isinstance(study_id, str) or not isinstance(condition, str) or not isinstance(seed, int):
            return _error(
                400, "bad_request", "expected string 'study_id'/'condition' and integer 'seed'"
            )
        if condition not in CONDITIONS:
            return _error(400, "bad_request", f"condition must be one of {', '.join(CONDITIONS)}")
        try:
            session_id = store.create_session(study_id, condition, seed)
        except NotFound as exc:
            return _error(404, "not_found", str(exc))
        except CoverageUnsatisfiable as exc:
            return _error(422, "coverage_unsatisfiable", str(exc))
        except MenuExhausted as exc:
            return _error(422, "menu_exhausted", str(exc))
        except SessionError as exc:
            return _map_session_error(exc)
        return _envelope({"session_id": session_id}, status=201)

    @app.get("/api/sessions/{session_id}/step")
    async def get_step(session_id: str) -> Response:
        try:
            record = store.get_session(session_id)
            study = store.get_study(record.study_id).study
        except NotFound as exc:
            return _error(404, "not_found", str(exc))
        return _envelope(step_view(record.state, study))

    @app.post("/api/sessions/{session_id}/events")
    async def post_event(session_id: str, request: Request) -> Response:
        body = await _json_body(request)
        if body is None:
            return _error(400, "bad_request", "expected a JSON body")
        seq = body.get("seq")
        kind = body.get("kind")
        payload = body.get("payload", {})
        if not isinstance(seq, int) or not isinstance(kind, str) or not isinstance(payload, dict):
            return _error(
                400, "bad_request", "expected integer 'seq', string 'kind', object 'payload'"
            )
        try:
            record = store.apply_session_event(session_id, seq, kind, payload)
            study = store.get_study(record.study_id).study
        except NotFound as exc:
            return _error(404, "not_found", str(exc))
        except SessionError as exc:
            return _map_session_error(exc)
        return _envelope(step_view(record.state, study))

    @app.get("/api/sessions/{session_id}/report")
    async def get_report(session_id: str) -> Response:
        try:
            record = store.get_session(session_id)
            study = store.get_study(record.study_id).study
        except NotFound as exc:
            return _error(404, "not_found", str(exc))
        try:
            report = session_report(record.state, study.truth, study.features)
        except (PhaseTooEarly, EmptyTruth) as exc:
            if isinstance(exc, PhaseTooEarly):
                return _map_session_error(exc)
            return _error(422, "empty_truth", str(exc))
        return _envelope(report_to_dict(report))

    @app.get("/api/studies/{study_id}/export.csv")
    async def get_export(study_id: str) -> Response:
        try:
            text = export_csv(store, study_id)
        except NotFound as exc:
            return _error(404, "not_found", str(exc))
        return PlainTextResponse(text, media_type="text/csv; charset=utf-8")

    if assets_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=assets_dir, html=True), name="ui")

    return app


def serve(data_dir: str, listen: str = "127.0.0.1:8000", assets_dir: Optional[str] = None) -> None:
    import uvicorn

    host, _, port_text = listen.rpartition(":")
    host = host or "127.0.0.1"
    port = int(port_text)
    store = Store(data_dir)
    app = create_app(store, assets_dir=assets_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
