"""HTTP API over the document store, for the therapist console and CLI.

All bodies are the same JSON documents the store keeps on disk. A static
bearer token (environment TELEREHAB_TOKEN) gates every /v1 route when
set; without it the service is open, which suits local demos.
"""
from __future__ import annotations

import logging
import os
from datetime import date as date_type, datetime
from typing import Mapping

from fastapi import Depends, FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from . import analytics, knowledge
from .analytics import ANGLE_FOR_LOCATION
from .errors import (
    ConflictError,
    IntegrityError,
    NotFoundError,
    ParseError,
    TelerehabError,
    ValidationError,
)
from .session import report_from_doc
from .store import Store

log = logging.getLogger(__name__)

TOKEN_ENV = "TELEREHAB_TOKEN"

CONTENT_COLLECTIONS = ("postures", "movements", "exercises", "protocols", "tests", "overrides")


def _today() -> str:
    return date_type.today().isoformat()


def _phase_for(store: Store, patient: knowledge.PatientRecord) -> str | None:
    if not patient.protocol or not store.exists("protocols", patient.protocol):
        return None
    return knowledge.classify_patient_phase(patient, store.protocol(patient.protocol))


def _session_extents(report) -> list[analytics.RomExtent]:
    """One extent per distinct measurable joint/side/type seen in the report."""
    keys: list[tuple[str, str, object]] = []
    for record in report.exercises:
        for rep in record.reps:
            for trace in rep.traces:
                for component in trace.components:
                    key = (component.location, component.side, component.type)
                    if key not in keys and (component.location, component.side) in ANGLE_FOR_LOCATION:
                        keys.append(key)
    extents = []
    for location, side, mtype in keys:
        try:
            extents.append(analytics.rom_extents(report, location, side, mtype))
        except NotFoundError:
            continue
    return extents


def apply_session_upload(store: Store, doc: Mapping, report_id: str | None = None) -> dict:
    """Store a session report, credit achieved ROM, and reclassify.

    Used by both the HTTP handler and the CLI so behavior cannot drift.
    """
    report = report_from_doc(doc)
    stored = dict(doc)
    if not stored.get("date"):
        stored["date"] = _today()
        report = report_from_doc(stored)

    # Credit ROM in memory first so a rejected credit stores nothing.
    patient = store.patient(report.patient)
    added = []
    for extent in _session_extents(report):
        patient = analytics.update_exploration(patient, extent, stored["date"])
        added.append(
            {
                "location": extent.location,
                "side": extent.side,
                "type": str(extent.type),
                "rom": extent.max,
            }
        )

    rid = report_id or stored.get("id") or store.next_id("session_reports", "sr-")
    stored["id"] = rid
    rev = store.put("session_reports", rid, stored, if_absent=True)
    if added:
        store.put("patients", patient.id, knowledge.patient_to_doc(patient))
    phase = _phase_for(store, patient)
    return {"id": rid, "rev": rev, "phase": phase, "explorations_added": added}


def create_app(store_root, token: str | None = None) -> FastAPI:
    store = Store(store_root)
    expected = token if token is not None else os.environ.get(TOKEN_ENV)

    app = FastAPI(title="telerehab service", openapi_url="/v1/openapi.json")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    async def authorized(request: Request) -> None:
        if not expected:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {expected}":
            raise PermissionError("missing or wrong bearer token")

    auth = Depends(authorized)

    @app.exception_handler(TelerehabError)
    async def _domain_error(request: Request, exc: TelerehabError):
        status = 422
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, (ConflictError, IntegrityError)):
            status = 409
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.exception_handler(PermissionError)
    async def _auth_error(request: Request, exc: PermissionError):
        return JSONResponse(status_code=401, content={"error": str(exc)})

    # -- patients ------------------------------------------------------------

    @app.get("/v1/patients", dependencies=[auth])
    async def list_patients():
        return {"items": store.list_docs("patients")}

    @app.post("/v1/patients", dependencies=[auth], status_code=201)
    async def create_patient(doc: dict):
        pid = doc.get("id", "")
        rev = store.put("patients", pid, doc, if_absent=True)
        return {"id": pid, "rev": rev}

    @app.get("/v1/patients/{pid}", dependencies=[auth])
    async def get_patient(pid: str):
        doc, rev = store.get("patients", pid)
        return {"rev": rev, **doc, "id": pid}

    @app.put("/v1/patients/{pid}", dependencies=[auth])
    async def put_patient(pid: str, doc: dict):
        rev = store.put("patients", pid, {**doc, "id": pid})
        return {"id": pid, "rev": rev}

    @app.delete("/v1/patients/{pid}", dependencies=[auth])
    async def delete_patient(pid: str):
        rev = store.delete("patients", pid)
        return {"id": pid, "rev": rev, "deleted": True}

    @app.post("/v1/patients/{pid}/explorations", dependencies=[auth], status_code=201)
    async def add_exploration(pid: str, entry: dict):
        patient = store.patient(pid)
        exploration = knowledge.Exploration(
            date=entry.get("date") or _today(),
            location=entry["location"],
            side=entry["side"],
            type=knowledge.MovementType.parse(entry["type"]),
            rom=float(entry["rom"]),
        )
        doc = knowledge.patient_to_doc(patient)
        doc["explorations"].append(
            {
                "date": exploration.date,
                "location": exploration.location,
                "side": exploration.side,
                "type": str(exploration.type),
                "rom": exploration.rom,
            }
        )
        updated = knowledge.patient_from_doc(doc)  # re-validates date ordering
        rev = store.put("patients", pid, doc)
        return {"id": pid, "rev": rev, "phase": _phase_for(store, updated)}

    @app.post("/v1/patients/{pid}/vas", dependencies=[auth], status_code=201)
    async def add_vas(pid: str, entry: dict):
        patient = store.patient(pid)
        doc = knowledge.patient_to_doc(patient)
        doc["vas_reports"].append(
            {"date": entry.get("date") or _today(), "value": float(entry["value"])}
        )
        updated = knowledge.patient_from_doc(doc)
        rev = store.put("patients", pid, doc)
        return {"id": pid, "rev": rev, "phase": _phase_for(store, updated)}

    # -- content collections ------------------------------------------------------

    def _register_collection(name: str) -> None:
        @app.get(f"/v1/{name}", dependencies=[auth], name=f"list_{name}")
        async def list_collection():
            return {"items": store.list_docs(name)}

        @app.post(f"/v1/{name}", dependencies=[auth], status_code=201, name=f"create_{name}")
        async def create_document(doc: dict):
            doc_id = doc.get("id") or store.next_id(name, f"{name[:2]}-")
            rev = store.put(name, doc_id, {**doc, "id": doc_id}, if_absent=True)
            return {"id": doc_id, "rev": rev}

        @app.get(f"/v1/{name}/{{doc_id}}", dependencies=[auth], name=f"get_{name}")
        async def get_document(doc_id: str):
            doc, rev = store.get(name, doc_id)
            return {"rev": rev, **doc, "id": doc_id}

    for _name in CONTENT_COLLECTIONS:
        _register_collection(_name)

    # -- assignments ------------------------------------------------------------------

    @app.post("/v1/assignments", dependencies=[auth], status_code=201)
    async def create_assignment(doc: dict):
        doc_id = doc.get("id") or store.next_id("assignments", "as-")
        payload = {**doc, "id": doc_id}
        payload.setdefault("date", _today())
        rev = store.put("assignments", doc_id, payload, if_absent=True)
        return {"id": doc_id, "rev": rev}

    @app.get("/v1/assignments", dependencies=[auth])
    async def list_assignments(patient: str | None = None):
        items = store.list_docs("assignments")
        if patient is not None:
            items = [d for d in items if d.get("patient") == patient]
        return {"items": items}

    # -- recommendations ----------------------------------------------------------------

    @app.get("/v1/patients/{pid}/recommendations", dependencies=[auth])
    async def recommendations(pid: str, protocol: str | None = None):
        patient = store.patient(pid)
        protocol_name = protocol or patient.protocol
        if not protocol_name:
            raise ValidationError(f"patient {pid!r} has no protocol; pass ?protocol=")
        proto = store.protocol(protocol_name)
        result = knowledge.recommend_exercises(
            patient, proto, store.exercise_movements(), store.overrides_for(pid)
        )
        return {
            "patient": pid,
            "protocol": protocol_name,
            "phase": result.phase,
            "recommended": [
                {"exercise": r.exercise, "provenance": r.provenance} for r in result.recommended
            ],
            "contraindicated": [
                {"exercise": name, "rule": rule} for name, rule in result.contraindicated
            ],
        }

    # -- sessions and analytics -----------------------------------------------------------

    @app.post("/v1/sessions", dependencies=[auth], status_code=201)
    async def upload_session(doc: dict):
        return apply_session_upload(store, doc)

    @app.get("/v1/patients/{pid}/analytics/timeseries", dependencies=[auth])
    async def timeseries(pid: str, format: str = Query(default="json")):
        store.get("patients", pid)  # 404 on unknown patient
        points = analytics.patient_timeseries(store.reports_for(pid))
        if format == "csv":
            return PlainTextResponse(analytics.timeseries_csv(points), media_type="text/csv")
        return {
            "patient": pid,
            "points": [
                {
                    "ordinal": p.ordinal,
                    "date": p.date,
                    "exercise_rating": p.exercise_rating,
                    "posture_rating": p.posture_rating,
                }
                for p in points
            ],
        }

    @app.get("/v1/cohort/analytics", dependencies=[auth])
    async def cohort():
        series = {
            pid: analytics.patient_timeseries(store.reports_for(pid))
            for pid in store.list_ids("patients")
        }
        rows = analytics.cohort_average(series)
        return {
            "points": [
                {"ordinal": ordinal, "exercise_rating": mean, "count": count}
                for ordinal, mean, count in rows
            ]
        }

    @app.get("/v1/patients/{pid}/sessions", dependencies=[auth])
    async def list_sessions(pid: str):
        store.get("patients", pid)
        items = []
        for rid, report in store.reports_for(pid):
            items.append(
                {
                    "id": rid,
                    "date": report.date,
                    "exercises": [rec.exercise for rec in report.exercises],
                    "has_frames": bool(report.frames),
                }
            )
        return {"items": items}

    @app.get("/v1/patients/{pid}/sessions/{sid}/replay", dependencies=[auth])
    async def replay(pid: str, sid: str):
        doc, _ = store.get("session_reports", sid)
        if doc.get("patient") != pid:
            raise NotFoundError(f"session {sid} does not belong to patient {pid}")
        frames = doc.get("frames", [])
        return {"session": sid, "count": len(frames), "frames": frames}

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "time": datetime.now().isoformat(timespec="seconds")}

    return app
