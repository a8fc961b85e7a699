"""File-backed document store with revisions, integrity checks, and audit log.

One directory per collection, one JSON file per document. Every write
replaces the whole file via write-then-rename, so a reader never sees a
half-written document and a crash leaves either the old or the new
version. Deletes leave tombstones so revision numbers are never reused.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import assessment, knowledge, movement as movement_mod, posture as posture_mod, session as session_mod
from .errors import ConflictError, IntegrityError, NotFoundError, ValidationError
from .posture import FeatureBasis, PostureLibrary, basis_from_doc, basis_to_doc, default_basis

log = logging.getLogger(__name__)

COLLECTIONS = (
    "patients",
    "postures",
    "movements",
    "exercises",
    "protocols",
    "tests",
    "assignments",
    "session_reports",
    "overrides",
)


def _validate_assignment(doc: Mapping) -> None:
    for field in ("patient", "exercise"):
        if not doc.get(field):
            raise ValidationError(f"assignment needs field {field!r}")
    series = int(doc.get("series", 1))
    reps = int(doc.get("reps", 1))
    if series < 1 or reps < 1:
        raise ValidationError("assignment series and reps must be >= 1")


class Store:
    """Document persistence rooted at one directory. Safe for concurrent
    use from multiple threads; all operations funnel through one lock."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.RLock()
        self.root.mkdir(parents=True, exist_ok=True)
        for name in COLLECTIONS:
            (self.root / name).mkdir(exist_ok=True)
        if not (self.root / "basis.json").exists():
            self._write_json(self.root / "basis.json", basis_to_doc(default_basis()))

    # -- low-level files -----------------------------------------------------

    @staticmethod
    def _write_json(path: Path, payload: Mapping) -> None:
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)

    def _path(self, collection: str, doc_id: str) -> Path:
        if collection not in COLLECTIONS:
            raise ValidationError(f"unknown collection {collection!r}")
        if not doc_id or "/" in doc_id or doc_id.startswith("."):
            raise ValidationError(f"invalid document id {doc_id!r}")
        return self.root / collection / f"{doc_id}.json"

    def _read_envelope(self, collection: str, doc_id: str) -> dict | None:
        path = self._path(collection, doc_id)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def _audit(self, op: str, collection: str, doc_id: str, rev: int) -> None:
        line = json.dumps(
            {"ts": time.time(), "op": op, "collection": collection, "id": doc_id, "rev": rev}
        )
        with open(self.root / "audit.log", "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    # -- basis -----------------------------------------------------------------

    def basis(self) -> FeatureBasis:
        return basis_from_doc(json.loads((self.root / "basis.json").read_text(encoding="utf-8")))

    def set_basis(self, basis: FeatureBasis) -> None:
        with self._lock:
            if list(self.list_ids("postures")):
                raise IntegrityError("cannot change the basis while postures exist")
            self._write_json(self.root / "basis.json", basis_to_doc(basis))

    # -- CRUD --------------------------------------------------------------------

    def put(self, collection: str, doc_id: str, doc: Mapping, if_absent: bool = False) -> int:
        with self._lock:
            self._validate(collection, doc_id, doc)
            envelope = self._read_envelope(collection, doc_id)
            if envelope is not None and if_absent and not envelope.get("deleted"):
                raise ConflictError(f"{collection}/{doc_id} already exists")
            rev = (envelope["rev"] if envelope else 0) + 1
            self._write_json(self._path(collection, doc_id), {"rev": rev, "doc": dict(doc)})
            self._audit("put", collection, doc_id, rev)
            return rev

    def get(self, collection: str, doc_id: str) -> tuple[dict, int]:
        with self._lock:
            envelope = self._read_envelope(collection, doc_id)
            if envelope is None or envelope.get("deleted"):
                raise NotFoundError(f"{collection}/{doc_id} not found")
            return envelope["doc"], envelope["rev"]

    def exists(self, collection: str, doc_id: str) -> bool:
        envelope = self._read_envelope(collection, doc_id)
        return envelope is not None and not envelope.get("deleted")

    def list_ids(self, collection: str) -> list[str]:
        with self._lock:
            if collection not in COLLECTIONS:
                raise ValidationError(f"unknown collection {collection!r}")
            ids = []
            for path in sorted((self.root / collection).glob("*.json")):
                envelope = json.loads(path.read_text(encoding="utf-8"))
                if not envelope.get("deleted"):
                    ids.append(path.stem)
            return ids

    def list_docs(self, collection: str) -> list[dict]:
        return [
            {**self.get(collection, doc_id)[0], "id": doc_id}
            for doc_id in self.list_ids(collection)
        ]

    def delete(self, collection: str, doc_id: str) -> int:
        with self._lock:
            envelope = self._read_envelope(collection, doc_id)
            if envelope is None or envelope.get("deleted"):
                raise NotFoundError(f"{collection}/{doc_id} not found")
            holders = self._referrers(collection, doc_id)
            if holders:
                raise IntegrityError(
                    f"{collection}/{doc_id} is referenced by {', '.join(sorted(holders))}"
                )
            rev = envelope["rev"] + 1
            self._write_json(self._path(collection, doc_id), {"rev": rev, "deleted": True})
            self._audit("delete", collection, doc_id, rev)
            return rev

    def next_id(self, collection: str, prefix: str) -> str:
        """Smallest unused sequential id with the given prefix."""
        with self._lock:
            existing = set(self.list_ids(collection))
            n = len(existing) + 1
            while f"{prefix}{n:04d}" in existing:
                n += 1
            return f"{prefix}{n:04d}"

    # -- integrity ------------------------------------------------------------------

    def _require(self, collection: str, doc_id: str, context: str) -> None:
        if not self.exists(collection, doc_id):
            raise IntegrityError(f"{context} references missing {collection}/{doc_id}")

    def _validate(self, collection: str, doc_id: str, doc: Mapping) -> None:
        if collection == "patients":
            knowledge.patient_from_doc({**doc, "id": doc_id})
        elif collection == "postures":
            posture_mod.concept_from_doc({**doc, "id": doc_id})
        elif collection == "movements":
            parsed = movement_mod.movement_from_doc({**doc, "id": doc_id})
            for pname in (parsed.initial, parsed.final):
                self._require("postures", pname, f"movement {doc_id}")
        elif collection == "exercises":
            parsed = session_mod.exercise_from_doc({**doc, "id": doc_id})
            for mname in parsed.movements:
                self._require("movements", mname, f"exercise {doc_id}")
            session_mod.validate_chain(parsed, self.movements_map(parsed.movements))
        elif collection == "protocols":
            knowledge.protocol_from_doc({**doc, "id": doc_id})
        elif collection == "tests":
            assessment.test_from_doc({**doc, "id": doc_id})
        elif collection == "assignments":
            _validate_assignment(doc)
            self._require("patients", doc["patient"], f"assignment {doc_id}")
            self._require("exercises", doc["exercise"], f"assignment {doc_id}")
        elif collection == "session_reports":
            parsed = session_mod.report_from_doc(doc)
            self._require("patients", parsed.patient, f"session report {doc_id}")
            for entry in parsed.plan.entries:
                self._require("exercises", entry.exercise, f"session report {doc_id}")
        elif collection == "overrides":
            parsed = knowledge.override_from_doc({**doc, "id": doc_id})
            self._require("patients", parsed.patient, f"override {doc_id}")

    def _referrers(self, collection: str, doc_id: str) -> list[str]:
        """Documents that point at collection/doc_id and would dangle."""
        holders: list[str] = []
        if collection == "postures":
            for mid in self.list_ids("movements"):
                doc, _ = self.get("movements", mid)
                if doc_id in (doc.get("initial"), doc.get("final")):
                    holders.append(f"movements/{mid}")
        elif collection == "movements":
            for eid in self.list_ids("exercises"):
                doc, _ = self.get("exercises", eid)
                if doc_id in doc.get("movements", ()):
                    holders.append(f"exercises/{eid}")
        elif collection == "exercises":
            for aid in self.list_ids("assignments"):
                doc, _ = self.get("assignments", aid)
                if doc.get("exercise") == doc_id:
                    holders.append(f"assignments/{aid}")
        elif collection == "patients":
            for other, field in (("assignments", "patient"), ("overrides", "patient"), ("session_reports", "patient")):
                for oid in self.list_ids(other):
                    doc, _ = self.get(other, oid)
                    if doc.get(field) == doc_id:
                        holders.append(f"{other}/{oid}")
        return holders

    # -- typed loaders ------------------------------------------------------------------

    def posture_library(self) -> PostureLibrary:
        library = PostureLibrary(basis=self.basis())
        for pid in self.list_ids("postures"):
            doc, _ = self.get("postures", pid)
            library.add(posture_mod.concept_from_doc({**doc, "id": pid}))
        return library

    def movements_map(self, names: Iterable[str] | None = None) -> dict:
        wanted = list(names) if names is not None else self.list_ids("movements")
        out = {}
        for name in wanted:
            doc, _ = self.get("movements", name)
            out[name] = movement_mod.movement_from_doc({**doc, "id": name})
        return out

    def exercises_map(self) -> dict:
        return {
            eid: session_mod.exercise_from_doc({**self.get("exercises", eid)[0], "id": eid})
            for eid in self.list_ids("exercises")
        }

    def exercise_movements(self) -> dict[str, list]:
        """exercise name -> resolved Movement list, for the recommender."""
        movements = self.movements_map()
        return {
            name: [movements[m] for m in exercise.movements]
            for name, exercise in self.exercises_map().items()
        }

    def patient(self, patient_id: str) -> knowledge.PatientRecord:
        doc, _ = self.get("patients", patient_id)
        return knowledge.patient_from_doc({**doc, "id": patient_id})

    def protocol(self, name: str) -> knowledge.Protocol:
        doc, _ = self.get("protocols", name)
        return knowledge.protocol_from_doc({**doc, "id": name})

    def overrides_for(self, patient_id: str) -> list[knowledge.OverrideRule]:
        rules = []
        for oid in self.list_ids("overrides"):
            doc, _ = self.get("overrides", oid)
            if doc.get("patient") == patient_id:
                rules.append(knowledge.override_from_doc({**doc, "id": oid}))
        return rules

    def reports_for(self, patient_id: str) -> list[tuple[str, session_mod.SessionReport]]:
        out = []
        for rid in self.list_ids("session_reports"):
            doc, _ = self.get("session_reports", rid)
            if doc.get("patient") == patient_id:
                out.append((rid, session_mod.report_from_doc(doc)))
        return out
