"""Clinical protocol rules: phase classification and exercise recommendation.

A protocol orders rehabilitation phases, each guarded by a boolean
condition over the patient's latest range-of-motion explorations and
pain score. Phase membership selects exercise concepts; concepts accept
exercises through quantified filters over their movements' kinematic
components. Per-patient overrides add or forbid exercises on top of the
protocol, and contraindication always wins.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import UnknownNameError, ValidationError
from .movement import Movement, MovementType

UNCLASSIFIED = "Unclassified"

PROVENANCE_PHASE = "phase-match"
PROVENANCE_CARRY = "carry-over"
PROVENANCE_OVERRIDE = "override"

_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


# ----------------------------------------------------------------------
# Patient record
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Exploration:
    """One measured range-of-motion value for a joint location and side."""

    date: str
    location: str
    side: str
    type: MovementType
    rom: float

    def __post_init__(self):
        if self.side not in ("left", "right", "center"):
            raise ValidationError(f"exploration side must be left/right/center, got {self.side!r}")
        if not 0.0 <= self.rom <= 360.0:
            raise ValidationError(f"exploration ROM must lie in [0, 360], got {self.rom}")
        if not self.date:
            raise ValidationError("exploration needs a date")


@dataclass(frozen=True)
class VasReport:
    """Visual analogue pain score in [0, 10]."""

    date: str
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 10.0:
            raise ValidationError(f"VAS value must lie in [0, 10], got {self.value}")
        if not self.date:
            raise ValidationError("VAS report needs a date")


@dataclass(frozen=True)
class Surgery:
    label: str
    date: str
    side: str = ""  # "left" | "right" | "" when unspecified

    def __post_init__(self):
        if self.side not in ("", "left", "right"):
            raise ValidationError(f"surgery side must be left/right or empty, got {self.side!r}")


@dataclass(frozen=True)
class PatientRecord:
    """Clinical history snapshot used by classification and analytics."""

    id: str
    personal: Mapping[str, str] = field(default_factory=dict)
    symptoms: tuple[str, ...] = ()
    diagnoses: tuple[str, ...] = ()
    surgeries: tuple[Surgery, ...] = ()
    goals: tuple[str, ...] = ()
    explorations: tuple[Exploration, ...] = ()
    vas_reports: tuple[VasReport, ...] = ()
    protocol: str = ""  # protocol the patient follows, if assigned

    def __post_init__(self):
        if not self.id:
            raise ValidationError("patient record needs an id")
        object.__setattr__(self, "symptoms", tuple(self.symptoms))
        object.__setattr__(self, "diagnoses", tuple(self.diagnoses))
        object.__setattr__(self, "surgeries", tuple(self.surgeries))
        object.__setattr__(self, "goals", tuple(self.goals))
        object.__setattr__(self, "explorations", tuple(self.explorations))
        object.__setattr__(self, "vas_reports", tuple(self.vas_reports))
        for seq, label in ((self.explorations, "explorations"), (self.vas_reports, "vas_reports")):
            dates = [e.date for e in seq]
            if any(b < a for a, b in zip(dates, dates[1:])):
                raise ValidationError(f"{label} must be ordered by non-decreasing date")

    def operated_side(self) -> str:
        """Side declared on the most recent surgery entry, or '' if none."""
        for surgery in reversed(self.surgeries):
            if surgery.side:
                return surgery.side
        return ""


# ----------------------------------------------------------------------
# Condition expressions
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RomAtom:
    """Compare the latest matching exploration's ROM against a bound."""

    location: str
    type: MovementType
    cmp: str
    bound: float

    def __post_init__(self):
        if self.cmp not in _CMP:
            raise ValidationError(f"comparator must be one of {sorted(_CMP)}, got {self.cmp!r}")


@dataclass(frozen=True)
class VasAtom:
    """Latest pain score must be <= bound."""

    bound: float


@dataclass(frozen=True)
class AllOf:
    args: tuple


@dataclass(frozen=True)
class AnyOf:
    args: tuple


@dataclass(frozen=True)
class Neg:
    arg: object


Condition = object  # RomAtom | VasAtom | AllOf | AnyOf | Neg


def _rom_lookup(
    explorations: Sequence[Exploration], operated_side: str
) -> dict[tuple[str, str], float]:
    """Latest ROM per (location, type), honoring the side policy.

    With a declared operated side only that side's measurements count.
    Without one, the worst (minimum) of the per-side latest values is
    used, which keeps classification conservative.
    """
    latest: dict[tuple[str, str, str], Exploration] = {}
    for ex in explorations:
        # entries are append-ordered, so a later entry is never older
        latest[(ex.location, str(ex.type), ex.side)] = ex
    out: dict[tuple[str, str], float] = {}
    for (location, mtype, side), ex in latest.items():
        if operated_side and side != operated_side and side != "center":
            continue
        k = (location, mtype)
        if k not in out or ex.rom < out[k]:
            out[k] = ex.rom
    return out


def eval_condition(
    condition: Condition,
    explorations: Sequence[Exploration],
    vas_reports: Sequence[VasReport],
    operated_side: str = "",
) -> bool:
    """Evaluate a condition tree; atoms with no measurement are false."""
    rom = _rom_lookup(explorations, operated_side)
    latest_vas = vas_reports[-1].value if vas_reports else None
    return _eval(condition, rom, latest_vas)


def _eval(cond: Condition, rom: Mapping[tuple[str, str], float], vas: float | None) -> bool:
    if isinstance(cond, RomAtom):
        value = rom.get((cond.location, str(cond.type)))
        if value is None:
            return False
        return _CMP[cond.cmp](value, cond.bound)
    if isinstance(cond, VasAtom):
        return vas is not None and vas <= cond.bound
    if isinstance(cond, AllOf):
        return all(_eval(c, rom, vas) for c in cond.args)
    if isinstance(cond, AnyOf):
        return any(_eval(c, rom, vas) for c in cond.args)
    if isinstance(cond, Neg):
        return not _eval(cond.arg, rom, vas)
    raise ValidationError(f"unknown condition node {cond!r}")


# ----------------------------------------------------------------------
# Concepts and protocol
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MovementFilter:
    """Accepts a movement when some component matches location, type,
    and stays within max_rom."""

    location: str
    type: MovementType
    max_rom: float

    def __post_init__(self):
        if not 0.0 < self.max_rom <= 360.0:
            raise ValidationError(f"max_rom must lie in (0, 360], got {self.max_rom}")

    def matches(self, movement: Movement) -> bool:
        return any(
            c.location == self.location and c.type == self.type and c.rom <= self.max_rom
            for c in movement.components
        )


@dataclass(frozen=True)
class ExerciseConcept:
    """Quantified movement filter defining an exercise class."""

    name: str
    quantifier: str  # "all" | "some"
    filter: MovementFilter

    def __post_init__(self):
        if self.quantifier not in ("all", "some"):
            raise ValidationError(f"quantifier must be all/some, got {self.quantifier!r}")
        if not self.name:
            raise ValidationError("exercise concept needs a name")


def exercise_in_concept(movements: Sequence[Movement], concept: ExerciseConcept) -> bool:
    """Concept membership for an exercise given its movements in order.

    'all' requires every movement to pass the filter (one unrelated
    movement excludes the exercise); 'some' requires at least one.
    """
    if not movements:
        return False
    if concept.quantifier == "all":
        return all(concept.filter.matches(m) for m in movements)
    return any(concept.filter.matches(m) for m in movements)


@dataclass(frozen=True)
class ProtocolPhase:
    id: str
    condition: Condition
    concepts: tuple[str, ...] = ()
    any_phase_exercises: tuple[str, ...] = ()


@dataclass(frozen=True)
class Protocol:
    """Ordered phases (lowest first) plus the concept definitions they use."""

    name: str
    phases: tuple[ProtocolPhase, ...]
    concepts: Mapping[str, ExerciseConcept] = field(default_factory=dict)

    def __post_init__(self):
        phases = tuple(self.phases)
        if not phases:
            raise ValidationError("protocol needs at least one phase")
        ids = [p.id for p in phases]
        if len(set(ids)) != len(ids):
            raise ValidationError("phase ids must be unique")
        for phase in phases:
            for cname in phase.concepts:
                if cname not in self.concepts:
                    raise UnknownNameError(f"phase {phase.id!r} references unknown concept {cname!r}")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "concepts", dict(self.concepts))


def classify_patient_phase(patient: PatientRecord, protocol: Protocol) -> str:
    """Highest phase whose condition holds, else UNCLASSIFIED.

    Evaluating from the top down means a patient matching several phase
    conditions lands in the most advanced one.
    """
    side = patient.operated_side()
    rom = _rom_lookup(patient.explorations, side)
    vas = patient.vas_reports[-1].value if patient.vas_reports else None
    for phase in reversed(protocol.phases):
        if _eval(phase.condition, rom, vas):
            return phase.id
    return UNCLASSIFIED


# ----------------------------------------------------------------------
# Overrides and recommendation
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class OverrideRule:
    """Per-patient addition or prohibition, expressed as a quantified filter."""

    patient: str
    kind: str  # "recommend" | "contraindicate"
    filter: MovementFilter
    quantifier: str = "all"
    id: str = ""

    def __post_init__(self):
        if self.kind not in ("recommend", "contraindicate"):
            raise ValidationError(f"override kind must be recommend/contraindicate, got {self.kind!r}")
        if self.quantifier not in ("all", "some"):
            raise ValidationError(f"quantifier must be all/some, got {self.quantifier!r}")

    def describe(self) -> str:
        return (
            f"{self.kind} {self.filter.location} {self.filter.type} up to {self.filter.max_rom:g} deg"
            f" ({self.quantifier})"
        )


@dataclass(frozen=True)
class Recommendation:
    exercise: str
    provenance: str  # phase-match | carry-over | override


@dataclass(frozen=True)
class RecommendationSet:
    phase: str
    recommended: tuple[Recommendation, ...]
    contraindicated: tuple[tuple[str, str], ...]  # (exercise, rule description)

    def __post_init__(self):
        rec_names = {r.exercise for r in self.recommended}
        contra_names = {name for name, _ in self.contraindicated}
        if rec_names & contra_names:
            raise ValidationError("an exercise cannot be both recommended and contraindicated")

    def recommended_names(self) -> tuple[str, ...]:
        return tuple(r.exercise for r in self.recommended)


def recommend_exercises(
    patient: PatientRecord,
    protocol: Protocol,
    exercises: Mapping[str, Sequence[Movement]],
    overrides: Sequence[OverrideRule] = (),
) -> RecommendationSet:
    """Recommendations for the patient's current phase.

    exercises maps exercise name -> its movements in order. Phase concepts
    and explicit per-phase names contribute phase matches; everything
    below the matched phase carries over; recommend-overrides add their
    matches. Contraindicate-overrides then remove and report, so the
    recommended and contraindicated sets never intersect. An
    unclassifiable patient gets no recommendations, only contraindication
    listings.
    """
    phase_id = classify_patient_phase(patient, protocol)
    picked: dict[str, str] = {}  # exercise -> provenance, first writer wins

    def matches_phase(phase: ProtocolPhase, movements: Sequence[Movement], name: str) -> bool:
        if name in phase.any_phase_exercises:
            return True
        return any(
            exercise_in_concept(movements, protocol.concepts[c]) for c in phase.concepts
        )

    if phase_id != UNCLASSIFIED:
        index = next(i for i, p in enumerate(protocol.phases) if p.id == phase_id)
        for name in sorted(exercises):
            if matches_phase(protocol.phases[index], exercises[name], name):
                picked[name] = PROVENANCE_PHASE
        for lower in protocol.phases[:index]:
            for name in sorted(exercises):
                if name not in picked and matches_phase(lower, exercises[name], name):
                    picked[name] = PROVENANCE_CARRY
        for rule in overrides:
            if rule.kind != "recommend" or rule.patient != patient.id:
                continue
            concept = ExerciseConcept(name="override", quantifier=rule.quantifier, filter=rule.filter)
            for name in sorted(exercises):
                if name not in picked and exercise_in_concept(exercises[name], concept):
                    picked[name] = PROVENANCE_OVERRIDE

    contraindicated: dict[str, str] = {}
    for rule in overrides:
        if rule.kind != "contraindicate" or rule.patient != patient.id:
            continue
        concept = ExerciseConcept(name="override", quantifier=rule.quantifier, filter=rule.filter)
        for name in sorted(exercises):
            if exercise_in_concept(exercises[name], concept) and name not in contraindicated:
                contraindicated[name] = rule.describe()
    for name in contraindicated:
        picked.pop(name, None)

    return RecommendationSet(
        phase=phase_id,
        recommended=tuple(Recommendation(n, p) for n, p in sorted(picked.items())),
        contraindicated=tuple(sorted(contraindicated.items())),
    )


# ----------------------------------------------------------------------
# Document round-trip
# ----------------------------------------------------------------------

def condition_to_doc(cond: Condition) -> dict:
    if isinstance(cond, RomAtom):
        return {
            "rom": {
                "location": cond.location,
                "type": str(cond.type),
                "cmp": cond.cmp,
                "bound": cond.bound,
            }
        }
    if isinstance(cond, VasAtom):
        return {"vas": {"bound": cond.bound}}
    if isinstance(cond, AllOf):
        return {"all": [condition_to_doc(c) for c in cond.args]}
    if isinstance(cond, AnyOf):
        return {"any": [condition_to_doc(c) for c in cond.args]}
    if isinstance(cond, Neg):
        return {"not": condition_to_doc(cond.arg)}
    raise ValidationError(f"unknown condition node {cond!r}")


def condition_from_doc(doc: Mapping) -> Condition:
    if "rom" in doc:
        r = doc["rom"]
        return RomAtom(
            location=r["location"], type=MovementType.parse(r["type"]), cmp=r["cmp"], bound=float(r["bound"])
        )
    if "vas" in doc:
        return VasAtom(bound=float(doc["vas"]["bound"]))
    if "all" in doc:
        return AllOf(tuple(condition_from_doc(c) for c in doc["all"]))
    if "any" in doc:
        return AnyOf(tuple(condition_from_doc(c) for c in doc["any"]))
    if "not" in doc:
        return Neg(condition_from_doc(doc["not"]))
    raise ValidationError(f"unknown condition document {dict(doc)!r}")


def protocol_to_doc(protocol: Protocol) -> dict:
    return {
        "id": protocol.name,
        "concepts": {
            name: {
                "quantifier": c.quantifier,
                "filter": {
                    "location": c.filter.location,
                    "type": str(c.filter.type),
                    "max_rom": c.filter.max_rom,
                },
            }
            for name, c in sorted(protocol.concepts.items())
        },
        "phases": [
            {
                "id": p.id,
                "condition": condition_to_doc(p.condition),
                "concepts": list(p.concepts),
                "any_phase_exercises": list(p.any_phase_exercises),
            }
            for p in protocol.phases
        ],
    }


def protocol_from_doc(doc: Mapping) -> Protocol:
    try:
        concepts = {
            name: ExerciseConcept(
                name=name,
                quantifier=c["quantifier"],
                filter=MovementFilter(
                    location=c["filter"]["location"],
                    type=MovementType.parse(c["filter"]["type"]),
                    max_rom=float(c["filter"]["max_rom"]),
                ),
            )
            for name, c in doc.get("concepts", {}).items()
        }
        phases = tuple(
            ProtocolPhase(
                id=p["id"],
                condition=condition_from_doc(p["condition"]),
                concepts=tuple(p.get("concepts", ())),
                any_phase_exercises=tuple(p.get("any_phase_exercises", ())),
            )
            for p in doc["phases"]
        )
        return Protocol(name=doc["id"], phases=phases, concepts=concepts)
    except KeyError as exc:
        raise ValidationError(f"protocol document missing field {exc}") from exc


def patient_to_doc(patient: PatientRecord) -> dict:
    doc = {
        "id": patient.id,
        "personal": dict(patient.personal),
        "symptoms": list(patient.symptoms),
        "diagnoses": list(patient.diagnoses),
        "surgeries": [
            {"label": s.label, "date": s.date, **({"side": s.side} if s.side else {})}
            for s in patient.surgeries
        ],
        "goals": list(patient.goals),
        "explorations": [
            {"date": e.date, "location": e.location, "side": e.side, "type": str(e.type), "rom": e.rom}
            for e in patient.explorations
        ],
        "vas_reports": [{"date": v.date, "value": v.value} for v in patient.vas_reports],
    }
    if patient.protocol:
        doc["protocol"] = patient.protocol
    return doc


def patient_from_doc(doc: Mapping) -> PatientRecord:
    try:
        return PatientRecord(
            id=doc["id"],
            personal=dict(doc.get("personal", {})),
            symptoms=tuple(doc.get("symptoms", ())),
            diagnoses=tuple(doc.get("diagnoses", ())),
            surgeries=tuple(
                Surgery(label=s["label"], date=s["date"], side=s.get("side", ""))
                for s in doc.get("surgeries", ())
            ),
            goals=tuple(doc.get("goals", ())),
            explorations=tuple(
                Exploration(
                    date=e["date"],
                    location=e["location"],
                    side=e["side"],
                    type=MovementType.parse(e["type"]),
                    rom=float(e["rom"]),
                )
                for e in doc.get("explorations", ())
            ),
            vas_reports=tuple(
                VasReport(date=v["date"], value=float(v["value"])) for v in doc.get("vas_reports", ())
            ),
            protocol=doc.get("protocol", ""),
        )
    except KeyError as exc:
        raise ValidationError(f"patient document missing field {exc}") from exc


def override_to_doc(rule: OverrideRule) -> dict:
    return {
        "id": rule.id or f"{rule.patient}-{rule.kind}-{rule.filter.location}-{rule.filter.type}",
        "patient": rule.patient,
        "kind": rule.kind,
        "quantifier": rule.quantifier,
        "filter": {
            "location": rule.filter.location,
            "type": str(rule.filter.type),
            "max_rom": rule.filter.max_rom,
        },
    }


def override_from_doc(doc: Mapping) -> OverrideRule:
    try:
        return OverrideRule(
            patient=doc["patient"],
            kind=doc["kind"],
            quantifier=doc.get("quantifier", "all"),
            filter=MovementFilter(
                location=doc["filter"]["location"],
                type=MovementType.parse(doc["filter"]["type"]),
                max_rom=float(doc["filter"]["max_rom"]),
            ),
            id=doc.get("id", ""),
        )
    except KeyError as exc:
        raise ValidationError(f"override document missing field {exc}") from exc
