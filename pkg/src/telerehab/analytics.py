"""Session-report analytics: rating time series, cohort means, ROM extents."""
from __future__ import annotations

import io
import csv
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .errors import NotFoundError, ValidationError
from .knowledge import Exploration, PatientRecord
from .movement import MovementType
from .posture import FeatureBasis
from .session import SessionReport, rep_rating

# Interior limb angles read 180 deg when the limb is straight; anatomical
# range of motion counts degrees of bend away from straight.
STRAIGHT_ANGLE = 180.0

ANGLE_FOR_LOCATION = {
    ("HipJoint", "left"): "hip_left",
    ("HipJoint", "right"): "hip_right",
    ("KneeJoint", "left"): "knee_left",
    ("KneeJoint", "right"): "knee_right",
    ("AnkleJoint", "left"): "ankle_left",
    ("AnkleJoint", "right"): "ankle_right",
    ("ElbowJoint", "left"): "elbow_left",
    ("ElbowJoint", "right"): "elbow_right",
    ("ShoulderJoint", "left"): "shoulder_left",
    ("ShoulderJoint", "right"): "shoulder_right",
    ("WristJoint", "left"): "wrist_left",
    ("WristJoint", "right"): "wrist_right",
}


@dataclass(frozen=True)
class RatingPoint:
    ordinal: int
    date: str
    exercise_rating: float
    posture_rating: float

    def __post_init__(self):
        if self.ordinal < 1:
            raise ValidationError(f"session ordinal must be positive, got {self.ordinal}")
        for value, label in (
            (self.exercise_rating, "exercise_rating"),
            (self.posture_rating, "posture_rating"),
        ):
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{label} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class RomExtent:
    location: str
    side: str
    type: MovementType
    min: float
    max: float

    def __post_init__(self):
        if self.max < self.min:
            raise ValidationError(f"extent max {self.max} below min {self.min}")

    @property
    def arc(self) -> float:
        return self.max - self.min


def session_ratings(report: SessionReport, ordinal: int = 1) -> RatingPoint:
    """Mean exercise and posture ratings over everything in one report."""
    reps = [rep for record in report.exercises for rep in record.reps]
    if not report.exercises or not reps:
        raise ValidationError("report holds no scored exercises")
    ratings = [record.exercise_rating for record in report.exercises]
    postures = [r for rep in reps for r in rep.posture_ratings]
    posture_mean = sum(postures) / len(postures) if postures else 0.0
    return RatingPoint(
        ordinal=ordinal,
        date=report.date,
        exercise_rating=sum(ratings) / len(ratings),
        posture_rating=posture_mean,
    )


def patient_timeseries(reports: Sequence[tuple[str, SessionReport]]) -> list[RatingPoint]:
    """Date-ordered rating points for one patient.

    reports are (report id, report) pairs; the id breaks date ties so the
    series is stable under storage order.
    """
    usable = [(rid, rep) for rid, rep in reports if rep.exercises and any(r.reps for r in rep.exercises)]
    ordered = sorted(usable, key=lambda item: (item[1].date, item[0]))
    return [session_ratings(report, ordinal=i) for i, (_, report) in enumerate(ordered, start=1)]


def cohort_average(series: Mapping[str, Sequence[RatingPoint]]) -> list[tuple[int, float, int]]:
    """Per-ordinal mean exercise rating across patients, with sample counts."""
    by_ordinal: dict[int, list[float]] = {}
    for points in series.values():
        for point in points:
            by_ordinal.setdefault(point.ordinal, []).append(point.exercise_rating)
    return [
        (ordinal, sum(vals) / len(vals), len(vals))
        for ordinal, vals in sorted(by_ordinal.items())
    ]


def timeseries_csv(points: Sequence[RatingPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["ordinal", "date", "exercise_rating", "posture_rating"])
    for p in points:
        writer.writerow([p.ordinal, p.date, f"{p.exercise_rating:.6f}", f"{p.posture_rating:.6f}"])
    return buf.getvalue()


def rom_extents(
    report: SessionReport,
    location: str,
    side: str,
    type: MovementType,
    basis: FeatureBasis | None = None,
) -> RomExtent:
    """Anatomical ROM extremes achieved across all matching rep traces.

    A trace matches when its movement has a kinematic component at the
    requested location, side, and type. The anatomical angle is read from
    the basis angle for that joint as degrees of bend from straight.
    """
    angle_name = ANGLE_FOR_LOCATION.get((location, side))
    if angle_name is None:
        raise ValidationError(f"no angle mapping for location {location!r} side {side!r}")
    lo, hi = float("inf"), float("-inf")
    for record in report.exercises:
        for rep in record.reps:
            for trace in rep.traces:
                matches = any(
                    c.location == location and c.side == side and c.type == type
                    for c in trace.components
                )
                if not matches or angle_name not in trace.trajectory.angle_names:
                    continue
                row = trace.trajectory.angle_names.index(angle_name)
                values = STRAIGHT_ANGLE - trace.trajectory.samples[row, :]
                lo = min(lo, float(values.min()))
                hi = max(hi, float(values.max()))
    if lo > hi:
        raise NotFoundError(
            f"report holds no trace for {location}/{side}/{type}"
        )
    return RomExtent(location=location, side=side, type=type, min=lo, max=hi)


def update_exploration(patient: PatientRecord, extent: RomExtent, date: str) -> PatientRecord:
    """Append a session-derived exploration entry crediting the achieved max."""
    entry = Exploration(
        date=date, location=extent.location, side=extent.side, type=extent.type, rom=extent.max
    )
    return replace(patient, explorations=patient.explorations + (entry,))
