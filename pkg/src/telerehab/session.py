"""Monitoring state machine: frames in, feedback events and a scored report out.

The engine walks a session plan (exercises x series x reps). Each movement
is monitored in stages: wait for the initial posture, hold it, accumulate
the traversal, hold the final posture, then score the traversal against
the movement's reference trajectory. Proximity to the current target
posture is reported on a three-level color scale.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ChainError, SessionStateError, UnknownNameError, ValidationError
from .movement import Movement, Trajectory, extract_trajectory, trajectory_similarity
from .posture import DEFAULT_ALPHA, PostureLibrary, descriptor, descriptor_distance
from .skeleton import Recording, SkeletonFrame

log = logging.getLogger(__name__)

CORRECT_THRESHOLD = 0.7


# ----------------------------------------------------------------------
# Plan model
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Exercise:
    """Named sequence of movements; consecutive movements must chain."""

    name: str
    movements: tuple[str, ...]
    description: str = ""
    default_series: int = 1
    default_reps: int = 1

    def __post_init__(self):
        if not self.name:
            raise ValidationError("exercise needs a name")
        object.__setattr__(self, "movements", tuple(self.movements))
        if not self.movements:
            raise ValidationError(f"exercise {self.name!r} needs at least one movement")
        if self.default_series < 1 or self.default_reps < 1:
            raise ValidationError(f"exercise {self.name!r} series/reps must be >= 1")


def validate_chain(exercise: Exercise, movements: Mapping[str, Movement]) -> None:
    """Check every referenced movement exists and final/initial postures chain."""
    resolved = []
    for mname in exercise.movements:
        if mname not in movements:
            raise UnknownNameError(f"exercise {exercise.name!r} references unknown movement {mname!r}")
        resolved.append(movements[mname])
    for prev, nxt in zip(resolved, resolved[1:]):
        if prev.final != nxt.initial:
            raise ChainError(
                f"exercise {exercise.name!r}: movement {prev.name!r} ends at {prev.final!r}"
                f" but {nxt.name!r} starts at {nxt.initial!r}"
            )


@dataclass(frozen=True)
class PlanEntry:
    exercise: str
    series: int = 1
    reps: int = 1

    def __post_init__(self):
        if self.series < 1 or self.reps < 1:
            raise ValidationError(f"plan entry {self.exercise!r}: series and reps must be >= 1")


@dataclass(frozen=True)
class SessionPlan:
    entries: tuple[PlanEntry, ...]
    hold_time: float = 1.0
    rest_between_series: float = 0.0
    timeout_per_movement: float = 30.0
    pain_prompt: bool = False

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValidationError("session plan needs at least one exercise entry")
        if self.hold_time < 0 or self.rest_between_series < 0:
            raise ValidationError("hold_time and rest_between_series must be >= 0")
        if self.timeout_per_movement <= 0:
            raise ValidationError("timeout_per_movement must be positive")


# ----------------------------------------------------------------------
# Feedback events
# ----------------------------------------------------------------------

class ProximityLevel(enum.Enum):
    Green = "green"
    Yellow = "yellow"
    Red = "red"


def proximity_level(distance: float, tau: float) -> ProximityLevel:
    """Three-level closeness scale around a posture threshold."""
    if tau <= 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    if distance < tau:
        return ProximityLevel.Green
    if distance < 2 * tau:
        return ProximityLevel.Yellow
    return ProximityLevel.Red


@dataclass(frozen=True)
class FeedbackEvent:
    t: float


@dataclass(frozen=True)
class ProximityChanged(FeedbackEvent):
    level: ProximityLevel
    distance: float


@dataclass(frozen=True)
class PostureReached(FeedbackEvent):
    posture: str
    rating: float


@dataclass(frozen=True)
class MovementScored(FeedbackEvent):
    movement: str
    similarity: float


@dataclass(frozen=True)
class MovementTimedOut(FeedbackEvent):
    movement: str


@dataclass(frozen=True)
class RepCompleted(FeedbackEvent):
    remaining: int


@dataclass(frozen=True)
class SeriesCompleted(FeedbackEvent):
    remaining: int


@dataclass(frozen=True)
class ExerciseCompleted(FeedbackEvent):
    exercise: str
    correct: bool
    rating: float


@dataclass(frozen=True)
class SessionCompleted(FeedbackEvent):
    pass


def event_to_doc(event: FeedbackEvent) -> dict:
    doc: dict = {"t": event.t, "event": type(event).__name__}
    for key, value in vars(event).items():
        if key == "t":
            continue
        doc[key] = value.value if isinstance(value, ProximityLevel) else value
    return doc


# ----------------------------------------------------------------------
# HUD snapshot
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HudSnapshot:
    next_posture: str
    movement_state: str
    series_left: int
    reps_left: int
    ribbon: tuple[tuple[str, bool], ...]
    explanation: str

    def __post_init__(self):
        if self.series_left < 0 or self.reps_left < 0:
            raise ValidationError("HUD counters cannot be negative")


# ----------------------------------------------------------------------
# Report model
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MovementTrace:
    """Observed relevant-angle trajectory for one scored movement,
    with the movement's kinematic components carried along so analytics
    can work from the report alone."""

    movement: str
    components: tuple  # KinematicComponent tuple, denormalized
    trajectory: Trajectory


@dataclass(frozen=True)
class RepRecord:
    posture_ratings: tuple[float, ...]
    similarities: tuple[float, ...]
    timed_out: bool
    traces: tuple[MovementTrace, ...]


@dataclass(frozen=True)
class ExerciseRecord:
    exercise: str
    reps: tuple[RepRecord, ...]
    correct: bool
    exercise_rating: float


@dataclass(frozen=True)
class SessionReport:
    patient: str
    plan: SessionPlan
    exercises: tuple[ExerciseRecord, ...]
    t_start: float
    t_end: float
    aborted: bool = False
    vas_due: bool = False
    date: str = ""
    frames: tuple[SkeletonFrame, ...] = ()

    def __post_init__(self):
        for record in self.exercises:
            for rep in record.reps:
                values = list(rep.posture_ratings) + list(rep.similarities)
                if any(not 0.0 <= v <= 1.0 for v in values):
                    raise ValidationError("ratings and similarities must lie in [0, 1]")


def rep_rating(rep: RepRecord) -> float:
    """Mean trajectory similarity across the rep's movements.

    Posture precision is reported separately (posture_ratings measures
    proximity at the instant each hold registers, which lags the exact
    pose); blending it here would mark even a flawless replay down.
    Nothing scored scores 0.
    """
    if not rep.similarities:
        return 0.0
    return sum(rep.similarities) / len(rep.similarities)


# ----------------------------------------------------------------------
# Engine
# ----------------------------------------------------------------------

class _Stage(enum.Enum):
    AwaitInitial = "await-initial"
    HoldInitial = "hold-initial"
    Transit = "transit"
    HoldFinal = "hold-final"
    Rest = "rest"
    Done = "done"


class SessionEngine:
    """Sequential frame consumer for one monitored session.

    Not safe for concurrent use; feed frames with strictly increasing
    timestamps and call finish() when done (or to abort).
    """

    def __init__(
        self,
        plan: SessionPlan,
        exercises: Mapping[str, Exercise],
        movements: Mapping[str, Movement],
        postures: PostureLibrary,
        patient: str = "",
        alpha: float = DEFAULT_ALPHA,
        correct_threshold: float = CORRECT_THRESHOLD,
        record_frames: bool = False,
    ):
        for entry in plan.entries:
            if entry.exercise not in exercises:
                raise UnknownNameError(f"plan references unknown exercise {entry.exercise!r}")
            exercise = exercises[entry.exercise]
            validate_chain(exercise, movements)
            for mname in exercise.movements:
                movement = movements[mname]
                for pname in (movement.initial, movement.final):
                    postures.get(pname)  # raises UnknownNameError on dangling reference
        self.plan = plan
        self.exercises = dict(exercises)
        self.movements = dict(movements)
        self.postures = postures
        self.patient = patient
        self.alpha = alpha
        self.correct_threshold = correct_threshold
        self.record_frames = record_frames

        self._entry_idx = 0
        self._series_idx = 0
        self._rep_idx = 0
        self._movement_idx = 0
        self._stage = _Stage.AwaitInitial
        self._last_t: float | None = None
        self._first_t: float | None = None
        self._activation_t: float | None = None
        self._hold_start: float | None = None
        self._hold_min = float("inf")
        self._left_initial_green = False
        self._last_level: ProximityLevel | None = None
        self._rest_until = 0.0
        self._transit: list[SkeletonFrame] = []
        self._window_start_t: float | None = None

        self._rep_ratings: list[float] = []
        self._rep_sims: list[float] = []
        self._rep_traces: list[MovementTrace] = []
        self._rep_timed_out = False
        self._exercise_reps: list[RepRecord] = []
        self._records: list[ExerciseRecord] = []
        self._frames: list[SkeletonFrame] = []

    # -- current pointers ------------------------------------------------

    @property
    def completed(self) -> bool:
        return self._stage is _Stage.Done

    def _entry(self) -> PlanEntry:
        return self.plan.entries[self._entry_idx]

    def _exercise(self) -> Exercise:
        return self.exercises[self._entry().exercise]

    def _movement(self) -> Movement:
        return self.movements[self._exercise().movements[self._movement_idx]]

    def _target_posture(self) -> str:
        movement = self._movement()
        if self._stage in (_Stage.AwaitInitial, _Stage.HoldInitial, _Stage.Rest):
            return movement.initial
        return movement.final

    def hud(self) -> HudSnapshot:
        if self._stage is _Stage.Done:
            return HudSnapshot(
                next_posture="", movement_state=_Stage.Done.value,
                series_left=0, reps_left=0, ribbon=(), explanation="",
            )
        entry, exercise = self._entry(), self._exercise()
        chain = [self.movements[exercise.movements[0]].initial]
        chain += [self.movements[m].final for m in exercise.movements]
        flags = [self._stage not in (_Stage.AwaitInitial, _Stage.HoldInitial, _Stage.Rest) or self._movement_idx > 0]
        flags += [idx < self._movement_idx for idx in range(len(exercise.movements))]
        return HudSnapshot(
            next_posture=self._target_posture(),
            movement_state=self._stage.value,
            series_left=entry.series - self._series_idx,
            reps_left=entry.reps - self._rep_idx,
            ribbon=tuple(zip(chain, flags)),
            explanation=exercise.description,
        )

    # -- frame processing --------------------------------------------------

    def feed_frame(self, frame: SkeletonFrame) -> list[FeedbackEvent]:
        if self._stage is _Stage.Done:
            raise SessionStateError("session already completed")
        if self._last_t is not None and frame.t <= self._last_t:
            raise SessionStateError(f"frame t={frame.t} not after previous t={self._last_t}")
        self._last_t = frame.t
        if self._first_t is None:
            self._first_t = frame.t
        if self.record_frames:
            self._frames.append(frame)

        if self._stage is _Stage.Rest:
            if frame.t < self._rest_until:
                return []
            self._stage = _Stage.AwaitInitial

        if self._activation_t is None:
            self._activation_t = frame.t

        events: list[FeedbackEvent] = []
        movement = self._movement()
        target = self.postures.get(self._target_posture())
        desc = descriptor(frame, self.postures.basis)
        dist = descriptor_distance(desc, target.reference, self.alpha)
        level = proximity_level(dist, target.tau)
        if level is not self._last_level:
            events.append(ProximityChanged(t=frame.t, level=level, distance=dist))
            self._last_level = level

        if frame.t - self._activation_t > self.plan.timeout_per_movement:
            self._rep_timed_out = True
            events.append(MovementTimedOut(t=frame.t, movement=movement.name))
            log.info("movement %s timed out at t=%.3f", movement.name, frame.t)
            self._finish_rep(frame.t, events)
            return events

        if self._stage is _Stage.AwaitInitial:
            if level is ProximityLevel.Green:
                self._stage = _Stage.HoldInitial
                self._hold_start = frame.t
                self._check_initial_hold(frame)
        elif self._stage is _Stage.HoldInitial:
            if level is not ProximityLevel.Green:
                self._stage = _Stage.AwaitInitial
                self._hold_start = None
            else:
                self._check_initial_hold(frame)
        elif self._stage is _Stage.Transit:
            self._transit.append(frame)
            if not self._left_initial_green:
                initial = self.postures.get(movement.initial)
                d_init = descriptor_distance(desc, initial.reference, self.alpha)
                if proximity_level(d_init, initial.tau) is not ProximityLevel.Green:
                    self._left_initial_green = True
                else:
                    # still inside the initial posture: the scoring window
                    # opens at the last such frame, mirroring how the
                    # movement's reference was trimmed when recorded
                    self._window_start_t = frame.t
            if self._left_initial_green and level is ProximityLevel.Green:
                self._stage = _Stage.HoldFinal
                self._hold_start = frame.t
                self._hold_min = dist
                self._check_final_hold(frame, events)
        elif self._stage is _Stage.HoldFinal:
            self._transit.append(frame)
            if level is not ProximityLevel.Green:
                self._stage = _Stage.Transit
                self._hold_start = None
                self._hold_min = float("inf")
            else:
                self._hold_min = min(self._hold_min, dist)
                self._check_final_hold(frame, events)
        return events

    def feed_recording(self, recording: Recording) -> list[FeedbackEvent]:
        """Feed every frame in order; stop early if the session completes."""
        events: list[FeedbackEvent] = []
        for frame in recording.frames:
            events.extend(self.feed_frame(frame))
            if self._stage is _Stage.Done:
                break
        return events

    # -- stage transitions -------------------------------------------------

    def _check_initial_hold(self, frame: SkeletonFrame) -> None:
        if frame.t - self._hold_start >= self.plan.hold_time:
            self._stage = _Stage.Transit
            self._left_initial_green = False
            self._transit = [frame]
            self._window_start_t = frame.t

    def _check_final_hold(self, frame: SkeletonFrame, events: list[FeedbackEvent]) -> None:
        if frame.t - self._hold_start < self.plan.hold_time:
            return
        movement = self._movement()
        target = self.postures.get(movement.final)
        rating = min(1.0, max(0.0, 1.0 - self._hold_min / target.tau))
        # Window the observation exactly as record_movement windows the
        # reference: last frame inside the initial posture through first
        # frame inside the final one (where this hold began).
        observed = extract_trajectory(
            Recording(frames=tuple(self._transit)),
            self.postures.basis,
            movement.reference.angle_names,
            self._window_start_t,
            self._hold_start,
        )
        similarity = trajectory_similarity(observed, movement.reference)
        events.append(PostureReached(t=frame.t, posture=movement.final, rating=rating))
        events.append(MovementScored(t=frame.t, movement=movement.name, similarity=similarity))
        self._rep_ratings.append(rating)
        self._rep_sims.append(similarity)
        self._rep_traces.append(
            MovementTrace(movement=movement.name, components=movement.components, trajectory=observed)
        )
        exercise = self._exercise()
        if self._movement_idx + 1 < len(exercise.movements):
            self._movement_idx += 1
            self._reset_movement_state()
        else:
            self._finish_rep(frame.t, events)

    def _reset_movement_state(self) -> None:
        self._stage = _Stage.AwaitInitial
        self._activation_t = None
        self._hold_start = None
        self._hold_min = float("inf")
        self._left_initial_green = False
        self._last_level = None
        self._transit = []
        self._window_start_t = None

    def _finish_rep(self, t: float, events: list[FeedbackEvent]) -> None:
        entry = self._entry()
        self._exercise_reps.append(
            RepRecord(
                posture_ratings=tuple(self._rep_ratings),
                similarities=tuple(self._rep_sims),
                timed_out=self._rep_timed_out,
                traces=tuple(self._rep_traces),
            )
        )
        self._rep_ratings, self._rep_sims, self._rep_traces = [], [], []
        self._rep_timed_out = False
        self._rep_idx += 1
        events.append(RepCompleted(t=t, remaining=entry.reps - self._rep_idx))
        self._movement_idx = 0
        self._reset_movement_state()
        if self._rep_idx < entry.reps:
            return
        self._rep_idx = 0
        self._series_idx += 1
        events.append(SeriesCompleted(t=t, remaining=entry.series - self._series_idx))
        if self._series_idx < entry.series:
            if self.plan.rest_between_series > 0:
                self._stage = _Stage.Rest
                self._rest_until = t + self.plan.rest_between_series
            return
        self._series_idx = 0
        record = self._close_exercise_record()
        events.append(
            ExerciseCompleted(
                t=t, exercise=record.exercise, correct=record.correct, rating=record.exercise_rating
            )
        )
        self._entry_idx += 1
        if self._entry_idx < len(self.plan.entries):
            return
        events.append(SessionCompleted(t=t))
        self._stage = _Stage.Done

    def _close_exercise_record(self) -> ExerciseRecord:
        reps = tuple(self._exercise_reps)
        self._exercise_reps = []
        correct = bool(reps) and all(
            not rep.timed_out and all(s >= self.correct_threshold for s in rep.similarities) and rep.similarities
            for rep in reps
        )
        rating = sum(rep_rating(r) for r in reps) / len(reps) if reps else 0.0
        record = ExerciseRecord(
            exercise=self._entry().exercise, reps=reps, correct=correct, exercise_rating=rating
        )
        self._records.append(record)
        return record

    # -- completion --------------------------------------------------------

    def finish(self, abort: bool = False) -> SessionReport:
        if self._stage is not _Stage.Done and not abort:
            raise SessionStateError("session not completed; pass abort=True to force a report")
        aborted = self._stage is not _Stage.Done
        return SessionReport(
            patient=self.patient,
            plan=self.plan,
            exercises=tuple(self._records),
            t_start=self._first_t if self._first_t is not None else 0.0,
            t_end=self._last_t if self._last_t is not None else 0.0,
            aborted=aborted,
            vas_due=self.plan.pain_prompt,
            frames=tuple(self._frames),
        )


def start_session(
    plan: SessionPlan,
    exercises: Mapping[str, Exercise],
    movements: Mapping[str, Movement],
    postures: PostureLibrary,
    patient: str = "",
    **kwargs,
) -> SessionEngine:
    """Validate all plan references and return a ready engine."""
    return SessionEngine(plan, exercises, movements, postures, patient=patient, **kwargs)


# ----------------------------------------------------------------------
# Document round-trip
# ----------------------------------------------------------------------

def exercise_to_doc(exercise: Exercise) -> dict:
    return {
        "id": exercise.name,
        "description": exercise.description,
        "movements": list(exercise.movements),
        "default_series": exercise.default_series,
        "default_reps": exercise.default_reps,
    }


def exercise_from_doc(doc: Mapping) -> Exercise:
    try:
        return Exercise(
            name=doc["id"],
            movements=tuple(doc["movements"]),
            description=doc.get("description", ""),
            default_series=int(doc.get("default_series", 1)),
            default_reps=int(doc.get("default_reps", 1)),
        )
    except KeyError as exc:
        raise ValidationError(f"exercise document missing field {exc}") from exc


def plan_to_doc(plan: SessionPlan) -> dict:
    return {
        "entries": [
            {"exercise": e.exercise, "series": e.series, "reps": e.reps} for e in plan.entries
        ],
        "hold_time": plan.hold_time,
        "rest_between_series": plan.rest_between_series,
        "timeout_per_movement": plan.timeout_per_movement,
        "pain_prompt": plan.pain_prompt,
    }


def plan_from_doc(doc: Mapping) -> SessionPlan:
    try:
        return SessionPlan(
            entries=tuple(
                PlanEntry(
                    exercise=e["exercise"], series=int(e.get("series", 1)), reps=int(e.get("reps", 1))
                )
                for e in doc["entries"]
            ),
            hold_time=float(doc.get("hold_time", 1.0)),
            rest_between_series=float(doc.get("rest_between_series", 0.0)),
            timeout_per_movement=float(doc.get("timeout_per_movement", 30.0)),
            pain_prompt=bool(doc.get("pain_prompt", False)),
        )
    except KeyError as exc:
        raise ValidationError(f"plan document missing field {exc}") from exc


def report_to_doc(report: SessionReport) -> dict:
    from .movement import component_to_doc, trajectory_to_doc
    from .skeleton import frame_to_doc

    doc = {
        "patient": report.patient,
        "date": report.date,
        "plan": plan_to_doc(report.plan),
        "t_start": report.t_start,
        "t_end": report.t_end,
        "aborted": report.aborted,
        "vas_due": report.vas_due,
        "exercises": [
            {
                "exercise": rec.exercise,
                "correct": rec.correct,
                "exercise_rating": rec.exercise_rating,
                "reps": [
                    {
                        "posture_ratings": list(rep.posture_ratings),
                        "similarities": list(rep.similarities),
                        "timed_out": rep.timed_out,
                        "traces": [
                            {
                                "movement": tr.movement,
                                "components": [component_to_doc(c) for c in tr.components],
                                "trajectory": trajectory_to_doc(tr.trajectory),
                            }
                            for tr in rep.traces
                        ],
                    }
                    for rep in rec.reps
                ],
            }
            for rec in report.exercises
        ],
    }
    if report.frames:
        doc["frames"] = [frame_to_doc(f) for f in report.frames]
    return doc


def report_from_doc(doc: Mapping) -> SessionReport:
    from .movement import component_from_doc, trajectory_from_doc
    from .skeleton import frame_from_doc

    try:
        return SessionReport(
            patient=doc["patient"],
            plan=plan_from_doc(doc["plan"]),
            exercises=tuple(
                ExerciseRecord(
                    exercise=rec["exercise"],
                    correct=bool(rec["correct"]),
                    exercise_rating=float(rec["exercise_rating"]),
                    reps=tuple(
                        RepRecord(
                            posture_ratings=tuple(float(x) for x in rep["posture_ratings"]),
                            similarities=tuple(float(x) for x in rep["similarities"]),
                            timed_out=bool(rep["timed_out"]),
                            traces=tuple(
                                MovementTrace(
                                    movement=tr["movement"],
                                    components=tuple(component_from_doc(c) for c in tr["components"]),
                                    trajectory=trajectory_from_doc(tr["trajectory"]),
                                )
                                for tr in rep["traces"]
                            ),
                        )
                        for rep in rec["reps"]
                    ),
                )
                for rec in doc["exercises"]
            ),
            t_start=float(doc["t_start"]),
            t_end=float(doc["t_end"]),
            aborted=bool(doc.get("aborted", False)),
            vas_due=bool(doc.get("vas_due", False)),
            date=doc.get("date", ""),
            frames=tuple(frame_from_doc(f) for f in doc.get("frames", ())),
        )
    except KeyError as exc:
        raise ValidationError(f"report document missing field {exc}") from exc
