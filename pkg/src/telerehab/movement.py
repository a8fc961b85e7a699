"""Movements: angle trajectories, DTW similarity, recording and reversal.

A movement connects two library postures and carries a reference
trajectory over its relevant angles. Similarity between an observed and
a reference trajectory is banded multivariate dynamic time warping on
resampled angle curves, normalized to [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import UnknownNameError, ValidationError
from .posture import (
    FeatureBasis,
    PostureLibrary,
    classify_posture,
    descriptor,
    descriptor_distance,
)
from .skeleton import JointId, Recording

RESAMPLE_POINTS = 64
BAND_FRACTION = 0.10
ANGLE_SPAN = 180.0

# Side-agnostic location labels for sided joints; central joints keep
# their own names.
LOCATION_BY_JOINT: dict[JointId, str] = {
    JointId.ShoulderLeft: "ShoulderJoint",
    JointId.ShoulderRight: "ShoulderJoint",
    JointId.ElbowLeft: "ElbowJoint",
    JointId.ElbowRight: "ElbowJoint",
    JointId.WristLeft: "WristJoint",
    JointId.WristRight: "WristJoint",
    JointId.HandLeft: "HandJoint",
    JointId.HandRight: "HandJoint",
    JointId.HipLeft: "HipJoint",
    JointId.HipRight: "HipJoint",
    JointId.KneeLeft: "KneeJoint",
    JointId.KneeRight: "KneeJoint",
    JointId.AnkleLeft: "AnkleJoint",
    JointId.AnkleRight: "AnkleJoint",
    JointId.FootLeft: "FootJoint",
    JointId.FootRight: "FootJoint",
    JointId.HipCenter: "HipCenter",
    JointId.Spine: "Trunk",
    JointId.ShoulderCenter: "ShoulderCenter",
    JointId.Head: "Head",
}


def joint_side(joint: JointId) -> str:
    """'left' | 'right' | 'center' for a joint id."""
    name = joint.name
    if name.endswith("Left"):
        return "left"
    if name.endswith("Right"):
        return "right"
    return "center"


@dataclass(frozen=True)
class MovementType:
    """Kinematic movement class; `other` carries a free label."""

    kind: str
    label: str = ""

    KINDS = ("flexion", "extension", "abduction", "adduction", "rotation", "other")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown movement type {self.kind!r}")
        if self.kind != "other" and self.label:
            raise ValidationError("only 'other' movement types carry a label")

    def opposite(self) -> "MovementType":
        """Type after direction reversal: flexion<->extension, abduction<->adduction."""
        swap = {"flexion": "extension", "extension": "flexion",
                "abduction": "adduction", "adduction": "abduction"}
        if self.kind in swap:
            return MovementType(swap[self.kind])
        return self

    def __str__(self) -> str:
        return f"other:{self.label}" if self.kind == "other" else self.kind

    @classmethod
    def parse(cls, text: str) -> "MovementType":
        text = text.strip().lower()
        if text.startswith("other:"):
            return cls("other", text.split(":", 1)[1])
        return cls(text)


FLEXION = MovementType("flexion")
EXTENSION = MovementType("extension")
ABDUCTION = MovementType("abduction")
ADDUCTION = MovementType("adduction")
ROTATION = MovementType("rotation")


@dataclass(frozen=True)
class KinematicComponent:
    """One joint's contribution to a movement: location, type, and peak ROM."""

    joint: JointId
    type: MovementType
    rom: float
    location: str = ""

    def __post_init__(self):
        if not 0.0 < self.rom <= 360.0:
            raise ValidationError(f"component ROM must lie in (0, 360], got {self.rom}")
        if not self.location:
            object.__setattr__(self, "location", LOCATION_BY_JOINT[self.joint])

    @property
    def side(self) -> str:
        return joint_side(self.joint)

    def reversed(self) -> "KinematicComponent":
        return replace(self, type=self.type.opposite())


@dataclass(frozen=True)
class Trajectory:
    """Named angle curves over a shared strictly increasing time base."""

    angle_names: tuple[str, ...]
    timestamps: np.ndarray  # (n,)
    samples: np.ndarray  # (len(angle_names), n)

    def __post_init__(self):
        names = tuple(self.angle_names)
        ts = np.asarray(self.timestamps, dtype=np.float64)
        samples = np.asarray(self.samples, dtype=np.float64)
        if not names:
            raise ValidationError("trajectory needs at least one angle")
        if len(set(names)) != len(names):
            raise ValidationError("trajectory angle names must be unique")
        if ts.ndim != 1 or ts.shape[0] < 2:
            raise ValidationError("trajectory needs at least two samples")
        if np.any(np.diff(ts) <= 0.0):
            raise ValidationError("trajectory timestamps must be strictly increasing")
        if samples.shape != (len(names), ts.shape[0]):
            raise ValidationError(
                f"samples shape {samples.shape} does not match {len(names)} angles x {ts.shape[0]} timestamps"
            )
        if not np.all(np.isfinite(samples)):
            raise ValidationError("trajectory samples must be finite")
        ts.flags.writeable = False
        samples.flags.writeable = False
        object.__setattr__(self, "angle_names", names)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def duration(self) -> float:
        return float(self.timestamps[-1] - self.timestamps[0])


def extract_trajectory(
    recording: Recording,
    basis: FeatureBasis,
    angle_names: Sequence[str],
    t_start: float,
    t_end: float,
) -> Trajectory:
    """Angle curves for frames with t_start <= t <= t_end.

    The window must intersect the recording in at least two frames.
    """
    names = tuple(angle_names)
    if not names:
        raise ValidationError("extract_trajectory needs at least one angle name")
    index = {a.name: i for i, a in enumerate(basis.angles)}
    for n in names:
        if n not in index:
            raise UnknownNameError(f"unknown angle {n!r}")
    if t_end < t_start:
        raise ValidationError("window end precedes window start")
    frames = [fr for fr in recording.frames if t_start <= fr.t <= t_end]
    if not frames:
        raise ValidationError("window lies outside the recording")
    if len(frames) < 2:
        raise ValidationError("window covers fewer than two frames")
    ts = np.array([fr.t for fr in frames])
    rows = np.empty((len(names), len(frames)), dtype=np.float64)
    for col, fr in enumerate(frames):
        desc = descriptor(fr, basis)
        for row, n in enumerate(names):
            rows[row, col] = desc.angles[index[n]]
    return Trajectory(angle_names=names, timestamps=ts, samples=rows)


def resample_trajectory(traj: Trajectory, points: int = RESAMPLE_POINTS) -> np.ndarray:
    """Trajectory values at `points` uniform positions in normalized time."""
    if points < 2:
        raise ValidationError("resampling needs at least two points")
    span = traj.timestamps[-1] - traj.timestamps[0]
    u = (traj.timestamps - traj.timestamps[0]) / span
    grid = np.linspace(0.0, 1.0, points)
    out = np.empty((traj.samples.shape[0], points), dtype=np.float64)
    for k in range(traj.samples.shape[0]):
        out[k] = np.interp(grid, u, traj.samples[k])
    return out


def trajectory_similarity(
    observed: Trajectory,
    reference: Trajectory,
    *,
    points: int = RESAMPLE_POINTS,
    band_fraction: float = BAND_FRACTION,
) -> float:
    """Banded multivariate DTW similarity in [0, 1].

    Both trajectories are resampled to `points` uniform samples over
    normalized time; the local cost at an aligned pair is the mean
    per-angle absolute difference in degrees. The warp path is confined
    to a Sakoe-Chiba band of width band_fraction * points. Similarity is
    1 - (path cost / path length) / 180, clamped to [0, 1].

    Among equal-cost paths the shortest is preferred, which keeps the
    measure exactly symmetric.
    """
    if observed.angle_names != reference.angle_names:
        raise ValidationError(
            f"angle sets differ: {observed.angle_names} vs {reference.angle_names}"
        )
    a = resample_trajectory(observed, points)
    b = resample_trajectory(reference, points)
    cost = np.mean(np.abs(a[:, :, None] - b[:, None, :]), axis=0)  # (points, points)

    radius = max(1, int(round(band_fraction * points)))
    inf = math.inf
    dist = np.full((points, points), inf)
    length = np.zeros((points, points), dtype=np.int64)
    dist[0, 0] = cost[0, 0]
    length[0, 0] = 1
    for i in range(points):
        lo = max(0, i - radius)
        hi = min(points - 1, i + radius)
        for j in range(lo, hi + 1):
            if i == 0 and j == 0:
                continue
            best_c, best_l = inf, 0
            if i > 0 and dist[i - 1, j] < inf:
                best_c, best_l = dist[i - 1, j], length[i - 1, j]
            if j > 0 and dist[i, j - 1] < inf:
                c, l = dist[i, j - 1], length[i, j - 1]
                if c < best_c or (c == best_c and l < best_l):
                    best_c, best_l = c, l
            if i > 0 and j > 0 and dist[i - 1, j - 1] < inf:
                c, l = dist[i - 1, j - 1], length[i - 1, j - 1]
                if c < best_c or (c == best_c and l < best_l):
                    best_c, best_l = c, l
            if best_c < inf:
                dist[i, j] = best_c + cost[i, j]
                length[i, j] = best_l + 1
    mean_path_cost = dist[-1, -1] / length[-1, -1]
    return float(min(1.0, max(0.0, 1.0 - mean_path_cost / ANGLE_SPAN)))


@dataclass(frozen=True)
class Movement:
    """A named transition between two postures with a reference trajectory."""

    name: str
    initial: str
    final: str
    relevant_angles: tuple[str, ...]
    reference: Trajectory
    components: tuple[KinematicComponent, ...]

    def __post_init__(self):
        if not self.name:
            raise ValidationError("movement needs a name")
        angles = tuple(self.relevant_angles)
        if not angles:
            raise ValidationError("movement needs at least one relevant angle")
        if not set(angles) <= set(self.reference.angle_names):
            raise ValidationError("relevant angles must appear in the reference trajectory")
        comps = tuple(self.components)
        if not comps:
            raise ValidationError("movement needs at least one kinematic component")
        object.__setattr__(self, "relevant_angles", angles)
        object.__setattr__(self, "components", comps)


def record_movement(
    name: str,
    recording: Recording,
    initial: str,
    final: str,
    relevant_angles: Sequence[str],
    components: Sequence[KinematicComponent],
    library: PostureLibrary,
) -> Movement:
    """Build a movement from a demonstration recording.

    The first frame must classify as `initial` and the last as `final`
    against the library; the reference trajectory covers the full span of
    the recording restricted to the relevant angles.
    """
    if initial not in library:
        raise UnknownNameError(f"unknown posture {initial!r}")
    if final not in library:
        raise UnknownNameError(f"unknown posture {final!r}")
    first = classify_posture(descriptor(recording.frames[0], library.basis), library)
    if first is None or first[0] != initial:
        got = "no posture" if first is None else f"{first[0]!r}"
        raise ValidationError(
            f"movement {name!r}: recording does not start at initial posture {initial!r} (matches {got})"
        )
    last = classify_posture(descriptor(recording.frames[-1], library.basis), library)
    if last is None or last[0] != final:
        got = "no posture" if last is None else f"{last[0]!r}"
        raise ValidationError(
            f"movement {name!r}: recording does not end at final posture {final!r} (matches {got})"
        )
    # The reference covers the actual transition, not the surrounding
    # holds: from the last frame still inside the initial posture's match
    # radius to the first frame inside the final posture's. Live scoring
    # windows its observation by the same rule, so a faithful replay of
    # the demonstration aligns with the reference sample for sample.
    initial_concept = library.get(initial)
    final_concept = library.get(final)
    descs = [descriptor(fr, library.basis) for fr in recording.frames]
    depart = next(
        (i for i, d in enumerate(descs)
         if descriptor_distance(d, initial_concept.reference) >= initial_concept.tau),
        None,
    )
    if depart is None or depart == 0:
        raise ValidationError(f"movement {name!r}: recording never leaves posture {initial!r}")
    arrive = next(
        (i for i in range(depart, len(descs))
         if descriptor_distance(descs[i], final_concept.reference) < final_concept.tau),
        None,
    )
    if arrive is None:
        raise ValidationError(f"movement {name!r}: recording never reaches posture {final!r}")
    reference = extract_trajectory(
        recording, library.basis, relevant_angles,
        recording.frames[depart - 1].t, recording.frames[arrive].t,
    )
    return Movement(
        name=name,
        initial=initial,
        final=final,
        relevant_angles=tuple(relevant_angles),
        reference=reference,
        components=tuple(components),
    )


def reverse_movement(movement: Movement) -> Movement:
    """The same motion run backwards.

    Postures swap, the reference samples run backwards over the original
    time grid, the name gains (or sheds) a "_rev" suffix, and component
    types flip (flexion<->extension, abduction<->adduction). Keeping the
    grid rather than mirroring it makes reversal its own exact inverse;
    for the uniform grids recordings produce the two are the same thing.
    """
    reference = Trajectory(
        angle_names=movement.reference.angle_names,
        timestamps=movement.reference.timestamps,
        samples=movement.reference.samples[:, ::-1],
    )
    name = movement.name[:-4] if movement.name.endswith("_rev") else movement.name + "_rev"
    return Movement(
        name=name,
        initial=movement.final,
        final=movement.initial,
        relevant_angles=movement.relevant_angles,
        reference=reference,
        components=tuple(c.reversed() for c in movement.components),
    )


def suggest_relevant_angles(
    recording: Recording, basis: FeatureBasis, threshold: float = 10.0
) -> tuple[str, ...]:
    """Angles whose first-to-last frame delta exceeds `threshold` degrees."""
    first = descriptor(recording.frames[0], basis)
    last = descriptor(recording.frames[-1], basis)
    delta = np.abs(last.angles - first.angles)
    return tuple(a.name for a, d in zip(basis.angles, delta) if d > threshold)


# ----------------------------------------------------------------------
# Document round-trip.
# ----------------------------------------------------------------------

def component_to_doc(comp: KinematicComponent) -> dict:
    return {
        "joint": comp.joint.name,
        "location": comp.location,
        "type": str(comp.type),
        "rom": comp.rom,
    }


def component_from_doc(doc: Mapping) -> KinematicComponent:
    return KinematicComponent(
        joint=JointId[doc["joint"]],
        type=MovementType.parse(doc["type"]),
        rom=float(doc["rom"]),
        location=doc.get("location", ""),
    )


def trajectory_to_doc(traj: Trajectory) -> dict:
    return {
        "angle_names": list(traj.angle_names),
        "timestamps": [float(t) for t in traj.timestamps],
        "samples": [[float(v) for v in row] for row in traj.samples],
    }


def trajectory_from_doc(doc: Mapping) -> Trajectory:
    return Trajectory(
        angle_names=tuple(doc["angle_names"]),
        timestamps=np.asarray(doc["timestamps"], dtype=np.float64),
        samples=np.asarray(doc["samples"], dtype=np.float64),
    )


def movement_to_doc(movement: Movement) -> dict:
    return {
        "id": movement.name,
        "initial": movement.initial,
        "final": movement.final,
        "relevant_angles": list(movement.relevant_angles),
        "components": [component_to_doc(c) for c in movement.components],
        "reference": trajectory_to_doc(movement.reference),
    }


def movement_from_doc(doc: Mapping) -> Movement:
    try:
        return Movement(
            name=doc["id"],
            initial=doc["initial"],
            final=doc["final"],
            relevant_angles=tuple(doc["relevant_angles"]),
            reference=trajectory_from_doc(doc["reference"]),
            components=tuple(component_from_doc(c) for c in doc["components"]),
        )
    except KeyError as exc:
        raise ValidationError(f"movement document missing field {exc}") from exc
