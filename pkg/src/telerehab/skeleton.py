"""Skeleton frames, recordings, joint geometry, and synthetic motion.

Coordinate frame follows the sensor convention: x to the subject's right
as seen from the sensor, y up, z away from the sensor, all in meters.
A frame carries the full 20-joint set; partial skeletons are rejected at
the boundary so downstream feature code never guards against holes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateGeometryError, ParseError, ValidationError


class JointId(IntEnum):
    """The 20 tracked joints, ordinals stable for array indexing."""

    HipCenter = 0
    Spine = 1
    ShoulderCenter = 2
    Head = 3
    ShoulderLeft = 4
    ElbowLeft = 5
    WristLeft = 6
    HandLeft = 7
    ShoulderRight = 8
    ElbowRight = 9
    WristRight = 10
    HandRight = 11
    HipLeft = 12
    KneeLeft = 13
    AnkleLeft = 14
    FootLeft = 15
    HipRight = 16
    KneeRight = 17
    AnkleRight = 18
    FootRight = 19


JOINT_COUNT = len(JointId)
JOINT_NAMES = tuple(j.name for j in JointId)

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
_EPS = 1e-9


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


def _positions_from_mapping(joints: Mapping) -> np.ndarray:
    pos = np.zeros((JOINT_COUNT, 3), dtype=np.float64)
    seen = set()
    for key, xyz in joints.items():
        try:
            jid = key if isinstance(key, JointId) else JointId[str(key)]
        except KeyError:
            raise ValidationError(f"unknown joint name {key!r}")
        vec = np.asarray(xyz, dtype=np.float64)
        if vec.shape != (3,):
            raise ValidationError(f"joint {jid.name} position must be a 3-vector")
        pos[jid] = vec
        seen.add(jid)
    missing = [j.name for j in JointId if j not in seen]
    if missing:
        raise ValidationError(f"missing joint {missing[0]}")
    return pos


@dataclass(frozen=True)
class SkeletonFrame:
    """One time-stamped skeleton sample.

    positions is a (20, 3) array indexed by JointId ordinal; confidence a
    (20,) array in [0, 1]. Both are frozen read-only so frames can be
    shared across threads without copies.
    """

    t: float
    positions: np.ndarray
    confidence: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not math.isfinite(self.t) or self.t < 0.0:
            raise ValidationError(f"frame timestamp must be finite and >= 0, got {self.t}")
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.shape != (JOINT_COUNT, 3):
            raise ValidationError(f"positions must have shape (20, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("positions must be finite")
        conf = self.confidence
        if conf is None:
            conf = np.ones(JOINT_COUNT, dtype=np.float64)
        conf = np.asarray(conf, dtype=np.float64)
        if conf.shape != (JOINT_COUNT,):
            raise ValidationError(f"confidence must have shape (20,), got {conf.shape}")
        if np.any(conf < 0.0) or np.any(conf > 1.0) or not np.all(np.isfinite(conf)):
            raise ValidationError("confidence values must lie in [0, 1]")
        object.__setattr__(self, "positions", _as_readonly(pos))
        object.__setattr__(self, "confidence", _as_readonly(conf))

    @classmethod
    def build(cls, t: float, joints: Mapping, confidence: Mapping | None = None) -> "SkeletonFrame":
        """Construct from a name -> [x, y, z] mapping; confidence defaults to 1.0."""
        pos = _positions_from_mapping(joints)
        conf = np.ones(JOINT_COUNT, dtype=np.float64)
        if confidence:
            for key, val in confidence.items():
                jid = key if isinstance(key, JointId) else JointId[str(key)]
                conf[jid] = float(val)
        return cls(t=t, positions=pos, confidence=conf)

    def position(self, joint: JointId) -> np.ndarray:
        return self.positions[joint]

    def conf(self, joint: JointId) -> float:
        return float(self.confidence[joint])


@dataclass(frozen=True)
class Recording:
    """An ordered, strictly time-increasing sequence of frames."""

    frames: tuple[SkeletonFrame, ...]
    nominal_rate: float = 30.0

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValidationError("recording must contain at least one frame")
        if self.nominal_rate <= 0:
            raise ValidationError("nominal_rate must be positive")
        last = -math.inf
        for fr in frames:
            if fr.t <= last:
                raise ValidationError(
                    f"frame timestamps must be strictly increasing ({fr.t} after {last})"
                )
            last = fr.t
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def duration(self) -> float:
        return self.frames[-1].t - self.frames[0].t

    def timestamps(self) -> np.ndarray:
        return np.array([fr.t for fr in self.frames], dtype=np.float64)


@dataclass(frozen=True)
class AngleDef:
    """Interior angle at `vertex` between rays to endpoint_a and endpoint_b."""

    name: str
    vertex: JointId
    endpoint_a: JointId
    endpoint_b: JointId

    def __post_init__(self):
        if len({self.vertex, self.endpoint_a, self.endpoint_b}) != 3:
            raise ValidationError(f"angle {self.name!r} must use three distinct joints")
        if not self.name:
            raise ValidationError("angle definition needs a name")


@dataclass(frozen=True)
class RelationDef:
    """Binary coordinate comparison between two joints along one axis."""

    name: str
    lhs: JointId
    rhs: JointId
    axis: str
    sense: str  # "greater" | "less"

    def __post_init__(self):
        if self.lhs == self.rhs:
            raise ValidationError(f"relation {self.name!r} must compare distinct joints")
        if self.axis not in _AXIS_INDEX:
            raise ValidationError(f"relation axis must be one of x/y/z, got {self.axis!r}")
        if self.sense not in ("greater", "less"):
            raise ValidationError(f"relation sense must be greater/less, got {self.sense!r}")
        if not self.name:
            raise ValidationError("relation definition needs a name")


def limb_angle(frame: SkeletonFrame, angle: AngleDef) -> float:
    """Interior angle in degrees in [0, 180] at the angle's vertex joint.

    Raises DegenerateGeometryError when either ray has (near-)zero length;
    a silent 0.0 would poison descriptor distances downstream.
    """
    v = frame.positions[angle.vertex]
    a = frame.positions[angle.endpoint_a] - v
    b = frame.positions[angle.endpoint_b] - v
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < _EPS or nb < _EPS:
        raise DegenerateGeometryError(
            f"angle {angle.name!r}: coincident joints at frame t={frame.t}"
        )
    cosine = float(np.dot(a, b) / (na * nb))
    cosine = max(-1.0, min(1.0, cosine))
    return math.degrees(math.acos(cosine))


def joint_relation(frame: SkeletonFrame, relation: RelationDef) -> int:
    """1 when the strict comparison holds, else 0. Equal coordinates give 0."""
    axis = _AXIS_INDEX[relation.axis]
    left = frame.positions[relation.lhs][axis]
    right = frame.positions[relation.rhs][axis]
    if relation.sense == "greater":
        return 1 if left > right else 0
    return 1 if left < right else 0


# --------------------------------------------------------------------------
# Recording serialization: one JSON object per line.
#   {"t": <seconds>, "joints": {"HipCenter": [x,y,z], ...}, "conf": {...}}
# conf is optional and defaults to 1.0 per joint.
# --------------------------------------------------------------------------

def load_recording(data: bytes | str, nominal_rate: float = 30.0) -> Recording:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    frames: list[SkeletonFrame] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict) or "t" not in obj or "joints" not in obj:
            raise ParseError(f"line {lineno}: expected object with 't' and 'joints'")
        try:
            frame = SkeletonFrame.build(float(obj["t"]), obj["joints"], obj.get("conf"))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from exc
        frames.append(frame)
    if not frames:
        raise ValidationError("recording must contain at least one frame")
    return Recording(frames=tuple(frames), nominal_rate=nominal_rate)


def frame_to_doc(frame: SkeletonFrame) -> dict:
    doc = {
        "t": frame.t,
        "joints": {name: [float(c) for c in frame.positions[j]] for j, name in enumerate(JOINT_NAMES)},
    }
    if not np.all(frame.confidence == 1.0):
        doc["conf"] = {JOINT_NAMES[j]: float(frame.confidence[j]) for j in range(JOINT_COUNT)}
    return doc


def frame_from_doc(doc: Mapping) -> SkeletonFrame:
    if "t" not in doc or "joints" not in doc:
        raise ValidationError("frame document needs 't' and 'joints'")
    return SkeletonFrame.build(float(doc["t"]), doc["joints"], doc.get("conf"))


def save_recording(recording: Recording) -> bytes:
    lines = [json.dumps(frame_to_doc(fr)) for fr in recording.frames]
    return ("\n".join(lines) + "\n").encode("utf-8")


# --------------------------------------------------------------------------
# Synthetic recordings from per-joint keyframe scripts.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MotionScript:
    """Per-joint position keyframes, linearly interpolated at sample time.

    Joints without keyframes hold base_pose; if base_pose is None every
    joint must be keyframed. Keyframe times are seconds, strictly
    increasing per joint; values outside the keyframed span clamp to the
    nearest keyframe.
    """

    keyframes: Mapping[JointId, Sequence[tuple[float, Sequence[float]]]]
    base_pose: Mapping[JointId, Sequence[float]] | None = None

    def __post_init__(self):
        if not self.keyframes:
            raise ValidationError("motion script has no keyframes")
        norm: dict[JointId, tuple[tuple[float, np.ndarray], ...]] = {}
        for joint, kfs in self.keyframes.items():
            jid = joint if isinstance(joint, JointId) else JointId[str(joint)]
            if not kfs:
                raise ValidationError(f"joint {jid.name} has an empty keyframe list")
            last = -math.inf
            cleaned = []
            for t, xyz in kfs:
                if t < 0 or not math.isfinite(t):
                    raise ValidationError(f"joint {jid.name}: keyframe time {t} invalid")
                if t <= last:
                    raise ValidationError(f"joint {jid.name}: keyframe times must increase")
                last = t
                vec = np.asarray(xyz, dtype=np.float64)
                if vec.shape != (3,) or not np.all(np.isfinite(vec)):
                    raise ValidationError(f"joint {jid.name}: keyframe value must be a finite 3-vector")
                cleaned.append((float(t), vec))
            norm[jid] = tuple(cleaned)
        object.__setattr__(self, "keyframes", norm)
        if self.base_pose is not None:
            base = {
                (j if isinstance(j, JointId) else JointId[str(j)]): np.asarray(v, dtype=np.float64)
                for j, v in self.base_pose.items()
            }
            object.__setattr__(self, "base_pose", base)
        else:
            missing = [j.name for j in JointId if j not in norm]
            if missing:
                raise ValidationError(
                    f"no base pose given and joint {missing[0]} has no keyframes"
                )

    @property
    def duration(self) -> float:
        return max(kfs[-1][0] for kfs in self.keyframes.values())


def synth_recording(
    script: MotionScript,
    *,
    seed: int = 0,
    noise_sigma: float = 0.0,
    rate: float = 30.0,
) -> Recording:
    """Sample a script at `rate` fps, optionally adding Gaussian joint noise.

    Deterministic for a given (script, seed, noise_sigma, rate). A script
    spanning [0, 1] at 30 fps yields 31 frames (both endpoints included).
    """
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be >= 0")
    if rate <= 0:
        raise ValidationError("rate must be positive")
    duration = script.duration
    n_frames = int(round(duration * rate)) + 1
    times = np.arange(n_frames, dtype=np.float64) / rate

    pos = np.zeros((n_frames, JOINT_COUNT, 3), dtype=np.float64)
    for jid in JointId:
        kfs = script.keyframes.get(jid)
        if kfs is None:
            pos[:, jid, :] = script.base_pose[jid]  # type: ignore[index]
            continue
        kt = np.array([t for t, _ in kfs])
        kv = np.stack([v for _, v in kfs])
        for axis in range(3):
            pos[:, jid, axis] = np.interp(times, kt, kv[:, axis])

    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        pos = pos + rng.normal(0.0, noise_sigma, size=pos.shape)

    frames = tuple(SkeletonFrame(t=float(times[i]), positions=pos[i]) for i in range(n_frames))
    return Recording(frames=frames, nominal_rate=rate)
