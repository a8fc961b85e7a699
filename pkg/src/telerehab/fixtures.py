"""Synthetic demo corpus: postures, movements, exercises, protocol, patients.

Everything is generated from a small forward-kinematics pose builder, so the
corpus is deterministic, self-consistent, and cheap to regenerate. Poses are
deliberately engineered so that every pair keeps a comfortable descriptor
distance (arm shape, leg shape, and trunk pitch all differ between lookalike
poses); `separation_report` verifies that numerically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import knowledge
from .errors import ValidationError
from .knowledge import (
    AllOf,
    AnyOf,
    Exploration,
    ExerciseConcept,
    MovementFilter,
    OverrideRule,
    PatientRecord,
    Protocol,
    ProtocolPhase,
    RomAtom,
    Surgery,
    VasAtom,
    VasReport,
)
from .movement import (
    ABDUCTION,
    EXTENSION,
    FLEXION,
    KinematicComponent,
    Movement,
    MovementType,
    record_movement,
    reverse_movement,
    suggest_relevant_angles,
)
from .posture import (
    PostureLibrary,
    default_basis,
    descriptor,
    descriptor_distance,
    register_posture,
)
from .assessment import Answer, AutoTest, Question, percent_of, test_to_doc
from .session import Exercise, PlanEntry, SessionPlan, start_session
from .skeleton import JointId, Recording, SkeletonFrame

log = logging.getLogger(__name__)

# ----------------------------------------------------------------------
# Forward-kinematics pose builder
# ----------------------------------------------------------------------

ROOT = np.array([0.0, 0.95, 2.2])  # hip center: standing height, 2.2 m from sensor
TRUNK_SPINE = 0.22
TRUNK_SHOULDER = 0.50
TRUNK_HEAD = 0.70
SHOULDER_HALF = 0.19
SHOULDER_DROP = 0.03
HIP_HALF = 0.095
HIP_DROP = 0.07
UPPER_ARM = 0.28
FOREARM = 0.26
HAND_LEN = 0.09
THIGH = 0.42
SHIN = 0.41
FOOT_LEN = 0.17
DEFAULT_FOOT = (0.0, -0.22, -0.975)


def _unit(v: Sequence[float]) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(arr))
    if n < 1e-10:
        raise ValidationError("zero-length direction in pose table")
    return arr / n


def leg_dir(out_deg: float, fwd_deg: float) -> tuple[float, float, float]:
    """Left-side limb direction from outward splay and forward pitch.

    Negative fwd_deg swings the limb behind the body. Mirror for the right
    side by negating x.
    """
    o = math.radians(out_deg)
    f = math.radians(fwd_deg)
    return (-math.sin(o), -math.cos(o) * math.cos(f), -math.cos(o) * math.sin(f))


@dataclass(frozen=True)
class ArmShape:
    """Left-arm segment directions in world coordinates; hand defaults to fore."""

    upper: tuple[float, float, float]
    fore: tuple[float, float, float]
    hand: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class LegShape:
    thigh: tuple[float, float, float]
    shin: tuple[float, float, float]
    foot: tuple[float, float, float] = DEFAULT_FOOT


def _mirror(v: Sequence[float]) -> tuple[float, float, float]:
    return (-v[0], v[1], v[2])


def mirror_arm(arm: ArmShape) -> ArmShape:
    return ArmShape(
        upper=_mirror(arm.upper),
        fore=_mirror(arm.fore),
        hand=_mirror(arm.hand) if arm.hand else None,
    )


def mirror_leg(leg: LegShape) -> LegShape:
    return LegShape(thigh=_mirror(leg.thigh), shin=_mirror(leg.shin), foot=_mirror(leg.foot))


@dataclass(frozen=True)
class PoseSpec:
    """One whole-body pose: trunk pitch plus per-limb shapes.

    arm_r / leg_r default to the mirrored left shape. drop lowers the hip
    center (squatting) without touching any relative feature.
    """

    pitch: float = 6.0
    drop: float = 0.0
    arm_l: ArmShape | None = None
    arm_r: ArmShape | None = None
    leg_l: LegShape | None = None
    leg_r: LegShape | None = None


# Arm vocabularies. Comments give the gist; exact numbers are tuned so that
# relation margins stay >= ~4 cm and pose pairs stay well separated.
ARM_HANG = ArmShape(upper=(-0.21, -0.975, -0.07), fore=(-0.17, -0.95, -0.21))
ARM_FWD = ArmShape(upper=(0.17, -0.31, -0.93), fore=(0.14, -0.33, -0.93))
ARM_FWD_WRIST_UP = ArmShape(upper=(0.17, -0.31, -0.93), fore=(0.14, -0.33, -0.93), hand=(0.10, 0.97, -0.22))
ARM_UP = ArmShape(upper=(-0.17, 0.975, -0.10), fore=(-0.14, 0.98, -0.12))
ARM_CLASP = ArmShape(upper=(0.055, 0.947, -0.316), fore=(0.10, 0.98, 0.12))  # narrow overhead
ARM_T_STRAIGHT = ArmShape(upper=(-0.96, -0.26, -0.10), fore=(-0.95, -0.28, -0.14))
ARM_T_BENT = ArmShape(upper=(-0.96, -0.26, -0.10), fore=(-0.50, -0.30, -0.81))
ARM_CACTUS = ArmShape(upper=(-0.97, -0.20, -0.14), fore=(-0.12, 0.97, -0.20))
ARM_CROSS_CHEST = ArmShape(upper=(0.33, -0.72, -0.61), fore=(0.88, 0.20, -0.43))
ARM_CROSS_LOW = ArmShape(upper=(0.25, -0.93, -0.26), fore=(0.85, -0.15, -0.50))
ARM_GUARD = ArmShape(upper=(0.12, -0.18, -0.975), fore=(0.10, 0.97, -0.22))
ARM_HUG_FAR = ArmShape(upper=(0.15, -0.35, -0.92), fore=(0.58, 0.62, -0.53), hand=(0.78, 0.22, -0.58))
ARM_HUG_NEAR = ArmShape(upper=(-0.08, -0.35, -0.93), fore=(0.50, 0.66, -0.56), hand=(0.68, 0.28, -0.68))
ARM_BACK_SWING = ArmShape(upper=(-0.15, -0.88, 0.45), fore=(-0.10, -0.85, 0.52))
ARM_CURL = ArmShape(upper=(-0.18, -0.93, -0.32), fore=(-0.05, 0.975, -0.21))
ARM_PRESS = ArmShape(upper=(0.12, -0.18, -0.976), fore=(0.10, 0.42, -0.90))
ARM_PRISONER = ArmShape(upper=(-0.76, -0.22, 0.60), fore=(0.99, 0.08, -0.08))  # hands behind neck
ARM_CHOP_HIGH_L = ArmShape(upper=(-0.88, 0.33, -0.34), fore=(-0.88, 0.22, -0.41))
ARM_CHOP_HIGH_R = ArmShape(upper=(-0.902, 0.266, -0.340), fore=(-0.902, 0.266, -0.340))
ARM_CHOP_LOW_L = ArmShape(upper=(0.46, -0.88, 0.12), fore=(0.55, -0.70, 0.45))
ARM_CHOP_LOW_R = ArmShape(upper=(0.08, -0.97, 0.23), fore=(0.30, -0.75, 0.59))

# Leg vocabularies (left side).
LEG_STANCE = LegShape(thigh=leg_dir(8, 8), shin=leg_dir(8, 7))
LEG_OUT18 = LegShape(thigh=leg_dir(18, -7), shin=leg_dir(18, -7))
LEG_STAR = LegShape(thigh=leg_dir(18, 8), shin=leg_dir(18, 7))
LEG_BACK15 = LegShape(thigh=leg_dir(8, -15), shin=leg_dir(8, -15))
LEG_BACK25 = LegShape(thigh=leg_dir(8, -25), shin=leg_dir(8, -25))
LEG_FLEX40 = LegShape(thigh=leg_dir(8, 40), shin=leg_dir(8, 40))
LEG_HIGH_KNEE = LegShape(thigh=leg_dir(8, 85), shin=(-0.10, -0.98, 0.165))
LEG_CURL = LegShape(thigh=leg_dir(8, 3), shin=(-0.05, -0.17, 0.98), foot=(-0.05, -0.60, 0.80))
LEG_SQUAT = LegShape(thigh=leg_dir(8, 52), shin=leg_dir(8, 7))
LEG_SUMO = LegShape(thigh=leg_dir(24, 62), shin=(-0.02, -0.99, 0.14))
LEG_DCS = LegShape(thigh=leg_dir(8, 78), shin=(-0.02, -0.99, -0.14))
LEG_CHAIR = LegShape(thigh=leg_dir(8, 75), shin=(-0.02, -0.99, 0.14))
LEG_HINGE = LegShape(thigh=leg_dir(8, 26), shin=leg_dir(5, 7))
LEG_HUG = LegShape(thigh=leg_dir(8, 78), shin=(0.0, -0.60, 0.80), foot=(0.0, -0.75, 0.66))
LEG_STAG_FWD = LegShape(thigh=leg_dir(8, 14), shin=leg_dir(8, 13))
LEG_CHOP_FRONT = LegShape(thigh=leg_dir(8, 38), shin=leg_dir(8, 7))
LEG_CHOP_BACK = LegShape(thigh=leg_dir(8, -20), shin=leg_dir(8, -50))


POSES: dict[str, PoseSpec] = {
    "p_stand": PoseSpec(),
    "p_abd_left": PoseSpec(arm_l=ARM_UP, leg_l=LEG_OUT18, leg_r=mirror_leg(LEG_STANCE)),
    "p_abd_right": PoseSpec(arm_l=ARM_GUARD, leg_l=LEG_STANCE, leg_r=mirror_leg(LEG_OUT18)),
    "p_ext_left": PoseSpec(pitch=18, arm_l=ARM_FWD, leg_l=LEG_BACK15, leg_r=mirror_leg(LEG_STANCE)),
    "p_ext_right": PoseSpec(pitch=18, arm_l=ARM_CROSS_CHEST, leg_l=LEG_STANCE, leg_r=mirror_leg(LEG_BACK25)),
    "p_star": PoseSpec(arm_l=ARM_CACTUS, leg_l=LEG_STAR),
    "p_flex_left": PoseSpec(arm_l=ARM_UP, arm_r=mirror_arm(ARM_HANG), leg_l=LEG_FLEX40, leg_r=mirror_leg(LEG_STANCE)),
    "p_knee_up_right": PoseSpec(arm_l=ARM_FWD_WRIST_UP, leg_l=LEG_STANCE, leg_r=mirror_leg(LEG_HIGH_KNEE)),
    "p_knee_up_left": PoseSpec(arm_l=ARM_UP, arm_r=mirror_arm(ARM_FWD), leg_l=LEG_HIGH_KNEE, leg_r=mirror_leg(LEG_STANCE)),
    "p_squat": PoseSpec(pitch=15, drop=0.18, arm_l=ARM_PRISONER, leg_l=LEG_SQUAT),
    "p_sumo": PoseSpec(pitch=8, drop=0.22, arm_l=ARM_T_BENT, leg_l=LEG_SUMO),
    "p_chair": PoseSpec(pitch=20, drop=0.28, arm_l=ARM_GUARD, leg_l=LEG_CHAIR),
    "p_heel_curl_left": PoseSpec(arm_l=ARM_HANG, arm_r=mirror_arm(ARM_UP), leg_l=LEG_CURL, leg_r=mirror_leg(LEG_STANCE)),
    "p_heel_curl_right": PoseSpec(arm_l=ARM_CLASP, leg_l=LEG_STANCE, leg_r=mirror_leg(LEG_CURL)),
    "p_curl_hold": PoseSpec(arm_l=ARM_CURL),
    "p_reach_mixed": PoseSpec(arm_l=ARM_FWD, arm_r=mirror_arm(ARM_UP)),
    "p_hinge_deep": PoseSpec(pitch=62, arm_l=ARM_BACK_SWING, leg_l=LEG_HINGE),
    "p_toe_reach": PoseSpec(pitch=80, arm_l=ARM_CROSS_LOW),
    "p_hug_left": PoseSpec(arm_l=ARM_HUG_NEAR, arm_r=mirror_arm(ARM_HUG_FAR), leg_l=LEG_HUG, leg_r=mirror_leg(LEG_STANCE)),
    "p_hug_right": PoseSpec(arm_l=ARM_HUG_FAR, arm_r=mirror_arm(ARM_HUG_NEAR), leg_l=LEG_STANCE, leg_r=mirror_leg(LEG_HUG)),
    "p_press_up": PoseSpec(pitch=-8, arm_l=ARM_PRESS),
    "p_draw_left": PoseSpec(arm_l=ARM_T_STRAIGHT, arm_r=mirror_arm(ARM_CURL), leg_l=LEG_STAG_FWD, leg_r=mirror_leg(LEG_BACK15)),
    "p_draw_right": PoseSpec(arm_l=ARM_CURL, arm_r=mirror_arm(ARM_T_STRAIGHT), leg_l=LEG_BACK15, leg_r=mirror_leg(LEG_STAG_FWD)),
    "p_squat_crossed": PoseSpec(pitch=25, drop=0.34, arm_l=ARM_CROSS_CHEST, leg_l=LEG_DCS),
    "p_hinge_wide": PoseSpec(pitch=45, arm_l=ARM_T_STRAIGHT, leg_l=LEG_HINGE),
    "p_chop_high": PoseSpec(arm_l=ARM_CHOP_HIGH_L, arm_r=ARM_CHOP_HIGH_R, leg_l=LEG_STANCE),
    "p_chop_low": PoseSpec(pitch=28, arm_l=ARM_CHOP_LOW_L, arm_r=ARM_CHOP_LOW_R, leg_l=LEG_CHOP_FRONT, leg_r=LEG_CHOP_BACK),
}


def build_pose(spec: PoseSpec) -> np.ndarray:
    """Joint positions (20, 3) for a pose spec."""
    arm_l = spec.arm_l or ARM_HANG
    arm_r = spec.arm_r or mirror_arm(arm_l)
    leg_l = spec.leg_l or LEG_STANCE
    leg_r = spec.leg_r or mirror_leg(leg_l)

    p = math.radians(spec.pitch)
    trunk = np.array([0.0, math.cos(p), -math.sin(p)])
    root = ROOT + np.array([0.0, -spec.drop, 0.0])

    pos = np.zeros((len(JointId), 3), dtype=np.float64)
    pos[JointId.HipCenter] = root
    pos[JointId.Spine] = root + TRUNK_SPINE * trunk
    shoulder_c = root + TRUNK_SHOULDER * trunk
    pos[JointId.ShoulderCenter] = shoulder_c
    pos[JointId.Head] = root + TRUNK_HEAD * trunk

    for side, arm in (("Left", arm_l), ("Right", arm_r)):
        sx = -1.0 if side == "Left" else 1.0
        shoulder = shoulder_c + np.array([sx * SHOULDER_HALF, 0.0, 0.0]) - SHOULDER_DROP * trunk
        elbow = shoulder + UPPER_ARM * _unit(arm.upper)
        wrist = elbow + FOREARM * _unit(arm.fore)
        hand = wrist + HAND_LEN * _unit(arm.hand if arm.hand else arm.fore)
        pos[JointId[f"Shoulder{side}"]] = shoulder
        pos[JointId[f"Elbow{side}"]] = elbow
        pos[JointId[f"Wrist{side}"]] = wrist
        pos[JointId[f"Hand{side}"]] = hand

    for side, leg in (("Left", leg_l), ("Right", leg_r)):
        sx = -1.0 if side == "Left" else 1.0
        hip = root + np.array([sx * HIP_HALF, -HIP_DROP, 0.0])
        knee = hip + THIGH * _unit(leg.thigh)
        ankle = knee + SHIN * _unit(leg.shin)
        foot = ankle + FOOT_LEN * _unit(leg.foot)
        pos[JointId[f"Hip{side}"]] = hip
        pos[JointId[f"Knee{side}"]] = knee
        pos[JointId[f"Ankle{side}"]] = ankle
        pos[JointId[f"Foot{side}"]] = foot

    return pos


def pose_positions(name: str) -> np.ndarray:
    if name not in POSES:
        raise ValidationError(f"unknown demo pose {name!r}")
    return build_pose(POSES[name])


def pose_frame(name: str, t: float = 0.0) -> SkeletonFrame:
    return SkeletonFrame(t=t, positions=pose_positions(name))


# ----------------------------------------------------------------------
# Posture library with per-concept tolerances
# ----------------------------------------------------------------------

TAU_CAP = 0.10
TAU_SHARE = 0.45  # fraction of the nearest-neighbour distance granted as tolerance


def pairwise_distances(basis=None) -> dict[tuple[str, str], float]:
    """Descriptor distance for every unordered pose pair."""
    basis = basis or default_basis()
    descs = {name: descriptor(pose_frame(name), basis) for name in POSES}
    names = sorted(POSES)
    out: dict[tuple[str, str], float] = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            out[(a, b)] = descriptor_distance(descs[a], descs[b])
    return out


def concept_taus(basis=None) -> dict[str, float]:
    """Per-pose tolerance: capped share of the nearest other pose."""
    dists = pairwise_distances(basis)
    nearest: dict[str, float] = {name: math.inf for name in POSES}
    for (a, b), d in dists.items():
        nearest[a] = min(nearest[a], d)
        nearest[b] = min(nearest[b], d)
    return {name: min(TAU_CAP, TAU_SHARE * nearest[name]) for name in POSES}


def demo_library() -> PostureLibrary:
    """All demo poses registered with their tuned tolerances."""
    basis = default_basis()
    library = PostureLibrary(basis=basis)
    taus = concept_taus(basis)
    for name in sorted(POSES):
        register_posture(library, name, [pose_frame(name)], tau=taus[name])
    return library


def separation_report(basis=None) -> dict:
    """Margin and spacing audit of the pose table.

    Returns the minimum pairwise descriptor distance, the closest pair, and
    every relation whose defining coordinate gap is under the safety floor.
    Used by tests to keep the corpus robust to centimetre-level noise.
    """
    basis = basis or default_basis()
    dists = pairwise_distances(basis)
    closest = min(dists, key=dists.get)
    axis_index = {"x": 0, "y": 1, "z": 2}
    thin: list[tuple[str, str, float]] = []
    for name in POSES:
        frame = pose_frame(name)
        for rel in basis.relations:
            a = frame.position(rel.lhs)
            b = frame.position(rel.rhs)
            gap = abs(float(a[axis_index[rel.axis]] - b[axis_index[rel.axis]]))
            if gap < 0.04:
                thin.append((name, rel.name, gap))
    return {
        "min_distance": dists[closest],
        "closest_pair": closest,
        "thin_margins": thin,
        "distances": dists,
    }


# ----------------------------------------------------------------------
# Recordings: timeline sampling with ease-in-out blending
# ----------------------------------------------------------------------

FRAME_RATE = 30.0
LEAD_HOLD = 0.5
TAIL_HOLD = 0.9


def _smoothstep(u: np.ndarray) -> np.ndarray:
    return u * u * (3.0 - 2.0 * u)


@dataclass(frozen=True)
class _Segment:
    duration: float
    start: np.ndarray
    end: np.ndarray


class Timeline:
    """Piecewise pose timeline sampled into skeleton recordings."""

    def __init__(self):
        self._segments: list[_Segment] = []

    def hold(self, pose: np.ndarray, duration: float) -> "Timeline":
        self._segments.append(_Segment(float(duration), pose, pose))
        return self

    def move(self, start: np.ndarray, end: np.ndarray, duration: float) -> "Timeline":
        self._segments.append(_Segment(float(duration), start, end))
        return self

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self._segments)

    def positions_at(self, t: float) -> np.ndarray:
        rem = t
        for seg in self._segments:
            if rem <= seg.duration or seg is self._segments[-1]:
                if seg.duration <= 0.0:
                    return seg.end
                u = min(max(rem / seg.duration, 0.0), 1.0)
                w = float(_smoothstep(np.asarray(u)))
                return (1.0 - w) * seg.start + w * seg.end
            rem -= seg.duration
        raise ValidationError("empty timeline")

    def to_recording(
        self,
        *,
        rate: float = FRAME_RATE,
        noise_sigma: float = 0.0,
        warp_amp: float = 0.0,
        seed: int = 0,
    ) -> Recording:
        """Sample the timeline at a fixed rate.

        warp_amp reparametrises time with a single sine lobe, modulating
        instantaneous speed by up to +-warp_amp while keeping endpoints and
        monotonicity; noise_sigma adds isotropic position noise per frame.
        """
        if not self._segments:
            raise ValidationError("empty timeline")
        total = self.duration
        n = int(round(total * rate)) + 1
        times = np.arange(n, dtype=np.float64) / rate
        rng = np.random.default_rng(seed)
        frames = []
        for t in times:
            src = t
            if warp_amp:
                src = t + warp_amp * total * math.sin(math.pi * t / total) / math.pi
            pos = self.positions_at(min(src, total))
            if noise_sigma:
                pos = pos + rng.normal(0.0, noise_sigma, pos.shape)
            frames.append(SkeletonFrame(t=float(t), positions=pos))
        return Recording(frames=tuple(frames))


def transition_recording(
    initial: str,
    final: str,
    *,
    transit: float = 1.2,
    lead: float = LEAD_HOLD,
    tail: float = TAIL_HOLD,
    rate: float = FRAME_RATE,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> Recording:
    """Hold initial, ease to final, hold final."""
    a = pose_positions(initial)
    b = pose_positions(final)
    timeline = Timeline().hold(a, lead).move(a, b, transit).hold(b, tail)
    return timeline.to_recording(rate=rate, noise_sigma=noise_sigma, seed=seed)


# ----------------------------------------------------------------------
# Movements
# ----------------------------------------------------------------------

def _c(joint: JointId, mtype: MovementType, rom: float) -> KinematicComponent:
    return KinematicComponent(joint=joint, type=mtype, rom=rom)


@dataclass(frozen=True)
class MovementSpec:
    initial: str
    final: str
    components: tuple[KinematicComponent, ...]
    transit: float = 1.2


MOVEMENTS: dict[str, MovementSpec] = {
    "mov_hip_flexion_left": MovementSpec(
        "p_stand", "p_flex_left", (_c(JointId.HipLeft, FLEXION, 40.0),)
    ),
    "mov_hip_abduction_left": MovementSpec(
        "p_stand", "p_abd_left", (_c(JointId.HipLeft, ABDUCTION, 18.0),)
    ),
    "mov_hip_abduction_right": MovementSpec(
        "p_stand", "p_abd_right", (_c(JointId.HipRight, ABDUCTION, 18.0),)
    ),
    "mov_hip_extension_left": MovementSpec(
        "p_stand", "p_ext_left", (_c(JointId.HipLeft, EXTENSION, 15.0),)
    ),
    "mov_hip_extension_right": MovementSpec(
        "p_stand", "p_ext_right", (_c(JointId.HipRight, EXTENSION, 25.0),)
    ),
    "mov_squat_descent": MovementSpec(
        "p_stand",
        "p_squat",
        (
            _c(JointId.KneeLeft, FLEXION, 45.0),
            _c(JointId.KneeRight, FLEXION, 45.0),
            _c(JointId.HipLeft, FLEXION, 55.0),
            _c(JointId.HipRight, FLEXION, 55.0),
        ),
        transit=1.5,
    ),
    "mov_knee_raise_right": MovementSpec(
        "p_stand",
        "p_knee_up_right",
        (_c(JointId.HipRight, FLEXION, 85.0), _c(JointId.KneeRight, FLEXION, 90.0)),
    ),
    "mov_knee_raise_left": MovementSpec(
        "p_stand",
        "p_knee_up_left",
        (_c(JointId.HipLeft, FLEXION, 85.0), _c(JointId.KneeLeft, FLEXION, 90.0)),
    ),
    "mov_heel_curl_left": MovementSpec(
        "p_stand", "p_heel_curl_left", (_c(JointId.KneeLeft, FLEXION, 85.0),)
    ),
    "mov_heel_curl_right": MovementSpec(
        "p_stand", "p_heel_curl_right", (_c(JointId.KneeRight, FLEXION, 85.0),)
    ),
    "mov_elbow_curl": MovementSpec(
        "p_stand",
        "p_curl_hold",
        (_c(JointId.ElbowLeft, FLEXION, 140.0), _c(JointId.ElbowRight, FLEXION, 140.0)),
    ),
    "mov_reach_mixed": MovementSpec(
        "p_stand",
        "p_reach_mixed",
        (_c(JointId.ShoulderLeft, FLEXION, 85.0), _c(JointId.ShoulderRight, FLEXION, 165.0)),
    ),
    "mov_hinge_descent": MovementSpec(
        "p_stand",
        "p_hinge_deep",
        (_c(JointId.HipLeft, FLEXION, 65.0), _c(JointId.HipRight, FLEXION, 65.0)),
        transit=1.5,
    ),
    "mov_toe_reach_descent": MovementSpec(
        "p_stand",
        "p_toe_reach",
        (_c(JointId.HipLeft, FLEXION, 95.0), _c(JointId.HipRight, FLEXION, 95.0)),
        transit=1.5,
    ),
    "mov_chop_lift": MovementSpec(
        "p_stand",
        "p_chop_high",
        (_c(JointId.ShoulderLeft, ABDUCTION, 120.0), _c(JointId.ShoulderRight, MovementType("adduction"), 110.0)),
    ),
    "mov_chop_swing": MovementSpec(
        "p_chop_high",
        "p_chop_low",
        (
            _c(JointId.ShoulderLeft, MovementType("adduction"), 150.0),
            _c(JointId.ShoulderRight, EXTENSION, 140.0),
            _c(JointId.KneeLeft, FLEXION, 31.0),
            _c(JointId.KneeRight, FLEXION, 30.0),
            _c(JointId.HipLeft, FLEXION, 55.0),
        ),
        transit=1.4,
    ),
    "mov_press_up": MovementSpec(
        "p_stand",
        "p_press_up",
        (_c(JointId.ShoulderLeft, FLEXION, 100.0), _c(JointId.ShoulderRight, FLEXION, 100.0)),
    ),
    "mov_draw_left": MovementSpec(
        "p_stand",
        "p_draw_left",
        (_c(JointId.ShoulderLeft, ABDUCTION, 85.0), _c(JointId.ElbowRight, FLEXION, 140.0)),
        transit=1.3,
    ),
    "mov_draw_right": MovementSpec(
        "p_stand",
        "p_draw_right",
        (_c(JointId.ShoulderRight, ABDUCTION, 85.0), _c(JointId.ElbowLeft, FLEXION, 140.0)),
        transit=1.3,
    ),
    "mov_hug_left": MovementSpec(
        "p_stand",
        "p_hug_left",
        (_c(JointId.HipLeft, FLEXION, 95.0), _c(JointId.KneeLeft, FLEXION, 135.0)),
        transit=1.3,
    ),
    "mov_hug_right": MovementSpec(
        "p_stand",
        "p_hug_right",
        (_c(JointId.HipRight, FLEXION, 95.0), _c(JointId.KneeRight, FLEXION, 135.0)),
        transit=1.3,
    ),
    "mov_sumo_descent": MovementSpec(
        "p_stand",
        "p_sumo",
        (_c(JointId.KneeLeft, FLEXION, 70.0), _c(JointId.KneeRight, FLEXION, 70.0)),
        transit=1.5,
    ),
    "mov_crossed_squat_descent": MovementSpec(
        "p_stand",
        "p_squat_crossed",
        (
            _c(JointId.KneeLeft, FLEXION, 70.0),
            _c(JointId.KneeRight, FLEXION, 70.0),
            _c(JointId.HipLeft, FLEXION, 95.0),
            _c(JointId.HipRight, FLEXION, 95.0),
        ),
        transit=1.5,
    ),
    "mov_star_reach": MovementSpec(
        "p_stand",
        "p_star",
        (_c(JointId.ShoulderLeft, ABDUCTION, 160.0), _c(JointId.ShoulderRight, ABDUCTION, 160.0)),
        transit=1.3,
    ),
    "mov_chair_descent": MovementSpec(
        "p_stand",
        "p_chair",
        (
            _c(JointId.HipLeft, FLEXION, 85.0),
            _c(JointId.HipRight, FLEXION, 85.0),
            _c(JointId.KneeLeft, FLEXION, 83.0),
            _c(JointId.KneeRight, FLEXION, 83.0),
        ),
        transit=1.5,
    ),
}


def reference_recording(name: str, *, seed: int = 0) -> Recording:
    """Clean reference recording for a demo movement."""
    spec = MOVEMENTS[name]
    return transition_recording(spec.initial, spec.final, transit=spec.transit, seed=seed)


def demo_movements(library: PostureLibrary) -> dict[str, Movement]:
    """All demo movements plus their reversals, endpoint-validated."""
    movements: dict[str, Movement] = {}
    for name in sorted(MOVEMENTS):
        spec = MOVEMENTS[name]
        recording = reference_recording(name)
        angles = suggest_relevant_angles(recording, library.basis)
        if not angles:
            angles = ["hip_left", "hip_right"]
        movement = record_movement(
            name,
            recording,
            initial=spec.initial,
            final=spec.final,
            relevant_angles=angles,
            components=spec.components,
            library=library,
        )
        movements[name] = movement
        reversed_movement = reverse_movement(movement)
        movements[reversed_movement.name] = reversed_movement
    return movements


# ----------------------------------------------------------------------
# Exercises
# ----------------------------------------------------------------------

EXERCISES: dict[str, tuple[str, ...]] = {
    "ex_hip_flexion_gentle": ("mov_hip_flexion_left",),
    "ex_hip_flexion_cycle": ("mov_hip_flexion_left", "mov_hip_flexion_left_rev"),
    "ex_hip_abduction_left": ("mov_hip_abduction_left",),
    "ex_hip_abduction_right": ("mov_hip_abduction_right",),
    "ex_hip_extension_left": ("mov_hip_extension_left",),
    "ex_hip_extension_right": ("mov_hip_extension_right",),
    "ex_soft_squat": ("mov_squat_descent",),
    "ex_high_knee_march": (
        "mov_knee_raise_right",
        "mov_knee_raise_right_rev",
        "mov_knee_raise_left",
        "mov_knee_raise_left_rev",
    ),
    "ex_chair_sit": ("mov_chair_descent",),
    "ex_hip_hinge": ("mov_hinge_descent",),
    "ex_wood_chop": ("mov_chop_lift", "mov_chop_swing"),
    "ex_archer_stretch": (
        "mov_draw_left",
        "mov_draw_left_rev",
        "mov_draw_right",
        "mov_draw_right_rev",
    ),
    "ex_arm_pump": ("mov_elbow_curl", "mov_elbow_curl_rev"),
    "ex_star_reach": ("mov_star_reach",),
    "ex_toe_touch": ("mov_toe_reach_descent",),
    "ex_knee_hugs": (
        "mov_hug_left",
        "mov_hug_left_rev",
        "mov_hug_right",
        "mov_hug_right_rev",
    ),
    "ex_sumo_squat": ("mov_sumo_descent",),
    "ex_crossed_squat": ("mov_crossed_squat_descent",),
    "ex_wall_press": ("mov_press_up",),
    "ex_reach_drill": ("mov_reach_mixed",),
    "ex_heel_curls": (
        "mov_heel_curl_left",
        "mov_heel_curl_left_rev",
        "mov_heel_curl_right",
        "mov_heel_curl_right_rev",
    ),
}

_EXERCISE_BLURBS = {
    "ex_hip_flexion_gentle": "Gentle straight-leg raise for the left hip.",
    "ex_hip_flexion_cycle": "Left hip raise with an explicitly tracked lowering half.",
    "ex_hip_abduction_left": "Left leg swings out with arms overhead for balance.",
    "ex_hip_abduction_right": "Right leg swings out behind a guard arm position.",
    "ex_hip_extension_left": "Left leg reaches back while arms counterbalance forward.",
    "ex_hip_extension_right": "Right leg reaches back with arms crossed on the chest.",
    "ex_soft_squat": "Shallow overhead squat.",
    "ex_high_knee_march": "Alternating high knee raises.",
    "ex_chair_sit": "Sit-down pattern to an invisible chair.",
    "ex_hip_hinge": "Deep hip hinge with arms swept back.",
    "ex_wood_chop": "Two-hand diagonal swing from high left to low right.",
    "ex_archer_stretch": "Alternating bow-draw stretch in a staggered stance.",
    "ex_arm_pump": "Both elbows curl up and lower.",
    "ex_star_reach": "Wide star reach through arms and stance.",
    "ex_toe_touch": "Standing fold reaching toward the toes.",
    "ex_knee_hugs": "Alternating standing knee hugs.",
    "ex_sumo_squat": "Wide-stance squat with bent T arms.",
    "ex_crossed_squat": "Deep squat with arms crossed on the chest.",
    "ex_wall_press": "Forward press-up pattern with a slight backward lean.",
    "ex_reach_drill": "Asymmetric reach: one arm forward, one overhead.",
    "ex_heel_curls": "Alternating standing heel curls.",
}


def demo_exercises() -> dict[str, Exercise]:
    out = {}
    for name in sorted(EXERCISES):
        out[name] = Exercise(
            name=name,
            movements=EXERCISES[name],
            description=_EXERCISE_BLURBS.get(name, ""),
            default_series=1,
            default_reps=3,
        )
    return out


# ----------------------------------------------------------------------
# Protocol and patients
# ----------------------------------------------------------------------

HIP = "HipJoint"
KNEE = "KneeJoint"

PHASE_I_SET = frozenset(
    {
        "ex_hip_flexion_gentle",
        "ex_hip_abduction_left",
        "ex_hip_abduction_right",
        "ex_hip_extension_left",
        "ex_soft_squat",
    }
)

PHASE_II_SET = frozenset(
    {
        "ex_hip_flexion_gentle",
        "ex_hip_flexion_cycle",
        "ex_hip_abduction_left",
        "ex_hip_abduction_right",
        "ex_hip_extension_left",
        "ex_hip_extension_right",
        "ex_soft_squat",
        "ex_high_knee_march",
        "ex_hip_hinge",
        "ex_chair_sit",
        "ex_wood_chop",
    }
)


def demo_protocol() -> Protocol:
    """Two-phase hip replacement recovery protocol."""
    concepts = {
        "FlexROM60": ExerciseConcept(
            name="FlexROM60", quantifier="all", filter=MovementFilter(HIP, FLEXION, 60.0)
        ),
        "AbdROM20": ExerciseConcept(
            name="AbdROM20", quantifier="all", filter=MovementFilter(HIP, ABDUCTION, 20.0)
        ),
        "ExtROM20": ExerciseConcept(
            name="ExtROM20", quantifier="all", filter=MovementFilter(HIP, EXTENSION, 20.0)
        ),
        "SoftSquats": ExerciseConcept(
            name="SoftSquats", quantifier="all", filter=MovementFilter(KNEE, FLEXION, 60.0)
        ),
        "FlexROM90": ExerciseConcept(
            name="FlexROM90", quantifier="all", filter=MovementFilter(HIP, FLEXION, 90.0)
        ),
        "ExtROM30": ExerciseConcept(
            name="ExtROM30", quantifier="all", filter=MovementFilter(HIP, EXTENSION, 30.0)
        ),
        "DynamicDrills": ExerciseConcept(
            name="DynamicDrills", quantifier="some", filter=MovementFilter(HIP, FLEXION, 90.0)
        ),
    }
    phase1 = ProtocolPhase(
        id="phase-1",
        condition=AllOf(
            (
                AnyOf(
                    (
                        RomAtom(HIP, FLEXION, "<", 60.0),
                        RomAtom(HIP, ABDUCTION, "<", 20.0),
                        RomAtom(HIP, EXTENSION, "<", 20.0),
                    )
                ),
                VasAtom(6.0),
            )
        ),
        concepts=("FlexROM60", "AbdROM20", "ExtROM20", "SoftSquats"),
    )
    phase2 = ProtocolPhase(
        id="phase-2",
        condition=AllOf(
            (
                RomAtom(HIP, FLEXION, ">=", 60.0),
                RomAtom(HIP, EXTENSION, ">=", 20.0),
                AnyOf(
                    (
                        RomAtom(HIP, FLEXION, "<", 90.0),
                        RomAtom(HIP, ABDUCTION, "<", 20.0),
                        RomAtom(HIP, EXTENSION, "<", 30.0),
                    )
                ),
                VasAtom(2.0),
            )
        ),
        concepts=("FlexROM90", "AbdROM20", "ExtROM30", "SoftSquats", "DynamicDrills"),
    )
    return Protocol(name="THR", phases=(phase1, phase2), concepts=concepts)


def demo_patients() -> dict[str, PatientRecord]:
    john = PatientRecord(
        id="p-john",
        personal={"name": "John", "born": "1958-03-12"},
        symptoms=("left hip pain on stairs",),
        diagnoses=("left hip osteoarthritis, post arthroplasty",),
        surgeries=(Surgery(label="total hip replacement", date="2026-07-01", side="left"),),
        goals=("walk 2 km without a cane",),
        explorations=(
            Exploration(date="2026-07-30", location=HIP, side="left", type=FLEXION, rom=48.0),
            Exploration(date="2026-07-30", location=HIP, side="left", type=ABDUCTION, rom=14.0),
            Exploration(date="2026-07-30", location=HIP, side="left", type=EXTENSION, rom=10.0),
        ),
        vas_reports=(VasReport(date="2026-08-10", value=4.0),),
        protocol="THR",
    )
    rivera = PatientRecord(
        id="p-rivera",
        personal={"name": "Rivera", "born": "1965-11-02"},
        symptoms=("stiffness after sitting",),
        diagnoses=("right hip osteoarthritis, post arthroplasty",),
        surgeries=(Surgery(label="total hip replacement", date="2026-06-15", side="right"),),
        goals=("return to cycling",),
        explorations=(
            Exploration(date="2026-08-05", location=HIP, side="right", type=FLEXION, rom=74.0),
            Exploration(date="2026-08-05", location=HIP, side="right", type=ABDUCTION, rom=16.0),
            Exploration(date="2026-08-05", location=HIP, side="right", type=EXTENSION, rom=24.0),
        ),
        vas_reports=(VasReport(date="2026-08-12", value=1.5),),
        protocol="THR",
    )
    return {p.id: p for p in (john, rivera)}


# ----------------------------------------------------------------------
# Playback generation
# ----------------------------------------------------------------------

def exercise_timeline(exercise: Exercise, *, reps: int = 1, series: int = 1) -> Timeline:
    """Timeline an attentive participant would produce for an exercise.

    Walks every series and rep of the movement chain, inserting return
    transits wherever a rep or movement does not already start where the
    previous one ended.
    """
    timeline = Timeline()
    first_initial = MOVEMENTS[exercise.movements[0]].initial
    current = first_initial
    timeline.hold(pose_positions(current), LEAD_HOLD)
    for _series in range(series):
        for _rep in range(reps):
            for mov_name in exercise.movements:
                base = mov_name[:-4] if mov_name.endswith("_rev") else mov_name
                spec = MOVEMENTS[base]
                initial, final = spec.initial, spec.final
                if mov_name.endswith("_rev"):
                    initial, final = final, initial
                if current != initial:
                    timeline.move(pose_positions(current), pose_positions(initial), 1.0)
                    timeline.hold(pose_positions(initial), LEAD_HOLD)
                timeline.move(pose_positions(initial), pose_positions(final), spec.transit)
                timeline.hold(pose_positions(final), TAIL_HOLD)
                current = final
            if current != first_initial:
                timeline.move(pose_positions(current), pose_positions(first_initial), 1.0)
                timeline.hold(pose_positions(first_initial), TAIL_HOLD)
                current = first_initial
    return timeline


def exercise_playback(
    exercise: Exercise,
    *,
    reps: int = 1,
    series: int = 1,
    noise_sigma: float = 0.0,
    warp_amp: float = 0.0,
    seed: int = 0,
) -> Recording:
    timeline = exercise_timeline(exercise, reps=reps, series=series)
    return timeline.to_recording(noise_sigma=noise_sigma, warp_amp=warp_amp, seed=seed)


def run_exercise(
    exercise: Exercise,
    recording: Recording,
    *,
    exercises: Mapping[str, Exercise],
    movements: Mapping[str, Movement],
    library: PostureLibrary,
    reps: int = 1,
    series: int = 1,
    patient: str = "",
    record_frames: bool = False,
):
    """Feed a recording through a session for one exercise; return the report."""
    plan = SessionPlan(
        entries=(PlanEntry(exercise=exercise.name, series=series, reps=reps),),
        hold_time=0.4,
        timeout_per_movement=30.0,
    )
    engine = start_session(
        plan, exercises, movements, library, patient=patient, record_frames=record_frames
    )
    engine.feed_recording(recording)
    return engine.finish(abort=not engine.completed)


# ----------------------------------------------------------------------
# Assessment fixtures
# ----------------------------------------------------------------------

def demo_autotest() -> AutoTest:
    """A small self-administered outcome form, scored as a percentage."""
    def scale(labels: Sequence[str]) -> tuple[Answer, ...]:
        return tuple(Answer(text=t, score=float(i)) for i, t in enumerate(labels))

    return AutoTest(
        name="hip-outcome-short",
        questions=(
            Question(
                text="How hard is climbing one flight of stairs?",
                answers=scale(["Impossible", "With help", "Slowly but alone",
                               "Hard but manageable", "No difficulty"]),
            ),
            Question(
                text="Can you put on socks and shoes?",
                answers=scale(["Not at all", "Only with aids", "With effort",
                               "Minor trouble", "Easily"]),
            ),
            Question(
                text="How far can you walk without resting?",
                answers=scale(["Indoors only", "One block", "Half a kilometre",
                               "Two kilometres", "Unlimited"]),
            ),
        ),
        scoring=percent_of(12.0),
    )


def demo_autotest_doc() -> dict:
    return test_to_doc(demo_autotest())


# ----------------------------------------------------------------------
# Store seeding
# ----------------------------------------------------------------------

def seed_demo_store(store) -> None:
    """Populate a document store with the full demo corpus.

    Order respects referential integrity: postures, then movements, then
    exercises, protocol, patients, tests, assignments, and finally a few
    recorded sessions so analytics views have data on day one.
    """
    from .movement import movement_to_doc
    from .posture import concept_to_doc
    from .session import exercise_to_doc, report_to_doc

    def put_new(collection: str, doc_id: str, doc: Mapping) -> None:
        if not store.exists(collection, doc_id):
            store.put(collection, doc_id, doc, if_absent=True)

    library = demo_library()
    for name in sorted(library.concepts):
        doc = concept_to_doc(library.concepts[name])
        doc.pop("id", None)
        put_new("postures", name, doc)

    movements = demo_movements(library)
    for name in sorted(movements):
        doc = movement_to_doc(movements[name])
        doc.pop("id", None)
        put_new("movements", name, doc)

    exercises = demo_exercises()
    for name in sorted(exercises):
        doc = exercise_to_doc(exercises[name])
        doc.pop("id", None)
        put_new("exercises", name, doc)

    protocol = demo_protocol()
    pdoc = knowledge.protocol_to_doc(protocol)
    pdoc.pop("id", None)
    put_new("protocols", protocol.name, pdoc)

    for pid, patient in sorted(demo_patients().items()):
        doc = knowledge.patient_to_doc(patient)
        doc.pop("id", None)
        put_new("patients", pid, doc)

    tdoc = demo_autotest_doc()
    tid = tdoc.pop("id")
    put_new("tests", tid, tdoc)

    put_new(
        "assignments",
        "as-0001",
        {"patient": "p-john", "exercise": "ex_hip_flexion_gentle", "series": 1, "reps": 3},
    )
    put_new(
        "assignments",
        "as-0002",
        {"patient": "p-rivera", "exercise": "ex_high_knee_march", "series": 1, "reps": 2},
    )

    seeded_sessions = (
        ("sr-0001", "p-john", "ex_hip_flexion_gentle", "2026-08-14", 7),
        ("sr-0002", "p-rivera", "ex_high_knee_march", "2026-08-13", 11),
        ("sr-0003", "p-rivera", "ex_chair_sit", "2026-08-16", 13),
    )
    for rid, pid, ex_name, date, seed in seeded_sessions:
        if store.exists("session_reports", rid):
            continue
        exercise = exercises[ex_name]
        playback = exercise_playback(exercise, reps=2, noise_sigma=0.004, seed=seed)
        report = run_exercise(
            exercise,
            playback,
            exercises=exercises,
            movements=movements,
            library=library,
            reps=2,
            patient=pid,
            record_frames=True,
        )
        doc = report_to_doc(report)
        doc["date"] = date
        store.put("session_reports", rid, doc, if_absent=True)

    log.info("demo corpus seeded: %d postures, %d movements, %d exercises",
             len(library.concepts), len(movements), len(exercises))
