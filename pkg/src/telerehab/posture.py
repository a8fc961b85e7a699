"""Posture descriptors and nearest-reference classification.

A posture is summarized by 30 features: 18 binary joint relations plus 12
limb angles. Distance between descriptors blends normalized Hamming
distance on the bits with mean absolute angular error, so one flipped bit
or a uniform 18-degree angular error alone stays inside the default
match radius.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import UnknownNameError, ValidationError
from .skeleton import AngleDef, JointId, RelationDef, SkeletonFrame

RELATION_COUNT = 18
ANGLE_COUNT = 12
DEFAULT_ALPHA = 0.5
DEFAULT_TAU = 0.10

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class FeatureBasis:
    """Fixed feature set: exactly 18 relations and 12 angles, names unique."""

    relations: tuple[RelationDef, ...]
    angles: tuple[AngleDef, ...]

    def __post_init__(self):
        relations = tuple(self.relations)
        angles = tuple(self.angles)
        if len(relations) != RELATION_COUNT:
            raise ValidationError(f"basis needs exactly {RELATION_COUNT} relations, got {len(relations)}")
        if len(angles) != ANGLE_COUNT:
            raise ValidationError(f"basis needs exactly {ANGLE_COUNT} angles, got {len(angles)}")
        names = [r.name for r in relations] + [a.name for a in angles]
        if len(set(names)) != len(names):
            raise ValidationError("feature names must be unique across the basis")
        object.__setattr__(self, "relations", relations)
        object.__setattr__(self, "angles", angles)

    @property
    def angle_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.angles)

    @cached_property
    def _arrays(self):
        """Index arrays for vectorized descriptor evaluation."""
        rl = np.array([r.lhs for r in self.relations], dtype=np.intp)
        rr = np.array([r.rhs for r in self.relations], dtype=np.intp)
        rax = np.array([_AXIS_INDEX[r.axis] for r in self.relations], dtype=np.intp)
        rsign = np.array([1.0 if r.sense == "greater" else -1.0 for r in self.relations])
        av = np.array([a.vertex for a in self.angles], dtype=np.intp)
        aa = np.array([a.endpoint_a for a in self.angles], dtype=np.intp)
        ab = np.array([a.endpoint_b for a in self.angles], dtype=np.intp)
        return rl, rr, rax, rsign, av, aa, ab


def default_basis() -> FeatureBasis:
    """The shipped basis. Loaded from package data so it stays inspectable."""
    text = resources.files("telerehab").joinpath("data/default_basis.json").read_text("utf-8")
    return basis_from_doc(json.loads(text))


def basis_from_doc(doc: Mapping) -> FeatureBasis:
    relations = tuple(
        RelationDef(
            name=r["name"],
            lhs=JointId[r["lhs"]],
            rhs=JointId[r["rhs"]],
            axis=r["axis"],
            sense=r["sense"],
        )
        for r in doc["relations"]
    )
    angles = tuple(
        AngleDef(
            name=a["name"],
            vertex=JointId[a["vertex"]],
            endpoint_a=JointId[a["endpoint_a"]],
            endpoint_b=JointId[a["endpoint_b"]],
        )
        for a in doc["angles"]
    )
    return FeatureBasis(relations=relations, angles=angles)


def basis_to_doc(basis: FeatureBasis) -> dict:
    return {
        "relations": [
            {"name": r.name, "lhs": r.lhs.name, "rhs": r.rhs.name, "axis": r.axis, "sense": r.sense}
            for r in basis.relations
        ],
        "angles": [
            {
                "name": a.name,
                "vertex": a.vertex.name,
                "endpoint_a": a.endpoint_a.name,
                "endpoint_b": a.endpoint_b.name,
            }
            for a in basis.angles
        ],
    }


@dataclass(frozen=True)
class PostureDescriptor:
    """30-feature posture summary: 18 bits and 12 angles in degrees."""

    bits: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        angles = np.asarray(self.angles, dtype=np.float64)
        if bits.shape != (RELATION_COUNT,):
            raise ValidationError(f"descriptor needs {RELATION_COUNT} bits, got shape {bits.shape}")
        if not np.all((bits == 0) | (bits == 1)):
            raise ValidationError("descriptor bits must be 0 or 1")
        if angles.shape != (ANGLE_COUNT,):
            raise ValidationError(f"descriptor needs {ANGLE_COUNT} angles, got shape {angles.shape}")
        if np.any(angles < 0.0) or np.any(angles > 180.0) or not np.all(np.isfinite(angles)):
            raise ValidationError("descriptor angles must lie in [0, 180]")
        bits.flags.writeable = False
        angles.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "angles", angles)


def descriptor(frame: SkeletonFrame, basis: FeatureBasis) -> PostureDescriptor:
    """Evaluate all 30 features on one frame."""
    rl, rr, rax, rsign, av, aa, ab = basis._arrays
    pos = frame.positions
    diff = (pos[rl, rax] - pos[rr, rax]) * rsign
    bits = (diff > 0.0).astype(np.uint8)

    va = pos[aa] - pos[av]
    vb = pos[ab] - pos[av]
    na = np.linalg.norm(va, axis=1)
    nb = np.linalg.norm(vb, axis=1)
    if np.any(na < 1e-9) or np.any(nb < 1e-9):
        bad = int(np.argmax((na < 1e-9) | (nb < 1e-9)))
        from .errors import DegenerateGeometryError

        raise DegenerateGeometryError(
            f"angle {basis.angles[bad].name!r}: coincident joints at frame t={frame.t}"
        )
    cos = np.einsum("ij,ij->i", va, vb) / (na * nb)
    cos = np.clip(cos, -1.0, 1.0)
    angles = np.degrees(np.arccos(cos))
    return PostureDescriptor(bits=bits, angles=angles)


def descriptor_distance(a: PostureDescriptor, b: PostureDescriptor, alpha: float = DEFAULT_ALPHA) -> float:
    """Blend of bit disagreement rate and mean absolute angle error.

    d = alpha * (hamming / 18) + (1 - alpha) * (mean |angle delta| / 180),
    so the result lies in [0, 1]; 0 exactly on identical descriptors.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    hamming = float(np.count_nonzero(a.bits != b.bits)) / RELATION_COUNT
    angular = float(np.mean(np.abs(a.angles - b.angles))) / 180.0
    return alpha * hamming + (1.0 - alpha) * angular


@dataclass(frozen=True)
class PostureConcept:
    """A named reference posture with its own match radius tau."""

    name: str
    reference: PostureDescriptor
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not self.name:
            raise ValidationError("posture concept needs a name")
        if not self.tau > 0.0:
            raise ValidationError(f"tau must be > 0, got {self.tau}")


@dataclass
class PostureLibrary:
    """Named posture concepts sharing one feature basis.

    Build the library up front (register_posture), then treat it as
    read-only: classification never mutates it.
    """

    basis: FeatureBasis
    concepts: dict[str, PostureConcept] = field(default_factory=dict)

    def add(self, concept: PostureConcept) -> None:
        if concept.name in self.concepts:
            raise ValidationError(f"posture {concept.name!r} is already defined")
        self.concepts[concept.name] = concept

    def __contains__(self, name: str) -> bool:
        return name in self.concepts

    def __len__(self) -> int:
        return len(self.concepts)

    def get(self, name: str) -> PostureConcept:
        try:
            return self.concepts[name]
        except KeyError:
            raise UnknownNameError(f"unknown posture {name!r}") from None


def register_posture(
    library: PostureLibrary,
    name: str,
    frames: Sequence[SkeletonFrame],
    tau: float = DEFAULT_TAU,
) -> PostureConcept:
    """Aggregate example frames into a reference descriptor and add it.

    Angles average across frames; each bit takes the majority vote with
    ties resolved to 1. The name must be unused in the library.
    """
    if name in library.concepts:
        raise ValidationError(f"posture {name!r} is already defined")
    if not frames:
        raise ValidationError("register_posture needs at least one frame")
    descs = [descriptor(fr, library.basis) for fr in frames]
    angle_mean = np.mean(np.stack([d.angles for d in descs]), axis=0)
    ones = np.sum(np.stack([d.bits for d in descs]).astype(np.int64), axis=0)
    bits = (2 * ones >= len(descs)).astype(np.uint8)
    concept = PostureConcept(name=name, reference=PostureDescriptor(bits=bits, angles=angle_mean), tau=tau)
    library.add(concept)
    return concept


def classify_posture(
    desc: PostureDescriptor,
    library: PostureLibrary,
    alpha: float = DEFAULT_ALPHA,
) -> tuple[str, float] | None:
    """Best match among concepts strictly inside their own tau, or None.

    Ties on distance resolve to the lexicographically smallest name so
    classification is order-independent.
    """
    if not library.concepts:
        raise ValidationError("cannot classify against an empty posture library")
    best: tuple[float, str] | None = None
    for name in library.concepts:
        concept = library.concepts[name]
        dist = descriptor_distance(desc, concept.reference, alpha)
        if dist < concept.tau:
            key = (dist, name)
            if best is None or key < best:
                best = key
    if best is None:
        return None
    return best[1], best[0]


# ----------------------------------------------------------------------
# Document round-trip (shared with the store and the CLI).
# ----------------------------------------------------------------------

def concept_to_doc(concept: PostureConcept) -> dict:
    return {
        "id": concept.name,
        "bits": [int(b) for b in concept.reference.bits],
        "angles": [float(a) for a in concept.reference.angles],
        "tau": concept.tau,
    }


def concept_from_doc(doc: Mapping) -> PostureConcept:
    try:
        return PostureConcept(
            name=doc["id"],
            reference=PostureDescriptor(
                bits=np.asarray(doc["bits"], dtype=np.uint8),
                angles=np.asarray(doc["angles"], dtype=np.float64),
            ),
            tau=float(doc.get("tau", DEFAULT_TAU)),
        )
    except KeyError as exc:
        raise ValidationError(f"posture document missing field {exc}") from exc


def library_to_doc(library: PostureLibrary) -> dict:
    return {
        "basis": basis_to_doc(library.basis),
        "postures": [concept_to_doc(c) for _, c in sorted(library.concepts.items())],
    }


def library_from_doc(doc: Mapping) -> PostureLibrary:
    library = PostureLibrary(basis=basis_from_doc(doc["basis"]))
    for item in doc.get("postures", ()):
        library.add(concept_from_doc(item))
    return library
