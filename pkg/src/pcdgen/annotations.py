"""Skill/motion annotation schema: parsing, validation, canonical output.

An annotation file is JSON with three fields: ``masks`` (file names, gripper
mask first, then one per object), ``arms`` (1 or 2) and ``annotations`` (a
list of segment-opening entries). Each entry's ``frame`` is the first frame
of its segment; a segment ends where the next begins and the last ends at
the horizon. Entries strictly alternate motion, skill, motion, skill and the
trajectory must end on a skill. Motion entries carry only ``frame`` and
``type``; skill entries add ``target`` plus ``hand`` (single arm) or
``left_hand``/``right_hand`` (bimanual), where null means the empty set.

The first segment always starts at frame 1: segments tile the demonstration
exactly, so the opening motion's ``frame`` value is accepted but its segment
is anchored at 1.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import InterleaveError, IoFailure, RangeError, SchemaError

MOTION = "motion"
SKILL = "skill"


@dataclass(frozen=True)
class Segment:
    """One motion or skill span, frames inclusive on both ends."""

    kind: str
    start_frame: int
    end_frame: int
    target: frozenset = frozenset()
    hands: tuple = ()  # one id set per arm, skills only

    def __post_init__(self):
        if self.kind not in (MOTION, SKILL):
            raise SchemaError(f"unknown segment type {self.kind!r}")
        if self.start_frame > self.end_frame:
            raise RangeError(
                f"segment [{self.start_frame}, {self.end_frame}] is empty")
        if self.start_frame < 1:
            raise RangeError(f"frame {self.start_frame} before start of demo")
        object.__setattr__(self, "target", frozenset(self.target))
        object.__setattr__(self, "hands",
                           tuple(frozenset(h) for h in self.hands))
        if self.kind == MOTION and (self.target or any(self.hands)):
            raise SchemaError("motion segments carry no object ids")
        ids = set(self.target).union(*self.hands) if self.hands else set(self.target)
        if any(i < 1 for i in ids):
            raise RangeError("object ids start at 1")

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1

    @property
    def hand_union(self) -> frozenset:
        return frozenset().union(*self.hands) if self.hands else frozenset()

    @property
    def group(self) -> frozenset:
        """Objects the segment involves: target plus everything in hand."""
        return self.target | self.hand_union


def motion(start: int, end: int) -> Segment:
    return Segment(kind=MOTION, start_frame=start, end_frame=end)


def skill(start: int, end: int, target: Iterable[int] = (),
          hands: Iterable[Iterable[int]] = ((),)) -> Segment:
    return Segment(kind=SKILL, start_frame=start, end_frame=end,
                   target=frozenset(target),
                   hands=tuple(frozenset(h) for h in hands))


@dataclass(frozen=True)
class AnnotationSet:
    mask_files: tuple
    arm_count: int
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "mask_files", tuple(self.mask_files))
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.arm_count not in (1, 2):
            raise SchemaError(f"arms must be 1 or 2, got {self.arm_count}")
        segs = self.segments
        if not segs:
            raise InterleaveError("annotation has no segments")
        if segs[0].kind != MOTION:
            raise InterleaveError("first segment must be a motion")
        if segs[-1].kind != SKILL:
            raise InterleaveError("trajectory must end on a skill")
        for prev, cur in zip(segs, segs[1:]):
            if prev.kind == cur.kind:
                raise InterleaveError(
                    f"adjacent {cur.kind} segments at frame {cur.start_frame}")
            if cur.start_frame != prev.end_frame + 1:
                raise RangeError(
                    f"segments must tile: gap or overlap at frame {cur.start_frame}")
        if segs[0].start_frame != 1:
            raise RangeError("first segment must start at frame 1")
        for s in segs:
            if s.kind == SKILL and len(s.hands) != self.arm_count:
                raise SchemaError(
                    f"skill at frame {s.start_frame} needs {self.arm_count} hand sets")

    @property
    def horizon(self) -> int:
        return self.segments[-1].end_frame

    @property
    def skill_count(self) -> int:
        return sum(1 for s in self.segments if s.kind == SKILL)

    def segment_at(self, frame: int) -> Segment:
        for s in self.segments:
            if s.start_frame <= frame <= s.end_frame:
                return s
        raise RangeError(f"frame {frame} beyond horizon {self.horizon}")

    def check_ids(self, k: int) -> None:
        """Reject object ids above ``k``."""
        for s in self.segments:
            for i in sorted(s.group):
                if i > k:
                    raise RangeError(
                        f"object id {i} out of range (scene has {k} objects)")

    def resolve_masks(self, base_dir: Path) -> list:
        """Mask paths under ``base_dir``; missing files are an error."""
        paths = [Path(base_dir) / name for name in self.mask_files]
        missing = [str(p) for p in paths if not p.is_file()]
        if missing:
            raise IoFailure(f"missing mask files: {', '.join(missing)}")
        return paths


def skills(a: AnnotationSet) -> list:
    return [s for s in a.segments if s.kind == SKILL]


def motions(a: AnnotationSet) -> list:
    return [s for s in a.segments if s.kind == MOTION]


# ---------------------------------------------------------------------------
# JSON reading
# ---------------------------------------------------------------------------

def _id_set(value, field_name: str, where: str) -> frozenset:
    if value is None:
        return frozenset()
    if not isinstance(value, list) or not all(
            isinstance(i, int) and not isinstance(i, bool) for i in value):
        raise SchemaError(f"{where}: {field_name} must be null or a list of ints")
    return frozenset(value)


def annotation_from_dict(doc: dict, horizon: int, *,
                         strict: bool = False) -> AnnotationSet:
    """Build a validated AnnotationSet from a decoded JSON document.

    ``horizon`` closes the last segment. A trailing motion entry is trimmed
    with a warning (``strict=True`` makes it an error): the trajectory
    definition ends at the last skill, so any frames after it are dropped at
    ingest.
    """
    if not isinstance(doc, dict):
        raise SchemaError("annotation must be a JSON object")
    for key in ("masks", "arms", "annotations"):
        if key not in doc:
            raise SchemaError(f"missing field {key!r}")
    masks = doc["masks"]
    if not isinstance(masks, list) or not all(isinstance(m, str) for m in masks):
        raise SchemaError("masks must be a list of file names")
    arms = doc["arms"]
    if arms not in (1, 2):
        raise SchemaError(f"arms must be 1 or 2, got {arms!r}")
    entries = doc["annotations"]
    if not isinstance(entries, list) or not entries:
        raise SchemaError("annotations must be a non-empty list")

    for i, e in enumerate(entries):
        if not isinstance(e, dict):
            raise SchemaError(f"annotations[{i}]: must be an object")
        for key in ("frame", "type"):
            if key not in e:
                raise SchemaError(f"annotations[{i}]: missing field {key!r}")
        if not isinstance(e["frame"], int) or isinstance(e["frame"], bool):
            raise SchemaError(f"annotations[{i}]: frame must be an integer")
        if e["type"] not in (MOTION, SKILL):
            raise SchemaError(f"annotations[{i}]: unknown type {e['type']!r}")

    if entries[0]["type"] != MOTION:
        raise InterleaveError("first annotation entry must be a motion")
    for prev, cur in zip(entries, entries[1:]):
        if prev["type"] == cur["type"]:
            raise InterleaveError(
                f"adjacent {cur['type']} entries at frame {cur['frame']}")
    if entries[-1]["type"] == MOTION:
        if strict:
            raise InterleaveError("trailing motion after the last skill")
        # the dropped motion opened at its "frame"; everything from there on
        # is outside the trajectory, so the effective horizon shrinks
        trailing_start = entries[-1]["frame"]
        entries = entries[:-1]
        if not entries:
            raise InterleaveError("annotation contains no skill")
        horizon = min(horizon, trailing_start - 1)
        warnings.warn(
            f"trailing motion after the last skill; trimming to frame {horizon}",
            stacklevel=2)

    return _build_segments(masks, arms, entries, horizon)


def _build_segments(masks, arms, entries, horizon) -> AnnotationSet:
    starts = [1] + [e["frame"] for e in entries[1:]]
    ends = [s - 1 for s in starts[1:]] + [horizon]
    hand_keys = ("hand",) if arms == 1 else ("left_hand", "right_hand")
    segs = []
    for e, start, end in zip(entries, starts, ends):
        where = f"annotations entry at frame {e['frame']}"
        if e["frame"] > horizon:
            raise RangeError(f"{where}: beyond horizon {horizon}")
        if start > end:
            raise RangeError(f"{where}: frames must increase")
        if e["type"] == MOTION:
            extra = set(e) & {"target", "hand", "left_hand", "right_hand"}
            if extra:
                raise SchemaError(f"{where}: motion entries carry only frame and type")
            segs.append(Segment(kind=MOTION, start_frame=start, end_frame=end))
        else:
            if "target" not in e:
                raise SchemaError(f"{where}: missing field 'target'")
            wrong = set(e) & ({"hand"} if arms == 2 else {"left_hand", "right_hand"})
            if wrong:
                raise SchemaError(
                    f"{where}: fields {sorted(wrong)} do not match arms = {arms}")
            hands = []
            for key in hand_keys:
                if key not in e:
                    raise SchemaError(f"{where}: missing field {key!r}")
                hands.append(_id_set(e[key], key, where))
            segs.append(Segment(kind=SKILL, start_frame=start, end_frame=end,
                                target=_id_set(e["target"], "target", where),
                                hands=tuple(hands)))
    return AnnotationSet(mask_files=tuple(masks), arm_count=arms,
                         segments=tuple(segs))


def parse_annotation(path: Path, k: int, horizon: int, *,
                     strict: bool = False) -> AnnotationSet:
    """Read and validate an annotation file against a scene of ``k`` objects
    and ``horizon`` frames."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from e
    ann = annotation_from_dict(doc, horizon, strict=strict)
    if len(ann.mask_files) not in (0, k + 1):
        raise SchemaError(
            f"expected {k + 1} masks (gripper + {k} objects), "
            f"got {len(ann.mask_files)}")
    ann.check_ids(k)
    if ann.horizon > horizon:
        raise RangeError(f"annotation horizon {ann.horizon} exceeds {horizon}")
    return ann


# ---------------------------------------------------------------------------
# Canonical writing
# ---------------------------------------------------------------------------

def _ids_json(s: frozenset):
    return sorted(s) if s else None


def annotation_to_dict(a: AnnotationSet) -> dict:
    entries = []
    for s in a.segments:
        e: dict = {"frame": s.start_frame, "type": s.kind}
        if s.kind == SKILL:
            e["target"] = _ids_json(s.target)
            if a.arm_count == 1:
                e["hand"] = _ids_json(s.hands[0])
            else:
                e["left_hand"] = _ids_json(s.hands[0])
                e["right_hand"] = _ids_json(s.hands[1])
        entries.append(e)
    return {"masks": list(a.mask_files), "arms": a.arm_count,
            "annotations": entries}


def serialize_annotation(a: AnnotationSet) -> str:
    """Canonical JSON text: stable key order, two-space indent, newline at end."""
    return json.dumps(annotation_to_dict(a), indent=2) + "\n"


def write_annotation(a: AnnotationSet, path: Path) -> None:
    try:
        Path(path).write_text(serialize_annotation(a))
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
