"""Core domain types: camera model, point clouds, poses, actions, demonstrations.

Conventions (normative for every module in this package):

* Camera coordinate frame: +Z along the optical axis, +X right, +Y down.
* Poses are 4x4 homogeneous float64 matrices acting on column vectors,
  left-composed: ``apply(t2 @ t1, p) == apply(t2, apply(t1, p))``.
* All angles are radians internally; degrees appear only at CLI/config
  boundaries.
* Point coordinates are float64 in memory but quantized to float32 on disk
  (sensor-grade precision; halves storage). Clouds loaded from a container
  therefore hold float32-representable values and round-trip bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import InvariantViolation, NonRigidTemplate

# Reserved point labels. Object ids occupy 1..K.
LABEL_ENV = 0
LABEL_ARM = 0xFFFF
LABEL_ARM_RIGHT = 0xFFFE  # second arm of a bimanual platform

ORTHONORMALITY_TOL = 1e-6
GRIP_RESOLUTION = 1e-3  # gripper widths quantized to 1 mm


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# Pose helpers
# ---------------------------------------------------------------------------

def validate_pose(t: np.ndarray, *, context: str = "pose") -> np.ndarray:
    """Check that ``t`` is a rigid transform; return it as float64 (4, 4).

    Rejects matrices whose rotation block fails ``||R R^T - I||_inf <= 1e-6``
    or whose determinant is not +1 within the same tolerance (reflections are
    not rotations). The last row must be exactly (0, 0, 0, 1).
    """
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (4, 4):
        raise InvariantViolation(f"{context}: expected 4x4 matrix, got {t.shape}")
    if not np.all(np.isfinite(t)):
        raise InvariantViolation(f"{context}: non-finite entries")
    if not np.array_equal(t[3], [0.0, 0.0, 0.0, 1.0]):
        raise InvariantViolation(f"{context}: last row must be (0,0,0,1)")
    r = t[:3, :3]
    err = np.max(np.abs(r @ r.T - np.eye(3)))
    if err > ORTHONORMALITY_TOL:
        raise InvariantViolation(f"{context}: rotation not orthonormal (|RR^T - I| = {err:.3g})")
    det = float(np.linalg.det(r))
    if abs(det - 1.0) > ORTHONORMALITY_TOL:
        raise InvariantViolation(f"{context}: det(R) = {det:.6f}, not a proper rotation")
    return t


def make_pose(rotation: np.ndarray | None = None, translation: Sequence[float] | None = None) -> np.ndarray:
    """Assemble a 4x4 pose from an optional 3x3 rotation and 3-vector."""
    t = np.eye(4)
    if rotation is not None:
        t[:3, :3] = rotation
    if translation is not None:
        t[:3, 3] = translation
    return t


def pose_inverse(t: np.ndarray) -> np.ndarray:
    r = t[:3, :3]
    inv = np.eye(4)
    inv[:3, :3] = r.T
    inv[:3, 3] = -r.T @ t[:3, 3]
    return inv


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis (right-handed)."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, in [0, pi]."""
    c = (np.trace(r[:3, :3]) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def pose_distance(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """(translation distance, rotation geodesic angle) between two poses."""
    d = float(np.linalg.norm(a[:3, 3] - b[:3, 3]))
    ang = rotation_angle(a[:3, :3].T @ b[:3, :3])
    return d, ang


# ---------------------------------------------------------------------------
# Camera model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus image size and the valid depth range."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    depth_min: float = 0.0
    depth_max: float = 10.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvariantViolation("camera: focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise InvariantViolation("camera: image must be at least 1x1")
        # principal point may fall outside the image: cropped (effective)
        # cameras shift cx/cy and the shift is not bounded by the new size
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise InvariantViolation("camera: principal point must be finite")
        if not (0 <= self.depth_min < self.depth_max):
            raise InvariantViolation("camera: need 0 <= depth_min < depth_max")

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
            "depth_min": self.depth_min, "depth_max": self.depth_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"],
                   width=int(d["width"]), height=int(d["height"]),
                   depth_min=d["depth_min"], depth_max=d["depth_max"])


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointCloud:
    """Points in the camera frame with optional per-point color and label.

    ``points`` is (N, 3) float64, ``colors`` (N, 3) uint8, ``labels`` (N,)
    uint16 with 0 meaning unlabeled/environment. Instances are immutable;
    the backing arrays are marked read-only.
    """

    points: np.ndarray
    colors: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InvariantViolation("cloud: non-finite coordinates")
        object.__setattr__(self, "points", _freeze(pts))
        if self.colors is not None:
            col = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(col) != len(pts):
                raise InvariantViolation("cloud: colors length mismatch")
            object.__setattr__(self, "colors", _freeze(col))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.uint16).reshape(-1)
            if len(lab) != len(pts):
                raise InvariantViolation("cloud: labels length mismatch")
            object.__setattr__(self, "labels", _freeze(lab))

    def __len__(self) -> int:
        return len(self.points)

    def select(self, mask: np.ndarray) -> "PointCloud":
        return PointCloud(
            self.points[mask],
            self.colors[mask] if self.colors is not None else None,
            self.labels[mask] if self.labels is not None else None,
        )

    def with_labels(self, value: int) -> "PointCloud":
        return PointCloud(self.points, self.colors,
                          np.full(len(self), value, dtype=np.uint16))

    def quantized(self) -> "PointCloud":
        """Coordinates forced through float32, as they will be stored on disk."""
        return PointCloud(self.points.astype(np.float32).astype(np.float64),
                          self.colors, self.labels)

    @staticmethod
    def concat(clouds: Sequence["PointCloud"]) -> "PointCloud":
        clouds = [c for c in clouds]
        if not clouds:
            return PointCloud(np.zeros((0, 3)))
        pts = np.concatenate([c.points for c in clouds])
        has_col = all(c.colors is not None for c in clouds)
        has_lab = all(c.labels is not None for c in clouds)
        col = np.concatenate([c.colors for c in clouds]) if has_col else None
        lab = np.concatenate([c.labels for c in clouds]) if has_lab else None
        return PointCloud(pts, col, lab)


def transform_cloud(cloud: PointCloud, t: np.ndarray) -> PointCloud:
    """Apply a rigid transform to every point; colors and labels carry through.

    The input cloud is not modified. Math is done in float64.
    """
    t = np.asarray(t, dtype=np.float64)
    pts = cloud.points @ t[:3, :3].T + t[:3, 3]
    return PointCloud(pts, cloud.colors, cloud.labels)


# ---------------------------------------------------------------------------
# Actions and demonstrations
# ---------------------------------------------------------------------------

def quantize_grip(width: float) -> float:
    return round(width / GRIP_RESOLUTION) * GRIP_RESOLUTION


@dataclass(frozen=True)
class Action:
    """Per-frame robot command: one EE pose and one gripper width per arm.

    Arms are ordered left then right for bimanual platforms. Gripper widths
    are meters, quantized to 1 mm.
    """

    ee: tuple[np.ndarray, ...]
    grip: tuple[float, ...]

    def __post_init__(self):
        if len(self.ee) != len(self.grip) or not self.ee:
            raise InvariantViolation("action: need one pose and one grip per arm")
        poses = tuple(_freeze(validate_pose(p, context="action pose")) for p in self.ee)
        object.__setattr__(self, "ee", poses)
        object.__setattr__(self, "grip",
                           tuple(quantize_grip(float(g)) for g in self.grip))

    @property
    def arm_count(self) -> int:
        return len(self.ee)


@dataclass(frozen=True)
class Demonstration:
    """Time-indexed (observation, action) sequence plus the camera model."""

    camera: CameraModel
    frames: tuple[tuple[PointCloud, Action], ...]
    effective_camera: Optional[CameraModel] = None

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise InvariantViolation("demonstration: horizon must be >= 2")
        arms = frames[0][1].arm_count
        for i, (obs, act) in enumerate(frames):
            if len(obs) == 0:
                raise InvariantViolation(f"demonstration: empty observation at frame {i + 1}")
            if act.arm_count != arms:
                raise InvariantViolation(f"demonstration: arm count changes at frame {i + 1}")
        object.__setattr__(self, "frames", frames)

    @property
    def horizon(self) -> int:
        return len(self.frames)

    @property
    def arm_count(self) -> int:
        return self.frames[0][1].arm_count

    def observations(self) -> list[PointCloud]:
        return [obs for obs, _ in self.frames]

    def actions(self) -> list[Action]:
        return [act for _, act in self.frames]


# ---------------------------------------------------------------------------
# Parsed scene
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectTemplate:
    """Complete surface cloud of one object in its own canonical frame."""

    id: int
    cloud: PointCloud
    rigid: bool = True

    def __post_init__(self):
        if self.id < 1:
            raise InvariantViolation("template: ids start at 1 (0 is reserved)")


@dataclass(frozen=True)
class ParsedScene:
    """Per-frame decomposition of a demonstration into editable parts.

    * ``environment``: static complete environment cloud (captured pre-task).
    * ``templates``: object templates keyed by id; non-rigid objects have an
      empty template cloud and per-frame tracked clouds instead.
    * ``object_poses``: per rigid object id, (H, 4, 4) pose array.
    * ``nonrigid_clouds``: per non-rigid object id, list of H tracked clouds.
    * ``arm``: per-frame arm cloud (not completed).
    """

    demo: Demonstration
    environment: PointCloud
    templates: dict[int, ObjectTemplate]
    object_poses: dict[int, np.ndarray]
    nonrigid_clouds: dict[int, list[PointCloud]]
    arm: tuple[PointCloud, ...] = field(default_factory=tuple)

    def __post_init__(self):
        h = self.demo.horizon
        for oid, tpl in self.templates.items():
            if oid != tpl.id:
                raise InvariantViolation(f"scene: template key {oid} != template id {tpl.id}")
            if tpl.rigid:
                poses = self.object_poses.get(oid)
                if poses is None or len(poses) != h:
                    raise InvariantViolation(f"scene: rigid object {oid} needs {h} poses")
            else:
                clouds = self.nonrigid_clouds.get(oid)
                if clouds is None or len(clouds) != h:
                    raise InvariantViolation(f"scene: non-rigid object {oid} needs {h} clouds")
        if self.arm and len(self.arm) != h:
            raise InvariantViolation("scene: arm clouds must cover every frame")
        object.__setattr__(self, "arm", tuple(self.arm))

    @property
    def object_ids(self) -> list[int]:
        return sorted(self.templates)

    @property
    def rigid_ids(self) -> list[int]:
        return sorted(i for i, t in self.templates.items() if t.rigid)

    @property
    def nonrigid_ids(self) -> list[int]:
        return sorted(i for i, t in self.templates.items() if not t.rigid)

    def object_cloud(self, oid: int, frame: int) -> PointCloud:
        """Complete cloud of object ``oid`` at 1-based ``frame``."""
        tpl = self.templates[oid]
        if tpl.rigid:
            pose = self.object_poses[oid][frame - 1]
            moved = transform_cloud(tpl.cloud, pose)
            return moved.with_labels(oid)
        return self.nonrigid_clouds[oid][frame - 1].with_labels(oid)


# ---------------------------------------------------------------------------
# Tracking bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrackingInput:
    """Externally produced tracking outputs consumed by scene parsing.

    ``object_poses`` maps rigid object id to an (H, 4, 4) array; an all-NaN
    pose marks a frame the tracker lost. ``nonrigid_clouds`` maps non-rigid
    ids to per-frame tracked clouds. ``environment`` is the pre-task
    observation taken before the robot entered the scene. Object templates
    travel with the bundle because completion needs them.
    """

    environment: PointCloud
    templates: dict[int, ObjectTemplate]
    object_poses: dict[int, np.ndarray]
    nonrigid_clouds: dict[int, list[PointCloud]]

    def __post_init__(self):
        poses = {}
        for oid, arr in self.object_poses.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim != 3 or arr.shape[1:] != (4, 4):
                raise InvariantViolation(f"tracking: poses for object {oid} must be (H, 4, 4)")
            poses[oid] = _freeze(arr)
        object.__setattr__(self, "object_poses", poses)

    def pose_at(self, oid: int, frame: int) -> Optional[np.ndarray]:
        """Pose of rigid object ``oid`` at 1-based ``frame``; None if lost."""
        arr = self.object_poses.get(oid)
        if arr is None or frame > len(arr):
            return None
        pose = arr[frame - 1]
        if not np.all(np.isfinite(pose)):
            return None
        return pose
