"""Free-space EE trajectory generation between consecutive skills.

Paths follow a lift-transit-descend polyline: rise from the start pose to a
clearance height above the table, move in-plane, descend onto the goal. With
``lift = 0`` the path is the straight segment. Orientations follow the
geodesic between the endpoint rotations at constant rate; gripper states are
resampled from the source motion segment by nearest normalized time, which
preserves the order of open/close transitions.

The number of intervals is ``max(ceil(arclen / step), ceil(angle / rot_step),
1)``, so translation and rotation rates are both bounded. Endpoints are
bitwise copies of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .errors import PlanError
from .model import Action, rotation_angle, validate_pose

DEFAULT_STEP = 0.01
DEFAULT_LIFT = 0.05
DEFAULT_ROT_STEP = np.radians(10.0)
CAMERA_UP = (0.0, 0.0, -1.0)  # table normal for a forward-looking camera


@dataclass(frozen=True)
class ArmTrajectory:
    """Pose sequence plus gripper widths for a single arm."""

    poses: np.ndarray  # (L, 4, 4)
    grips: tuple

    def __post_init__(self):
        if len(self.poses) != len(self.grips):
            raise PlanError("trajectory: pose/grip length mismatch")

    def __len__(self) -> int:
        return len(self.poses)

    def actions(self) -> list:
        return [Action((p,), (g,)) for p, g in zip(self.poses, self.grips)]


def resample_grips(source_grips, length: int) -> tuple:
    """Nearest-normalized-time resampling of a grip sequence to ``length``."""
    src = list(source_grips)
    if not src:
        raise PlanError("motion segment has no gripper states")
    if length == 1:
        return (src[0],)
    idx = np.rint(np.arange(length) / (length - 1) * (len(src) - 1)).astype(int)
    return tuple(src[i] for i in idx)


def _polyline(start_pos, goal_pos, lift: float, up) -> np.ndarray:
    if lift <= 0:
        return np.stack([start_pos, goal_pos])
    up = np.asarray(up, dtype=np.float64)
    up = up / np.linalg.norm(up)
    # rise to one apex height above the higher endpoint, transit, descend
    h0, h1 = start_pos @ up, goal_pos @ up
    apex = max(h0, h1) + lift
    return np.stack([start_pos,
                     start_pos + (apex - h0) * up,
                     goal_pos + (apex - h1) * up,
                     goal_pos])


def _sample_polyline(verts: np.ndarray, fractions: np.ndarray) -> np.ndarray:
    deltas = np.diff(verts, axis=0)
    seg = np.linalg.norm(deltas, axis=1)
    total = float(seg.sum())
    if total == 0.0:
        return np.repeat(verts[:1], len(fractions), axis=0)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = fractions * total
    out = np.empty((len(fractions), 3))
    for i, si in enumerate(s):
        j = min(int(np.searchsorted(cum, si, side="right")) - 1, len(seg) - 1)
        t = 0.0 if seg[j] == 0 else (si - cum[j]) / seg[j]
        out[i] = verts[j] + t * deltas[j]
    return out


def plan_motion(start: np.ndarray, goal: np.ndarray, source_grips,
                step: float = DEFAULT_STEP, lift: float = DEFAULT_LIFT,
                up=CAMERA_UP, rot_step: float = DEFAULT_ROT_STEP) -> ArmTrajectory:
    """Trajectory from ``start`` to ``goal``, both included exactly."""
    start = validate_pose(start, context="motion start")
    goal = validate_pose(goal, context="motion goal")
    if step <= 0:
        raise PlanError(f"step must be positive, got {step}")
    if np.array_equal(start, goal):
        return ArmTrajectory(poses=np.stack([start, goal]),
                             grips=resample_grips(source_grips, 2))

    verts = _polyline(start[:3, 3], goal[:3, 3], lift, up)
    arclen = float(np.linalg.norm(np.diff(verts, axis=0), axis=1).sum())
    angle = rotation_angle(start[:3, :3].T @ goal[:3, :3])
    intervals = max(int(np.ceil(arclen / step)),
                    int(np.ceil(angle / rot_step)) if rot_step > 0 else 0,
                    1)

    fractions = np.arange(intervals + 1) / intervals
    positions = _sample_polyline(verts, fractions)
    if angle > 1e-12:
        slerp = Slerp([0.0, 1.0],
                      Rotation.from_matrix([start[:3, :3], goal[:3, :3]]))
        rotations = slerp(fractions).as_matrix()
    else:
        rotations = np.repeat(start[None, :3, :3], intervals + 1, axis=0)

    poses = np.empty((intervals + 1, 4, 4))
    poses[:] = np.eye(4)
    poses[:, :3, :3] = rotations
    poses[:, :3, 3] = positions
    poses[0] = start
    poses[-1] = goal
    return ArmTrajectory(poses=poses, grips=resample_grips(source_grips,
                                                           intervals + 1))
