"""Scene parsing: raw demonstration + tracker outputs -> ParsedScene.

Rigid objects are completed by posing their scanned template; non-rigid
objects keep their tracked per-frame clouds. Whatever the environment and
objects fail to explain is the robot arm (set difference with a distance
tolerance).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvariantViolation, MissingPose, NonRigidTemplate
from .model import (
    LABEL_ARM,
    Demonstration,
    ObjectTemplate,
    ParsedScene,
    PointCloud,
    TrackingInput,
    transform_cloud,
    validate_pose,
)

DEFAULT_EPS = 0.005  # typical RGB-D noise floor


def complete_object(template: ObjectTemplate, pose: np.ndarray) -> PointCloud:
    """Full object cloud at one frame: posed template, labeled with its id."""
    if not template.rigid:
        raise NonRigidTemplate(f"object {template.id} has no rigid template")
    posed = transform_cloud(template.cloud, pose)
    return posed.with_labels(template.id)


def extract_arm(raw: PointCloud, env: PointCloud,
                objects: list[PointCloud], eps: float) -> PointCloud:
    """Points of ``raw`` farther than ``eps`` from everything already explained.

    Order-stable subset of raw; colors and labels carry through.
    """
    if eps <= 0:
        raise InvariantViolation("extract_arm: eps must be positive")
    ref = [env.points] + [o.points for o in objects]
    ref = np.concatenate([r for r in ref if len(r)]) if any(len(r) for r in ref) else None
    if ref is None or len(raw) == 0:
        return raw
    dist, _ = cKDTree(ref).query(raw.points, k=1)
    return raw.select(dist > eps)


def parse_scene(demo: Demonstration, tracking: TrackingInput,
                eps: float = DEFAULT_EPS) -> ParsedScene:
    """Decompose every frame into environment, complete objects and arm."""
    h = demo.horizon
    env = tracking.environment
    templates = dict(tracking.templates)

    object_poses: dict[int, np.ndarray] = {}
    for oid in sorted(tracking.object_poses):
        poses = np.empty((h, 4, 4))
        for t in range(1, h + 1):
            pose = tracking.pose_at(oid, t)
            if pose is None:
                raise MissingPose(t, oid)
            validate_pose(pose, context=f"object {oid} pose at frame {t}")
            poses[t - 1] = pose
        object_poses[oid] = poses

    nonrigid: dict[int, list[PointCloud]] = {}
    for oid, clouds in tracking.nonrigid_clouds.items():
        if len(clouds) < h:
            raise MissingPose(len(clouds) + 1, oid)
        nonrigid[oid] = [c.with_labels(oid) for c in clouds[:h]]

    arm = []
    for t in range(1, h + 1):
        raw = demo.frames[t - 1][0]
        objects = [complete_object(templates[oid], object_poses[oid][t - 1])
                   for oid in object_poses]
        objects += [nonrigid[oid][t - 1] for oid in sorted(nonrigid)]
        arm.append(extract_arm(raw, env, objects, eps).with_labels(LABEL_ARM))

    return ParsedScene(demo=demo, environment=env, templates=templates,
                       object_poses=object_poses, nonrigid_clouds=nonrigid,
                       arm=tuple(arm))
