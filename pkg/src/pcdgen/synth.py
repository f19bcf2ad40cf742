"""Synthetic tabletop scenes with exact ground truth.

Procedurally builds demonstrations a real RGB-D rig could have captured:
primitive objects (boxes, cylinders) standing on a table plane, a scripted
end-effector with a crude arm proxy, and a pinhole camera looking at the
table. Surfaces are sampled on a jittered grid and "captured" by an exact
per-pixel z-buffer, which makes the output the reference for everything the
camera-aware processor is supposed to reproduce.

World frame: z up, table top at z = 0, table centered on the origin. The
camera looks at the table from a world position; observations, actions and
tracking poses are expressed in the camera frame like every real capture.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from shapely.affinity import rotate as shp_rotate
from shapely.affinity import translate as shp_translate
from shapely.geometry import Point as ShpPoint
from shapely.geometry import box as shp_box

from .annotations import MOTION, SKILL, AnnotationSet, Segment
from .camera import PixelSet, project
from .errors import SpecError
from .model import (
    LABEL_ARM,
    LABEL_ARM_RIGHT,
    Action,
    CameraModel,
    Demonstration,
    ObjectTemplate,
    PointCloud,
    TrackingInput,
    make_pose,
    pose_inverse,
    rotation_about_axis,
)

ARM_LABELS = (LABEL_ARM, LABEL_ARM_RIGHT)


# ---------------------------------------------------------------------------
# Scene specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrimitiveSpec:
    """One object: a box (sx, sy, sz) or cylinder (radius, height) standing
    on the table at (x, y) with a yaw about vertical."""

    id: int
    kind: str
    size: tuple
    color: tuple = (200, 80, 40)
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    rigid: bool = True

    def __post_init__(self):
        if self.kind not in ("box", "cylinder"):
            raise SpecError(f"unknown primitive kind {self.kind!r}")
        need = 3 if self.kind == "box" else 2
        if len(self.size) != need or any(s <= 0 for s in self.size):
            raise SpecError(f"primitive {self.id}: bad size {self.size}")

    def world_pose(self) -> np.ndarray:
        return make_pose(rotation_about_axis([0, 0, 1], self.yaw),
                         (self.x, self.y, 0.0))

    def footprint(self):
        if self.kind == "box":
            sx, sy, _ = self.size
            poly = shp_box(-sx / 2, -sy / 2, sx / 2, sy / 2)
            poly = shp_rotate(poly, np.degrees(self.yaw), origin=(0, 0))
        else:
            poly = ShpPoint(0, 0).buffer(self.size[0], quad_segs=32)
        return shp_translate(poly, self.x, self.y)


@dataclass(frozen=True)
class ScriptSegment:
    """A scheduled motion or skill span of the scripted demo.

    ``ee_goal`` holds one (x, y, z, yaw) per arm, None meaning "hold pose";
    the EE interpolates to it across the segment. ``grip`` gives (start, end)
    widths per arm; the change happens halfway through the segment. ``carry``
    lists the object ids riding each arm for the whole segment.
    """

    kind: str
    frames: int
    ee_goal: tuple = (None,)
    grip: tuple = ((0.08, 0.08),)
    target: frozenset = frozenset()
    hands: tuple = ((),)
    carry: tuple = ((),)

    def __post_init__(self):
        if self.kind not in (MOTION, SKILL):
            raise SpecError(f"unknown segment kind {self.kind!r}")
        if self.frames < 1:
            raise SpecError("script segments need at least one frame")
        object.__setattr__(self, "target", frozenset(self.target))
        object.__setattr__(self, "hands",
                           tuple(frozenset(h) for h in self.hands))
        object.__setattr__(self, "carry",
                           tuple(frozenset(c) for c in self.carry))


@dataclass(frozen=True)
class SceneSpec:
    # default vantage is fairly overhead: with low-res intrinsics an oblique
    # view gives per-pixel depth steps larger than typical z-buffer margins
    camera: CameraModel
    camera_pos: tuple = (0.0, -0.25, 0.8)
    camera_look: tuple = (0.0, 0.0, 0.0)
    table: tuple = (0.9, 0.7)
    table_color: tuple = (110, 110, 115)
    primitives: tuple = ()
    script: tuple = ()
    ee_start: tuple = ((0.0, -0.25, 0.25, 0.0),)
    grip_start: tuple = (0.08,)
    spacing: float = 0.004
    arm_radius: float = 0.012
    arm_length: float = 0.09

    def __post_init__(self):
        ids = [p.id for p in self.primitives]
        if len(set(ids)) != len(ids) or any(i < 1 for i in ids):
            raise SpecError("primitive ids must be unique and >= 1")
        for a in range(len(self.primitives)):
            for b in range(a + 1, len(self.primitives)):
                pa, pb = self.primitives[a], self.primitives[b]
                if pa.footprint().intersects(pb.footprint()):
                    raise SpecError(
                        f"primitives {pa.id} and {pb.id} overlap on the table")

    @property
    def object_count(self) -> int:
        return len(self.primitives)

    @property
    def arm_count(self) -> int:
        return len(self.ee_start)

    def view_matrix(self) -> np.ndarray:
        """World -> camera transform for a look-at pose, +Z forward, +Y down."""
        eye = np.asarray(self.camera_pos, dtype=np.float64)
        fwd = np.asarray(self.camera_look, dtype=np.float64) - eye
        n = np.linalg.norm(fwd)
        if n < 1e-9:
            raise SpecError("camera position and look-at point coincide")
        z = fwd / n
        up = np.array([0.0, 0.0, 1.0])
        if abs(z @ up) > 1.0 - 1e-6:
            up = np.array([0.0, 1.0, 0.0])
        x = np.cross(z, up)
        x = x / np.linalg.norm(x)
        y = np.cross(z, x)
        cam_to_world = make_pose(np.stack([x, y, z], axis=1), eye)
        return pose_inverse(cam_to_world)


def ee_pose(x: float, y: float, z: float, yaw: float = 0.0) -> np.ndarray:
    """World EE pose with the approach axis pointing straight down."""
    flip = rotation_about_axis([1, 0, 0], np.pi)
    return make_pose(rotation_about_axis([0, 0, 1], yaw) @ flip, (x, y, z))


# ---------------------------------------------------------------------------
# Surface sampling
# ---------------------------------------------------------------------------

def _grid(lo: float, hi: float, spacing: float) -> np.ndarray:
    n = max(int(np.ceil((hi - lo) / spacing)), 1)
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def _jitter(rng: np.random.Generator, pts: np.ndarray, axes, amount: float):
    for ax in axes:
        pts[:, ax] += rng.uniform(-amount, amount, len(pts))


def sample_box(size, spacing: float, rng: np.random.Generator) -> np.ndarray:
    sx, sy, sz = size
    faces = []
    xs, ys, zs = (_grid(-sx / 2, sx / 2, spacing), _grid(-sy / 2, sy / 2, spacing),
                  _grid(0.0, sz, spacing))
    j = spacing / 4
    for z in (0.0, sz):  # bottom, top
        g = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
        f = np.column_stack([g, np.full(len(g), z)])
        _jitter(rng, f, (0, 1), j)
        faces.append(f)
    for x in (-sx / 2, sx / 2):
        g = np.stack(np.meshgrid(ys, zs), axis=-1).reshape(-1, 2)
        f = np.column_stack([np.full(len(g), x), g])
        _jitter(rng, f, (1, 2), j)
        faces.append(f)
    for y in (-sy / 2, sy / 2):
        g = np.stack(np.meshgrid(xs, zs), axis=-1).reshape(-1, 2)
        f = np.column_stack([g[:, 0], np.full(len(g), y), g[:, 1]])
        _jitter(rng, f, (0, 2), j)
        faces.append(f)
    return np.concatenate(faces)


def sample_cylinder(size, spacing: float, rng: np.random.Generator) -> np.ndarray:
    radius, height = size
    n_ang = max(int(np.ceil(2 * np.pi * radius / spacing)), 8)
    ang = (np.arange(n_ang) + 0.5) * 2 * np.pi / n_ang
    zs = _grid(0.0, height, spacing)
    a, z = np.meshgrid(ang, zs)
    a = a + rng.uniform(-0.5, 0.5, a.shape) * 2 * np.pi / n_ang / 2
    side = np.stack([radius * np.cos(a).ravel(), radius * np.sin(a).ravel(),
                     z.ravel() + rng.uniform(-spacing / 4, spacing / 4, a.size)],
                    axis=1)
    side[:, 2] = np.clip(side[:, 2], 0.0, height)
    caps = []
    g = _grid(-radius, radius, spacing)
    gx, gy = np.meshgrid(g, g)
    disc = np.stack([gx.ravel(), gy.ravel()], axis=1)
    disc = disc + rng.uniform(-spacing / 4, spacing / 4, disc.shape)
    disc = disc[np.linalg.norm(disc, axis=1) <= radius]
    for z0 in (0.0, height):
        caps.append(np.column_stack([disc, np.full(len(disc), z0)]))
    return np.concatenate([side] + caps)


def sample_primitive(prim: PrimitiveSpec, spacing: float,
                     rng: np.random.Generator) -> PointCloud:
    """Canonical-frame surface cloud, labeled and colored."""
    if prim.kind == "box":
        pts = sample_box(prim.size, spacing, rng)
    else:
        pts = sample_cylinder(prim.size, spacing, rng)
    colors = np.tile(np.asarray(prim.color, dtype=np.uint8), (len(pts), 1))
    labels = np.full(len(pts), prim.id, dtype=np.uint16)
    return PointCloud(pts, colors, labels)


def sample_table(spec: SceneSpec, rng: np.random.Generator) -> PointCloud:
    sx, sy = spec.table
    g = np.stack(np.meshgrid(_grid(-sx / 2, sx / 2, spec.spacing),
                             _grid(-sy / 2, sy / 2, spec.spacing)),
                 axis=-1).reshape(-1, 2)
    pts = np.column_stack([g, np.zeros(len(g))])
    _jitter(rng, pts, (0, 1), spec.spacing / 4)
    colors = np.tile(np.asarray(spec.table_color, dtype=np.uint8), (len(pts), 1))
    return PointCloud(pts, colors, np.zeros(len(pts), dtype=np.uint16))


def sample_arm_proxy(spec: SceneSpec, arm_index: int,
                     rng: np.random.Generator) -> PointCloud:
    """Wrist cylinder behind the EE tip, in the EE's local frame.

    The canonical cylinder sits along -Z ending at the origin; posed with the
    EE it trails the approach axis like a stubby forearm.
    """
    pts = sample_cylinder((spec.arm_radius, spec.arm_length), spec.spacing, rng)
    pts = pts @ np.diag([1.0, 1.0, -1.0])  # extend along -Z (behind the tip)
    colors = np.tile(np.array([40, 40, 45], dtype=np.uint8), (len(pts), 1))
    labels = np.full(len(pts), ARM_LABELS[arm_index], dtype=np.uint16)
    return PointCloud(pts, colors, labels)


# ---------------------------------------------------------------------------
# Reference renderer
# ---------------------------------------------------------------------------

def render_capture(world_cloud: PointCloud, view: np.ndarray,
                   cam: CameraModel) -> tuple[PointCloud, np.ndarray]:
    """What the camera sees: one winning sample point per covered pixel.

    Returns the camera-frame cloud and the (H, W) depth image (0 = no hit).
    ars are chosen by exact per-pixel minimum depth; ties resolve to the
    lowest sample index, so rendering is deterministic.
    """
    from .model import transform_cloud

    cam_cloud = transform_cloud(world_cloud, view)
    pix = project(cam_cloud, cam)
    inside = ((pix.u >= 0) & (pix.u < cam.width)
              & (pix.v >= 0) & (pix.v < cam.height)
              & (pix.d >= cam.depth_min) & (pix.d <= cam.depth_max))
    pix = pix.select(inside)
    depth = np.zeros((cam.height, cam.width))
    if len(pix) == 0:
        return PointCloud(np.zeros((0, 3)),
                          np.zeros((0, 3), np.uint8) if world_cloud.colors is not None else None,
                          np.zeros(0, np.uint16) if world_cloud.labels is not None else None), depth
    cu, cv = pix.cells()
    flat = cv * cam.width + cu
    order = np.lexsort((pix.src, pix.d, flat))
    lead = np.ones(len(order), dtype=bool)
    lead[1:] = flat[order][1:] != flat[order][:-1]
    winners = pix.src[order][lead]
    depth.flat[flat[order][lead]] = pix.d[order][lead]
    mask = np.zeros(len(cam_cloud), dtype=bool)
    mask[winners] = True
    return cam_cloud.select(mask), depth


def render_reference(spec: SceneSpec, object_poses_world: dict,
                     ee_world: Optional[list] = None,
                     seed: int = 0) -> tuple[PointCloud, np.ndarray]:
    """Reference capture of the scene at an arbitrary configuration.

    ``object_poses_world`` maps object id to world pose; ``ee_world`` holds
    per-arm EE poses (omit to leave the arm out).
    """
    rng_tpl, rng_tab, rng_arm = _sampling_streams(spec, seed)
    parts = [sample_table(spec, rng_tab)]
    for prim in spec.primitives:
        tpl = sample_primitive(prim, spec.spacing, rng_tpl[prim.id])
        from .model import transform_cloud
        parts.append(transform_cloud(tpl, object_poses_world[prim.id]))
    if ee_world:
        for a, pose in enumerate(ee_world):
            from .model import transform_cloud
            proxy = sample_arm_proxy(spec, a, rng_arm[a])
            parts.append(transform_cloud(proxy, pose))
    return render_capture(PointCloud.concat(parts), spec.view_matrix(),
                          spec.camera)


def _sampling_streams(spec: SceneSpec, seed: int):
    """Deterministic per-part RNG streams so identical parts sample identically."""
    root = np.random.SeedSequence(seed)
    tpl = {p.id: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, p.id)))
           for p in spec.primitives}
    tab = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    arm = [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3, a)))
           for a in range(spec.arm_count)]
    del root
    return tpl, tab, arm


# ---------------------------------------------------------------------------
# Scripted demonstration
# ---------------------------------------------------------------------------

def _expand_script(spec: SceneSpec):
    """Per-frame EE poses, grips, object world poses and carry sets."""
    arms = spec.arm_count
    ee = [ee_pose(*spec.ee_start[a]) for a in range(arms)]
    grips = list(spec.grip_start)
    obj = {p.id: p.world_pose() for p in spec.primitives}

    frames = []  # (ee list, grip list, {id: world pose}, carry per arm)
    segments = []
    t = 1
    for seg in spec.script:
        goals = []
        for a in range(arms):
            g = seg.ee_goal[a] if a < len(seg.ee_goal) else None
            goals.append(ee[a] if g is None else ee_pose(*g))
        seg_start = t
        start_ee = [e.copy() for e in ee]
        start_obj = {k: v.copy() for k, v in obj.items()}
        for j in range(1, seg.frames + 1):
            tau = j / seg.frames
            cur_ee = []
            for a in range(arms):
                cur = _lerp_pose(start_ee[a], goals[a], tau)
                cur_ee.append(cur)
            cur_grip = []
            for a in range(arms):
                gs, ge = seg.grip[a] if a < len(seg.grip) else seg.grip[-1]
                cur_grip.append(gs if j <= seg.frames // 2 or gs == ge else ge)
            for a in range(arms):
                carry = seg.carry[a] if a < len(seg.carry) else frozenset()
                delta = cur_ee[a] @ pose_inverse(start_ee[a])
                for oid in carry:
                    obj[oid] = delta @ start_obj[oid]
            cur_obj = {k: v.copy() for k, v in obj.items()}
            frames.append((cur_ee, cur_grip, cur_obj,
                           tuple(seg.carry[a] if a < len(seg.carry) else frozenset()
                                 for a in range(arms))))
            t += 1
        ee = [frames[-1][0][a].copy() for a in range(arms)]
        grips = list(frames[-1][1])
        if seg.kind == SKILL:
            segments.append(Segment(kind=SKILL, start_frame=seg_start,
                                    end_frame=t - 1, target=seg.target,
                                    hands=tuple(seg.hands[a] if a < len(seg.hands)
                                                else frozenset()
                                                for a in range(arms))))
        else:
            segments.append(Segment(kind=MOTION, start_frame=seg_start,
                                    end_frame=t - 1))
    return frames, segments


def _lerp_pose(a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    if tau >= 1.0:
        return b.copy()
    from scipy.spatial.transform import Rotation, Slerp

    pos = (1 - tau) * a[:3, 3] + tau * b[:3, 3]
    rel = a[:3, :3].T @ b[:3, :3]
    if np.abs(rel - np.eye(3)).max() < 1e-12:
        rot = a[:3, :3]
    else:
        rot = Slerp([0.0, 1.0], Rotation.from_matrix([a[:3, :3], b[:3, :3]]))(
            tau).as_matrix()
    return make_pose(rot, pos)


def make_scene(spec: SceneSpec, seed: int = 0):
    """Scripted synthetic capture: demo, tracking bundle, annotation, depths.

    Deterministic in (spec, seed). Raises SpecError for overlapping initial
    placements (checked at spec construction) or an unusable script.
    """
    if not spec.script:
        raise SpecError("scene script is empty")
    view = spec.view_matrix()
    rng_tpl, rng_tab, rng_arm = _sampling_streams(spec, seed)

    templates = {p.id: sample_primitive(p, spec.spacing, rng_tpl[p.id])
                 for p in spec.primitives}
    table = sample_table(spec, rng_tab)
    arm_proxies = [sample_arm_proxy(spec, a, rng_arm[a])
                   for a in range(spec.arm_count)]

    frames, segments = _expand_script(spec)
    ann = AnnotationSet(
        mask_files=tuple(["mask_gripper.png"]
                         + [f"mask_{p.id}.png" for p in spec.primitives]),
        arm_count=spec.arm_count, segments=tuple(segments))

    from .model import transform_cloud

    demo_frames = []
    depth_images = []
    cam_poses = {p.id: [] for p in spec.primitives}
    nonrigid_vis = {p.id: [] for p in spec.primitives if not p.rigid}
    for ee_w, grips, obj_w, _carry in frames:
        parts = [table]
        for p in spec.primitives:
            parts.append(transform_cloud(templates[p.id], obj_w[p.id]))
        for a, pose in enumerate(ee_w):
            parts.append(transform_cloud(arm_proxies[a], pose))
        obs, depth = render_capture(PointCloud.concat(parts), view, spec.camera)
        depth_images.append(depth)
        ee_cam = [view @ e for e in ee_w]
        demo_frames.append((obs, Action(tuple(ee_cam), tuple(grips))))
        for p in spec.primitives:
            cam_poses[p.id].append(view @ obj_w[p.id])
        for oid in nonrigid_vis:
            nonrigid_vis[oid].append(obs.select(obs.labels == oid))

    demo = Demonstration(camera=spec.camera, frames=tuple(demo_frames))
    # the pre-task environment is a complete dense cloud (fused offline in a
    # real rig), not a single-view capture: downstream repositioning needs
    # full coverage, not one point per source pixel
    env_cloud = transform_cloud(table, view)
    tracking = TrackingInput(
        environment=env_cloud,
        templates={p.id: ObjectTemplate(
            id=p.id,
            cloud=templates[p.id] if p.rigid else PointCloud(np.zeros((0, 3))),
            rigid=p.rigid) for p in spec.primitives},
        object_poses={p.id: np.stack(cam_poses[p.id])
                      for p in spec.primitives if p.rigid},
        nonrigid_clouds=nonrigid_vis)
    return demo, tracking, ann, depth_images


# ---------------------------------------------------------------------------
# Ready-made scenes
# ---------------------------------------------------------------------------

_DEFAULT_CAMERA = CameraModel(fx=130.0, fy=130.0, cx=80.0, cy=60.0,
                              width=160, height=120,
                              depth_min=0.05, depth_max=3.0)


def press_scene(camera: Optional[CameraModel] = None,
                spacing: float = 0.0025) -> SceneSpec:
    """One box on the table; approach then press its top. Nothing moves."""
    return SceneSpec(
        camera=camera or _DEFAULT_CAMERA,
        spacing=spacing,
        primitives=(PrimitiveSpec(id=1, kind="box", size=(0.05, 0.05, 0.04),
                                  color=(200, 60, 40), x=0.04, y=0.03,
                                  yaw=0.3),),
        ee_start=((-0.15, -0.20, 0.22, 0.0),),
        script=(
            ScriptSegment(kind=MOTION, frames=6,
                          ee_goal=((0.04, 0.03, 0.12, 0.3),)),
            ScriptSegment(kind=SKILL, frames=5, target={1},
                          ee_goal=((0.04, 0.03, 0.055, 0.3),)),
        ))


def bridge_scene(camera: Optional[CameraModel] = None,
                 spacing: float = 0.0025) -> SceneSpec:
    """Two piers and a deck, each picked up and placed by a single arm.

    Each pick starts ungrasped, so the moved object is a skill target (hands
    annotate only objects already held when a skill begins). The deck skill
    interacts with all three, which pins the two earlier placements.
    """
    open_g, closed = 0.08, 0.03
    return SceneSpec(
        camera=camera or _DEFAULT_CAMERA,
        spacing=spacing,
        primitives=(
            PrimitiveSpec(id=1, kind="box", size=(0.04, 0.04, 0.05),
                          color=(200, 60, 40), x=-0.16, y=-0.10),
            PrimitiveSpec(id=2, kind="box", size=(0.04, 0.04, 0.05),
                          color=(60, 180, 60), x=0.16, y=-0.10),
            PrimitiveSpec(id=3, kind="box", size=(0.18, 0.035, 0.02),
                          color=(70, 90, 210), x=0.0, y=0.14),
        ),
        ee_start=((-0.16, -0.25, 0.20, 0.0),),
        script=(
            ScriptSegment(kind=MOTION, frames=5,
                          ee_goal=((-0.16, -0.10, 0.06, 0.0),),
                          grip=((open_g, open_g),)),
            ScriptSegment(kind=SKILL, frames=6, target={1}, carry=({1},),
                          ee_goal=((-0.05, 0.02, 0.06, 0.0),),
                          grip=((open_g, closed),)),
            ScriptSegment(kind=MOTION, frames=5,
                          ee_goal=((0.16, -0.10, 0.06, 0.0),),
                          grip=((open_g, open_g),)),
            ScriptSegment(kind=SKILL, frames=6, target={2}, carry=({2},),
                          ee_goal=((0.05, 0.02, 0.06, 0.0),),
                          grip=((open_g, closed),)),
            ScriptSegment(kind=MOTION, frames=5,
                          ee_goal=((0.0, 0.14, 0.04, 0.0),),
                          grip=((open_g, open_g),)),
            ScriptSegment(kind=SKILL, frames=7, target={1, 2, 3},
                          carry=({3},),
                          ee_goal=((0.0, 0.02, 0.075, 0.0),),
                          grip=((open_g, closed),)),
        ))


def bimanual_scene(camera: Optional[CameraModel] = None,
                   spacing: float = 0.0025) -> SceneSpec:
    """Two arms jointly lift one tray: grasp both ends, move it together.

    The grasp skill targets the tray (nothing is held when it starts); the
    final skill lists the tray in both hands, so the carry motion between
    them must keep the inter-arm relative pose fixed.
    """
    open_g, closed = 0.08, 0.025
    hold = ((closed, closed), (closed, closed))
    return SceneSpec(
        camera=camera or _DEFAULT_CAMERA,
        spacing=spacing,
        primitives=(PrimitiveSpec(id=1, kind="box", size=(0.20, 0.06, 0.03),
                                  color=(210, 170, 40), x=0.0, y=0.0),),
        ee_start=((-0.20, -0.20, 0.18, 0.0), (0.20, -0.20, 0.18, 0.0)),
        grip_start=(open_g, open_g),
        script=(
            ScriptSegment(kind=MOTION, frames=5,
                          ee_goal=((-0.085, 0.0, 0.045, 0.0),
                                   (0.085, 0.0, 0.045, 0.0)),
                          grip=((open_g, open_g), (open_g, open_g))),
            ScriptSegment(kind=SKILL, frames=4, target={1},
                          ee_goal=(None, None),
                          grip=((open_g, closed), (open_g, closed))),
            ScriptSegment(kind=MOTION, frames=6,
                          ee_goal=((-0.145, 0.10, 0.085, 0.0),
                                   (0.025, 0.10, 0.085, 0.0)),
                          grip=hold, carry=({1}, ())),
            ScriptSegment(kind=SKILL, frames=4, hands=({1}, {1}),
                          ee_goal=((-0.145, 0.10, 0.04, 0.0),
                                   (0.025, 0.10, 0.04, 0.0)),
                          grip=((closed, open_g), (closed, open_g)),
                          carry=({1}, ())),
        ))


PRESETS = {"press": press_scene, "bridge": bridge_scene,
           "bimanual": bimanual_scene}


# ---------------------------------------------------------------------------
# Plain-dict serialization (backs the YAML scene files)
# ---------------------------------------------------------------------------

def spec_from_dict(doc: dict) -> SceneSpec:
    """Build a SceneSpec from plain data. Angles arrive in degrees."""
    try:
        camera = CameraModel.from_dict(doc["camera"])
        prims = tuple(
            PrimitiveSpec(id=int(p["id"]), kind=p["kind"],
                          size=tuple(float(s) for s in p["size"]),
                          color=tuple(int(c) for c in p.get("color", (200, 80, 40))),
                          x=float(p.get("x", 0.0)), y=float(p.get("y", 0.0)),
                          yaw=np.radians(float(p.get("yaw", 0.0))),
                          rigid=bool(p.get("rigid", True)))
            for p in doc.get("primitives", []))
        script = tuple(_segment_from_dict(s) for s in doc.get("script", []))
        kw = {}
        for key in ("camera_pos", "camera_look", "table", "table_color",
                    "grip_start"):
            if key in doc:
                kw[key] = tuple(doc[key])
        for key in ("spacing", "arm_radius", "arm_length"):
            if key in doc:
                kw[key] = float(doc[key])
        if "ee_start" in doc:
            kw["ee_start"] = tuple(_ee_from_list(e) for e in doc["ee_start"])
        return SceneSpec(camera=camera, primitives=prims, script=script, **kw)
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad scene description: {exc}") from exc


def _ee_from_list(e) -> tuple:
    x, y, z, yaw = (float(v) for v in e)
    return (x, y, z, float(np.radians(yaw)))


def _segment_from_dict(s: dict) -> ScriptSegment:
    kw = dict(kind=s["kind"], frames=int(s["frames"]))
    if "ee_goal" in s:
        kw["ee_goal"] = tuple(None if g is None else _ee_from_list(g)
                              for g in s["ee_goal"])
    if "grip" in s:
        kw["grip"] = tuple(tuple(float(v) for v in g) for g in s["grip"])
    if "target" in s:
        kw["target"] = frozenset(int(i) for i in (s["target"] or ()))
    if "hands" in s:
        kw["hands"] = tuple(frozenset(int(i) for i in (h or ()))
                            for h in s["hands"])
    if "carry" in s:
        kw["carry"] = tuple(frozenset(int(i) for i in (c or ()))
                            for c in s["carry"])
    return ScriptSegment(**kw)
