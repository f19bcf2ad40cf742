"""Demonstration augmentation: relocate skill groups, replan the motions.

A parsed demonstration is rewritten into many spatially remixed variants.
Skill segments are replayed rigidly under sampled in-plane transforms, the
free-space motions between them are replanned from scratch, and the whole
result is optionally shifted by an environment transform. Which skills may
move is decided by backtracking over the annotation: once a later skill
interacts with an object, every earlier skill touching it is pinned.

All transforms live in the camera frame and act by left multiplication:
a cloud moves as p -> T p, a pose as A -> T A.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from shapely.geometry import MultiPoint
from shapely.geometry import box as shp_box

from .annotations import (
    AnnotationSet,
    Segment,
    motions,
    parse_annotation,
    skills,
    write_annotation,
)
from .camera import ProcessorConfig, coverage_mask, largest_full_rect, process_frame
from .container import load_parsed_scene, save_demonstration
from .errors import ConstraintViolation, PlanError, SamplingExhausted
from .model import (
    LABEL_ARM,
    LABEL_ARM_RIGHT,
    Action,
    Demonstration,
    ParsedScene,
    PointCloud,
    pose_inverse,
    transform_cloud,
)
from .motion import (
    DEFAULT_LIFT,
    DEFAULT_ROT_STEP,
    DEFAULT_STEP,
    ArmTrajectory,
    plan_motion,
    resample_grips,
)
from .parsing import complete_object
from .plane import PlaneFrame, TablePlane, fit_table_plane, in_plane_transform

_IDENTITY = np.eye(4)
_HULL_POINT_CAP = 256


# ---------------------------------------------------------------------------
# Which skills may move
# ---------------------------------------------------------------------------

def update_fixed_set(fixed: frozenset, target: frozenset,
                     hand: frozenset) -> frozenset:
    """Pinned set for the preceding skill: gains targets, loses hand objects."""
    return frozenset((fixed | target) - hand)


def augmentable_flags(ann: AnnotationSet) -> tuple[tuple, tuple]:
    """Per-skill (may-move, pinned-set) pairs, derived back to front.

    A skill may move iff its group (targets plus hands) is non-empty and
    disjoint from the set pinned by later skills.
    """
    slist = skills(ann)
    flags = [False] * len(slist)
    pinned = [frozenset()] * len(slist)
    fixed = frozenset()
    for i in range(len(slist) - 1, -1, -1):
        seg = slist[i]
        pinned[i] = fixed
        group = seg.group
        flags[i] = bool(group) and not (group & fixed)
        fixed = update_fixed_set(fixed, seg.target, seg.hand_union)
    return tuple(flags), tuple(pinned)


# ---------------------------------------------------------------------------
# Sampling configuration and plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    """In-plane placement sampling. Lengths in meters, angles in radians.

    ``workspace`` bounds the table-frame (u, v) rectangle placements must
    stay inside. ``grid`` switches the primary skill's destination from
    uniform sampling to the centers of an (nu, nv) grid over the workspace.
    """

    workspace: tuple = ((-0.25, 0.25), (-0.18, 0.18))
    rotation_range: float = np.pi
    env_translation: float = 0.05
    env_rotation: float = np.radians(10.0)
    perturb_translation: float = 0.015
    perturb_rotation: float = np.radians(20.0)
    clearance: float = 0.02
    max_attempts: int = 1000
    grid: Optional[tuple] = None


@dataclass(frozen=True)
class GeneratorConfig:
    """Dataset layout: R environment configs x N placements x P perturbations."""

    env_count: int = 3
    object_count: int = 16
    perturb_count: int = 3
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    step: float = DEFAULT_STEP
    lift: float = DEFAULT_LIFT
    rot_step: float = DEFAULT_ROT_STEP
    camera_aware: bool = True
    processor: ProcessorConfig = field(default_factory=ProcessorConfig)

    @property
    def total(self) -> int:
        return self.env_count * self.object_count * self.perturb_count

    def indices(self, index: int) -> tuple[int, int, int]:
        """1-based demo index -> (r, n, p)."""
        if not 1 <= index <= self.total:
            raise PlanError(f"demo index {index} outside 1..{self.total}")
        d = index - 1
        per_env = self.object_count * self.perturb_count
        return d // per_env, (d // self.perturb_count) % self.object_count, d % self.perturb_count


def generator_config_to_dict(cfg: GeneratorConfig) -> dict:
    """Plain-data form of a generator config; angles in degrees."""
    s = cfg.sampler
    p = cfg.processor
    return {
        "env_count": cfg.env_count,
        "object_count": cfg.object_count,
        "perturb_count": cfg.perturb_count,
        "step": cfg.step,
        "lift": cfg.lift,
        "rot_step_deg": float(np.degrees(cfg.rot_step)),
        "camera_aware": cfg.camera_aware,
        "sampler": {
            "workspace": [list(b) for b in s.workspace],
            "rotation_deg": float(np.degrees(s.rotation_range)),
            "env_translation": s.env_translation,
            "env_rotation_deg": float(np.degrees(s.env_rotation)),
            "perturb_translation": s.perturb_translation,
            "perturb_rotation_deg": float(np.degrees(s.perturb_rotation)),
            "clearance": s.clearance,
            "max_attempts": s.max_attempts,
            "grid": list(s.grid) if s.grid is not None else None,
        },
        "processor": {
            "patch_radius": p.patch_radius,
            "fill_mode": p.fill_mode,
            "depth_margin": p.depth_margin,
            "metric": p.metric,
            "min_shrink": p.min_shrink,
        },
    }


def generator_config_from_dict(doc: dict) -> GeneratorConfig:
    """Inverse of generator_config_to_dict; unknown keys are rejected."""
    doc = dict(doc)
    sdoc = dict(doc.pop("sampler", {}))
    pdoc = dict(doc.pop("processor", {}))
    base_s = SamplerConfig()
    base_g = GeneratorConfig()
    base_p = ProcessorConfig()
    try:
        sampler = SamplerConfig(
            workspace=tuple(tuple(float(x) for x in b)
                            for b in sdoc.pop("workspace", base_s.workspace)),
            rotation_range=np.radians(float(sdoc.pop(
                "rotation_deg", np.degrees(base_s.rotation_range)))),
            env_translation=float(sdoc.pop("env_translation",
                                           base_s.env_translation)),
            env_rotation=np.radians(float(sdoc.pop(
                "env_rotation_deg", np.degrees(base_s.env_rotation)))),
            perturb_translation=float(sdoc.pop("perturb_translation",
                                               base_s.perturb_translation)),
            perturb_rotation=np.radians(float(sdoc.pop(
                "perturb_rotation_deg", np.degrees(base_s.perturb_rotation)))),
            clearance=float(sdoc.pop("clearance", base_s.clearance)),
            max_attempts=int(sdoc.pop("max_attempts", base_s.max_attempts)),
            grid=(tuple(int(x) for x in g)
                  if (g := sdoc.pop("grid", base_s.grid)) is not None
                  else None))
        processor = ProcessorConfig(
            patch_radius=int(pdoc.pop("patch_radius", base_p.patch_radius)),
            fill_mode=str(pdoc.pop("fill_mode", base_p.fill_mode)),
            depth_margin=float(pdoc.pop("depth_margin", base_p.depth_margin)),
            metric=str(pdoc.pop("metric", base_p.metric)),
            min_shrink=int(pdoc.pop("min_shrink", base_p.min_shrink)))
        cfg = GeneratorConfig(
            env_count=int(doc.pop("env_count", base_g.env_count)),
            object_count=int(doc.pop("object_count", base_g.object_count)),
            perturb_count=int(doc.pop("perturb_count", base_g.perturb_count)),
            sampler=sampler,
            step=float(doc.pop("step", base_g.step)),
            lift=float(doc.pop("lift", base_g.lift)),
            rot_step=np.radians(float(doc.pop(
                "rot_step_deg", np.degrees(base_g.rot_step)))),
            camera_aware=bool(doc.pop("camera_aware", base_g.camera_aware)),
            processor=processor)
    except (TypeError, ValueError) as e:
        raise PlanError(f"bad generator config: {e}") from e
    leftovers = list(doc) + list(sdoc) + list(pdoc)
    if leftovers:
        raise PlanError(f"unknown config keys: {sorted(leftovers)}")
    return cfg


@dataclass(frozen=True)
class DemoPlan:
    """Everything needed to reproduce one augmented demo."""

    index: int
    r: int
    n: int
    p: int
    env_transform: np.ndarray
    skill_transforms: tuple
    augmentable: tuple

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "r": self.r, "n": self.n, "p": self.p,
            "env_transform": np.asarray(self.env_transform).tolist(),
            "skill_transforms": [np.asarray(t).tolist()
                                 for t in self.skill_transforms],
            "augmentable": list(self.augmentable),
        }

    @staticmethod
    def from_dict(doc: dict) -> "DemoPlan":
        return DemoPlan(
            index=int(doc["index"]), r=int(doc["r"]), n=int(doc["n"]),
            p=int(doc["p"]),
            env_transform=np.asarray(doc["env_transform"], dtype=np.float64),
            skill_transforms=tuple(np.asarray(t, dtype=np.float64)
                                   for t in doc["skill_transforms"]),
            augmentable=tuple(bool(b) for b in doc["augmentable"]))


# ---------------------------------------------------------------------------
# Geometry helpers for placement checking
# ---------------------------------------------------------------------------

def _subsample(pts: np.ndarray, cap: int = _HULL_POINT_CAP) -> np.ndarray:
    if len(pts) <= cap:
        return pts
    stride = int(np.ceil(len(pts) / cap))
    return pts[::stride]


def _object_points(scene: ParsedScene, oid: int, frame: int) -> np.ndarray:
    """Subsampled camera-frame points of one object at a source frame."""
    if oid in scene.object_poses:
        tpl = scene.templates[oid]
        cloud = complete_object(tpl, scene.object_poses[oid][frame - 1])
    else:
        cloud = scene.nonrigid_clouds[oid][frame - 1]
    return _subsample(cloud.points)


class _Placement:
    """Collision and workspace checks in table-plane coordinates."""

    def __init__(self, scene: ParsedScene, pframe: PlaneFrame,
                 cfg: SamplerConfig):
        self.scene = scene
        self.pframe = pframe
        self.cfg = cfg
        (u0, u1), (v0, v1) = cfg.workspace
        self.workspace = shp_box(u0, v0, u1, v1)
        self._cache: dict = {}

    def points(self, oid: int, frame: int) -> np.ndarray:
        key = (oid, frame)
        if key not in self._cache:
            self._cache[key] = _object_points(self.scene, oid, frame)
        return self._cache[key]

    def hull(self, pts3: np.ndarray):
        uv = self.pframe.to_uv(pts3)
        return MultiPoint(uv).convex_hull

    def ok(self, moved_pts3: np.ndarray, static_hulls: list) -> bool:
        if len(moved_pts3) == 0:
            return True
        hull = self.hull(moved_pts3)
        if not self.workspace.contains(hull):
            return False
        grown = hull.buffer(self.cfg.clearance)
        return not any(grown.intersects(s) for s in static_hulls)


def _suffix_product(mats: list) -> np.ndarray:
    out = _IDENTITY
    for m in reversed(mats):
        out = m @ out
    return out


class _Schedule:
    """Per-object transform timetable for one plan.

    An object's pose at source frame t is its recorded pose left-multiplied
    by the product of its skills' transforms from the first still-unfinished
    one onward; after its last skill the final transform sticks.
    """

    def __init__(self, ann: AnnotationSet, skill_transforms):
        self.slist = skills(ann)
        self.W = [np.asarray(w, dtype=np.float64) for w in skill_transforms]
        self.jlist: dict[int, list] = {}
        self.suffix: dict[int, list] = {}

    def _for_object(self, oid: int):
        if oid not in self.jlist:
            jl = [i for i, s in enumerate(self.slist) if oid in s.group]
            self.jlist[oid] = jl
            suf = []
            acc = _IDENTITY
            for j in reversed(jl):
                acc = self.W[j] @ acc
                suf.append(acc)
            self.suffix[oid] = suf[::-1]
        return self.jlist[oid], self.suffix[oid]

    def cumulative(self, oid: int, frame: int) -> np.ndarray:
        jl, suf = self._for_object(oid)
        if not jl:
            return _IDENTITY
        for m, j in enumerate(jl):
            if self.slist[j].end_frame >= frame:
                return suf[m]
        return suf[-1]

    def skill_replay(self, i: int) -> np.ndarray:
        """Transform applied to skill i's whole segment (EE, hands, targets).

        A pinned skill still inherits the transforms of later skills that
        share objects with it, otherwise its replay would tear away from the
        group's relocated timeline.
        """
        group = self.slist[i].group
        mats = [self.W[i]]
        cur = set(group)
        for j in range(i + 1, len(self.slist)):
            if cur & self.slist[j].group:
                mats.append(self.W[j])
                cur |= self.slist[j].group
        return _suffix_product(mats)


# ---------------------------------------------------------------------------
# Plan sampling
# ---------------------------------------------------------------------------

def expected_object_transform(ann: AnnotationSet, plan: DemoPlan, oid: int,
                              frame: int) -> np.ndarray:
    """Camera-frame transform object ``oid`` has undergone by source ``frame``.

    This is the same schedule the synthesizer applies, exposed so a dataset
    checker can predict where any object must sit in an output demo.
    """
    sched = _Schedule(ann, plan.skill_transforms)
    env = np.asarray(plan.env_transform, dtype=np.float64)
    return env @ sched.cumulative(oid, frame)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _sample_disc(rng: np.random.Generator, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform())
    phi = rng.uniform(0.0, 2 * np.pi)
    return np.array([r * np.cos(phi), r * np.sin(phi)])


def _grid_center(cfg: SamplerConfig, n_index: int) -> np.ndarray:
    nu, nv = cfg.grid
    (u0, u1), (v0, v1) = cfg.workspace
    cell = n_index % (nu * nv)
    cu, cv = cell % nu, cell // nu
    return np.array([u0 + (cu + 0.5) * (u1 - u0) / nu,
                     v0 + (cv + 0.5) * (v1 - v0) / nv])


def _sample_env_transform(pframe: PlaneFrame, cfg: SamplerConfig,
                          rng: np.random.Generator) -> np.ndarray:
    shift = rng.uniform(-cfg.env_translation, cfg.env_translation, 2)
    angle = rng.uniform(-cfg.env_rotation, cfg.env_rotation)
    return in_plane_transform(pframe, shift, angle, np.zeros(2))


@dataclass(frozen=True)
class _SkillParams:
    pivot: np.ndarray
    dest: np.ndarray
    angle: float


def _base_params(scene: ParsedScene, ann: AnnotationSet, cfg: SamplerConfig,
                 place: _Placement, pframe: PlaneFrame,
                 rng: np.random.Generator, n_index: int):
    """Sample unperturbed per-skill placements, last skill first."""
    slist = skills(ann)
    flags, _ = augmentable_flags(ann)
    params: list = [None] * len(slist)
    transforms: list = [_IDENTITY] * len(slist)
    sched = _Schedule(ann, transforms)
    primary = True
    for i in range(len(slist) - 1, -1, -1):
        if not flags[i]:
            continue
        seg = slist[i]
        t_start, t_end = seg.start_frame, seg.end_frame
        moved_src = _group_placement_points(scene, seg, sched, i)
        pivot = pframe.to_uv(moved_src).mean(axis=0)
        statics = [place.hull(_posed_static(scene, sched, k, t_start, place))
                   for k in _static_ids(scene, seg)]
        use_grid = cfg.grid is not None and primary
        got = None
        for _ in range(cfg.max_attempts):
            dest = (_grid_center(cfg, n_index) if use_grid
                    else np.array([rng.uniform(*cfg.workspace[0]),
                                   rng.uniform(*cfg.workspace[1])]))
            angle = rng.uniform(-cfg.rotation_range, cfg.rotation_range)
            cand = in_plane_transform(pframe, dest - pivot, angle, pivot)
            moved = moved_src @ cand[:3, :3].T + cand[:3, 3]
            if place.ok(moved, statics):
                got = _SkillParams(pivot=pivot, dest=dest, angle=angle)
                transforms[i] = cand
                sched.W[i] = cand
                sched.jlist.clear()
                sched.suffix.clear()
                break
        if got is None:
            raise SamplingExhausted(
                f"no valid placement for skill {i + 1} after "
                f"{cfg.max_attempts} attempts")
        params[i] = got
        primary = False
    return params, transforms


def _static_ids(scene: ParsedScene, seg: Segment) -> list:
    return [k for k in scene.object_ids if k not in seg.group]


def _posed_static(scene: ParsedScene, sched: _Schedule, oid: int,
                  frame: int, place: _Placement) -> np.ndarray:
    g = sched.cumulative(oid, frame)
    pts = place.points(oid, frame)
    return pts @ g[:3, :3].T + g[:3, 3]


def _group_placement_points(scene: ParsedScene, seg: Segment,
                            sched: _Schedule, i: int) -> np.ndarray:
    """Resting-pose points the placement check cares about.

    Targets are checked where the skill finds them (start frame); hand
    objects where the skill leaves them (end frame). Transforms of later
    skills are already applied so the check sees the augmented timeline.
    """
    parts = []
    for oid in sorted(seg.target):
        pts = _object_points(scene, oid, seg.start_frame)
        g = _later_only(sched, oid, i)
        parts.append(pts @ g[:3, :3].T + g[:3, 3])
    for oid in sorted(seg.hand_union - seg.target):
        pts = _object_points(scene, oid, seg.end_frame)
        g = _later_only(sched, oid, i)
        parts.append(pts @ g[:3, :3].T + g[:3, 3])
    if not parts:
        return np.zeros((0, 3))
    return np.concatenate(parts)


def _later_only(sched: _Schedule, oid: int, i: int) -> np.ndarray:
    """Cumulative transform of the object's skills after i only (during skill
    i every later skill of the object is still unfinished, so all apply)."""
    jl, _ = sched._for_object(oid)
    return _suffix_product([sched.W[j] for j in jl if j > i])


def sample_plan(scene: ParsedScene, ann: AnnotationSet, cfg: GeneratorConfig,
                plane: TablePlane, pframe: PlaneFrame, seed: int,
                index: int) -> DemoPlan:
    """Deterministic plan for demo ``index``: env r, placement n, jiggle p.

    The unperturbed placement depends only on (seed, n), so all perturbed
    siblings share it; the perturbation stream is (seed, n, p) and the
    environment stream (seed, r).
    """
    r, n, p = cfg.indices(index)
    place = _Placement(scene, pframe, cfg.sampler)
    params, transforms = _base_params(scene, ann, cfg.sampler, place, pframe,
                                      _rng(seed, 2, n), n)
    flags, _ = augmentable_flags(ann)
    prng = _rng(seed, 3, n, p)
    slist = skills(ann)
    sched = _Schedule(ann, transforms)
    for i in range(len(slist) - 1, -1, -1):
        if params[i] is None:
            continue
        seg = slist[i]
        moved_src = _group_placement_points(scene, seg, sched, i)
        statics = [place.hull(_posed_static(scene, sched, k, seg.start_frame,
                                            place))
                   for k in _static_ids(scene, seg)]
        got = None
        for _ in range(cfg.sampler.max_attempts):
            d_uv = _sample_disc(prng, cfg.sampler.perturb_translation)
            d_th = prng.uniform(-cfg.sampler.perturb_rotation,
                                cfg.sampler.perturb_rotation)
            cand = in_plane_transform(pframe, params[i].dest + d_uv - params[i].pivot,
                                      params[i].angle + d_th, params[i].pivot)
            moved = moved_src @ cand[:3, :3].T + cand[:3, 3]
            if place.ok(moved, statics):
                got = cand
                break
        if got is None:
            raise SamplingExhausted(
                f"no valid perturbation for skill {i + 1} after "
                f"{cfg.sampler.max_attempts} attempts")
        transforms[i] = got
        sched.W[i] = got
        sched.jlist.clear()
        sched.suffix.clear()
    env_t = _sample_env_transform(pframe, cfg.sampler, _rng(seed, 1, r))
    return DemoPlan(index=index, r=r, n=n, p=p, env_transform=env_t,
                    skill_transforms=tuple(transforms),
                    augmentable=flags)


# ---------------------------------------------------------------------------
# Demo synthesis
# ---------------------------------------------------------------------------

def _split_arm(arm: PointCloud, ee_positions: list) -> list:
    """Assign arm points to the nearest EE (index per arm)."""
    if len(ee_positions) == 1 or len(arm) == 0:
        return [np.ones(len(arm), dtype=bool)] + [
            np.zeros(len(arm), dtype=bool)] * (len(ee_positions) - 1)
    d = np.stack([np.linalg.norm(arm.points - pos, axis=1)
                  for pos in ee_positions])
    owner = np.argmin(d, axis=0)
    return [owner == a for a in range(len(ee_positions))]


def _arm_label(a: int) -> int:
    return LABEL_ARM if a == 0 else LABEL_ARM_RIGHT


class _FrameBuilder:
    """Assembles augmented observations from parsed parts."""

    def __init__(self, scene: ParsedScene, sched: _Schedule):
        self.scene = scene
        self.sched = sched
        self.use_colors = (scene.environment.colors is not None
                           and all(t.cloud.colors is not None or not t.rigid
                                   for t in scene.templates.values())
                           and all(f.colors is not None for f in scene.arm)
                           and all(c.colors is not None
                                   for cl in scene.nonrigid_clouds.values()
                                   for c in cl))

    def object_cloud(self, oid: int, frame: int,
                     override: Optional[np.ndarray] = None) -> PointCloud:
        """Object at source ``frame`` under its scheduled transform, or under
        ``override`` instead (used for EE riding)."""
        g = self.sched.cumulative(oid, frame) if override is None else override
        if oid in self.scene.object_poses:
            pose = g @ self.scene.object_poses[oid][frame - 1]
            cloud = complete_object(self.scene.templates[oid], pose)
        else:
            cloud = transform_cloud(self.scene.nonrigid_clouds[oid][frame - 1], g)
        return cloud

    def arm_cloud(self, frame: int, rides: list,
                  src_ee: list) -> list:
        """Arm points at source ``frame`` moved by per-arm transforms."""
        arm = self.scene.arm[frame - 1]
        masks = _split_arm(arm, [e[:3, 3] for e in src_ee])
        out = []
        for a, mask in enumerate(masks):
            part = arm.select(mask).with_labels(_arm_label(a))
            out.append(transform_cloud(part, rides[a]))
        return out

    def assemble(self, parts: list) -> PointCloud:
        env = self.scene.environment
        env = env.with_labels(0) if env.labels is None else env
        all_parts = [env] + parts
        if not self.use_colors:
            all_parts = [PointCloud(c.points, None, c.labels) for c in all_parts]
        return PointCloud.concat(all_parts)


def synthesize_demo(scene: ParsedScene, ann: AnnotationSet, plan: DemoPlan,
                    step: float = DEFAULT_STEP, lift: float = DEFAULT_LIFT,
                    rot_step: float = DEFAULT_ROT_STEP,
                    plane: Optional[TablePlane] = None
                    ) -> tuple[Demonstration, AnnotationSet]:
    """One augmented demonstration (unprocessed) plus its new annotation.

    Skill segments replay frame by frame under their replay transforms;
    motions are replanned between the augmented endpoints, with held objects
    and the arm riding the planned EE. The environment transform is applied
    last, to every point and pose alike.
    """
    if plane is None:
        plane = fit_table_plane(scene.environment)
    mlist, slist = motions(ann), skills(ann)
    sched = _Schedule(ann, plan.skill_transforms)
    fb = _FrameBuilder(scene, sched)
    actions = scene.demo.actions()
    arms = scene.demo.arm_count
    up = plane.n

    out_frames: list = []
    out_segments: list = []
    prev_ee = [actions[0].ee[a] for a in range(arms)]
    t_out = 1
    for i, (m_seg, s_seg) in enumerate(zip(mlist, slist)):
        U = sched.skill_replay(i)
        t1 = s_seg.start_frame
        goals = [U @ actions[t1 - 1].ee[a] for a in range(arms)]
        src_frames = list(range(m_seg.start_frame, m_seg.end_frame + 1))
        src_grips = [[actions[t - 1].grip[a] for t in src_frames]
                     for a in range(arms)]
        shared = frozenset.intersection(*s_seg.hands) if arms > 1 else frozenset()

        trajs = _plan_arms(prev_ee, goals, src_grips, shared, step, lift, up,
                           rot_step)
        L = len(trajs[0].poses)
        # held objects ride their holding arm through the motion
        held = {}
        for a in range(arms):
            for oid in sorted(s_seg.hands[a] if a < len(s_seg.hands) else ()):
                held.setdefault(oid, a)
        for j in range(L):
            src_t = src_frames[int(np.rint(j / max(L - 1, 1)
                                           * (len(src_frames) - 1)))]
            rides = [trajs[a].poses[j] @ pose_inverse(actions[src_t - 1].ee[a])
                     for a in range(arms)]
            parts = []
            for oid in scene.object_ids:
                if oid in held:
                    parts.append(fb.object_cloud(oid, src_t,
                                                 override=rides[held[oid]]))
                else:
                    parts.append(fb.object_cloud(oid, m_seg.start_frame))
            parts.extend(fb.arm_cloud(src_t, rides, [actions[src_t - 1].ee[a]
                                                     for a in range(arms)]))
            ee = tuple(trajs[a].poses[j] for a in range(arms))
            grip = tuple(trajs[a].grips[j] for a in range(arms))
            out_frames.append((fb.assemble(parts), Action(ee, grip)))
        out_segments.append(Segment(kind="motion", start_frame=t_out,
                                    end_frame=t_out + L - 1))
        t_out += L

        s_len = s_seg.length
        for t in range(s_seg.start_frame, s_seg.end_frame + 1):
            parts = [fb.object_cloud(oid, t) for oid in scene.object_ids]
            parts.extend(fb.arm_cloud(t, [U] * arms,
                                      [actions[t - 1].ee[a] for a in range(arms)]))
            ee = tuple(U @ actions[t - 1].ee[a] for a in range(arms))
            out_frames.append((fb.assemble(parts), Action(ee, actions[t - 1].grip)))
        out_segments.append(Segment(kind="skill", start_frame=t_out,
                                    end_frame=t_out + s_len - 1,
                                    target=s_seg.target, hands=s_seg.hands))
        t_out += s_len
        prev_ee = [out_frames[-1][1].ee[a] for a in range(arms)]

    env_t = np.asarray(plan.env_transform, dtype=np.float64)
    final = []
    for cloud, act in out_frames:
        moved = transform_cloud(cloud, env_t)
        ee = tuple(env_t @ e for e in act.ee)
        final.append((moved, Action(ee, act.grip)))
    demo = Demonstration(camera=scene.demo.camera, frames=tuple(final))
    new_ann = AnnotationSet(mask_files=ann.mask_files, arm_count=ann.arm_count,
                            segments=tuple(out_segments))
    return demo, new_ann


def _plan_arms(prev_ee, goals, src_grips, shared, step, lift, up, rot_step):
    """Planned per-arm trajectories of equal length.

    With a jointly held object the follower arm copies the leader's path at
    the starting relative offset, so the shared grasp stays rigid. Otherwise
    arms plan independently and the early finisher holds its final pose.
    """
    arms = len(prev_ee)
    lead = plan_motion(prev_ee[0], goals[0], src_grips[0], step=step,
                       lift=lift, up=up, rot_step=rot_step)
    if arms == 1:
        return [lead]
    if shared:
        rel = pose_inverse(prev_ee[0]) @ prev_ee[1]
        poses = np.array([p @ rel for p in lead.poses])
        poses[0] = prev_ee[1]
        poses[-1] = goals[1]
        grips = resample_grips(src_grips[1], len(poses))
        return [lead, ArmTrajectory(poses=poses, grips=grips)]
    other = plan_motion(prev_ee[1], goals[1], src_grips[1], step=step,
                        lift=lift, up=up, rot_step=rot_step)
    L = max(len(lead.poses), len(other.poses))
    out = []
    for traj in (lead, other):
        if len(traj.poses) < L:
            pad = np.repeat(traj.poses[-1][None], L - len(traj.poses), axis=0)
            poses = np.concatenate([traj.poses, pad])
            grips = tuple(traj.grips) + (traj.grips[-1],) * (L - len(traj.grips))
            traj = ArmTrajectory(poses=poses, grips=grips)
        out.append(traj)
    return out


# ---------------------------------------------------------------------------
# Bimanual consistency
# ---------------------------------------------------------------------------

def check_bimanual_constraint(demo: Demonstration, ann: AnnotationSet,
                              tol: float = 1e-9) -> None:
    """Verify jointly held objects imply a frozen inter-arm relative pose.

    For every motion whose following skill lists the same object in both
    hands, the left-to-right EE offset must stay constant across the motion.
    Raises ConstraintViolation naming the first offending frame.
    """
    if demo.arm_count < 2:
        return
    actions = demo.actions()
    for m_seg, s_seg in zip(motions(ann), skills(ann)):
        if not frozenset.intersection(*s_seg.hands):
            continue
        base = None
        for t in range(m_seg.start_frame, m_seg.end_frame + 1):
            act = actions[t - 1]
            rel = pose_inverse(act.ee[0]) @ act.ee[1]
            if base is None:
                base = rel
            elif np.abs(rel - base).max() > tol:
                raise ConstraintViolation(
                    t, f"inter-arm pose drifted at frame {t} "
                    f"(max delta {np.abs(rel - base).max():.3e})")


# ---------------------------------------------------------------------------
# Camera-aware pass and dataset generation
# ---------------------------------------------------------------------------

def process_demo(demo: Demonstration, nonrigid_ids,
                 cfg: ProcessorConfig) -> Demonstration:
    """Run the capture-consistency pass over every frame of a demo.

    The environment is static within a demo, so the shrink rectangle is
    computed once from the first frame and shared, giving every frame the
    same effective camera.
    """
    cam = demo.camera
    nonrigid = np.asarray(sorted(nonrigid_ids), dtype=np.uint16)
    rect = None
    if cfg.fill_mode == "shrink":
        first = demo.observations()[0]
        if first.labels is None:
            raise PlanError("camera-aware processing needs labeled frames")
        from .camera import crop, project

        env_pix = crop(project(first.select(first.labels == 0), cam), cam)
        rect = largest_full_rect(coverage_mask(env_pix, cam))
    frames = []
    eff = None
    for obs, act in demo.frames:
        if obs.labels is None:
            raise PlanError("camera-aware processing needs labeled frames")
        bypass = np.isin(obs.labels, nonrigid)
        cloud, new_cam = process_frame(obs, cam, cfg, bypass=bypass,
                                       env_mask=obs.labels == 0, rect=rect)
        frames.append((cloud, act))
        eff = new_cam
    effective = eff if eff != cam else None
    return Demonstration(camera=cam, frames=tuple(frames),
                         effective_camera=effective)


def generate_one(scene: ParsedScene, ann: AnnotationSet, cfg: GeneratorConfig,
                 seed: int, index: int,
                 plane: Optional[TablePlane] = None,
                 pframe: Optional[PlaneFrame] = None
                 ) -> tuple[Demonstration, AnnotationSet, DemoPlan]:
    """Plan, synthesize and (optionally) camera-process demo ``index``."""
    if plane is None:
        plane = fit_table_plane(scene.environment)
    if pframe is None:
        pframe = PlaneFrame.build(plane, scene.environment.points.mean(axis=0))
    plan = sample_plan(scene, ann, cfg, plane, pframe, seed, index)
    demo, new_ann = synthesize_demo(scene, ann, plan, step=cfg.step,
                                    lift=cfg.lift, rot_step=cfg.rot_step,
                                    plane=plane)
    if cfg.camera_aware:
        demo = process_demo(demo, scene.nonrigid_ids, cfg.processor)
    return demo, new_ann, plan


def _emit(scene: ParsedScene, ann: AnnotationSet, cfg: GeneratorConfig,
          seed: int, index: int, out_dir: Path, plane, pframe) -> Path:
    demo, new_ann, plan = generate_one(scene, ann, cfg, seed, index,
                                       plane=plane, pframe=pframe)
    demo_dir = out_dir / f"demo_{index:06d}"
    save_demonstration(demo, demo_dir)
    write_annotation(new_ann, demo_dir / "annotation.json")
    plan_path = out_dir / f"plan_{index:06d}.json"
    plan_path.write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True)
                         + "\n")
    return demo_dir


def _emit_many(scene: ParsedScene, ann: AnnotationSet, cfg: GeneratorConfig,
               seed: int, indices: list, out_dir: Path, plane,
               pframe) -> tuple[list, list]:
    """Emit the given demos; exhausted placements are skipped, not fatal."""
    done, skipped = [], []
    for i in indices:
        try:
            done.append(_emit(scene, ann, cfg, seed, i, out_dir, plane,
                              pframe))
        except SamplingExhausted:
            skipped.append(i)
    return done, skipped


def _emit_chunk(scene_dir: str, ann_path: str, cfg: GeneratorConfig,
                seed: int, indices: list, out_dir: str) -> tuple[list, list]:
    scene = load_parsed_scene(Path(scene_dir))
    ann = parse_annotation(Path(ann_path), k=len(scene.object_ids),
                           horizon=scene.demo.horizon)
    plane = fit_table_plane(scene.environment)
    pframe = PlaneFrame.build(plane, scene.environment.points.mean(axis=0))
    done, skipped = _emit_many(scene, ann, cfg, seed, indices, Path(out_dir),
                               plane, pframe)
    return [str(p) for p in done], skipped


def generate_dataset(scene_dir: Path, annotation_path: Path, out_dir: Path,
                     cfg: GeneratorConfig, seed: int, jobs: int = 1) -> list:
    """Write the full R x N x P dataset; returns the demo directories.

    Demos whose placement sampling exhausts are skipped and recorded in the
    manifest rather than aborting the batch. Output is byte-identical for any
    ``jobs`` because every demo's random streams are keyed only by
    (seed, r, n, p).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    indices = list(range(1, cfg.total + 1))
    skipped: list = []
    if jobs <= 1:
        scene = load_parsed_scene(Path(scene_dir))
        ann = parse_annotation(Path(annotation_path), k=len(scene.object_ids),
                               horizon=scene.demo.horizon)
        plane = fit_table_plane(scene.environment)
        pframe = PlaneFrame.build(plane,
                                  scene.environment.points.mean(axis=0))
        done, skipped = _emit_many(scene, ann, cfg, seed, indices, out_dir,
                                   plane, pframe)
    else:
        chunks = [indices[i::jobs] for i in range(jobs)]
        done = []
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_emit_chunk, str(scene_dir),
                                str(annotation_path), cfg, seed, chunk,
                                str(out_dir))
                    for chunk in chunks if chunk]
            for f in futs:
                paths, missed = f.result()
                done.extend(Path(p) for p in paths)
                skipped.extend(missed)
    manifest = {
        "seed": seed,
        "config": generator_config_to_dict(cfg),
        "total": cfg.total,
        "generated": len(done),
        "skipped": sorted(skipped),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return sorted(done)
