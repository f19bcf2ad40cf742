"""Directory-container I/O for demonstrations, parsed scenes, tracking bundles.

Layout of a demonstration container::

    meta.json             version "1", camera, arm_count, horizon
    frames/000001.pcd-bin one file per frame, 1-based
    actions.bin           per frame, per arm: 16 float64 pose + 1 float32 grip

A parsed scene adds ``environment.pcd-bin``, ``templates/obj_%d.pcd-bin``,
``poses/obj_%d.bin`` (per-frame 16 float64) for rigid objects,
``nonrigid/obj_%d/%06d.pcd-bin`` for tracked non-rigid objects and
``arm/%06d.pcd-bin``. A tracking bundle is the same minus frames/actions.

``.pcd-bin`` is little-endian: u32 point count, xyz float32 triples, then
optional rgb u8 triples, then optional label u16. Which optional sections are
present is recovered from the file size (12N, 14N, 15N and 17N byte payloads
are distinct for N >= 1; a zero-point file carries no sections).

Round trips are bit-exact: coordinates are quantized to float32 at write
time, so everything loaded from a container re-saves to identical bytes.
"""

from __future__ import annotations

import json
import re
import struct
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, IoFailure, MalformedContainer
from .model import (
    Action,
    CameraModel,
    Demonstration,
    ObjectTemplate,
    ParsedScene,
    PointCloud,
    TrackingInput,
    validate_pose,
)

FORMAT_VERSION = "1"
_ACTION_ARM_BYTES = 16 * 8 + 4  # pose + grip


def _frame_name(i: int) -> str:
    return f"{i:06d}.pcd-bin"


# ---------------------------------------------------------------------------
# Single-cloud files
# ---------------------------------------------------------------------------

def write_cloud(path: Path, cloud: PointCloud) -> None:
    n = len(cloud)
    parts = [struct.pack("<I", n), cloud.points.astype("<f4").tobytes()]
    if cloud.colors is not None:
        parts.append(np.ascontiguousarray(cloud.colors, dtype=np.uint8).tobytes())
    if cloud.labels is not None:
        parts.append(cloud.labels.astype("<u2").tobytes())
    try:
        path.write_bytes(b"".join(parts))
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def read_cloud(path: Path) -> PointCloud:
    try:
        data = path.read_bytes()
    except FileNotFoundError as e:
        raise MalformedContainer(f"missing cloud file {path}") from e
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if len(data) < 4:
        raise MalformedContainer(f"{path}: truncated header")
    n = struct.unpack_from("<I", data)[0]
    body = len(data) - 4
    base = 12 * n
    colors = labels = None
    if body == base:
        pass
    elif n and body == base + 3 * n:
        colors = np.frombuffer(data, dtype=np.uint8, count=3 * n, offset=4 + base)
    elif n and body == base + 2 * n:
        labels = np.frombuffer(data, dtype="<u2", count=n, offset=4 + base)
    elif n and body == base + 5 * n:
        colors = np.frombuffer(data, dtype=np.uint8, count=3 * n, offset=4 + base)
        labels = np.frombuffer(data, dtype="<u2", count=n, offset=4 + base + 3 * n)
    else:
        raise MalformedContainer(f"{path}: {body} payload bytes for {n} points")
    pts = np.frombuffer(data, dtype="<f4", count=3 * n, offset=4).reshape(n, 3)
    return PointCloud(pts,
                      colors.reshape(n, 3) if colors is not None else None,
                      labels)


# ---------------------------------------------------------------------------
# Demonstrations
# ---------------------------------------------------------------------------

def _write_meta(path: Path, meta: dict) -> None:
    try:
        path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def _read_meta(path: Path) -> dict:
    meta_path = path / "meta.json"
    try:
        meta = json.loads(meta_path.read_text())
    except FileNotFoundError as e:
        raise MalformedContainer(f"{path} is not a container (no meta.json)") from e
    except (OSError, json.JSONDecodeError) as e:
        raise MalformedContainer(f"{meta_path}: unreadable ({e})") from e
    if meta.get("version") != FORMAT_VERSION:
        raise MalformedContainer(
            f"{meta_path}: unsupported format version {meta.get('version')!r}")
    return meta


def save_demonstration(demo: Demonstration, path: Path) -> None:
    path = Path(path)
    try:
        (path / "frames").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create {path}: {e}") from e
    meta = {
        "version": FORMAT_VERSION,
        "camera": demo.camera.to_dict(),
        "arm_count": demo.arm_count,
        "horizon": demo.horizon,
    }
    if demo.effective_camera is not None:
        meta["effective_camera"] = demo.effective_camera.to_dict()
    _write_meta(path / "meta.json", meta)
    parts = []
    for i, (obs, act) in enumerate(demo.frames, start=1):
        write_cloud(path / "frames" / _frame_name(i), obs)
        for pose, grip in zip(act.ee, act.grip):
            parts.append(pose.astype("<f8").tobytes())
            parts.append(struct.pack("<f", grip))
    try:
        (path / "actions.bin").write_bytes(b"".join(parts))
    except OSError as e:
        raise IoFailure(f"cannot write actions: {e}") from e


def load_demonstration(path: Path) -> Demonstration:
    path = Path(path)
    meta = _read_meta(path)
    try:
        camera = CameraModel.from_dict(meta["camera"])
        arm_count = int(meta["arm_count"])
        horizon = int(meta["horizon"])
    except (KeyError, TypeError) as e:
        raise MalformedContainer(f"{path}: incomplete meta.json ({e})") from e
    effective = None
    if "effective_camera" in meta:
        effective = CameraModel.from_dict(meta["effective_camera"])
    if arm_count not in (1, 2):
        raise MalformedContainer(f"{path}: arm_count must be 1 or 2")

    try:
        raw_actions = (path / "actions.bin").read_bytes()
    except FileNotFoundError as e:
        raise MalformedContainer(f"{path}: missing actions.bin") from e
    except OSError as e:
        raise IoFailure(f"cannot read actions: {e}") from e
    expect = horizon * arm_count * _ACTION_ARM_BYTES
    if len(raw_actions) != expect:
        raise MalformedContainer(
            f"{path}: actions.bin has {len(raw_actions)} bytes, expected {expect}")

    frames = []
    off = 0
    for i in range(1, horizon + 1):
        obs = read_cloud(path / "frames" / _frame_name(i))
        ee, grip = [], []
        for a in range(arm_count):
            pose = np.frombuffer(raw_actions, dtype="<f8", count=16, offset=off)
            validate_pose(pose.reshape(4, 4), context=f"frame {i} arm {a} pose")
            ee.append(pose.reshape(4, 4))
            grip.append(struct.unpack_from("<f", raw_actions, off + 128)[0])
            off += _ACTION_ARM_BYTES
        frames.append((obs, Action(tuple(ee), tuple(grip))))
    return Demonstration(camera=camera, frames=tuple(frames),
                         effective_camera=effective)


# ---------------------------------------------------------------------------
# Pose tracks
# ---------------------------------------------------------------------------

def write_pose_track(path: Path, poses: np.ndarray) -> None:
    try:
        path.write_bytes(np.asarray(poses, dtype="<f8").tobytes())
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def read_pose_track(path: Path) -> np.ndarray:
    try:
        data = path.read_bytes()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if len(data) % 128 != 0:
        raise MalformedContainer(f"{path}: size {len(data)} not a multiple of 128")
    arr = np.frombuffer(data, dtype="<f8").reshape(-1, 4, 4)
    return arr


_OBJ_RE = re.compile(r"obj_(\d+)")


def _object_ids(directory: Path, suffix: str) -> list[int]:
    if not directory.is_dir():
        return []
    out = []
    for p in directory.iterdir():
        m = _OBJ_RE.fullmatch(p.name.removesuffix(suffix))
        if m:
            out.append(int(m.group(1)))
    return sorted(out)


# ---------------------------------------------------------------------------
# Parsed scenes
# ---------------------------------------------------------------------------

def _save_scene_parts(path: Path, environment: PointCloud,
                      templates: dict[int, ObjectTemplate],
                      object_poses: dict[int, np.ndarray],
                      nonrigid_clouds: dict[int, list]) -> None:
    write_cloud(path / "environment.pcd-bin", environment)
    tdir = path / "templates"
    tdir.mkdir(exist_ok=True)
    for oid, tpl in templates.items():
        write_cloud(tdir / f"obj_{oid}.pcd-bin", tpl.cloud)
    if object_poses:
        pdir = path / "poses"
        pdir.mkdir(exist_ok=True)
        for oid, poses in object_poses.items():
            write_pose_track(pdir / f"obj_{oid}.bin", poses)
    for oid, clouds in nonrigid_clouds.items():
        ndir = path / "nonrigid" / f"obj_{oid}"
        ndir.mkdir(parents=True, exist_ok=True)
        for i, c in enumerate(clouds, start=1):
            write_cloud(ndir / _frame_name(i), c)


def _load_scene_parts(path: Path, horizon: int | None):
    environment = read_cloud(path / "environment.pcd-bin")
    templates: dict[int, ObjectTemplate] = {}
    object_poses: dict[int, np.ndarray] = {}
    nonrigid: dict[int, list] = {}
    ids = _object_ids(path / "templates", ".pcd-bin")
    for oid in ids:
        pose_file = path / "poses" / f"obj_{oid}.bin"
        ndir = path / "nonrigid" / f"obj_{oid}"
        rigid = pose_file.exists()
        cloud = read_cloud(path / "templates" / f"obj_{oid}.pcd-bin")
        templates[oid] = ObjectTemplate(id=oid, cloud=cloud, rigid=rigid)
        if rigid:
            poses = read_pose_track(pose_file)
            if horizon is not None and len(poses) != horizon:
                raise MalformedContainer(
                    f"{pose_file}: {len(poses)} poses for horizon {horizon}")
            object_poses[oid] = poses
        elif ndir.is_dir():
            count = horizon if horizon is not None else len(list(ndir.iterdir()))
            nonrigid[oid] = [read_cloud(ndir / _frame_name(i))
                             for i in range(1, count + 1)]
        else:
            raise MalformedContainer(
                f"{path}: object {oid} has neither poses nor non-rigid clouds")
    # ids only present under nonrigid/ (no template scanned for them)
    for oid in _object_ids(path / "nonrigid", ""):
        if oid in templates:
            continue
        ndir = path / "nonrigid" / f"obj_{oid}"
        count = horizon if horizon is not None else len(list(ndir.iterdir()))
        templates[oid] = ObjectTemplate(id=oid, cloud=PointCloud(np.zeros((0, 3))),
                                        rigid=False)
        nonrigid[oid] = [read_cloud(ndir / _frame_name(i))
                         for i in range(1, count + 1)]
    return environment, templates, object_poses, nonrigid


def save_parsed_scene(scene: ParsedScene, path: Path) -> None:
    path = Path(path)
    save_demonstration(scene.demo, path)
    _save_scene_parts(path, scene.environment, scene.templates,
                      scene.object_poses, scene.nonrigid_clouds)
    if scene.arm:
        adir = path / "arm"
        adir.mkdir(exist_ok=True)
        for i, c in enumerate(scene.arm, start=1):
            write_cloud(adir / _frame_name(i), c)


def load_parsed_scene(path: Path) -> ParsedScene:
    path = Path(path)
    demo = load_demonstration(path)
    environment, templates, object_poses, nonrigid = _load_scene_parts(
        path, demo.horizon)
    for oid, poses in object_poses.items():
        for i, p in enumerate(poses, start=1):
            validate_pose(p, context=f"object {oid} pose at frame {i}")
    arm: tuple = ()
    if (path / "arm").is_dir():
        arm = tuple(read_cloud(path / "arm" / _frame_name(i))
                    for i in range(1, demo.horizon + 1))
    return ParsedScene(demo=demo, environment=environment, templates=templates,
                       object_poses=object_poses, nonrigid_clouds=nonrigid,
                       arm=arm)


# ---------------------------------------------------------------------------
# Tracking bundles
# ---------------------------------------------------------------------------

def save_tracking_input(tracking: TrackingInput, path: Path) -> None:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create {path}: {e}") from e
    _save_scene_parts(path, tracking.environment, tracking.templates,
                      tracking.object_poses, tracking.nonrigid_clouds)


def load_tracking_input(path: Path) -> TrackingInput:
    path = Path(path)
    environment, templates, object_poses, nonrigid = _load_scene_parts(path, None)
    return TrackingInput(environment=environment, templates=templates,
                         object_poses=object_poses, nonrigid_clouds=nonrigid)
