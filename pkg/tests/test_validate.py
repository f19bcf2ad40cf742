import json
import shutil
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from pcdgen.annotations import parse_annotation, skills, write_annotation
from pcdgen.augment import GeneratorConfig, SamplerConfig, generate_dataset
from pcdgen.container import (
    load_demonstration,
    save_demonstration,
    save_parsed_scene,
)
from pcdgen.parsing import parse_scene
from pcdgen.plane import fit_table_plane
from pcdgen.synth import make_scene, press_scene
from pcdgen.validate import (
    report_ndjson,
    validate_dataset,
    validate_demo,
)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """A small clean dataset plus the inputs it was generated from."""
    root = tmp_path_factory.mktemp("ds")
    demo, tracking, ann, _ = make_scene(press_scene(spacing=0.005), seed=0)
    scene = parse_scene(demo, tracking)
    scene_dir = root / "scene"
    save_parsed_scene(scene, scene_dir)
    ann_path = root / "annotation.json"
    write_annotation(ann, ann_path)
    cfg = GeneratorConfig(
        env_count=1, object_count=2, perturb_count=1,
        sampler=SamplerConfig(workspace=((-0.22, 0.22), (-0.16, 0.16)),
                              rotation_range=0.7),
        camera_aware=False)
    data_dir = root / "data"
    generate_dataset(scene_dir, ann_path, data_dir, cfg, seed=11)
    return scene_dir, ann_path, data_dir


def copy_dataset(dataset, tmp_path):
    scene_dir, ann_path, data_dir = dataset
    out = tmp_path / "data"
    shutil.copytree(data_dir, out)
    return scene_dir, ann_path, out


def failing(lines, check):
    return [ln for ln in lines if ln["check"] == check and not ln["ok"]]


class TestCleanDataset:
    def test_everything_passes(self, dataset):
        ok, lines = validate_dataset(*dataset)
        assert ok, report_ndjson([ln for ln in lines if not ln["ok"]])
        assert all(ln["ok"] for ln in lines)

    def test_report_is_ndjson(self, dataset):
        _, lines = validate_dataset(*dataset)
        text = report_ndjson(lines)
        parsed = [json.loads(row) for row in text.splitlines()]
        assert len(parsed) == len(lines)
        for row in parsed:
            assert {"demo", "check", "ok"} <= set(row)

    def test_summary_is_last_line(self, dataset):
        _, lines = validate_dataset(*dataset)
        assert lines[-1]["check"] == "summary"
        assert lines[-1]["demo"] == "*"
        assert "0 failing" in lines[-1]["detail"]

    def test_covers_every_demo(self, dataset):
        _, _, data_dir = dataset
        _, lines = validate_dataset(*dataset)
        names = {ln["demo"] for ln in lines}
        for d in data_dir.glob("demo_*"):
            assert d.name in names


def _corrupt_demo(demo_dir, fn):
    demo = load_demonstration(demo_dir)
    save_demonstration(fn(demo), demo_dir)


class TestCorruption:
    def test_shifted_points_mid_skill(self, dataset, tmp_path):
        scene_dir, ann_path, data_dir = copy_dataset(dataset, tmp_path)
        d = data_dir / "demo_000001"
        demo = load_demonstration(d)
        gann = parse_annotation(d / "annotation.json", k=1,
                                horizon=demo.horizon)
        t = skills(gann)[0].start_frame + 1

        def shift(demo):
            frames = list(demo.frames)
            obs, act = frames[t - 1]
            pts = obs.points.copy()
            pts[obs.labels == 1] += np.float32((0.0, 0.0, 0.01))
            frames[t - 1] = (replace(obs, points=pts), act)
            return replace(demo, frames=tuple(frames))

        _corrupt_demo(d, shift)
        ok, lines = validate_dataset(scene_dir, ann_path, data_dir)
        assert not ok
        bad = failing(lines, "group_rigidity")
        assert bad and bad[0]["demo"] == "demo_000001"
        assert bad[0]["skill"] == 1
        assert f"at frame {t}" in bad[0]["detail"]

    def test_rotated_boundary_pose(self, dataset, tmp_path):
        scene_dir, ann_path, data_dir = copy_dataset(dataset, tmp_path)
        d = data_dir / "demo_000002"
        demo = load_demonstration(d)
        gann = parse_annotation(d / "annotation.json", k=1,
                                horizon=demo.horizon)
        t = skills(gann)[0].start_frame - 1  # end of the leading motion
        c, s = np.cos(0.02), np.sin(0.02)
        rz = np.array([[c, -s, 0, 0], [s, c, 0, 0],
                       [0, 0, 1, 0], [0, 0, 0, 1]])

        def twist(demo):
            frames = list(demo.frames)
            obs, act = frames[t - 1]
            ee = (act.ee[0] @ rz,) + act.ee[1:]
            frames[t - 1] = (obs, replace(act, ee=ee))
            return replace(demo, frames=tuple(frames))

        _corrupt_demo(d, twist)
        ok, lines = validate_dataset(scene_dir, ann_path, data_dir)
        assert not ok
        bad = failing(lines, "boundaries")
        assert bad and bad[0]["demo"] == "demo_000002"

    def test_plan_lifted_off_plane(self, dataset, tmp_path):
        scene_dir, ann_path, data_dir = copy_dataset(dataset, tmp_path)
        plan_path = data_dir / "plan_000001.json"
        doc = json.loads(plan_path.read_text())
        doc["env_transform"][2][3] += 0.02
        plan_path.write_text(json.dumps(doc))
        ok, lines = validate_dataset(scene_dir, ann_path, data_dir)
        assert not ok
        bad = failing(lines, "plan")
        assert bad and "plane" in bad[0]["detail"]

    def test_tampered_grip(self, dataset, tmp_path):
        scene_dir, ann_path, data_dir = copy_dataset(dataset, tmp_path)
        d = data_dir / "demo_000001"
        demo = load_demonstration(d)
        gann = parse_annotation(d / "annotation.json", k=1,
                                horizon=demo.horizon)
        seg = skills(gann)[0]
        t = seg.start_frame + (seg.length // 2)

        def regrip(demo):
            frames = list(demo.frames)
            obs, act = frames[t - 1]
            grip = (act.grip[0] + 0.031,) + act.grip[1:]
            frames[t - 1] = (obs, replace(act, grip=grip))
            return replace(demo, frames=tuple(frames))

        _corrupt_demo(d, regrip)
        ok, lines = validate_dataset(scene_dir, ann_path, data_dir)
        assert not ok
        assert failing(lines, "grips")

    def test_missing_plan_file(self, dataset, tmp_path):
        scene_dir, ann_path, data_dir = copy_dataset(dataset, tmp_path)
        (data_dir / "plan_000002.json").unlink()
        ok, lines = validate_dataset(scene_dir, ann_path, data_dir)
        assert not ok
        bad = failing(lines, "load")
        assert bad and bad[0]["demo"] == "demo_000002"

    def test_deleted_demo_breaks_manifest(self, dataset, tmp_path):
        scene_dir, ann_path, data_dir = copy_dataset(dataset, tmp_path)
        shutil.rmtree(data_dir / "demo_000002")
        ok, lines = validate_dataset(scene_dir, ann_path, data_dir)
        assert not ok
        bad = failing(lines, "manifest")
        assert bad and "found 1" in bad[0]["detail"]

    def test_missing_manifest(self, dataset, tmp_path):
        scene_dir, ann_path, data_dir = copy_dataset(dataset, tmp_path)
        (data_dir / "manifest.json").unlink()
        ok, lines = validate_dataset(scene_dir, ann_path, data_dir)
        assert not ok
        assert failing(lines, "manifest")


class TestValidateDemo:
    def test_runs_on_single_demo(self, dataset):
        scene_dir, ann_path, data_dir = dataset
        from pcdgen.container import load_parsed_scene

        scene = load_parsed_scene(scene_dir)
        ann = parse_annotation(ann_path, k=len(scene.object_ids),
                               horizon=scene.demo.horizon)
        plane = fit_table_plane(scene.environment)
        lines = validate_demo("demo_000001", scene, ann, plane,
                              data_dir / "demo_000001",
                              data_dir / "plan_000001.json")
        assert all(ln["ok"] for ln in lines)
        checks = {ln["check"] for ln in lines}
        assert {"load", "structure", "boundaries", "plan",
                "group_rigidity", "final_placement", "environment",
                "grips"} <= checks
