"""Generated-dataset validation.

Re-checks every promise the generator makes, demo by demo, against the
source scene, the source annotation and each demo's stored plan. Every check
emits one plain-dict report line (NDJSON-ready):

    {"demo": "demo_000001", "check": "group_rigidity", "skill": 2,
     "ok": false, "detail": "object 3 off by 4.1e-03"}

A dataset passes when every line is ok.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .annotations import AnnotationSet, motions, parse_annotation, skills
from .augment import DemoPlan, check_bimanual_constraint, expected_object_transform
from .container import load_demonstration, load_parsed_scene
from .errors import ConstraintViolation, PcdgenError
from .model import Demonstration, ParsedScene, transform_cloud, validate_pose
from .parsing import complete_object
from .plane import TablePlane, fit_table_plane

RIGID_TOL = 1e-6
# float32 storage rounds coordinates; allow for it on point-level checks
POINT_TOL = 1e-6 + 1e-6


def _line(demo: str, check: str, ok: bool, detail: str = "",
          **extra) -> dict:
    out = {"demo": demo, "check": check, "ok": bool(ok)}
    if detail:
        out["detail"] = detail
    out.update(extra)
    return out


def _source_object_points(scene: ParsedScene, oid: int,
                          frame: int) -> np.ndarray:
    if oid in scene.object_poses:
        return complete_object(scene.templates[oid],
                               scene.object_poses[oid][frame - 1]).points
    return scene.nonrigid_clouds[oid][frame - 1].points


def _conforms(got: np.ndarray, expected: np.ndarray) -> float:
    """Worst distance from generated points to the expected surface set."""
    if len(got) == 0:
        return 0.0
    d, _ = cKDTree(expected).query(got)
    return float(d.max())


def check_structure(name: str, ann: AnnotationSet, demo: Demonstration,
                    gann: AnnotationSet) -> list:
    problems = []
    if gann.skill_count != ann.skill_count:
        problems.append(f"skill count {gann.skill_count} != {ann.skill_count}")
    if gann.horizon != demo.horizon:
        problems.append(f"annotation horizon {gann.horizon} != demo "
                        f"{demo.horizon}")
    if gann.arm_count != demo.arm_count:
        problems.append("arm count mismatch")
    for i, (s_src, s_gen) in enumerate(zip(skills(ann), skills(gann))):
        if s_gen.length != s_src.length:
            problems.append(f"skill {i + 1} length changed")
        if s_gen.target != s_src.target or s_gen.hands != s_src.hands:
            problems.append(f"skill {i + 1} object sets changed")
    return [_line(name, "structure", not problems, "; ".join(problems))]


def check_boundaries(name: str, demo: Demonstration,
                     gann: AnnotationSet) -> list:
    """Motion endpoints must equal the adjacent skill poses bitwise."""
    acts = demo.actions()
    bad = []
    for m, s in zip(motions(gann), skills(gann)):
        for a in range(demo.arm_count):
            if not np.array_equal(acts[m.end_frame - 1].ee[a],
                                  acts[s.start_frame - 1].ee[a]):
                bad.append(f"motion into skill at frame {s.start_frame}")
        if m.start_frame > 1:
            prev = gann.segment_at(m.start_frame - 1)
            for a in range(demo.arm_count):
                if not np.array_equal(acts[m.start_frame - 1].ee[a],
                                      acts[prev.end_frame - 1].ee[a]):
                    bad.append(f"skill into motion at frame {m.start_frame}")
    return [_line(name, "boundaries", not bad, "; ".join(sorted(set(bad))))]


def check_plan(name: str, ann: AnnotationSet, plan: DemoPlan,
               plane: TablePlane) -> list:
    bad = []
    n = np.asarray(plane.n)
    mats = [("env", np.asarray(plan.env_transform), True)]
    flags = plan.augmentable
    for i, w in enumerate(plan.skill_transforms):
        mats.append((f"skill {i + 1}", np.asarray(w), flags[i]))
        if not flags[i] and not np.array_equal(w, np.eye(4)):
            bad.append(f"skill {i + 1} pinned but transform not identity")
    for label, m, _ in mats:
        try:
            validate_pose(m, context=f"{label} transform")
        except PcdgenError as e:
            bad.append(str(e))
            continue
        if np.abs(m[:3, :3] @ n - n).max() > RIGID_TOL:
            bad.append(f"{label} transform tilts the table plane")
        if abs(float(n @ m[:3, 3])) > RIGID_TOL:
            bad.append(f"{label} transform lifts off the table plane")
    if len(plan.skill_transforms) != ann.skill_count:
        bad.append("plan skill count mismatch")
    return [_line(name, "plan", not bad, "; ".join(bad))]


def check_group_rigidity(name: str, scene: ParsedScene, ann: AnnotationSet,
                         demo: Demonstration, gann: AnnotationSet,
                         plan: DemoPlan) -> list:
    """Every object must sit exactly where the schedule puts it, at every
    frame of every skill (skills replay rigidly, so all frames are pinned)."""
    lines = []
    obs_list = demo.observations()
    for i, (s_src, s_gen) in enumerate(zip(skills(ann), skills(gann))):
        worst, where, missing = 0.0, None, set()
        for off in range(s_src.length):
            t_src = s_src.start_frame + off
            obs = obs_list[s_gen.start_frame + off - 1]
            for oid in sorted(scene.object_ids):
                got = obs.points[obs.labels == oid]
                if len(got) == 0:
                    missing.add(oid)
                    continue
                t = expected_object_transform(ann, plan, oid, t_src)
                src = _source_object_points(scene, oid, t_src)
                dev = _conforms(got, src @ t[:3, :3].T + t[:3, 3])
                if dev > worst:
                    worst = dev
                    where = (oid, s_gen.start_frame + off)
        ok = worst <= POINT_TOL
        detail = (f"object {where[0]} off by {worst:.1e} at frame {where[1]}"
                  if not ok else
                  (f"objects {sorted(missing)} not visible" if missing else ""))
        lines.append(_line(name, "group_rigidity", ok, detail, skill=i + 1))
    return lines


def check_final_placement(name: str, scene: ParsedScene, ann: AnnotationSet,
                          demo: Demonstration, plan: DemoPlan) -> list:
    """After the last skill every object rests at its scheduled pose."""
    src_h = scene.demo.horizon
    obs = demo.observations()[demo.horizon - 1]
    bad = []
    for oid in scene.object_ids:
        got = obs.points[obs.labels == oid]
        if len(got) == 0:
            continue
        t = expected_object_transform(ann, plan, oid, src_h)
        src = _source_object_points(scene, oid, src_h)
        dev = _conforms(got, src @ t[:3, :3].T + t[:3, 3])
        if dev > POINT_TOL:
            bad.append(f"object {oid} off by {dev:.1e}")
    return [_line(name, "final_placement", not bad, "; ".join(bad))]


def check_environment(name: str, scene: ParsedScene, demo: Demonstration,
                      plan: DemoPlan) -> list:
    obs = demo.observations()[0]
    got = obs.points[obs.labels == 0]
    if len(got) == 0:
        return [_line(name, "environment", False, "no environment points")]
    moved = transform_cloud(scene.environment,
                            np.asarray(plan.env_transform)).points
    dev = _conforms(got, moved)
    return [_line(name, "environment", dev <= POINT_TOL,
                  "" if dev <= POINT_TOL else f"off by {dev:.1e}")]


def check_bimanual(name: str, demo: Demonstration,
                   gann: AnnotationSet) -> list:
    try:
        check_bimanual_constraint(demo, gann)
    except ConstraintViolation as e:
        return [_line(name, "bimanual", False, str(e), frame=e.frame)]
    return [_line(name, "bimanual", True)]


def _transitions(acts, seg, arm: int) -> list:
    out = []
    for t in range(seg.start_frame, seg.end_frame):
        g0, g1 = acts[t - 1].grip[arm], acts[t].grip[arm]
        if g0 != g1:
            out.append((g0, g1))
    return sorted(out)


def check_grips(name: str, scene: ParsedScene, ann: AnnotationSet,
                demo: Demonstration, gann: AnnotationSet) -> list:
    src_acts = scene.demo.actions()
    gen_acts = demo.actions()
    bad = []
    for i, (s_src, s_gen) in enumerate(zip(skills(ann), skills(gann))):
        for a in range(demo.arm_count):
            if _transitions(src_acts, s_src, a) != _transitions(gen_acts,
                                                                s_gen, a):
                bad.append(f"skill {i + 1} arm {a}")
    return [_line(name, "grips", not bad,
                  "changed transitions: " + ", ".join(bad) if bad else "")]


def validate_demo(name: str, scene: ParsedScene, ann: AnnotationSet,
                  plane: TablePlane, demo_dir: Path,
                  plan_path: Path) -> list:
    try:
        demo = load_demonstration(demo_dir)
        gann = parse_annotation(demo_dir / "annotation.json",
                                k=len(scene.object_ids),
                                horizon=demo.horizon)
        plan = DemoPlan.from_dict(json.loads(plan_path.read_text()))
    except (PcdgenError, OSError, json.JSONDecodeError, KeyError) as e:
        return [_line(name, "load", False, str(e))]
    lines = [_line(name, "load", True)]
    lines += check_structure(name, ann, demo, gann)
    if not lines[-1]["ok"]:
        return lines
    lines += check_boundaries(name, demo, gann)
    lines += check_plan(name, ann, plan, plane)
    lines += check_group_rigidity(name, scene, ann, demo, gann, plan)
    lines += check_final_placement(name, scene, ann, demo, plan)
    lines += check_environment(name, scene, demo, plan)
    lines += check_bimanual(name, demo, gann)
    lines += check_grips(name, scene, ann, demo, gann)
    return lines


def validate_dataset(scene_dir: Path, annotation_path: Path,
                     data_dir: Path) -> tuple[bool, list]:
    """Validate every demo under ``data_dir``; returns (ok, report lines)."""
    scene = load_parsed_scene(Path(scene_dir))
    ann = parse_annotation(Path(annotation_path),
                           k=len(scene.object_ids),
                           horizon=scene.demo.horizon)
    plane = fit_table_plane(scene.environment)
    data_dir = Path(data_dir)
    demo_dirs = sorted(d for d in data_dir.glob("demo_*") if d.is_dir())
    lines: list = []

    manifest_path = data_dir / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        ok = manifest.get("generated") == len(demo_dirs)
        lines.append(_line("*", "manifest", ok,
                           "" if ok else f"manifest says "
                           f"{manifest.get('generated')} demos, found "
                           f"{len(demo_dirs)}"))
    else:
        lines.append(_line("*", "manifest", False, "manifest.json missing"))

    if not demo_dirs:
        lines.append(_line("*", "dataset", False, "no demos found"))
    for d in demo_dirs:
        index = int(d.name.split("_")[-1])
        lines += validate_demo(d.name, scene, ann, plane, d,
                               data_dir / f"plan_{index:06d}.json")
    failures = sum(not ln["ok"] for ln in lines)
    ok = failures == 0
    lines.append(_line("*", "summary", ok,
                       f"{failures} failing checks across "
                       f"{len(demo_dirs)} demos"))
    return ok, lines


def report_ndjson(lines: list) -> str:
    return "\n".join(json.dumps(ln, sort_keys=True) for ln in lines) + "\n"
