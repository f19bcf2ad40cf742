from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree
from shapely.geometry import MultiPoint

from oracles import rigid_fit
from pcdgen.annotations import AnnotationSet, motion, motions, skill, skills
from pcdgen.augment import (
    DemoPlan,
    GeneratorConfig,
    SamplerConfig,
    _object_points,
    augmentable_flags,
    check_bimanual_constraint,
    generate_one,
    process_demo,
    sample_plan,
    synthesize_demo,
    update_fixed_set,
)
from pcdgen.camera import ProcessorConfig
from pcdgen.errors import ConstraintViolation, SamplingExhausted
from pcdgen.model import Action, Demonstration, pose_inverse, transform_cloud
from pcdgen.parsing import complete_object, parse_scene
from pcdgen.plane import PlaneFrame, fit_table_plane
from pcdgen.synth import (
    PrimitiveSpec,
    bimanual_scene,
    bridge_scene,
    make_scene,
    press_scene,
)


def simulate_pinned(entries, i):
    """Unrolled form of the pinned-set recurrence, for cross-checking.

    Walking forward from skill i, the first later skill that mentions an
    object decides: hand frees it, target (without hand) pins it.
    """
    ids = set()
    for tar, hand in entries:
        ids |= set(tar) | set(hand)
    pinned = set()
    for k in ids:
        for j in range(i + 1, len(entries)):
            tar, hand = entries[j]
            if k in hand:
                break
            if k in tar:
                pinned.add(k)
                break
    return frozenset(pinned)


def recurse_pinned(entries, i):
    """Literal re-run of the recurrence with plain Python sets."""
    fixed = set()
    for j in range(len(entries) - 1, i, -1):
        tar, hand = entries[j]
        fixed = (fixed | set(tar)) - set(hand)
    return frozenset(fixed)


def ann_from_entries(entries, arm_count=1):
    segs = []
    t = 1
    for tar, hand in entries:
        segs.append(motion(t, t + 1))
        segs.append(skill(t + 2, t + 3, target=tar,
                          hands=(hand,) * arm_count))
        t += 4
    return AnnotationSet(mask_files=(), arm_count=arm_count,
                        segments=tuple(segs))


class TestFixedSet:
    def test_update_rule(self):
        assert update_fixed_set(frozenset(), {1, 2}, {3}) == {1, 2}
        assert update_fixed_set(frozenset({1, 2}), set(), {2}) == {1}
        assert update_fixed_set(frozenset({1}), {2}, {1, 2}) == frozenset()

    def test_bridge_trace(self):
        _, _, ann, _ = make_scene(bridge_scene(spacing=0.01), seed=0)
        flags, pinned = augmentable_flags(ann)
        assert flags == (False, False, True)
        assert pinned[2] == frozenset()
        assert pinned[1] == {1, 2, 3}
        assert pinned[0] == {1, 2, 3}

    def test_empty_group_never_augmentable(self):
        ann = ann_from_entries([((), ()), ({1}, ())])
        flags, _ = augmentable_flags(ann)
        assert flags == (False, True)

    def test_repeated_target_pins_earlier(self):
        ann = ann_from_entries([({1}, ()), ({1}, ())])
        flags, pinned = augmentable_flags(ann)
        assert flags == (False, True)
        assert pinned[0] == {1}

    def test_hand_frees_earlier_skill(self):
        # an object picked up later does not pin the skill that placed it
        ann = ann_from_entries([((), {1}), ((), {1})])
        flags, _ = augmentable_flags(ann)
        assert flags == (True, True)

    @given(st.lists(st.tuples(st.frozensets(st.integers(1, 5), max_size=3),
                              st.frozensets(st.integers(1, 5), max_size=2)),
                    min_size=1, max_size=6))
    @settings(max_examples=300, deadline=None)
    def test_pinned_matches_unrolled_oracle(self, entries):
        ann = ann_from_entries(entries)
        _, pinned = augmentable_flags(ann)
        for i in range(len(entries)):
            assert pinned[i] == simulate_pinned(entries, i)
            assert pinned[i] == recurse_pinned(entries, i)


@pytest.fixture(scope="module")
def press_setup():
    demo, tracking, ann, _ = make_scene(press_scene(spacing=0.005), seed=0)
    scene = parse_scene(demo, tracking)
    plane = fit_table_plane(scene.environment)
    pframe = PlaneFrame.build(plane, scene.environment.points.mean(axis=0))
    return scene, ann, plane, pframe


@pytest.fixture(scope="module")
def bridge_setup():
    demo, tracking, ann, _ = make_scene(bridge_scene(spacing=0.006), seed=0)
    scene = parse_scene(demo, tracking)
    plane = fit_table_plane(scene.environment)
    pframe = PlaneFrame.build(plane, scene.environment.points.mean(axis=0))
    return scene, ann, plane, pframe


@pytest.fixture(scope="module")
def bimanual_setup():
    demo, tracking, ann, _ = make_scene(bimanual_scene(spacing=0.006), seed=0)
    scene = parse_scene(demo, tracking)
    plane = fit_table_plane(scene.environment)
    pframe = PlaneFrame.build(plane, scene.environment.points.mean(axis=0))
    return scene, ann, plane, pframe


def small_cfg(**kw):
    sampler = kw.pop("sampler", None) or SamplerConfig(
        workspace=((-0.22, 0.22), (-0.16, 0.16)), rotation_range=0.7)
    return GeneratorConfig(env_count=1, object_count=1, perturb_count=1,
                           sampler=sampler, camera_aware=False, **kw)


class TestPlanSampling:
    def test_deterministic(self, press_setup):
        scene, ann, plane, pframe = press_setup
        cfg = small_cfg()
        a = sample_plan(scene, ann, cfg, plane, pframe, seed=5, index=1)
        b = sample_plan(scene, ann, cfg, plane, pframe, seed=5, index=1)
        c = sample_plan(scene, ann, cfg, plane, pframe, seed=6, index=1)
        assert np.array_equal(a.env_transform, b.env_transform)
        for x, y in zip(a.skill_transforms, b.skill_transforms):
            assert np.array_equal(x, y)
        assert not np.allclose(a.skill_transforms[0], c.skill_transforms[0])

    def test_identity_for_pinned_skills(self, bridge_setup):
        scene, ann, plane, pframe = bridge_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 0, 1)
        assert np.array_equal(plan.skill_transforms[0], np.eye(4))
        assert np.array_equal(plan.skill_transforms[1], np.eye(4))
        assert not np.allclose(plan.skill_transforms[2], np.eye(4))
        assert plan.augmentable == (False, False, True)

    def test_transform_preserves_heights(self, bridge_setup):
        scene, ann, plane, pframe = bridge_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 2, 1)
        T = plan.skill_transforms[2]
        n = np.asarray(plane.n)
        pts = scene.environment.points[::500]
        moved = pts @ T[:3, :3].T + T[:3, 3]
        h0 = pts @ n + plane.offset
        h1 = moved @ n + plane.offset
        assert np.abs(h1 - h0).max() < 1e-9
        assert np.allclose(T[:3, :3] @ n, n, atol=1e-12)

    def test_moved_group_stays_in_workspace(self, bridge_setup):
        scene, ann, plane, pframe = bridge_setup
        cfg = small_cfg()
        (u0, u1), (v0, v1) = cfg.sampler.workspace
        s3 = skills(ann)[2]
        src = np.concatenate([_object_points(scene, oid, s3.start_frame)
                              for oid in sorted(s3.target)])
        for seed in range(5):
            plan = sample_plan(scene, ann, cfg, plane, pframe, seed, 1)
            T = plan.skill_transforms[2]
            uv = pframe.to_uv(src @ T[:3, :3].T + T[:3, 3])
            assert uv[:, 0].min() >= u0 and uv[:, 0].max() <= u1
            assert uv[:, 1].min() >= v0 and uv[:, 1].max() <= v1
            full = np.concatenate([
                transform_cloud(
                    complete_object(scene.templates[oid],
                                    scene.object_poses[oid][s3.start_frame - 1]),
                    T).points
                for oid in sorted(s3.target)])
            fuv = pframe.to_uv(full)
            assert fuv[:, 0].min() >= u0 - 0.02 and fuv[:, 0].max() <= u1 + 0.02
            assert fuv[:, 1].min() >= v0 - 0.02 and fuv[:, 1].max() <= v1 + 0.02

    def test_clearance_respected(self):
        # a second, untouched object must keep its distance from placements
        spec = press_scene(spacing=0.005)
        prims = spec.primitives + (
            PrimitiveSpec(id=2, kind="box", size=(0.06, 0.06, 0.05),
                          color=(40, 160, 60), x=-0.10, y=0.05),)
        spec = replace(spec, primitives=prims)
        demo, tracking, ann, _ = make_scene(spec, seed=0)
        scene = parse_scene(demo, tracking)
        plane = fit_table_plane(scene.environment)
        pframe = PlaneFrame.build(plane, scene.environment.points.mean(axis=0))
        cfg = small_cfg()
        s1 = skills(ann)[0]
        static_hull = MultiPoint(
            pframe.to_uv(_object_points(scene, 2, s1.start_frame))).convex_hull
        moved_src = _object_points(scene, 1, s1.start_frame)
        for seed in range(12):
            plan = sample_plan(scene, ann, cfg, plane, pframe, seed, 1)
            T = plan.skill_transforms[0]
            hull = MultiPoint(
                pframe.to_uv(moved_src @ T[:3, :3].T + T[:3, 3])).convex_hull
            assert hull.distance(static_hull) > cfg.sampler.clearance - 1e-3

    def test_exhaustion(self, bridge_setup):
        scene, ann, plane, pframe = bridge_setup
        tiny = SamplerConfig(workspace=((-0.01, 0.01), (-0.01, 0.01)),
                             max_attempts=25)
        cfg = GeneratorConfig(env_count=1, object_count=1, perturb_count=1,
                              sampler=tiny, camera_aware=False)
        with pytest.raises(SamplingExhausted):
            sample_plan(scene, ann, cfg, plane, pframe, 0, 1)

    def test_perturbed_siblings_near_shared_base(self, press_setup):
        scene, ann, plane, pframe = press_setup
        cfg = GeneratorConfig(env_count=1, object_count=1, perturb_count=3,
                              sampler=SamplerConfig(
                                  workspace=((-0.22, 0.22), (-0.16, 0.16)),
                                  rotation_range=0.7),
                              camera_aware=False)
        t1 = skills(ann)[0].start_frame
        pivot_uv = pframe.to_uv(_object_points(scene, 1, t1)).mean(axis=0)
        p3 = pframe.to_world(pivot_uv)[0]
        images = []
        for p in range(3):
            plan = sample_plan(scene, ann, cfg, plane, pframe, 4, 1 + p)
            T = plan.skill_transforms[0]
            images.append(pframe.to_uv((T[:3, :3] @ p3 + T[:3, 3])[None])[0])
        # all three share the base destination, each jiggled by at most the
        # perturbation radius, so pairwise spread is at most twice that
        limit = 2 * cfg.sampler.perturb_translation + 1e-9
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.linalg.norm(images[i] - images[j]) <= limit
        assert any(np.linalg.norm(images[i] - images[0]) > 1e-6
                   for i in (1, 2))

    def test_zero_perturbation_siblings_identical(self, press_setup):
        scene, ann, plane, pframe = press_setup
        sampler = SamplerConfig(workspace=((-0.22, 0.22), (-0.16, 0.16)),
                                rotation_range=0.7, perturb_translation=0.0,
                                perturb_rotation=0.0)
        cfg = GeneratorConfig(env_count=1, object_count=1, perturb_count=2,
                              sampler=sampler, camera_aware=False)
        a = sample_plan(scene, ann, cfg, plane, pframe, 9, 1)
        b = sample_plan(scene, ann, cfg, plane, pframe, 9, 2)
        assert np.array_equal(a.skill_transforms[0], b.skill_transforms[0])

    def test_zero_env_ranges_give_identity(self, press_setup):
        scene, ann, plane, pframe = press_setup
        sampler = SamplerConfig(workspace=((-0.22, 0.22), (-0.16, 0.16)),
                                env_translation=0.0, env_rotation=0.0)
        cfg = GeneratorConfig(env_count=2, object_count=1, perturb_count=1,
                              sampler=sampler, camera_aware=False)
        plan = sample_plan(scene, ann, cfg, plane, pframe, 0, 1)
        assert np.array_equal(plan.env_transform, np.eye(4))

    def test_grid_mode_hits_cell_centers(self, press_setup):
        scene, ann, plane, pframe = press_setup
        sampler = SamplerConfig(workspace=((-0.2, 0.2), (-0.12, 0.12)),
                                rotation_range=0.0, perturb_translation=0.0,
                                perturb_rotation=0.0, grid=(4, 2))
        cfg = GeneratorConfig(env_count=1, object_count=8, perturb_count=1,
                              sampler=sampler, camera_aware=False)
        t1 = skills(ann)[0].start_frame
        pivot_uv = pframe.to_uv(_object_points(scene, 1, t1)).mean(axis=0)
        p3 = pframe.to_world(pivot_uv)[0]
        centers = {(u, v): np.array([-0.2 + (u + 0.5) * 0.1,
                                     -0.12 + (v + 0.5) * 0.12])
                   for u in range(4) for v in range(2)}
        seen = set()
        for n in range(8):
            plan = sample_plan(scene, ann, cfg, plane, pframe, 0, n + 1)
            T = plan.skill_transforms[0]
            dest = pframe.to_uv((T[:3, :3] @ p3 + T[:3, 3])[None])[0]
            cell = min(centers, key=lambda c: np.linalg.norm(dest - centers[c]))
            assert np.linalg.norm(dest - centers[cell]) < 1e-6
            seen.add(cell)
        assert seen == set(centers)

    def test_indices_roundtrip(self):
        cfg = GeneratorConfig(env_count=3, object_count=16, perturb_count=3)
        assert cfg.total == 144
        seen = {cfg.indices(i) for i in range(1, 145)}
        assert len(seen) == 144
        assert cfg.indices(1) == (0, 0, 0)
        assert cfg.indices(144) == (2, 15, 2)

    def test_plan_roundtrip(self, press_setup):
        scene, ann, plane, pframe = press_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 1, 1)
        back = DemoPlan.from_dict(plan.to_dict())
        assert np.array_equal(back.env_transform, plan.env_transform)
        for x, y in zip(back.skill_transforms, plan.skill_transforms):
            assert np.array_equal(x, y)
        assert back.augmentable == plan.augmentable


class TestSynthesis:
    def test_segments_alternate_and_skills_keep_length(self, press_setup):
        scene, ann, plane, pframe = press_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 0, 1)
        demo, gann = synthesize_demo(scene, ann, plan, plane=plane)
        kinds = [s.kind for s in gann.segments]
        assert kinds == ["motion", "skill"]
        assert gann.segments[1].length == skills(ann)[0].length
        assert demo.horizon == gann.horizon
        s_src, s_gen = skills(ann)[0], skills(gann)[0]
        assert s_gen.target == s_src.target and s_gen.hands == s_src.hands

    def test_motion_endpoints_bitwise(self, bridge_setup):
        scene, ann, plane, pframe = bridge_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 3, 1)
        demo, gann = synthesize_demo(scene, ann, plan, plane=plane)
        acts = demo.actions()
        for m, s in zip(motions(gann), skills(gann)):
            for a in range(demo.arm_count):
                assert np.array_equal(acts[m.end_frame - 1].ee[a],
                                      acts[s.start_frame - 1].ee[a])
            if m.start_frame > 1:
                prev = gann.segment_at(m.start_frame - 1)
                for a in range(demo.arm_count):
                    assert np.array_equal(acts[m.start_frame - 1].ee[a],
                                          acts[prev.end_frame - 1].ee[a])

    def test_first_frame_ee_is_source_home(self, press_setup):
        scene, ann, plane, pframe = press_setup
        sampler = SamplerConfig(workspace=((-0.22, 0.22), (-0.16, 0.16)),
                                rotation_range=0.7, env_translation=0.0,
                                env_rotation=0.0)
        cfg = GeneratorConfig(env_count=1, object_count=1, perturb_count=1,
                              sampler=sampler, camera_aware=False)
        plan = sample_plan(scene, ann, cfg, plane, pframe, 0, 1)
        demo, _ = synthesize_demo(scene, ann, plan, plane=plane)
        assert np.array_equal(demo.actions()[0].ee[0],
                              scene.demo.actions()[0].ee[0])

    def test_object_lands_where_planned(self, press_setup):
        scene, ann, plane, pframe = press_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 6, 1)
        demo, gann = synthesize_demo(scene, ann, plan, plane=plane)
        t_gen = skills(gann)[0].start_frame
        t_src = skills(ann)[0].start_frame
        T = plan.env_transform @ plan.skill_transforms[0]
        src = complete_object(scene.templates[1],
                              scene.object_poses[1][t_src - 1])
        want = transform_cloud(src, T)
        obs = demo.observations()[t_gen - 1]
        got = obs.points[obs.labels == 1]
        assert got.shape == want.points.shape
        assert np.abs(got - want.points).max() < 1e-9

    def test_group_rigidity_bridge(self, bridge_setup):
        scene, ann, plane, pframe = bridge_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 11, 1)
        demo, gann = synthesize_demo(scene, ann, plan, plane=plane)
        t_gen = skills(gann)[2].start_frame
        t_src = skills(ann)[2].start_frame
        obs = demo.observations()[t_gen - 1]
        fits = {}
        for oid in (1, 2, 3):
            src = complete_object(scene.templates[oid],
                                  scene.object_poses[oid][t_src - 1]).points
            got = obs.points[obs.labels == oid]
            fits[oid] = rigid_fit(src, got)
        for oid in (2, 3):
            assert np.abs(fits[oid] - fits[1]).max() < 1e-9
        planned = plan.env_transform @ plan.skill_transforms[2]
        assert np.abs(fits[1] - planned).max() < 1e-6

    def test_grip_transitions_preserved_per_skill(self, bridge_setup):
        scene, ann, plane, pframe = bridge_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 8, 1)
        demo, gann = synthesize_demo(scene, ann, plan, plane=plane)

        def transitions(d, seg):
            acts = d.actions()
            out = []
            for t in range(seg.start_frame, seg.end_frame):
                g0, g1 = acts[t - 1].grip[0], acts[t].grip[0]
                if g0 != g1:
                    out.append((g0, g1))
            return out

        for s_src, s_gen in zip(skills(ann), skills(gann)):
            assert transitions(scene.demo, s_src) == transitions(demo, s_gen)

    def test_env_moves_with_env_transform(self, press_setup):
        scene, ann, plane, pframe = press_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 2, 1)
        demo, _ = synthesize_demo(scene, ann, plan, plane=plane)
        obs = demo.observations()[0]
        env_got = obs.points[obs.labels == 0]
        env_want = transform_cloud(scene.environment,
                                   plan.env_transform).points
        assert np.abs(env_got - env_want).max() < 1e-9

    def test_held_object_rides_planned_motion(self, bimanual_setup):
        scene, ann, plane, pframe = bimanual_setup
        plan = sample_plan(scene, ann, small_cfg(), plane, pframe, 1, 1)
        gen, gann = synthesize_demo(scene, ann, plan, plane=plane)
        carry = motions(gann)[1]
        acts = gen.actions()
        t_anchor = motions(ann)[1].start_frame
        rel = (pose_inverse(scene.demo.actions()[t_anchor - 1].ee[0])
               @ scene.object_poses[1][t_anchor - 1])
        for t in (carry.start_frame,
                  (carry.start_frame + carry.end_frame) // 2,
                  carry.end_frame):
            obs = gen.observations()[t - 1]
            got = obs.points[obs.labels == 1]
            want = complete_object(scene.templates[1],
                                   acts[t - 1].ee[0] @ rel).points
            assert got.shape == want.shape
            assert np.abs(got - want).max() < 1e-8


@pytest.fixture(scope="module")
def gen_bimanual(bimanual_setup):
    scene, ann, plane, pframe = bimanual_setup
    gen, gann, _ = generate_one(scene, ann, small_cfg(), seed=2, index=1,
                                plane=plane, pframe=pframe)
    return gen, gann


class TestBimanual:
    def test_constraint_passes(self, gen_bimanual):
        gen, gann = gen_bimanual
        check_bimanual_constraint(gen, gann)

    def test_relative_pose_constant_through_carry(self, gen_bimanual):
        gen, gann = gen_bimanual
        carry = motions(gann)[1]
        acts = gen.actions()
        base = pose_inverse(acts[carry.start_frame - 1].ee[0]) \
            @ acts[carry.start_frame - 1].ee[1]
        for t in range(carry.start_frame, carry.end_frame + 1):
            rel = pose_inverse(acts[t - 1].ee[0]) @ acts[t - 1].ee[1]
            assert np.abs(rel - base).max() < 1e-9

    def test_seeded_fault_detected(self, gen_bimanual):
        gen, gann = gen_bimanual
        carry = motions(gann)[1]
        t_bad = (carry.start_frame + carry.end_frame) // 2
        frames = list(gen.frames)
        obs, act = frames[t_bad - 1]
        bad_ee = act.ee[1].copy()
        bad_ee[:3, 3] += np.array([0.004, 0.0, 0.0])
        frames[t_bad - 1] = (obs, Action((act.ee[0], bad_ee), act.grip))
        broken = Demonstration(camera=gen.camera, frames=tuple(frames))
        with pytest.raises(ConstraintViolation) as err:
            check_bimanual_constraint(broken, gann)
        assert err.value.frame == t_bad

    def test_single_arm_is_exempt(self, press_setup):
        scene, ann, _, _ = press_setup
        check_bimanual_constraint(scene.demo, ann)


@pytest.fixture(scope="module")
def press_fine():
    demo, tracking, ann, _ = make_scene(press_scene(), seed=0)
    scene = parse_scene(demo, tracking)
    return scene, ann


class TestProcessing:
    def test_effective_camera_and_determinism(self, press_fine):
        scene, ann = press_fine
        cfg = GeneratorConfig(
            env_count=1, object_count=1, perturb_count=1,
            sampler=SamplerConfig(workspace=((-0.22, 0.22), (-0.16, 0.16)),
                                  rotation_range=0.7),
            camera_aware=True)
        a, _, _ = generate_one(scene, ann, cfg, seed=1, index=1)
        b, _, _ = generate_one(scene, ann, cfg, seed=1, index=1)
        assert a.effective_camera is not None
        assert a.effective_camera.width < a.camera.width
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa[0].points, fb[0].points)
            assert np.array_equal(fa[1].ee[0], fb[1].ee[0])

    def test_processed_points_come_from_raw_frames(self, press_fine):
        # shrink mode only ever discards points, never invents them
        scene, ann = press_fine
        raw, gann, _ = generate_one(scene, ann, small_cfg(), seed=3, index=1)
        short = Demonstration(camera=raw.camera, frames=raw.frames[:3])
        done = process_demo(short, scene.nonrigid_ids, ProcessorConfig())
        for t in range(3):
            obs_raw = short.observations()[t]
            obs_done = done.observations()[t]
            assert 0 < len(obs_done) <= len(obs_raw)
            d, _ = cKDTree(obs_raw.points).query(obs_done.points)
            assert d.max() < 1e-9
