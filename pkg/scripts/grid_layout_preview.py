"""Show where grid-mode placement parks the augmented skill group.

Samples one plan per demo index with an (nu x nv) destination grid and plots
the planned group centroids in table coordinates as ASCII, to eyeball the
coverage the dataset will have.
"""

import argparse
import sys

import numpy as np

from pcdgen.annotations import skills
from pcdgen.augment import GeneratorConfig, SamplerConfig, sample_plan
from pcdgen.parsing import complete_object, parse_scene
from pcdgen.plane import PlaneFrame, fit_table_plane
from pcdgen.synth import PRESETS, make_scene


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", choices=sorted(PRESETS), default="press")
    ap.add_argument("--grid", type=int, nargs=2, default=(4, 2),
                    metavar=("NU", "NV"))
    ap.add_argument("--spacing", type=float, default=0.008)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    demo, tracking, ann, _ = make_scene(PRESETS[args.preset](spacing=args.spacing),
                                        seed=0)
    scene = parse_scene(demo, tracking)
    plane = fit_table_plane(scene.environment)
    pframe = PlaneFrame.build(plane, scene.environment.points.mean(axis=0))

    nu, nv = args.grid
    workspace = ((-0.22, 0.22), (-0.16, 0.16))
    cfg = GeneratorConfig(
        env_count=1, object_count=nu * nv, perturb_count=1,
        sampler=SamplerConfig(workspace=workspace, rotation_range=0.7,
                              env_translation=0.0, env_rotation=0.0,
                              grid=(nu, nv)),
        camera_aware=False)

    # centroid of the last augmentable skill's group, before augmentation
    aug = [i for i, s in enumerate(skills(ann)) if s.group]
    primary = aug[-1]
    seg = skills(ann)[primary]
    src = np.concatenate([
        complete_object(scene.templates[oid],
                        scene.object_poses[oid][seg.start_frame - 1]).points
        for oid in sorted(seg.group)])
    centroid = src.mean(axis=0)

    dests = []
    for index in range(1, cfg.total + 1):
        plan = sample_plan(scene, ann, cfg, plane, pframe,
                           seed=args.seed, index=index)
        T = plan.skill_transforms[primary]
        moved = T[:3, :3] @ centroid + T[:3, 3]
        dests.append(pframe.to_uv(moved[None])[0])
    dests = np.array(dests)

    (u0, u1), (v0, v1) = workspace
    cols, rows = 56, 20
    canvas = [["."] * cols for _ in range(rows)]
    for i, (u, v) in enumerate(dests):
        c = int((u - u0) / (u1 - u0) * (cols - 1))
        r = int((v1 - v) / (v1 - v0) * (rows - 1))
        canvas[r][c] = "0123456789abcdefghijklmnopqrstuvwxyz"[i % 36]
    print(f"planned centroids for skill {primary + 1}, "
          f"{nu}x{nv} grid over u {u0}..{u1}, v {v0}..{v1}:")
    for row in canvas:
        print("".join(row))
    spread = dests.max(axis=0) - dests.min(axis=0)
    print(f"{len(dests)} placements, spread u {spread[0]:.3f} m, "
          f"v {spread[1]:.3f} m")
    return 0


if __name__ == "__main__":
    sys.exit(main())
