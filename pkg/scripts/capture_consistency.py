"""Compare generated captures against fresh renders of the moved scene.

For each seed we augment the press scene (environment held fixed), then
re-render the scene with every object at its planned destination and measure
how well the generated, camera-processed final frame matches that reference:
symmetric chamfer distance and the fraction of reference points with a
generated neighbor within 2x the sampling spacing.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from pcdgen.augment import (
    GeneratorConfig,
    SamplerConfig,
    expected_object_transform,
    generate_one,
)
from pcdgen.metrics import chamfer_distance, matched_fraction
from pcdgen.model import pose_inverse
from pcdgen.parsing import parse_scene
from pcdgen.plane import PlaneFrame, fit_table_plane
from pcdgen.synth import ARM_LABELS, make_scene, press_scene, render_reference


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--spacing", type=float, default=0.0025)
    args = ap.parse_args()

    # keep the vantage near-vertical: on a flat table an oblique view gives
    # per-pixel depth steps above the occlusion margin and the patch filter
    # starts eating the far edge of the table
    spec = replace(press_scene(spacing=args.spacing),
                   camera_pos=(0.0, -0.03, 0.85))
    demo, tracking, ann, _ = make_scene(spec, seed=0)
    scene = parse_scene(demo, tracking)
    plane = fit_table_plane(scene.environment)
    pframe = PlaneFrame.build(plane, scene.environment.points.mean(axis=0))

    cfg = GeneratorConfig(
        env_count=1, object_count=1, perturb_count=1,
        sampler=SamplerConfig(workspace=((-0.22, 0.22), (-0.16, 0.16)),
                              rotation_range=0.7,
                              env_translation=0.0, env_rotation=0.0),
        camera_aware=True)

    view = spec.view_matrix()
    unview = pose_inverse(view)
    tol = 2 * spec.spacing
    print(f"{'seed':>4} {'chamfer[mm]':>12} {'matched':>8} {'gen pts':>8}")
    worst = (0.0, 1.0)
    for seed in range(args.seeds):
        gen, _, plan = generate_one(scene, ann, cfg, seed=seed, index=1,
                                    plane=plane, pframe=pframe)
        poses = {p.id: unview
                 @ expected_object_transform(ann, plan, p.id, ann.horizon)
                 @ view @ p.world_pose()
                 for p in spec.primitives}
        cam = gen.effective_camera or gen.camera
        ref, _ = render_reference(replace(spec, camera=cam), poses,
                                  ee_world=None, seed=0)
        obs = gen.frames[-1][0]
        got = obs.points[~np.isin(obs.labels, ARM_LABELS)]
        cd = chamfer_distance(got, ref.points)
        mf = matched_fraction(ref.points, got, tol=tol)
        worst = (max(worst[0], cd), min(worst[1], mf))
        print(f"{seed:>4} {cd * 1e3:>12.2f} {mf:>8.3f} {len(got):>8}")
    print(f"worst chamfer {worst[0] * 1e3:.2f} mm (limit {tol * 1e3:.1f}), "
          f"worst matched {worst[1]:.3f} (floor 0.95)")
    return 0 if worst[0] <= tol and worst[1] >= 0.95 else 1


if __name__ == "__main__":
    sys.exit(main())
