"""Command-line pipeline driver.

Subcommands mirror the processing flow: synth a scripted scene, parse the
capture, annotate it (HTTP service for the UI), generate the augmented
dataset, process frames for capture consistency, validate the output, and
inspect any demo as depth images. Every subcommand accepts --print-config,
which echoes the fully resolved configuration as YAML and exits without
running, so any run can be reproduced from its echo.

Exit codes: 0 success, 1 failure (validation or module error), 2 usage.
"""

from __future__ import annotations

import functools
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import yaml
from PIL import Image

from .annotations import write_annotation
from .augment import (
    GeneratorConfig,
    generate_dataset,
    generator_config_from_dict,
    generator_config_to_dict,
    process_demo,
)
from .camera import ProcessorConfig, crop, min_depth_grid, project
from .container import (
    load_demonstration,
    load_tracking_input,
    save_demonstration,
    save_parsed_scene,
    save_tracking_input,
)
from .errors import PcdgenError
from .parsing import parse_scene
from .synth import PRESETS, make_scene, spec_from_dict
from .validate import report_ndjson, validate_dataset


def _fail_on_module_error(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except PcdgenError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(1)
    return wrapper


def _echo_config(resolved: dict) -> None:
    click.echo(yaml.safe_dump(resolved, sort_keys=True).rstrip())


def _write_depth_png(path: Path, depth: np.ndarray) -> None:
    # depth in meters; stored as millimeters, 16-bit; 0 = no return
    mm = np.where(np.isfinite(depth) & (depth > 0), depth * 1000.0, 0.0)
    Image.fromarray(np.clip(mm, 0, 65535).astype(np.uint16)).save(path)


@click.group()
def main():
    """Point-cloud robot demonstration generation toolkit."""


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
              help="scene spec YAML")
@click.option("--preset", type=click.Choice(sorted(PRESETS)),
              help="built-in scene instead of --spec")
@click.option("--spacing", type=float, default=None,
              help="override surface sample spacing (m)")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--print-config", is_flag=True)
@_fail_on_module_error
def synth(spec_path, preset, spacing, out_dir, seed, print_config):
    """Generate a synthetic capture: demo, tracking, annotation, frames."""
    if (spec_path is None) == (preset is None):
        raise click.UsageError("exactly one of --spec / --preset is required")
    if spec_path is not None:
        doc = yaml.safe_load(Path(spec_path).read_text())
        spec = spec_from_dict(doc)
        source = {"spec": doc}
    else:
        spec = PRESETS[preset]()
        source = {"preset": preset}
    if spacing is not None:
        spec = replace(spec, spacing=spacing)
    resolved = {"command": "synth", **source, "spacing": spec.spacing,
                "seed": seed, "out": str(out_dir)}
    if print_config:
        _echo_config(resolved)
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    demo, tracking, ann, depths = make_scene(spec, seed=seed)
    save_demonstration(demo, out / "demo")
    save_tracking_input(tracking, out / "tracking")
    write_annotation(ann, out / "annotation.json")
    frame_dir = out / "frames"
    frame_dir.mkdir(exist_ok=True)
    for i, depth in enumerate(depths, start=1):
        _write_depth_png(frame_dir / f"frame_{i:06d}.png", depth)
    click.echo(f"synthesized {demo.horizon} frames, "
               f"{len(tracking.templates)} objects -> {out}")


@main.command()
@click.option("--demo", "demo_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--tracking", "tracking_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--print-config", is_flag=True)
@_fail_on_module_error
def parse(demo_dir, tracking_dir, out_dir, print_config):
    """Decompose a capture into environment, objects and arm."""
    resolved = {"command": "parse", "demo": str(demo_dir),
                "tracking": str(tracking_dir), "out": str(out_dir)}
    if print_config:
        _echo_config(resolved)
        return
    demo = load_demonstration(Path(demo_dir))
    tracking = load_tracking_input(Path(tracking_dir))
    scene = parse_scene(demo, tracking)
    save_parsed_scene(scene, Path(out_dir))
    click.echo(f"parsed scene: {len(scene.object_ids)} objects "
               f"({len(scene.nonrigid_ids)} non-rigid), "
               f"{scene.demo.horizon} frames -> {out_dir}")


@main.command()
@click.option("--frames", "frame_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--frontend", "frontend_dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="static UI directory to serve at /")
@click.option("--print-config", is_flag=True)
@_fail_on_module_error
def annotate(frame_dir, out_path, port, host, frontend_dir, print_config):
    """Serve the annotation API (and optionally the UI) until interrupted."""
    resolved = {"command": "annotate", "frames": str(frame_dir),
                "out": str(out_path), "port": port, "host": host,
                "frontend": str(frontend_dir) if frontend_dir else None}
    if print_config:
        _echo_config(resolved)
        return
    from .service import serve_annotation_api

    click.echo(f"serving annotation API on http://{host}:{port}")
    serve_annotation_api(Path(frame_dir), Path(out_path), port,
                         frontend_dir=Path(frontend_dir) if frontend_dir
                         else None, host=host)


def _load_generator_config(config_path, env_count, object_count,
                           perturb_count, camera_aware) -> GeneratorConfig:
    doc = {}
    if config_path is not None:
        doc = yaml.safe_load(Path(config_path).read_text()) or {}
    cfg = generator_config_from_dict(doc)
    if env_count is not None:
        cfg = replace(cfg, env_count=env_count)
    if object_count is not None:
        cfg = replace(cfg, object_count=object_count)
    if perturb_count is not None:
        cfg = replace(cfg, perturb_count=perturb_count)
    if camera_aware is not None:
        cfg = replace(cfg, camera_aware=camera_aware)
    return cfg


@main.command()
@click.option("--scene", "scene_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--annotation", "ann_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, envvar="PCDGEN_JOBS",
              show_default=True, help="worker processes (env: PCDGEN_JOBS)")
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False),
              help="generator config YAML")
@click.option("--env-count", type=int, default=None)
@click.option("--object-count", type=int, default=None)
@click.option("--perturb-count", type=int, default=None)
@click.option("--camera-aware/--no-camera-aware", default=None,
              help="run the capture-consistency pass  [default: on]")
@click.option("--print-config", is_flag=True)
@_fail_on_module_error
def generate(scene_dir, ann_path, out_dir, seed, jobs, config_path,
             env_count, object_count, perturb_count, camera_aware,
             print_config):
    """Generate the R x N x P augmented dataset from a parsed scene."""
    cfg = _load_generator_config(config_path, env_count, object_count,
                                 perturb_count, camera_aware)
    resolved = {"command": "generate", "scene": str(scene_dir),
                "annotation": str(ann_path), "out": str(out_dir),
                "seed": seed, "jobs": jobs,
                "config": generator_config_to_dict(cfg)}
    if print_config:
        _echo_config(resolved)
        return
    dirs = generate_dataset(Path(scene_dir), Path(ann_path), Path(out_dir),
                            cfg, seed=seed, jobs=max(jobs, 1))
    skipped = cfg.total - len(dirs)
    note = f" ({skipped} skipped after sampling exhaustion)" if skipped else ""
    click.echo(f"generated {len(dirs)} of {cfg.total} demos{note} -> {out_dir}")


@main.command()
@click.option("--demo", "demo_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--nonrigid", default="", help="comma-separated object ids "
              "exempt from removal")
@click.option("--patch-radius", type=int, default=None)
@click.option("--fill-mode", type=click.Choice(["shrink", "expand"]),
              default=None)
@click.option("--depth-margin", type=float, default=None)
@click.option("--print-config", is_flag=True)
@_fail_on_module_error
def process(demo_dir, out_dir, nonrigid, patch_radius, fill_mode,
            depth_margin, print_config):
    """Run the capture-consistency pass over a saved demonstration."""
    cfg = ProcessorConfig()
    if patch_radius is not None:
        cfg = replace(cfg, patch_radius=patch_radius)
    if fill_mode is not None:
        cfg = replace(cfg, fill_mode=fill_mode)
    if depth_margin is not None:
        cfg = replace(cfg, depth_margin=depth_margin)
    ids = frozenset(int(s) for s in nonrigid.split(",") if s.strip())
    resolved = {"command": "process", "demo": str(demo_dir),
                "out": str(out_dir), "nonrigid": sorted(ids),
                "patch_radius": cfg.patch_radius, "fill_mode": cfg.fill_mode,
                "depth_margin": cfg.depth_margin}
    if print_config:
        _echo_config(resolved)
        return
    demo = load_demonstration(Path(demo_dir))
    done = process_demo(demo, ids, cfg)
    save_demonstration(done, Path(out_dir))
    eff = done.effective_camera
    cam = f"effective camera {eff.width}x{eff.height}" if eff else "camera unchanged"
    click.echo(f"processed {done.horizon} frames, {cam} -> {out_dir}")


@main.command()
@click.option("--scene", "scene_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--annotation", "ann_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--report", "report_path", type=click.Path(dir_okay=False),
              default=None, help="also write the NDJSON report to a file")
@click.option("--print-config", is_flag=True)
@_fail_on_module_error
def validate(scene_dir, ann_path, data_dir, report_path, print_config):
    """Re-check a generated dataset; one JSON report line per check."""
    resolved = {"command": "validate", "scene": str(scene_dir),
                "annotation": str(ann_path), "data": str(data_dir),
                "report": report_path}
    if print_config:
        _echo_config(resolved)
        return
    ok, lines = validate_dataset(Path(scene_dir), Path(ann_path),
                                 Path(data_dir))
    text = report_ndjson(lines)
    click.echo(text.rstrip())
    if report_path:
        Path(report_path).write_text(text)
    if not ok:
        sys.exit(1)


@main.command()
@click.option("--demo", "demo_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--print-config", is_flag=True)
@_fail_on_module_error
def inspect(demo_dir, out_dir, print_config):
    """Project every frame of a demo to a depth image for eyeballing."""
    resolved = {"command": "inspect", "demo": str(demo_dir),
                "out": str(out_dir)}
    if print_config:
        _echo_config(resolved)
        return
    demo = load_demonstration(Path(demo_dir))
    cam = demo.effective_camera or demo.camera
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, obs in enumerate(demo.observations(), start=1):
        grid = min_depth_grid(crop(project(obs, cam), cam),
                              (cam.height, cam.width))
        _write_depth_png(out / f"frame_{i:06d}.png", grid)
    click.echo(f"wrote {demo.horizon} depth images "
               f"({cam.width}x{cam.height}) -> {out}")


if __name__ == "__main__":
    main()
