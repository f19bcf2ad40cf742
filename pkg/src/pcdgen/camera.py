"""Camera-aware processing: project, crop, patch z-buffer, fill, back-project.

Augmented scenes are over-complete: they contain surface points a real RGB-D
camera could never have seen from its fixed viewpoint (backsides revealed by
rotations, points hidden behind moved objects, empty image bands where the
environment shifted away). This module restores single-viewpoint statistics
by pushing every point through the image plane and keeping only what a depth
sensor would have returned.

Occlusion semantics: a point p is removed iff some other input point q
projects within ``patch_radius`` cells of p's cell (Chebyshev metric on
``floor(u), floor(v)`` by default) with depth smaller than ``d_p - margin``.
The occluder set is the full cropped input, not the survivor set, which makes
the rule order-free and idempotent. Bypass-flagged points (non-rigid objects)
are exempt from removal and cropping but still occlude; they are unioned back
verbatim after back-projection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import FillInfeasible, InvariantViolation
from .model import CameraModel, PointCloud


@dataclass(frozen=True)
class PixelSet:
    """Projected points: continuous pixel coords, depth, provenance."""

    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    src: np.ndarray      # index into the cloud these pixels came from
    bypass: np.ndarray   # exempt from removal and cropping

    def __post_init__(self):
        n = len(self.u)
        for name in ("u", "v", "d"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if len(arr) != n:
                raise InvariantViolation("pixel set: ragged arrays")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        src = np.ascontiguousarray(self.src, dtype=np.int64)
        byp = np.ascontiguousarray(self.bypass, dtype=bool)
        if len(src) != n or len(byp) != n:
            raise InvariantViolation("pixel set: ragged arrays")
        src.flags.writeable = False
        byp.flags.writeable = False
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "bypass", byp)

    def __len__(self) -> int:
        return len(self.u)

    def select(self, mask: np.ndarray) -> "PixelSet":
        return PixelSet(self.u[mask], self.v[mask], self.d[mask],
                        self.src[mask], self.bypass[mask])

    def cells(self) -> tuple[np.ndarray, np.ndarray]:
        return np.floor(self.u).astype(np.int64), np.floor(self.v).astype(np.int64)

    @staticmethod
    def empty() -> "PixelSet":
        z = np.zeros(0)
        return PixelSet(z, z, z, np.zeros(0, dtype=np.int64),
                        np.zeros(0, dtype=bool))

    @staticmethod
    def concat(parts) -> "PixelSet":
        parts = list(parts)
        return PixelSet(np.concatenate([p.u for p in parts]),
                        np.concatenate([p.v for p in parts]),
                        np.concatenate([p.d for p in parts]),
                        np.concatenate([p.src for p in parts]),
                        np.concatenate([p.bypass for p in parts]))


@dataclass(frozen=True)
class ProcessorConfig:
    patch_radius: int = 2
    fill_mode: str = "shrink"
    depth_margin: float = 0.005
    metric: str = "chebyshev"
    min_shrink: int = 32

    def __post_init__(self):
        if self.patch_radius < 0:
            raise InvariantViolation("patch radius must be >= 0")
        if self.fill_mode not in ("shrink", "expand"):
            raise InvariantViolation(f"unknown fill mode {self.fill_mode!r}")
        if self.metric not in ("chebyshev", "euclidean"):
            raise InvariantViolation(f"unknown metric {self.metric!r}")
        if self.depth_margin < 0:
            raise InvariantViolation("depth margin must be >= 0")


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------

def project(cloud: PointCloud, cam: CameraModel,
            bypass: Optional[np.ndarray] = None) -> PixelSet:
    """Pinhole projection; points at or behind the camera plane are dropped."""
    pts = cloud.points
    z = pts[:, 2]
    keep = z > 0
    if bypass is None:
        bypass = np.zeros(len(pts), dtype=bool)
    src = np.flatnonzero(keep)
    x, y, z = pts[keep, 0], pts[keep, 1], pts[keep, 2]
    return PixelSet(u=cam.fx * x / z + cam.cx,
                    v=cam.fy * y / z + cam.cy,
                    d=z, src=src, bypass=np.asarray(bypass, dtype=bool)[keep])


def crop(pix: PixelSet, cam: CameraModel) -> PixelSet:
    """Drop pixels outside the image rectangle or the valid depth range.

    Applies to bypass pixels too: off-image pixels cannot occlude anything,
    and bypass 3D points rejoin the output verbatim regardless.
    """
    inside = ((pix.u >= 0) & (pix.u < cam.width)
              & (pix.v >= 0) & (pix.v < cam.height)
              & (pix.d >= cam.depth_min) & (pix.d <= cam.depth_max))
    return pix.select(inside)


def backproject(pix: PixelSet, cam: CameraModel,
                source: Optional[PointCloud] = None) -> PointCloud:
    """Invert the pinhole map; colors/labels pulled from ``source`` by index."""
    x = (pix.u - cam.cx) * pix.d / cam.fx
    y = (pix.v - cam.cy) * pix.d / cam.fy
    pts = np.stack([x, y, pix.d], axis=1)
    colors = labels = None
    if source is not None and len(pix):
        if source.colors is not None:
            colors = source.colors[pix.src]
        if source.labels is not None:
            labels = source.labels[pix.src]
    return PointCloud(pts, colors, labels)


# ---------------------------------------------------------------------------
# Patch z-buffer
# ---------------------------------------------------------------------------

def _footprint(r: int, metric: str) -> np.ndarray:
    span = np.arange(-r, r + 1)
    if metric == "chebyshev":
        return np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    return dy * dy + dx * dx <= r * r


def min_depth_grid(pix: PixelSet, shape: tuple[int, int]) -> np.ndarray:
    """Per-cell minimum depth over all pixels; +inf where empty."""
    grid = np.full(shape, np.inf)
    if len(pix):
        cu, cv = pix.cells()
        np.minimum.at(grid, (cv, cu), pix.d)
    return grid


def zbuffer_patch(pix: PixelSet, cfg: ProcessorConfig) -> PixelSet:
    """Keep each pixel unless a strictly closer one sits within the patch.

    All cropped input pixels act as occluders, including ones that are
    themselves removed and including bypass-flagged ones.
    """
    if len(pix) == 0:
        return pix
    cu, cv = pix.cells()
    if cu.min() < 0 or cv.min() < 0:
        raise InvariantViolation("z-buffer input must be cropped first")
    shape = (int(cv.max()) + 1, int(cu.max()) + 1)
    grid = min_depth_grid(pix, shape)
    if cfg.patch_radius > 0:
        grid = ndimage.minimum_filter(
            grid, footprint=_footprint(cfg.patch_radius, cfg.metric),
            mode="constant", cval=np.inf)
    neighborhood_min = grid[cv, cu]
    keep = (neighborhood_min >= pix.d - cfg.depth_margin) | pix.bypass
    return pix.select(keep)


# ---------------------------------------------------------------------------
# Fill
# ---------------------------------------------------------------------------

def coverage_mask(env_pix: PixelSet, cam: CameraModel) -> np.ndarray:
    """Boolean (H, W) grid: which cells the environment projects into."""
    mask = np.zeros((cam.height, cam.width), dtype=bool)
    if len(env_pix):
        cu, cv = env_pix.cells()
        ok = (cu >= 0) & (cu < cam.width) & (cv >= 0) & (cv < cam.height)
        mask[cv[ok], cu[ok]] = True
    return mask


def largest_full_rect(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Largest axis-aligned all-True rectangle, as (u0, v0, width, height).

    Histogram-of-heights sweep with a monotonic stack; ties resolved by scan
    order, so the result is deterministic.
    """
    h, w = mask.shape
    heights = np.zeros(w + 1, dtype=np.int64)
    best_area = 0
    best = (0, 0, 0, 0)
    for row in range(h):
        heights[:w] = np.where(mask[row], heights[:w] + 1, 0)
        stack: list[tuple[int, int]] = []
        for i in range(w + 1):
            cur = int(heights[i])
            start = i
            while stack and stack[-1][1] > cur:
                s, ht = stack.pop()
                area = ht * (i - s)
                if area > best_area:
                    best_area = area
                    best = (s, row - ht + 1, i - s, ht)
                start = s
            if cur > 0 and (not stack or stack[-1][1] < cur):
                stack.append((start, cur))
    return best


def apply_rect(pix: PixelSet, cam: CameraModel,
               rect: tuple[int, int, int, int]) -> tuple[PixelSet, CameraModel]:
    """Crop pixels to ``rect`` and shift the camera model accordingly."""
    u0, v0, w, h = rect
    keep = ((pix.u >= u0) & (pix.u < u0 + w)
            & (pix.v >= v0) & (pix.v < v0 + h)) | pix.bypass
    kept = pix.select(keep)
    shifted = PixelSet(kept.u - u0, kept.v - v0, kept.d, kept.src, kept.bypass)
    eff = replace(cam, width=w, height=h, cx=cam.cx - u0, cy=cam.cy - v0)
    return shifted, eff


def shrink_fill(pix: PixelSet, cam: CameraModel, cfg: ProcessorConfig,
                env_pix: PixelSet,
                rect: Optional[tuple[int, int, int, int]] = None
                ) -> tuple[PixelSet, CameraModel]:
    if rect is None:
        rect = largest_full_rect(coverage_mask(env_pix, cam))
    u0, v0, w, h = rect
    if w < cfg.min_shrink or h < cfg.min_shrink:
        raise FillInfeasible(
            f"shrink rectangle {w}x{h} below minimum "
            f"{cfg.min_shrink}x{cfg.min_shrink}")
    if rect == (0, 0, cam.width, cam.height):
        return pix, cam
    return apply_rect(pix, cam, rect)


def expand_fill(pix: PixelSet, cam: CameraModel,
                env_pix: PixelSet) -> tuple[PixelSet, CameraModel]:
    """Synthesize environment pixels for cells nothing projects into.

    Each fully-empty cell copies the depth (and source index, hence color and
    label) of its nearest environment-covered cell, extending the visible
    environment out to the image border.
    """
    covered = coverage_mask(env_pix, cam)
    present = np.zeros_like(covered)
    if len(pix):
        cu, cv = pix.cells()
        ok = (cu >= 0) & (cu < cam.width) & (cv >= 0) & (cv < cam.height)
        present[cv[ok], cu[ok]] = True
    empty = ~present
    if not covered.any() or not empty.any():
        return pix, cam
    # nearest covered env cell for every cell of the image
    _, (iv, iu) = ndimage.distance_transform_edt(~covered, return_indices=True)
    # donor depth and source index per covered cell (closest surface wins)
    depth = np.full((cam.height, cam.width), np.inf)
    donor = np.full((cam.height, cam.width), -1, dtype=np.int64)
    ecu, ecv = env_pix.cells()
    ok = (ecu >= 0) & (ecu < cam.width) & (ecv >= 0) & (ecv < cam.height)
    flat = ecv[ok] * cam.width + ecu[ok]
    d_ok, s_ok = env_pix.d[ok], env_pix.src[ok]
    order = np.lexsort((d_ok, flat))
    lead = np.ones(len(order), dtype=bool)
    lead[1:] = flat[order][1:] != flat[order][:-1]
    depth.flat[flat[order][lead]] = d_ok[order][lead]
    donor.flat[flat[order][lead]] = s_ok[order][lead]
    fv, fu = np.nonzero(empty)
    dv, du = iv[fv, fu], iu[fv, fu]
    synth = PixelSet(u=fu + 0.5, v=fv + 0.5, d=depth[dv, du],
                     src=donor[dv, du],
                     bypass=np.zeros(len(fu), dtype=bool))
    return PixelSet.concat([pix, synth]), cam


def fill(pix: PixelSet, cam: CameraModel, cfg: ProcessorConfig,
         env_pix: PixelSet,
         rect: Optional[tuple[int, int, int, int]] = None
         ) -> tuple[PixelSet, CameraModel]:
    if cfg.fill_mode == "shrink":
        return shrink_fill(pix, cam, cfg, env_pix, rect)
    return expand_fill(pix, cam, env_pix)


# ---------------------------------------------------------------------------
# Full per-frame pipeline
# ---------------------------------------------------------------------------

def process_frame(cloud: PointCloud, cam: CameraModel, cfg: ProcessorConfig,
                  bypass: Optional[np.ndarray] = None,
                  env_mask: Optional[np.ndarray] = None,
                  rect: Optional[tuple[int, int, int, int]] = None
                  ) -> tuple[PointCloud, CameraModel]:
    """Back-project(Fill(Z-buffer(Crop(project(cloud))))).

    ``env_mask`` marks the points whose projection counts as environment
    coverage for fill (default: label 0 when labels exist, else every point).
    ``rect`` short-circuits the per-frame shrink rectangle with a dataset-wide
    one. Bypass points skip crop and removal and are unioned back verbatim.
    """
    if bypass is None:
        bypass = np.zeros(len(cloud), dtype=bool)
    bypass = np.asarray(bypass, dtype=bool)
    pix = crop(project(cloud, cam, bypass), cam)
    env_pix = crop(project(_env_part(cloud, env_mask), cam), cam)
    surv = zbuffer_patch(pix, cfg)
    surv = surv.select(~surv.bypass)
    if len(surv) == 0 and not bypass.any():
        return PointCloud(np.zeros((0, 3)),
                          None if cloud.colors is None else np.zeros((0, 3), np.uint8),
                          None if cloud.labels is None else np.zeros(0, np.uint16)), cam
    filled, eff = fill(surv, cam, cfg, env_pix, rect)
    out = backproject(filled, eff, source=cloud)
    if bypass.any():
        out = PointCloud.concat([out, cloud.select(bypass)])
    return out, eff


def _env_part(cloud: PointCloud, env_mask: Optional[np.ndarray]) -> PointCloud:
    if env_mask is not None:
        return cloud.select(np.asarray(env_mask, dtype=bool))
    if cloud.labels is not None:
        return cloud.select(cloud.labels == 0)
    return cloud
