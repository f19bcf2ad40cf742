"""Table-plane fitting and the in-plane rigid transforms built on top of it.

A plane is stored as (unit normal, offset) with the convention
``normal . p + offset = 0``. The normal is canonicalized to point toward the
camera (negative Z component in the camera frame), so a tabletop at z = 0.8
fits as normal (0, 0, -1), offset 0.8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry
from .model import PointCloud, make_pose, rotation_about_axis

_PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class TablePlane:
    normal: tuple[float, float, float]
    offset: float

    def __iter__(self):
        yield self.normal
        yield self.offset

    @property
    def n(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=np.float64)

    def height(self, points: np.ndarray) -> np.ndarray:
        """Signed distance of points from the plane (0 on the plane)."""
        return np.asarray(points, dtype=np.float64) @ self.n + self.offset

    def project(self, points: np.ndarray) -> np.ndarray:
        """Foot of the perpendicular from each point onto the plane."""
        pts = np.asarray(points, dtype=np.float64)
        return pts - np.outer(self.height(pts), self.n)

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Right-handed in-plane basis (e1, e2) with e1 x e2 = normal.

        e1 follows the camera +X axis projected into the plane when possible,
        so plane coordinates read naturally in image terms.
        """
        n = self.n
        for axis in (np.array([1.0, 0, 0]), np.array([0, 1.0, 0])):
            e1 = axis - (axis @ n) * n
            if np.linalg.norm(e1) > 1e-6:
                e1 = e1 / np.linalg.norm(e1)
                return e1, np.cross(n, e1)
        raise DegenerateGeometry("plane normal is not a unit vector")


@dataclass(frozen=True)
class PlaneFrame:
    """2D coordinate chart on a table plane, anchored at ``origin``."""

    plane: TablePlane
    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    @classmethod
    def build(cls, plane: TablePlane, origin_hint: np.ndarray | None = None) -> "PlaneFrame":
        """Anchor the chart at the projection of ``origin_hint`` (default: the
        foot of the camera origin)."""
        hint = np.zeros(3) if origin_hint is None else np.asarray(origin_hint, float)
        origin = plane.project(hint[None, :])[0]
        e1, e2 = plane.basis()
        return cls(plane=plane, origin=origin, e1=e1, e2=e2)

    def to_world(self, uv: np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
        return self.origin + np.outer(uv[:, 0], self.e1) + np.outer(uv[:, 1], self.e2)

    def to_uv(self, points: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(np.asarray(points, dtype=np.float64)) - self.origin
        return np.stack([d @ self.e1, d @ self.e2], axis=1)


def in_plane_transform(frame: PlaneFrame, shift_uv, angle: float,
                       pivot_uv=(0.0, 0.0)) -> np.ndarray:
    """Rigid transform that slides along the plane and spins about its normal.

    Rotates by ``angle`` about the vertical axis through the pivot, then
    translates by ``shift_uv`` in plane coordinates. Heights above the plane
    are preserved exactly.
    """
    n = frame.plane.n
    shift_uv = np.asarray(shift_uv, dtype=np.float64)
    d = shift_uv[0] * frame.e1 + shift_uv[1] * frame.e2
    c = frame.to_world(np.asarray(pivot_uv, dtype=np.float64))[0]
    rot = make_pose(rotation_about_axis(n, angle))
    return make_pose(translation=d + c) @ rot @ make_pose(translation=-c)


def fit_table_plane(env: PointCloud, *, threshold: float = 0.005,
                    min_inlier_fraction: float = 0.3, iterations: int = 512,
                    seed: int = 0) -> TablePlane:
    """Fit the dominant plane of an environment cloud by random consensus.

    Triplets of points propose candidate planes; the one explaining the most
    points within ``threshold`` wins and is refined by two least-squares
    passes over its inliers. Deterministic for a fixed seed.
    """
    pts = env.points
    n_pts = len(pts)
    if n_pts < 3:
        raise DegenerateGeometry(f"plane fit needs >= 3 points, got {n_pts}")
    rng = np.random.default_rng(seed)
    best_count = 0
    best_mask = None
    scale = max(float(np.max(np.ptp(pts, axis=0))), 1e-9)
    for _ in range(iterations):
        i, j, k = rng.choice(n_pts, 3, replace=False)
        nvec = np.cross(pts[j] - pts[i], pts[k] - pts[i])
        norm = np.linalg.norm(nvec)
        if norm < _PARALLEL_EPS * scale * scale:
            continue  # collinear triplet
        nvec = nvec / norm
        dist = np.abs(pts @ nvec - nvec @ pts[i])
        count = int(np.count_nonzero(dist <= threshold))
        if count > best_count:
            best_count = count
            best_mask = dist <= threshold
    need = max(3, int(np.ceil(min_inlier_fraction * n_pts)))
    if best_mask is None or best_count < need:
        raise DegenerateGeometry(
            f"no plane explains {min_inlier_fraction:.0%} of points "
            f"(best {best_count}/{n_pts})")
    plane = _least_squares_plane(pts[best_mask])
    # one re-selection pass with the refined plane
    mask = np.abs(plane.height(pts)) <= threshold
    if np.count_nonzero(mask) >= 3:
        plane = _least_squares_plane(pts[mask])
    return plane


def _least_squares_plane(pts: np.ndarray) -> TablePlane:
    centroid = pts.mean(axis=0)
    d = pts - centroid
    cov = d.T @ d
    w, v = np.linalg.eigh(cov)
    if w[1] < _PARALLEL_EPS * max(w[2], 1e-30):
        raise DegenerateGeometry("points are collinear")
    normal = v[:, 0]
    normal = _canonicalize(normal)
    offset = -float(normal @ centroid)
    return TablePlane(normal=tuple(normal), offset=offset)


def _canonicalize(normal: np.ndarray) -> np.ndarray:
    nz = normal[2]
    if nz > 0 or (nz == 0 and (normal[0] < 0 or (normal[0] == 0 and normal[1] < 0))):
        return -normal
    return normal
