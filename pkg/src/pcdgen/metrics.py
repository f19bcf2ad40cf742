"""Cloud comparison metrics used by validation and tests."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvariantViolation


def _points(cloud) -> np.ndarray:
    pts = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvariantViolation("metrics: expected an (N, 3) point array")
    return pts


def chamfer_distance(a, b) -> float:
    """Symmetric chamfer: mean of the two directed mean NN distances."""
    pa, pb = _points(a), _points(b)
    if len(pa) == 0 or len(pb) == 0:
        raise InvariantViolation("chamfer: empty cloud")
    d_ab = cKDTree(pb).query(pa)[0]
    d_ba = cKDTree(pa).query(pb)[0]
    return float((d_ab.mean() + d_ba.mean()) / 2)


def matched_fraction(reference, candidate, tol: float) -> float:
    """Fraction of reference points with a candidate neighbor within tol."""
    ref, cand = _points(reference), _points(candidate)
    if len(ref) == 0:
        raise InvariantViolation("matched_fraction: empty reference")
    if len(cand) == 0:
        return 0.0
    d = cKDTree(cand).query(ref, distance_upper_bound=tol * (1 + 1e-12))[0]
    return float(np.mean(np.isfinite(d)))
