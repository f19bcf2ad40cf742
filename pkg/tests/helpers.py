import numpy as np

from pcdgen.model import Action, CameraModel, Demonstration, PointCloud, make_pose


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1
    return q


def random_pose(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return make_pose(random_rotation(rng), rng.uniform(-scale, scale, 3))


def f32_cloud(rng: np.random.Generator, n: int, colors: bool = False,
              labels: bool = False, scale: float = 1.0) -> PointCloud:
    """Cloud with float32-representable coordinates, as loaded from disk."""
    pts = rng.uniform(-scale, scale, (n, 3)).astype(np.float32)
    col = rng.integers(0, 256, (n, 3), dtype=np.uint8) if colors else None
    lab = rng.integers(0, 5, n, dtype=np.uint16) if labels else None
    return PointCloud(pts, col, lab)


def tiny_demo(rng: np.random.Generator, camera: CameraModel, horizon: int = 2,
              arms: int = 1, colors: bool = False, labels: bool = False) -> Demonstration:
    frames = []
    for _ in range(horizon):
        obs = f32_cloud(rng, 50, colors=colors, labels=labels)
        act = Action(tuple(random_pose(rng) for _ in range(arms)),
                     tuple(float(rng.uniform(0, 0.08)) for _ in range(arms)))
        frames.append((obs, act))
    return Demonstration(camera=camera, frames=tuple(frames))
