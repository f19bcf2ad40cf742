import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pcdgen.model import CameraModel


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def camera():
    return CameraModel(fx=600.0, fy=600.0, cx=320.0, cy=240.0,
                       width=640, height=480, depth_min=0.05, depth_max=5.0)
