import numpy as np
import pytest

from swarmshape import Configuration, PotentialParams, Kernel, RngStream
from swarmshape.shape import Shape, circle_points


def brute_nearest(points: np.ndarray, x) -> tuple[int, float]:
    """Exhaustive-scan nearest point: (index, squared distance)."""
    sq = np.sum((points - np.asarray(x, dtype=np.float64)) ** 2, axis=1)
    idx = int(np.argmin(sq))  # first occurrence = lowest index on ties
    return idx, float(sq[idx])


def feasible_config(rng: RngStream, n: int, min_spacing: float,
                    scale: float = 2.5) -> Configuration:
    """Random robot positions with pairwise spacing above min_spacing."""
    pts = []
    while len(pts) < n:
        cand = scale * rng.normal_pairs(1)[0]
        if all((cand[0] - p[0]) ** 2 + (cand[1] - p[1]) ** 2 > min_spacing ** 2
               for p in pts):
            pts.append(cand)
    return Configuration(np.array(pts))


@pytest.fixture
def loop_shape():
    return Shape(circle_points(radius=5.2, n=200), name="loop200")


@pytest.fixture
def exp_params():
    return PotentialParams(hard_radius=0.1, sensing_radius=1.0, amplitude=0.01,
                           kernel=Kernel.EXP_BUMP)


@pytest.fixture
def cot_params():
    return PotentialParams(hard_radius=0.1, sensing_radius=1.0, amplitude=0.01,
                           kernel=Kernel.COTANGENT)
