"""Time stepping: Euler / Euler-Maruyama updates, neighbor search, domain walls.

All randomness flows through :class:`RngStream`, a counter-based generator
with an explicit Box-Muller transform, so that a seed pins down every
trajectory bit-for-bit across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .potentials import Configuration


class NonFiniteGradientError(ValueError):
    """A step was asked to integrate a NaN/inf gradient."""


@dataclass
class PairList:
    """Ordered index pairs (i, j), i != j, with squared distance < radius^2.

    Both orientations of every unordered pair are present. ``dist`` carries
    the Euclidean distances, aligned with ``i``/``j``.
    """

    i: np.ndarray
    j: np.ndarray
    dist: np.ndarray
    radius: float
    n: int

    def __len__(self) -> int:
        return len(self.i)

    def as_set(self) -> set[tuple[int, int]]:
        return set(zip(self.i.tolist(), self.j.tolist()))


def _empty_pairs(radius: float, n: int) -> PairList:
    z = np.zeros(0, dtype=np.intp)
    return PairList(z, z, np.zeros(0), radius, n)


def brute_force_pairs(config: Configuration, radius: float) -> PairList:
    """Reference O(n^2) neighbor search; the oracle for the hashed version."""
    pos = config.positions
    n = pos.shape[0]
    if n < 2:
        return _empty_pairs(radius, n)
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    diff = pos[ii] - pos[jj]
    d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2
    keep = d2 < radius * radius
    return PairList(ii[keep], jj[keep], np.sqrt(d2[keep]), radius, n)


def neighbor_pairs(config: Configuration, radius: float) -> PairList:
    """All ordered pairs closer than ``radius``, via uniform spatial hashing.

    Cell size equals the search radius, so candidates live in the 3x3 cell
    neighborhood. Matches :func:`brute_force_pairs` exactly.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    pos = config.positions
    n = pos.shape[0]
    if n < 2:
        return _empty_pairs(radius, n)

    cells = np.floor(pos / radius).astype(np.int64)
    cells -= cells.min(axis=0) - 1  # leave room for the -1 offsets
    stride = np.int64(cells[:, 1].max() + 2)
    key = cells[:, 0] * stride + cells[:, 1]
    order = np.argsort(key, kind="stable")
    skeys = key[order]

    # one fused candidate sweep over all nine neighbor-cell offsets
    offsets = np.array([dx * stride + dy for dx in (-1, 0, 1) for dy in (-1, 0, 1)])
    tkey = (key[None, :] + offsets[:, None]).ravel()
    left = np.searchsorted(skeys, tkey, side="left")
    right = np.searchsorted(skeys, tkey, side="right")
    counts = right - left
    total = int(counts.sum())
    if total == 0:
        return _empty_pairs(radius, n)
    rep_i = np.repeat(np.tile(np.arange(n, dtype=np.intp), 9), counts)
    starts = np.repeat(left, counts)
    local = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    cand = order[starts + local]
    mask = cand != rep_i
    ii = rep_i[mask]
    jj = cand[mask]
    diff = pos[ii] - pos[jj]
    d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2
    keep = d2 < radius * radius
    if not keep.any():
        return _empty_pairs(radius, n)
    return PairList(ii[keep], jj[keep], np.sqrt(d2[keep]), radius, n)


def min_pairwise_distance(config: Configuration, pairs: PairList | None = None) -> float:
    """Minimum inter-robot distance; inf for a single robot.

    Accelerated by a pair list when one is supplied and non-empty;
    otherwise falls back to the exact all-pairs scan.
    """
    if config.n < 2:
        return float("inf")
    if pairs is not None and len(pairs) > 0:
        return float(pairs.dist.min())
    return float(pdist(config.positions).min())


# ---------------------------------------------------------------------------
# Random numbers
# ---------------------------------------------------------------------------

class RngStream:
    """Seeded, counter-based source of standard-normal 2-vectors.

    Implementation: a Philox counter generator produces uniforms, and the
    trigonometric Box-Muller transform turns each uniform pair (u1, u2)
    into one 2D deviate: radius = sqrt(-2 log(1 - u1)), angle = 2 pi u2.
    One uniform pair is consumed per robot per step, in robot order, so a
    deviate's value is pinned by (seed, stream, draw position).
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed % 2 ** 64, self.stream % 2 ** 64], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def normal_pairs(self, n: int) -> np.ndarray:
        """(n, 2) array of independent standard normals."""
        u = self._gen.random((n, 2))
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])

    def uniform_open(self) -> float:
        """One uniform draw from the open interval (0, 1)."""
        while True:
            u = float(self._gen.random())
            if u != 0.0:
                return u


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepParams:
    """Time step, diffusion coefficient, and half-width of the square domain."""

    dt: float
    sigma: float = 0.0
    domain_half_width: float = 6.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.domain_half_width <= 0:
            raise ValueError("domain_half_width must be positive")


def boundary_map(x, half_width: float):
    """Fold points back into the square [-M, M]^2, componentwise.

    Coordinates with magnitude in (M, 2M) are reflected about the wall:
    c -> c - 2 sgn(c) (|c| mod M). Coordinates at or beyond 2M (which a
    sane step size never produces) are clamped to the wall.
    """
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    p = np.asarray(x, dtype=np.float64)
    scalar_point = p.ndim == 1
    p = np.atleast_2d(p).copy()
    m = half_width
    mag = np.abs(p)
    reflect = (mag > m) & (mag < 2 * m)
    p[reflect] -= 2.0 * np.sign(p[reflect]) * (mag[reflect] - m)
    clamp = mag >= 2 * m
    p[clamp] = np.sign(p[clamp]) * m
    return p[0] if scalar_point else p


def _check_gradient(grad: np.ndarray, n: int) -> None:
    if grad.shape != (n, 2):
        raise ValueError(f"gradient shape {grad.shape} != ({n}, 2)")
    bad = ~np.all(np.isfinite(grad), axis=1)
    if bad.any():
        raise NonFiniteGradientError(
            f"non-finite gradient for robot {int(np.nonzero(bad)[0][0])}")


def euler_step(config: Configuration, grad_total, step: StepParams) -> Configuration:
    """One explicit gradient step followed by the boundary fold."""
    grad = np.asarray(grad_total, dtype=np.float64)
    _check_gradient(grad, config.n)
    new = config.positions - step.dt * grad
    return Configuration(boundary_map(new, step.domain_half_width))


def euler_maruyama_step(config: Configuration, grad_total, step: StepParams,
                        rng: RngStream) -> Configuration:
    """Gradient step plus sigma * sqrt(dt) * xi noise, one 2D xi per robot.

    With sigma == 0 no draw is made and the result is bit-identical to
    :func:`euler_step`.
    """
    grad = np.asarray(grad_total, dtype=np.float64)
    _check_gradient(grad, config.n)
    new = config.positions - step.dt * grad
    if step.sigma != 0.0:
        new = new + step.sigma * np.sqrt(step.dt) * rng.normal_pairs(config.n)
    return Configuration(boundary_map(new, step.domain_half_width))
