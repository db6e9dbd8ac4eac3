"""Energies driving the robot team and their analytic per-robot gradients.

Three ingredients:

* shape attraction: mean squared distance of the robots to the target shape;
* pairwise repulsion: a short-range barrier with a cutoff at the sensing
  range, in two kernel variants (see :class:`Kernel`);
* target attraction: mean squared distance to a per-robot target list, used
  while robots chase intermediate waypoints.

The total energy is attraction plus repulsion. Energies of infeasible
states (a pair at or inside the repulsion singularity) evaluate to ``inf``;
gradient queries there raise :class:`InfeasibleGradientError` because no
step should ever be taken from such a state.

Kernel units differ and matter:

* ``EXP_BUMP`` applies a smooth bump to HALF the pairwise distance, so in
  distance units its singularity sits at 2*hard_radius and its support ends
  at 2*sensing_radius. It is continuously differentiable, which makes it
  the kernel of choice when monotone-descent guarantees are wanted.
* ``COTANGENT`` applies a cotangent falloff to the SQUARED pairwise
  distance over the squared sensing radius. Its singularity sits at
  distance 0 and its support ends exactly at the sensing radius, where the
  value is continuous but the slope is not.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .dynamics import PairList
    from .shape import Shape


class InfeasibleGradientError(ValueError):
    """Gradient requested at a state inside or at the repulsion barrier."""


class Kernel(enum.Enum):
    EXP_BUMP = "exp_bump"
    COTANGENT = "cotangent"


@dataclass(frozen=True)
class PotentialParams:
    """Repulsion parameters.

    hard_radius and sensing_radius are the kernel's inner/outer radii in
    kernel units (see module docstring for what that means per kernel).
    barrier_distance is the smallest allowable pairwise separation used by
    the energy-budget certificate; it defaults to a tenth of the way from
    the hard radius to the sensing radius.
    """

    hard_radius: float
    sensing_radius: float
    amplitude: float = 0.01
    kernel: Kernel = Kernel.COTANGENT
    barrier_distance: float | None = None

    def __post_init__(self):
        if not (0 < self.hard_radius < self.sensing_radius):
            raise ValueError("need 0 < hard_radius < sensing_radius")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if self.barrier_distance is None:
            object.__setattr__(
                self, "barrier_distance",
                self.hard_radius + 0.1 * (self.sensing_radius - self.hard_radius))
        if not (self.hard_radius < self.barrier_distance < self.sensing_radius):
            raise ValueError("barrier_distance must lie strictly between the radii")

    @property
    def interaction_radius(self) -> float:
        """Pairwise distance beyond which the repulsion is exactly zero."""
        if self.kernel is Kernel.EXP_BUMP:
            return 2.0 * self.sensing_radius
        return self.sensing_radius

    @property
    def singular_distance(self) -> float:
        """Pairwise distance at or below which the repulsion is infinite."""
        if self.kernel is Kernel.EXP_BUMP:
            return 2.0 * self.hard_radius
        return 0.0


@dataclass
class Configuration:
    """Positions of the robot team, robot i at row i of an (n, 2) array."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ValueError("positions must be a non-empty (n, 2) array")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        self.positions = pos

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def is_admissible(self, min_distance: float) -> bool:
        """True when every pairwise distance strictly exceeds min_distance."""
        if self.n < 2:
            return True
        from scipy.spatial.distance import pdist

        return bool(pdist(self.positions).min() > min_distance)


@dataclass
class TargetSet:
    """One 2D target per robot, aligned with Configuration indices."""

    targets: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=np.float64)
        if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] < 1:
            raise ValueError("targets must be a non-empty (n, 2) array")
        self.targets = t

    @property
    def n(self) -> int:
        return self.targets.shape[0]


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def exp_bump(u, inner: float, outer: float):
    """Smooth bump exp(1/(u^2-inner^2) - 1/(outer^2-u^2)) with hard walls.

    Returns inf for u <= inner and exactly 0 for u >= outer. Blows up as
    u -> inner+ and vanishes with zero slope at the outer radius.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    out = np.zeros(u_arr.shape)
    out[u_arr <= inner] = np.inf
    mid = (u_arr > inner) & (u_arr < outer)
    um = u_arr[mid]
    with np.errstate(over="ignore"):
        out[mid] = np.exp(1.0 / (um * um - inner * inner)
                          - 1.0 / (outer * outer - um * um))
    return float(out) if np.isscalar(u) else out


def exp_bump_deriv(u, inner: float, outer: float):
    """d/du of :func:`exp_bump`; -inf at or inside the inner radius."""
    u_arr = np.asarray(u, dtype=np.float64)
    out = np.zeros(u_arr.shape)
    out[u_arr <= inner] = -np.inf
    mid = (u_arr > inner) & (u_arr < outer)
    um = u_arr[mid]
    a = um * um - inner * inner
    b = outer * outer - um * um
    with np.errstate(over="ignore"):
        out[mid] = np.exp(1.0 / a - 1.0 / b) * (-2.0 * um) * (1.0 / (a * a) + 1.0 / (b * b))
    return float(out) if np.isscalar(u) else out


def cot_falloff(sq_dist, outer: float):
    """cot(pi/2 * sq_dist / outer^2), clamped to 0 beyond the outer radius.

    The argument is a SQUARED distance. Value is inf at 0, decreasing, and
    reaches 0 continuously at sq_dist = outer^2.
    """
    s = np.asarray(sq_dist, dtype=np.float64)
    out = np.zeros(s.shape)
    out[s <= 0] = np.inf
    sq_outer = outer * outer
    mid = (s > 0) & (s < sq_outer)
    out[mid] = 1.0 / np.tan(0.5 * np.pi * s[mid] / sq_outer)
    return float(out) if np.isscalar(sq_dist) else out


def cot_falloff_deriv(sq_dist, outer: float):
    """d/d(sq_dist) of :func:`cot_falloff`; -inf at sq_dist = 0."""
    s = np.asarray(sq_dist, dtype=np.float64)
    out = np.zeros(s.shape)
    out[s <= 0] = -np.inf
    sq_outer = outer * outer
    mid = (s > 0) & (s < sq_outer)
    c = 0.5 * np.pi / sq_outer
    out[mid] = -c / np.sin(c * s[mid]) ** 2
    return float(out) if np.isscalar(sq_dist) else out


# ---------------------------------------------------------------------------
# Energies and gradients
# ---------------------------------------------------------------------------

def shape_energy(config: Configuration, shape: "Shape") -> float:
    """Mean squared distance of the team to the shape; 0 iff all on-shape."""
    sq = shape.sq_distance_batch(config.positions)
    return float(np.mean(sq))


def shape_energy_grad(config: Configuration, shape: "Shape") -> np.ndarray:
    """Per-robot gradient (2/n)(x_i - nearest shape point)."""
    near, _, _ = shape.nearest_batch(config.positions)
    return (2.0 / config.n) * (config.positions - near)


def target_energy(config: Configuration, targets: TargetSet) -> float:
    """Mean squared distance to the per-robot targets."""
    if targets.n != config.n:
        raise ValueError(f"targets length {targets.n} != configuration length {config.n}")
    diff = config.positions - targets.targets
    return float(np.mean(np.sum(diff * diff, axis=1)))


def target_energy_grad(config: Configuration, targets: TargetSet) -> np.ndarray:
    if targets.n != config.n:
        raise ValueError(f"targets length {targets.n} != configuration length {config.n}")
    return (2.0 / config.n) * (config.positions - targets.targets)


def _brute_ordered_pairs(positions: np.ndarray, radius: float):
    """O(n^2) ordered pair arrays (i, j, dist) with distance < radius."""
    n = positions.shape[0]
    ii, jj = np.nonzero(np.ones((n, n), dtype=bool) ^ np.eye(n, dtype=bool))
    d = np.linalg.norm(positions[ii] - positions[jj], axis=1)
    keep = d < radius
    return ii[keep], jj[keep], d[keep]


def _pair_arrays(config: Configuration, params: PotentialParams, pairs):
    if pairs is None:
        return _brute_ordered_pairs(config.positions, params.interaction_radius)
    if pairs.radius < params.interaction_radius:
        raise ValueError(
            f"pair list built at radius {pairs.radius} cannot cover kernel "
            f"support {params.interaction_radius}")
    return pairs.i, pairs.j, pairs.dist


def repulsion_energy(config: Configuration, params: PotentialParams,
                     pairs: "PairList | None" = None) -> float:
    """Summed pair repulsion over ordered pairs (each pair counted twice).

    Returns inf when any pair sits at or inside the kernel singularity.
    """
    i, j, d = _pair_arrays(config, params, pairs)
    if len(i) == 0:
        return 0.0
    if params.kernel is Kernel.EXP_BUMP:
        vals = exp_bump(0.5 * d, params.hard_radius, params.sensing_radius)
    else:
        vals = cot_falloff(d * d, params.sensing_radius)
    return float(params.amplitude * np.sum(vals))


def repulsion_grad(config: Configuration, params: PotentialParams,
                   pairs: "PairList | None" = None) -> np.ndarray:
    """Per-robot gradient of :func:`repulsion_energy` (antisymmetric pairs)."""
    n = config.n
    i, j, d = _pair_arrays(config, params, pairs)
    grad = np.zeros((n, 2))
    if len(i) == 0:
        return grad
    if np.any(d <= params.singular_distance):
        k = int(np.argmin(d))
        raise InfeasibleGradientError(
            f"pair ({i[k]}, {j[k]}) at distance {d[k]:.6g} is at or inside "
            f"the singular radius {params.singular_distance:.6g}")
    diff = config.positions[i] - config.positions[j]
    if params.kernel is Kernel.EXP_BUMP:
        # ordered double count folds into: dG/dx_i = G0 * sum_j phi'(d/2) (x_i-x_j)/d
        w = params.amplitude * exp_bump_deriv(
            0.5 * d, params.hard_radius, params.sensing_radius) / d
    else:
        # squared-distance argument: dG/dx_i = 4 G0 * sum_j phi'(d^2) (x_i-x_j)
        w = 4.0 * params.amplitude * cot_falloff_deriv(d * d, params.sensing_radius)
    if not np.all(np.isfinite(w)):
        k = int(np.argmin(d))
        raise InfeasibleGradientError(
            f"repulsion gradient overflow for pair ({i[k]}, {j[k]}) "
            f"at distance {d[k]:.6g}")
    grad[:, 0] = np.bincount(i, weights=w * diff[:, 0], minlength=n)
    grad[:, 1] = np.bincount(i, weights=w * diff[:, 1], minlength=n)
    return grad


def total_energy(config: Configuration, shape: "Shape", params: PotentialParams,
                 pairs: "PairList | None" = None) -> float:
    """Shape attraction plus pair repulsion; inf iff the repulsion is."""
    return shape_energy(config, shape) + repulsion_energy(config, params, pairs)


def energy_parts(config: Configuration, shape: "Shape", params: PotentialParams,
                 pairs: "PairList | None" = None) -> tuple[float, float, float]:
    """(total, attraction part, repulsion part)."""
    f = shape_energy(config, shape)
    g = repulsion_energy(config, params, pairs)
    return f + g, f, g


def barrier_level(params: PotentialParams) -> float:
    """Energy that any pair closer than barrier_distance must exceed.

    The admissibility budget: a run whose initial energy is below this
    level can never drive a pair inside the barrier distance while its
    energy is non-increasing.
    """
    m = params.barrier_distance
    if not (params.hard_radius < m < params.sensing_radius):
        raise ValueError("barrier_distance outside (hard_radius, sensing_radius)")
    if params.kernel is Kernel.EXP_BUMP:
        val = exp_bump(m, params.hard_radius, params.sensing_radius)
    else:
        val = cot_falloff(m * m, params.sensing_radius)
    return float(params.amplitude * val)
