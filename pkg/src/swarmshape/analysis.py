"""Verification oracles and run diagnostics.

Nothing here is needed to plan; everything here exists to check the
planner's guarantees at runtime: finite-difference gradient validation,
empirical step-size bounds, the collision-avoidance energy-budget
certificate, stationary-density sampling checks, and summary metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .dynamics import RngStream, neighbor_pairs
from .planner import Phase, RunRecord
from .potentials import (
    Configuration,
    PotentialParams,
    barrier_level,
    repulsion_grad,
    shape_energy_grad,
)
from .shape import Shape


def fd_gradient(potential_fn, config: Configuration, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar potential of the positions.

    ``potential_fn`` maps an (n, 2) position array to a float. Probe points
    that evaluate non-finite (an infeasible state) raise, since a difference
    through a barrier is meaningless.
    """
    pos = config.positions
    grad = np.zeros_like(pos)
    for i in range(pos.shape[0]):
        for c in range(2):
            plus = pos.copy()
            minus = pos.copy()
            plus[i, c] += h
            minus[i, c] -= h
            fp = potential_fn(plus)
            fm = potential_fn(minus)
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise ValueError(
                    f"finite-difference probe at robot {i} coord {c} is infeasible")
            grad[i, c] = (fp - fm) / (2.0 * h)
    return grad


@dataclass
class LipschitzEstimate:
    """Empirical bound on the gradient's rate of change between states."""

    l_hat: float
    sample_count: int
    max_ratio_pair: tuple[np.ndarray, np.ndarray]

    def allows_dt(self, dt: float) -> bool:
        """Conservative step-size check: dt must not exceed 1/l_hat."""
        return dt <= 1.0 / self.l_hat


def estimate_lipschitz(grad_fn, sampler, n_samples: int, rng: RngStream,
                       perturb_scale: float = 1e-3) -> LipschitzEstimate:
    """Max observed ||grad(a)-grad(b)|| / ||a-b|| over sampled state pairs.

    Pairs are consecutive sampler outputs plus, for each sample, a nearby
    random perturbation. The max ratio is doubled as a safety factor.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    samples = [np.asarray(sampler(rng), dtype=np.float64) for _ in range(n_samples)]
    best = 0.0
    best_pair = (samples[0], samples[1])

    def ratio(a, b):
        denom = float(np.linalg.norm(a - b))
        if denom == 0.0:
            return 0.0
        return float(np.linalg.norm(grad_fn(a) - grad_fn(b))) / denom

    for a, b in zip(samples[:-1], samples[1:]):
        r = ratio(a, b)
        if r > best:
            best, best_pair = r, (a, b)
    for a in samples:
        b = a + perturb_scale * rng.normal_pairs(a.shape[0])
        r = ratio(a, b)
        if r > best:
            best, best_pair = r, (a, b)
    return LipschitzEstimate(l_hat=2.0 * best, sample_count=n_samples,
                             max_ratio_pair=best_pair)


def estimate_lipschitz_total(shape: Shape, pot_params: PotentialParams, sampler,
                             n_samples: int, rng: RngStream,
                             perturb_scale: float = 1e-3) -> LipschitzEstimate:
    """:func:`estimate_lipschitz` for the total energy gradient."""

    def grad_fn(pos):
        cfg = Configuration(pos)
        pairs = neighbor_pairs(cfg, pot_params.interaction_radius)
        return shape_energy_grad(cfg, shape) + repulsion_grad(cfg, pot_params, pairs)

    return estimate_lipschitz(grad_fn, sampler, n_samples, rng, perturb_scale)


@dataclass
class CertificateReport:
    """Outcome of the collision-avoidance check on one run record."""

    passed: bool
    precondition_ok: bool
    min_distance_ok: bool
    initial_psi: float
    barrier: float
    worst_min_distance: float
    first_violation: int | None

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        extra = ""
        if self.first_violation is not None:
            extra = f" (first violation at physical row {self.first_violation})"
        return (f"{verdict}: initial energy {self.initial_psi:.6g} vs budget "
                f"{self.barrier:.6g}; worst min distance "
                f"{self.worst_min_distance:.6g}{extra}")


def collision_certificate(record: RunRecord, pot_params: PotentialParams) -> CertificateReport:
    """Check the energy budget precondition and the hard-radius guarantee.

    Passing means: the initial energy sat below the barrier level AND every
    physical iterate kept the minimum pairwise distance at or above the
    hard radius (zero tolerance). Virtual rows are ignored.
    """
    em = barrier_level(pot_params)
    precondition_ok = bool(record.initial_psi < em)
    mask = record.physical_mask()
    dists = record.row_min_dist[mask]
    dists = np.concatenate([[record.initial_min_dist], dists])
    ok = dists >= pot_params.hard_radius
    first_violation = None if ok.all() else int(np.nonzero(~ok)[0][0])
    min_distance_ok = first_violation is None
    worst = float(dists.min()) if len(dists) else float("inf")
    return CertificateReport(
        passed=precondition_ok and min_distance_ok,
        precondition_ok=precondition_ok,
        min_distance_ok=min_distance_ok,
        initial_psi=record.initial_psi,
        barrier=em,
        worst_min_distance=worst,
        first_violation=first_violation,
    )


@dataclass
class DescentReport:
    """Worst energy increase inside shape-descent phases of a record."""

    max_violation: float
    n_transitions: int

    def ok(self, tol: float = 1e-12) -> bool:
        return self.max_violation <= tol


def descent_report(record: RunRecord) -> DescentReport:
    """Energy monotonicity inside every shape-descent phase.

    Checks consecutive energies within each shape-descent block, including
    the transition from the state just before the block (the previous row,
    or the initial state). Waypoint-chasing and virtual phases are exempt:
    the objective there is a different energy.
    """
    worst = -np.inf
    count = 0
    psis = record.row_psi
    for phase, start, end in record.phase_blocks():
        if phase != Phase.DESCEND_TO_SHAPE.value:
            continue
        prev = record.initial_psi if start == 0 else psis[start - 1]
        block = np.concatenate([[prev], psis[start:end]])
        if len(block) > 1:
            worst = max(worst, float(np.max(np.diff(block))))
            count += len(block) - 1
    if count == 0:
        worst = 0.0
    return DescentReport(max_violation=worst, n_transitions=count)


@dataclass
class GibbsCheck:
    """Histogram comparison of sampled positions vs the stationary density."""

    grid_n: int
    domain_half_width: float
    empirical_mass: np.ndarray
    gibbs_mass: np.ndarray
    tv_distance: float


def gibbs_check(shape: Shape, sigma: float, dt: float, n_steps: int,
                burn_in: int, grid_n: int, rng: RngStream,
                domain_half_width: float = 6.0,
                start=(0.0, 0.0)) -> GibbsCheck:
    """Single-robot noisy flow vs its predicted stationary density.

    Runs the Euler-Maruyama chain on the shape attraction alone (one robot:
    no repulsion term exists), histograms post-burn-in positions on a
    grid_n x grid_n grid over the domain, and compares against the density
    proportional to exp(-2 * energy / sigma^2) evaluated at cell centers
    and normalized by midpoint quadrature over the domain.

    Returns the total-variation distance between the two mass vectors.
    The fast inner loop reproduces euler_maruyama_step exactly
    (tests pin that equivalence).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive: the noiseless flow has no "
                         "stationary density to compare")
    m = domain_half_width
    total = burn_in + n_steps
    pos = np.array(start, dtype=np.float64)
    samples = np.empty((n_steps, 2))
    noise_scale = sigma * np.sqrt(dt)
    # Scalar inner loop, one tree query and one deviate per step. Deviates
    # are drawn in blocks; the stream order matches per-step draws exactly.
    chunk = 65536
    noise = np.empty((0, 2))
    used = 0
    for k in range(total):
        if used == len(noise):
            noise = rng.normal_pairs(min(chunk, total - k))
            used = 0
        near, _, _ = shape.nearest(pos)
        grad = 2.0 * (pos - near)
        xi = noise[used]
        used += 1
        new = (pos - dt * grad) + noise_scale * xi
        # componentwise boundary fold, matching boundary_map
        for c in (0, 1):
            a = abs(new[c])
            if a > m:
                if a < 2 * m:
                    new[c] -= 2.0 * np.sign(new[c]) * (a - m)
                else:
                    new[c] = np.sign(new[c]) * m
        pos = new
        if k >= burn_in:
            samples[k - burn_in] = pos

    edges = np.linspace(-m, m, grid_n + 1)
    hist, _, _ = np.histogram2d(samples[:, 0], samples[:, 1], bins=[edges, edges])
    empirical = hist / hist.sum()

    centers = 0.5 * (edges[:-1] + edges[1:])
    gx, gy = np.meshgrid(centers, centers, indexing="ij")
    grid_pts = np.column_stack([gx.ravel(), gy.ravel()])
    energy = shape.sq_distance_batch(grid_pts).reshape(grid_n, grid_n)
    weights = np.exp(-2.0 * energy / sigma ** 2)
    gibbs = weights / weights.sum()

    tv = 0.5 * float(np.abs(empirical - gibbs).sum())
    return GibbsCheck(grid_n=grid_n, domain_half_width=m,
                      empirical_mass=empirical, gibbs_mass=gibbs, tv_distance=tv)


def run_metrics(record: RunRecord, shape: Shape,
                uniformity_radius: float | None = None) -> dict:
    """Summary metrics for a finished run.

    on_shape_fraction counts robots whose squared shape distance is below
    epsilon / n. The uniformity proxy is the coefficient of variation of
    the robots' nearest-neighbor distances (0 means perfectly even).
    """
    pos = record.final_positions
    if pos is None:
        raise ValueError("record has no final configuration")
    n = pos.shape[0]
    mu = shape.sq_distance_batch(pos)
    eps = record.params.epsilon
    mask = record.physical_mask()
    metrics = {
        "mode": record.mode,
        "seed": record.params.seed,
        "status": str(record.status.value if record.status else "unknown"),
        "cycles": record.cycles,
        "physical_steps": int(record.n_physical),
        "virtual_steps": int(record.n_virtual),
        "terminal_psi": float(record.row_psi[mask][-1]) if mask.any() else record.initial_psi,
        "terminal_f": float(record.row_f[mask][-1]) if mask.any() else record.initial_f,
        "terminal_g": float(record.row_g[mask][-1]) if mask.any() else record.initial_g,
        "best_psi": float(record.psi_opt),
        "on_shape_fraction": float(np.mean(mu < eps / n)),
        "min_pairwise_distance": float(pdist(pos).min()) if n > 1 else float("inf"),
    }
    if n > 1:
        if uniformity_radius is not None:
            cfg = Configuration(pos)
            pairs = neighbor_pairs(cfg, uniformity_radius)
            if len(pairs) == 0:
                nn = None
            else:
                nn = np.full(n, np.inf)
                np.minimum.at(nn, pairs.i, pairs.dist)
                nn = nn[np.isfinite(nn)]
        else:
            from scipy.spatial import cKDTree

            d, _ = cKDTree(pos).query(pos, k=2)
            nn = d[:, 1]
        if nn is not None and len(nn) > 1 and nn.mean() > 0:
            metrics["nearest_neighbor_cv"] = float(nn.std() / nn.mean())
        else:
            metrics["nearest_neighbor_cv"] = float("nan")
    else:
        metrics["nearest_neighbor_cv"] = float("nan")
    return metrics


def compare_runs(id_metrics: dict, gd_metrics: dict) -> dict:
    """Per-scalar deltas (diffusion planner minus baseline)."""
    out = {}
    for key in ("terminal_psi", "terminal_f", "terminal_g", "best_psi",
                "on_shape_fraction", "nearest_neighbor_cv"):
        if key in id_metrics and key in gd_metrics:
            out[f"delta_{key}"] = id_metrics[key] - gd_metrics[key]
    return out
