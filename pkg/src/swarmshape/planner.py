"""Motion planning by alternating gradient descent with virtual diffusion.

One planning cycle:

1. simulate a noisy gradient flow from the best configuration found so far
   (virtually: robots do not travel it) and keep only its endpoint as a set
   of per-robot waypoints;
2. walk the robots toward those waypoints under waypoint attraction plus
   pair repulsion (the team energy may rise here, by design);
3. walk the robots toward the target shape under shape attraction plus
   pair repulsion, tracking the best-energy configuration seen.

Cycles repeat until the best energy drops below the tolerance or the cycle
cap is reached. A plain gradient-descent baseline without the diffusion
episodes is provided for comparison.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    RngStream,
    StepParams,
    brute_force_pairs,
    euler_maruyama_step,
    euler_step,
    min_pairwise_distance,
    neighbor_pairs,
)
from .potentials import (
    Configuration,
    InfeasibleGradientError,
    PotentialParams,
    TargetSet,
    barrier_level,
    repulsion_energy,
    repulsion_grad,
    target_energy_grad,
)
from .shape import Shape


class Phase(str, enum.Enum):
    VIRTUAL_DIFFUSION = "virtual_diffusion"
    DESCEND_TO_TARGETS = "descend_to_targets"
    DESCEND_TO_SHAPE = "descend_to_shape"


class RunStatus(str, enum.Enum):
    CONVERGED_EPSILON = "converged_epsilon"
    OUTER_CAP_REACHED = "outer_cap_reached"
    STALLED_DISPLACEMENT = "stalled_displacement"


@dataclass(frozen=True)
class PlannerParams:
    """Everything one planning run needs besides the shape and potentials.

    epsilon: stop once the best total energy falls below this.
    tau: per-phase stop once the largest per-robot displacement falls below this.
    dt: Euler step size.
    alpha, beta: scales for the per-cycle diffusion strength and duration draws.
    s_max: iteration cap for the waypoint-chasing phase.
    step4_cap: iteration cap for each shape-descent phase (defaults to 10*s_max).
    outer_cap: maximum number of diffusion cycles.
    """

    epsilon: float
    tau: float
    dt: float
    alpha: float
    beta: float
    s_max: int
    step4_cap: int | None = None
    outer_cap: int = 100
    domain_half_width: float = 6.0
    seed: int = 0
    snapshot_stride: int = 50

    def __post_init__(self):
        if self.step4_cap is None:
            object.__setattr__(self, "step4_cap", 10 * self.s_max)
        for name in ("epsilon", "tau", "dt", "alpha", "beta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("s_max", "step4_cap", "outer_cap", "snapshot_stride"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.domain_half_width <= 0:
            raise ValueError("domain_half_width must be positive")


@dataclass
class IDSchedule:
    """Sampled diffusion strength and duration for one cycle."""

    cycle: int
    sigma: float
    duration: float

    def __post_init__(self):
        if self.sigma <= 0 or self.duration <= 0:
            raise ValueError("sigma and duration must be positive")


class RunRecord:
    """Audit trail of a planning run.

    Per-step rows carry the total energy, its attraction/repulsion parts,
    and the minimum pairwise distance. Rows from virtual-diffusion steps
    are flagged by phase and are not part of the robots' physical path.
    Snapshots of the configuration are kept at phase boundaries and every
    ``snapshot_stride`` physical steps; virtual snapshots live separately.
    """

    def __init__(self, initial: Configuration, shape_name: str,
                 pot_params: PotentialParams, params: PlannerParams, mode: str):
        self.shape_name = shape_name
        self.pot_params = pot_params
        self.params = params
        self.mode = mode
        self.initial_positions = initial.positions.copy()
        self.initial_psi = 0.0
        self.initial_f = 0.0
        self.initial_g = 0.0
        self.initial_min_dist = float("inf")
        self._ordinal: list[int] = []
        self._phase: list[str] = []
        self._psi: list[float] = []
        self._f: list[float] = []
        self._g: list[float] = []
        self._min_dist: list[float] = []
        self.snapshots: list[tuple[int, str, np.ndarray]] = []
        self.virtual_snapshots: list[tuple[int, str, np.ndarray]] = []
        self.events: list[str] = []
        self.x_opt: np.ndarray = initial.positions.copy()
        self.psi_opt: float = float("inf")
        self.status: RunStatus | None = None
        self.cycles = 0
        self.n_physical = 0
        self.n_virtual = 0
        self.final_positions: np.ndarray | None = None

    def add_row(self, ordinal: int, phase: Phase, psi: float, f: float,
                g: float, min_dist: float) -> None:
        self._ordinal.append(ordinal)
        self._phase.append(phase.value)
        self._psi.append(psi)
        self._f.append(f)
        self._g.append(g)
        self._min_dist.append(min_dist)

    def finalize(self) -> None:
        self.row_ordinal = np.asarray(self._ordinal, dtype=np.int64)
        self.row_phase = np.asarray(self._phase, dtype=object)
        self.row_psi = np.asarray(self._psi)
        self.row_f = np.asarray(self._f)
        self.row_g = np.asarray(self._g)
        self.row_min_dist = np.asarray(self._min_dist)

    def physical_mask(self) -> np.ndarray:
        return self.row_phase != Phase.VIRTUAL_DIFFUSION.value

    def phase_blocks(self) -> list[tuple[str, int, int]]:
        """Contiguous (phase, start, end) row ranges, end exclusive."""
        blocks = []
        start = 0
        for k in range(1, len(self.row_phase) + 1):
            if k == len(self.row_phase) or self.row_phase[k] != self.row_phase[start]:
                blocks.append((str(self.row_phase[start]), start, k))
                start = k
        return blocks


def _pairs(cfg: Configuration, radius: float):
    """Exact pair list; the dense scan is cheaper below ~10^2 robots."""
    if cfg.n <= 128:
        return brute_force_pairs(cfg, radius)
    return neighbor_pairs(cfg, radius)


class _Engine:
    """Shared per-state evaluation: one tree query and one pair build."""

    def __init__(self, shape: Shape, pot: PotentialParams, params: PlannerParams):
        self.shape = shape
        self.pot = pot
        self.params = params
        self.quiet_step = StepParams(dt=params.dt, sigma=0.0,
                                     domain_half_width=params.domain_half_width)

    def evaluate(self, cfg: Configuration):
        """(pairs, nearest points, per-robot sq distances, f, g, psi, min_dist)."""
        pairs = _pairs(cfg, self.pot.interaction_radius)
        near, mu, _ = self.shape.nearest_batch(cfg.positions)
        f = float(np.mean(mu))
        g = repulsion_energy(cfg, self.pot, pairs)
        return pairs, near, mu, f, g, f + g, min_pairwise_distance(cfg, pairs)

    def shape_grad(self, cfg: Configuration, near: np.ndarray) -> np.ndarray:
        return (2.0 / cfg.n) * (cfg.positions - near)


def _max_displacement(new: np.ndarray, old: np.ndarray) -> float:
    diff = new - old
    return float(np.sqrt(np.max(diff[:, 0] ** 2 + diff[:, 1] ** 2)))


def virtual_diffusion(start: Configuration, shape: Shape, pot_params: PotentialParams,
                      schedule: IDSchedule, dt: float, rng: RngStream,
                      domain_half_width: float = 6.0,
                      record: RunRecord | None = None) -> TargetSet:
    """Simulate the noisy flow for floor(duration/dt) steps; return its endpoint.

    The simulated path is never traveled by the robots. The boundary fold is
    applied every step so the returned waypoints stay inside the domain.
    """
    n_steps = int(np.floor(schedule.duration / dt))
    step = StepParams(dt=dt, sigma=schedule.sigma, domain_half_width=domain_half_width)
    cfg = Configuration(start.positions.copy())
    for _ in range(n_steps):
        pairs = _pairs(cfg, pot_params.interaction_radius)
        near, mu, _ = shape.nearest_batch(cfg.positions)
        grad = (2.0 / cfg.n) * (cfg.positions - near) + repulsion_grad(cfg, pot_params, pairs)
        cfg = euler_maruyama_step(cfg, grad, step, rng)
        if record is not None:
            pairs_new = _pairs(cfg, pot_params.interaction_radius)
            mu_new = shape.sq_distance_batch(cfg.positions)
            f = float(np.mean(mu_new))
            g = repulsion_energy(cfg, pot_params, pairs_new)
            record.n_virtual += 1
            record.add_row(record.n_physical + record.n_virtual,
                           Phase.VIRTUAL_DIFFUSION, f + g, f, g,
                           min_pairwise_distance(cfg, pairs_new))
    if record is not None:
        record.virtual_snapshots.append(
            (record.n_physical + record.n_virtual, Phase.VIRTUAL_DIFFUSION.value,
             cfg.positions.copy()))
    return TargetSet(cfg.positions.copy())


def _descend(engine: _Engine, record: RunRecord, start: Configuration,
             phase: Phase, grad_fn, cap: int, track_opt: bool):
    """Shared descent loop: step, record the new state, stop on tau or cap."""
    params = engine.params
    cfg = start
    pairs, near, mu, f, g, psi, mind = engine.evaluate(cfg)
    hit_cap = True
    for _ in range(cap):
        grad = grad_fn(cfg, pairs, near)
        new_cfg = euler_step(cfg, grad, engine.quiet_step)
        disp = _max_displacement(new_cfg.positions, cfg.positions)
        cfg = new_cfg
        pairs, near, mu, f, g, psi, mind = engine.evaluate(cfg)
        record.n_physical += 1
        ordinal = record.n_physical + record.n_virtual
        record.add_row(ordinal, phase, psi, f, g, mind)
        if track_opt and psi < record.psi_opt:
            record.psi_opt = psi
            record.x_opt = cfg.positions.copy()
        if record.n_physical % params.snapshot_stride == 0:
            record.snapshots.append((ordinal, phase.value, cfg.positions.copy()))
        if disp < params.tau:
            hit_cap = False
            break
    record.snapshots.append(
        (record.n_physical + record.n_virtual, phase.value, cfg.positions.copy()))
    return cfg, hit_cap


def descend_to_targets(start: Configuration, targets: TargetSet, shape: Shape,
                       pot_params: PotentialParams, params: PlannerParams,
                       record: RunRecord) -> Configuration:
    """Walk robots toward their waypoints; the team energy may increase."""
    if targets.n != start.n:
        raise ValueError("targets length mismatch")
    engine = _Engine(shape, pot_params, params)

    def grad_fn(cfg, pairs, near):
        return target_energy_grad(cfg, targets) + repulsion_grad(cfg, pot_params, pairs)

    cfg, _ = _descend(engine, record, start, Phase.DESCEND_TO_TARGETS,
                      grad_fn, params.s_max, track_opt=False)
    return cfg


def descend_to_shape(start: Configuration, shape: Shape, pot_params: PotentialParams,
                     params: PlannerParams, record: RunRecord) -> Configuration:
    """Walk robots toward the shape, keeping the best configuration seen."""
    engine = _Engine(shape, pot_params, params)

    def grad_fn(cfg, pairs, near):
        return engine.shape_grad(cfg, near) + repulsion_grad(cfg, pot_params, pairs)

    cfg, hit_cap = _descend(engine, record, start, Phase.DESCEND_TO_SHAPE,
                            grad_fn, params.step4_cap, track_opt=True)
    if hit_cap:
        record.events.append(
            f"shape descent hit its {params.step4_cap}-iteration cap")
    return cfg


def _start_record(initial: Configuration, shape: Shape, pot_params: PotentialParams,
                  params: PlannerParams, mode: str) -> RunRecord:
    record = RunRecord(initial, shape.name, pot_params, params, mode)
    engine = _Engine(shape, pot_params, params)
    _, _, _, f, g, psi, mind = engine.evaluate(initial)
    record.initial_psi, record.initial_f, record.initial_g = psi, f, g
    record.initial_min_dist = mind
    record.psi_opt = psi
    record.x_opt = initial.positions.copy()
    em = barrier_level(pot_params)
    if mind <= pot_params.hard_radius:
        warnings.warn("initial configuration is not admissible "
                      f"(min distance {mind:.4g} <= {pot_params.hard_radius:.4g})")
        record.events.append("inadmissible initial configuration")
    if psi >= em:
        warnings.warn("initial energy exceeds the collision-avoidance budget "
                      f"({psi:.4g} >= {em:.4g}); the certificate will not apply")
        record.events.append("initial energy above barrier level")
    return record


def plan_id(initial: Configuration, shape: Shape, pot_params: PotentialParams,
            params: PlannerParams) -> RunRecord:
    """Full intermittent-diffusion planning loop."""
    record = _start_record(initial, shape, pot_params, params, mode="id")
    rng = RngStream(params.seed, stream=0)
    cfg = Configuration(initial.positions.copy())
    while record.psi_opt > params.epsilon and record.cycles < params.outer_cap:
        sigma = params.alpha * rng.uniform_open()
        duration = params.beta * rng.uniform_open()
        schedule = IDSchedule(cycle=record.cycles + 1, sigma=sigma, duration=duration)
        try:
            targets = virtual_diffusion(
                Configuration(record.x_opt.copy()), shape, pot_params, schedule,
                params.dt, rng, params.domain_half_width, record)
            cfg = descend_to_targets(cfg, targets, shape, pot_params, params, record)
            cfg = descend_to_shape(cfg, shape, pot_params, params, record)
        except InfeasibleGradientError as exc:
            record.events.append(f"cycle {schedule.cycle} aborted: {exc}")
        record.cycles += 1
    record.status = (RunStatus.CONVERGED_EPSILON if record.psi_opt <= params.epsilon
                     else RunStatus.OUTER_CAP_REACHED)
    record.final_positions = cfg.positions.copy()
    record.finalize()
    return record


def plan_gd(initial: Configuration, shape: Shape, pot_params: PotentialParams,
            params: PlannerParams, max_steps: int | None = None) -> RunRecord:
    """Plain gradient-descent baseline on the total energy (no diffusion)."""
    record = _start_record(initial, shape, pot_params, params, mode="gd")
    if max_steps is None:
        max_steps = params.outer_cap * (params.s_max + params.step4_cap)
    engine = _Engine(shape, pot_params, params)

    def grad_fn(cfg, pairs, near):
        return engine.shape_grad(cfg, near) + repulsion_grad(cfg, pot_params, pairs)

    cfg, hit_cap = _descend(engine, record, Configuration(initial.positions.copy()),
                            Phase.DESCEND_TO_SHAPE, grad_fn, max_steps, track_opt=True)
    if record.psi_opt <= params.epsilon:
        record.status = RunStatus.CONVERGED_EPSILON
    elif hit_cap:
        record.status = RunStatus.OUTER_CAP_REACHED
    else:
        record.status = RunStatus.STALLED_DISPLACEMENT
    record.final_positions = cfg.positions.copy()
    record.finalize()
    return record


# ---------------------------------------------------------------------------
# Initial configurations
# ---------------------------------------------------------------------------

def _rejection_fill(n: int, lo: np.ndarray, hi: np.ndarray, min_spacing: float,
                    rng: RngStream, max_tries: int) -> Configuration:
    accepted = np.empty((n, 2))
    count = 0
    for _ in range(max_tries):
        cand = lo + (hi - lo) * np.array([rng.uniform_open(), rng.uniform_open()])
        if count == 0:
            accepted[0] = cand
            count = 1
        else:
            d2 = np.sum((accepted[:count] - cand) ** 2, axis=1)
            if d2.min() > min_spacing * min_spacing:
                accepted[count] = cand
                count += 1
        if count == n:
            return Configuration(accepted)
    raise ValueError(
        f"could not place {n} robots with spacing {min_spacing} "
        f"in the box after {max_tries} draws")


def corner_init(n: int, pot_params: PotentialParams, domain_half_width: float,
                rng: RngStream, max_tries: int | None = None) -> Configuration:
    """Robots jittered in the lower-left corner box of side 2*sensing_radius,
    rejection-sampled to pairwise spacing above the barrier distance."""
    m = domain_half_width
    side = 2.0 * pot_params.sensing_radius
    lo = np.array([-m, -m])
    hi = np.array([min(-m + side, m), min(-m + side, m)])
    return _rejection_fill(n, lo, hi, pot_params.barrier_distance, rng,
                           max_tries or 2000 * n)


def random_init(n: int, pot_params: PotentialParams, domain_half_width: float,
                rng: RngStream, max_tries: int | None = None) -> Configuration:
    """Robots uniform over the whole domain with the same rejection rule."""
    m = domain_half_width
    lo = np.array([-m, -m])
    hi = np.array([m, m])
    return _rejection_fill(n, lo, hi, pot_params.barrier_distance, rng,
                           max_tries or 2000 * n)
