"""Multi-robot shape formation by alternating gradient flows with
intermittent virtual diffusion, plus the verification suite that checks
its collision-avoidance and descent guarantees at runtime.
"""

from .shape import Shape
from .potentials import (
    Configuration,
    Kernel,
    PotentialParams,
    TargetSet,
    barrier_level,
    energy_parts,
    repulsion_energy,
    repulsion_grad,
    shape_energy,
    shape_energy_grad,
    target_energy,
    target_energy_grad,
    total_energy,
)
from .dynamics import (
    PairList,
    RngStream,
    StepParams,
    boundary_map,
    brute_force_pairs,
    euler_maruyama_step,
    euler_step,
    min_pairwise_distance,
    neighbor_pairs,
)
from .planner import (
    IDSchedule,
    Phase,
    PlannerParams,
    RunRecord,
    RunStatus,
    corner_init,
    descend_to_shape,
    descend_to_targets,
    plan_gd,
    plan_id,
    random_init,
    virtual_diffusion,
)

__version__ = "0.1.0"
