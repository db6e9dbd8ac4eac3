"""Experiment configuration files.

Grammar: UTF-8 text, one ``key = value`` assignment per line. Blank lines
are skipped and everything after ``#`` is a comment. Keys are flat (no
sections). Unknown and duplicate keys are rejected. Values are numbers,
names, comma-separated integer lists (``seeds``), or ``k=v`` token lists
(``shape_args``).

Required keys: a shape source (``shape_file`` or ``shape_generator``),
``hard_radius``, and ``n_robots``. Everything else has the standard
defaults derived from the hard radius:

======================  =======================================
sensing_radius          10 * hard_radius
dt                      0.1 * hard_radius
alpha                   hard_radius
beta                    10
amplitude               0.01
domain                  6
kernel                  cotangent
tau                     0.002 * dt
epsilon                 2 * (shape sampling resolution)^2
s_max                   500
step4_cap               10 * s_max
outer_cap               100
init                    random
mode                    both
seeds                   0
out                     out
snapshot_stride         50
======================  =======================================
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .potentials import Kernel, PotentialParams
from .planner import PlannerParams
from .shape import GENERATORS, Shape, load_pgm, load_points_text


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the bad key."""


@dataclass
class ExperimentConfig:
    hard_radius: float
    n_robots: int
    shape_file: str | None = None
    shape_generator: str | None = None
    shape_args: dict | None = None
    sensing_radius: float | None = None
    amplitude: float = 0.01
    kernel: str = "cotangent"
    barrier: float | None = None
    epsilon: float | None = None
    tau: float | None = None
    dt: float | None = None
    alpha: float | None = None
    beta: float = 10.0
    s_max: int = 500
    step4_cap: int | None = None
    outer_cap: int = 100
    domain: float = 6.0
    init: str = "random"
    seeds: tuple[int, ...] = (0,)
    mode: str = "both"
    out: str = "out"
    snapshot_stride: int = 50

    def __post_init__(self):
        if self.hard_radius <= 0:
            raise ConfigError("hard_radius must be positive")
        if self.sensing_radius is None:
            self.sensing_radius = 10.0 * self.hard_radius
        if self.sensing_radius <= self.hard_radius:
            raise ConfigError("sensing_radius must exceed hard_radius "
                              f"(got {self.sensing_radius} <= {self.hard_radius})")
        if self.dt is None:
            self.dt = 0.1 * self.hard_radius
        if self.alpha is None:
            self.alpha = self.hard_radius
        if self.tau is None:
            self.tau = 0.002 * self.dt
        if self.step4_cap is None:
            self.step4_cap = 10 * self.s_max
        if self.n_robots < 1:
            raise ConfigError("n_robots must be a positive integer")
        if (self.shape_file is None) == (self.shape_generator is None):
            raise ConfigError("exactly one of shape_file / shape_generator is required")
        if self.shape_generator is not None and self.shape_generator not in GENERATORS:
            raise ConfigError(f"shape_generator: unknown generator "
                              f"{self.shape_generator!r}; choose from "
                              f"{sorted(GENERATORS)}")
        if self.kernel not in ("cotangent", "exp_bump"):
            raise ConfigError(f"kernel: unknown kernel {self.kernel!r}")
        if self.init not in ("random", "corner"):
            raise ConfigError(f"init: must be 'random' or 'corner', got {self.init!r}")
        if self.mode not in ("id", "gd", "both"):
            raise ConfigError(f"mode: must be 'id', 'gd' or 'both', got {self.mode!r}")
        if not self.seeds:
            raise ConfigError("seeds: need at least one seed")
        self.seeds = tuple(int(s) for s in self.seeds)

    # -- derived objects ---------------------------------------------------

    def pot_params(self) -> PotentialParams:
        return PotentialParams(
            hard_radius=self.hard_radius,
            sensing_radius=self.sensing_radius,
            amplitude=self.amplitude,
            kernel=Kernel(self.kernel),
            barrier_distance=self.barrier,
        )

    def build_shape(self, base_dir: Path | None = None) -> Shape:
        if self.shape_file is not None:
            path = Path(self.shape_file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigError(f"shape_file: {path} does not exist")
            if path.suffix.lower() == ".pgm":
                pts = load_pgm(path, domain_half_width=self.domain)
            else:
                pts = load_points_text(path)
            return Shape(pts, name=path.stem)
        gen = GENERATORS[self.shape_generator]
        try:
            pts = gen(**(self.shape_args or {}))
        except TypeError as exc:
            raise ConfigError(f"shape_args: {exc}") from None
        return Shape(pts, name=self.shape_generator)

    def resolve_epsilon(self, shape: Shape) -> float:
        if self.epsilon is not None:
            return self.epsilon
        res = shape.resolution()
        if res <= 0:
            return 1e-6
        return 2.0 * res * res

    def planner_params(self, seed: int, epsilon: float) -> PlannerParams:
        return PlannerParams(
            epsilon=epsilon, tau=self.tau, dt=self.dt, alpha=self.alpha,
            beta=self.beta, s_max=self.s_max, step4_cap=self.step4_cap,
            outer_cap=self.outer_cap, domain_half_width=self.domain,
            seed=seed, snapshot_stride=self.snapshot_stride)


_INT_KEYS = {"n_robots", "s_max", "step4_cap", "outer_cap", "snapshot_stride"}
_FLOAT_KEYS = {"hard_radius", "sensing_radius", "amplitude", "barrier", "epsilon",
               "tau", "dt", "alpha", "beta", "domain"}
_STR_KEYS = {"shape_file", "shape_generator", "kernel", "init", "mode", "out"}
_ALL_KEYS = (_INT_KEYS | _FLOAT_KEYS | _STR_KEYS | {"seeds", "shape_args"})


def _parse_shape_args(text: str) -> dict:
    args = {}
    for token in text.split():
        if "=" not in token:
            raise ConfigError(f"shape_args: token {token!r} is not k=v")
        k, v = token.split("=", 1)
        try:
            num = float(v)
            args[k] = int(num) if num == int(num) and "." not in v and "e" not in v.lower() else num
        except ValueError:
            raise ConfigError(f"shape_args: value {v!r} for {k!r} is not numeric") from None
    return args


def parse_config(text: str) -> ExperimentConfig:
    values: dict = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key == "seeds":
                values[key] = tuple(int(tok) for tok in val.replace(",", " ").split())
            elif key == "shape_args":
                values[key] = _parse_shape_args(val)
            else:
                values[key] = val
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"line {ln}: bad value {val!r} for key {key!r}") from None
    missing = [k for k in ("hard_radius", "n_robots") if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text(encoding="utf-8"))


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(c)) equals c."""
    lines = []
    for f in fields(config):
        val = getattr(config, f.name)
        if val is None:
            continue
        if f.name == "seeds":
            val = ",".join(str(s) for s in val)
        elif f.name == "shape_args":
            if not val:
                continue
            val = " ".join(f"{k}={v}" for k, v in sorted(val.items()))
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
