"""Command-line front end.

Subcommands:

* ``run CONFIG``: execute the experiment grid (seeds x modes) described by a
  config file and write trajectories, energy traces, metrics, and a summary.
* ``verify``: run the built-in verification suite (gradient oracles,
  neighbor-search exactness, a seeded collision certificate, a stationary
  density check) and print one PASS/FAIL line per check.
* ``plot``: render trajectory snapshots and energy overlays to SVG.
* ``shapes``: list built-in shape generators or emit one to a point file.

Exit codes: 0 success, 1 validation error, 2 partial failure (a failing
grid cell or a failing verify check), 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, io, plots
from .config import ConfigError, ExperimentConfig, load_config
from .dynamics import RngStream, brute_force_pairs, neighbor_pairs
from .planner import Phase, corner_init, plan_gd, plan_id, random_init
from .potentials import (
    Configuration,
    Kernel,
    PotentialParams,
    repulsion_energy,
    shape_energy,
    target_energy,
)
from .shape import GENERATORS, Shape, circle_points, save_points_text


def _initial_config(config: ExperimentConfig, seed: int) -> Configuration:
    rng = RngStream(seed, stream=1)
    pot = config.pot_params()
    if config.init == "corner":
        return corner_init(config.n_robots, pot, config.domain, rng)
    return random_init(config.n_robots, pot, config.domain, rng)


def _run_seed(config: ExperimentConfig, seed: int, out_dir: str) -> list[dict]:
    """One grid cell: all requested modes for one seed. Used by --jobs pools."""
    out = Path(out_dir)
    shape = config.build_shape()
    pot = config.pot_params()
    epsilon = config.resolve_epsilon(shape)
    params = config.planner_params(seed, epsilon)
    initial = _initial_config(config, seed)
    rows = []
    modes = ("id", "gd") if config.mode == "both" else (config.mode,)
    gd_budget = None
    for mode in modes:
        if mode == "id":
            record = plan_id(initial, shape, pot, params)
            gd_budget = record.n_physical
        else:
            record = plan_gd(initial, shape, pot, params, max_steps=gd_budget)
        io.write_trajectory(record, out / f"trajectory_{mode}_{seed}.csv")
        if record.virtual_snapshots:
            io.write_trajectory(record, out / f"trajectory_{mode}_{seed}_virtual.csv",
                                virtual=True)
        io.write_energy_trace(record, out / f"energy_{mode}_{seed}.csv")
        metrics = analysis.run_metrics(record, shape)
        io.write_metrics(metrics, out / f"metrics_{mode}_{seed}.json")
        rows.append({
            "seed": seed, "mode": mode, "failed": False,
            "status": str(record.status.value),
            "terminal_psi": metrics["terminal_psi"],
            "best_psi": metrics["best_psi"],
        })
    return rows


def run_experiment(config: ExperimentConfig, out_dir: Path, jobs: int = 1) -> int:
    """Execute the full grid; a failing seed never aborts the others."""
    out_dir.mkdir(parents=True, exist_ok=True)
    config.build_shape()  # validate the shape source before spawning work
    rows: list[dict] = []
    failures = 0
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {seed: pool.submit(_run_seed, config, seed, str(out_dir))
                       for seed in config.seeds}
            for seed, fut in futures.items():
                try:
                    rows.extend(fut.result())
                except Exception as exc:  # noqa: BLE001 - cell isolation
                    failures += 1
                    print(f"seed {seed} FAILED: {exc}", file=sys.stderr)
                    modes = ("id", "gd") if config.mode == "both" else (config.mode,)
                    rows.extend({"seed": seed, "mode": m, "failed": True} for m in modes)
    else:
        for seed in config.seeds:
            try:
                rows.extend(_run_seed(config, seed, str(out_dir)))
            except Exception as exc:  # noqa: BLE001
                failures += 1
                print(f"seed {seed} FAILED: {exc}", file=sys.stderr)
                modes = ("id", "gd") if config.mode == "both" else (config.mode,)
                rows.extend({"seed": seed, "mode": m, "failed": True} for m in modes)
    io.write_seed_table(rows, out_dir / "seeds.csv")
    io.write_summary(config.hard_radius, config.n_robots, rows, out_dir / "summary.csv")
    return 2 if failures else 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _check(name: str, ok: bool, detail: str = "") -> bool:
    suffix = f" ({detail})" if detail else ""
    print(f"{'PASS' if ok else 'FAIL'}: {name}{suffix}")
    return ok


def _verify_gradients(rng: RngStream) -> bool:
    from .potentials import (repulsion_grad, shape_energy_grad, target_energy_grad,
                             TargetSet)

    shape = Shape(circle_points(radius=3.0, n=120), name="verify-circle")
    ok = True
    worst = 0.0
    for kernel in (Kernel.EXP_BUMP, Kernel.COTANGENT):
        pot = PotentialParams(hard_radius=0.1, sensing_radius=1.0, amplitude=0.01,
                              kernel=kernel)
        for _ in range(10):
            pos = 2.2 * rng.normal_pairs(8)
            cfg = Configuration(pos)
            if not cfg.is_admissible(1.02 * pot.singular_distance + 0.05):
                continue
            pairs = neighbor_pairs(cfg, pot.interaction_radius)
            if np.any(np.abs(pairs.dist - pot.sensing_radius) < 1e-3):
                continue  # keep probes away from the cotangent kink
            analytic = repulsion_grad(cfg, pot, pairs)
            fd = analysis.fd_gradient(
                lambda p: repulsion_energy(Configuration(p), pot), cfg)
            err = np.linalg.norm(fd - analytic) / max(1e-9, np.linalg.norm(analytic))
            worst = max(worst, err)
        targets = TargetSet(2.2 * rng.normal_pairs(8))
        pos = 2.2 * rng.normal_pairs(8)
        cfg = Configuration(pos)
        fd = analysis.fd_gradient(lambda p: target_energy(Configuration(p), targets), cfg)
        err = np.linalg.norm(fd - target_energy_grad(cfg, targets)) / max(
            1e-9, np.linalg.norm(target_energy_grad(cfg, targets)))
        worst = max(worst, err)
        fd = analysis.fd_gradient(lambda p: shape_energy(Configuration(p), shape), cfg)
        err = np.linalg.norm(fd - shape_energy_grad(cfg, shape)) / max(
            1e-9, np.linalg.norm(shape_energy_grad(cfg, shape)))
        worst = max(worst, err)
    ok &= _check("analytic gradients match finite differences",
                 worst <= 1e-5, f"worst relative error {worst:.2e}")
    return ok


def _verify_neighbors(rng: RngStream) -> bool:
    ok = True
    for k in range(20):
        n = 5 + (13 * k) % 160
        cfg = Configuration(2.0 * rng.normal_pairs(n))
        radius = 0.3 + 0.1 * (k % 7)
        hashed = neighbor_pairs(cfg, radius).as_set()
        brute = brute_force_pairs(cfg, radius).as_set()
        if hashed != brute:
            ok = False
            break
    return _check("spatial-hash neighbor search matches brute force", ok)


def _verify_certificate() -> bool:
    from .planner import PlannerParams

    shape = Shape(circle_points(radius=5.2, n=200), name="verify-loop")
    pot = PotentialParams(hard_radius=0.1, sensing_radius=1.0, amplitude=0.01,
                          kernel=Kernel.EXP_BUMP)
    n = 12
    angles = 2 * np.pi * np.arange(n) / n
    radii = 5.2 + 0.35 * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    initial = Configuration(np.column_stack([radii * np.cos(angles),
                                             radii * np.sin(angles)]))
    params = PlannerParams(epsilon=1e-6, tau=2e-5, dt=0.01, alpha=0.1, beta=10.0,
                           s_max=150, step4_cap=600, outer_cap=2, seed=7)
    record = plan_id(initial, shape, pot, params)
    cert = analysis.collision_certificate(record, pot)
    descent = analysis.descent_report(record)
    ok = _check("collision certificate on a seeded run", cert.passed, cert.summary())
    ok &= _check("energy is non-increasing in shape-descent phases",
                 descent.ok(), f"max increase {descent.max_violation:.2e}")
    return ok


def _verify_gibbs(full: bool) -> bool:
    shape = Shape(np.array([[-1.0, 0.0], [1.0, 0.0]]), name="two-well")
    rng = RngStream(2024, stream=2)
    if full:
        check = analysis.gibbs_check(shape, sigma=0.8, dt=1e-3, n_steps=2_000_000,
                                     burn_in=100_000, grid_n=32, rng=rng)
        bound = 0.1
    else:
        check = analysis.gibbs_check(shape, sigma=0.8, dt=1e-3, n_steps=200_000,
                                     burn_in=20_000, grid_n=16, rng=rng)
        bound = 0.2
    return _check("sampled density matches the stationary density",
                  check.tv_distance <= bound,
                  f"total variation {check.tv_distance:.3f} <= {bound}")


def cmd_verify(args) -> int:
    rng = RngStream(11, stream=2)
    ok = _verify_gradients(rng)
    ok &= _verify_neighbors(rng)
    ok &= _verify_certificate()
    ok &= _verify_gibbs(full=args.full)
    print("verification:", "all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# plot / shapes
# ---------------------------------------------------------------------------

def cmd_plot(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shape_pts = Shape(_load_shape_points(args.shape), name=Path(args.shape).stem)
    iterations = [int(s) for s in args.iterations] if args.iterations else None
    for traj_path in args.trajectory or []:
        traj = io.read_trajectory(traj_path)
        written, missing = plots.render_snapshots(traj, shape_pts, out, iterations,
                                                  domain_half_width=args.domain)
        print(f"{traj_path}: wrote {len(written)} snapshot(s)")
        if missing:
            print(f"{traj_path}: iterations not recorded, skipped: {missing}")
    traces = []
    for trace_path in args.energy or []:
        trace = io.read_energy_trace(trace_path)
        label = trace["meta"].get("mode", Path(trace_path).stem)
        mask = np.asarray([p != Phase.VIRTUAL_DIFFUSION.value for p in trace["phase"]])
        traces.append((label, trace["iteration"][mask], trace["psi"][mask]))
    if traces:
        plots.svg_energy(traces, out / "energy.svg")
        print(f"wrote {out / 'energy.svg'}")
    return 0


def _load_shape_points(path_str: str):
    from .shape import load_pgm, load_points_text

    path = Path(path_str)
    if path.suffix.lower() == ".pgm":
        return load_pgm(path)
    return load_points_text(path)


def cmd_shapes(args) -> int:
    if args.action == "list":
        for name, fn in sorted(GENERATORS.items()):
            doc = (fn.__doc__ or "").strip().splitlines()[0]
            print(f"{name}: {doc}")
        return 0
    if args.name not in GENERATORS:
        print(f"unknown generator {args.name!r}; try 'shapes list'", file=sys.stderr)
        return 1
    kwargs = {}
    for token in args.args or []:
        key, sep, val = token.partition("=")
        if not sep:
            print(f"bad generator argument {token!r} (expected k=v)", file=sys.stderr)
            return 1
        num = float(val)
        if num == int(num) and "." not in val and "e" not in val.lower():
            num = int(num)
        kwargs[key] = num
    try:
        pts = GENERATORS[args.name](**kwargs)
    except TypeError as exc:
        print(f"generator error: {exc}", file=sys.stderr)
        return 1
    save_points_text(args.out, pts)
    print(f"wrote {len(pts)} points to {args.out}")
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seeds = tuple(args.seed)
    if args.mode is not None:
        config.mode = args.mode
    out_dir = Path(args.out) if args.out else Path(config.out)
    return run_experiment(config, out_dir, jobs=args.jobs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmshape",
                                     description="shape-formation planning runs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (default from config)")
    p_run.add_argument("--seed", type=int, nargs="+",
                       help="override the config's seed list")
    p_run.add_argument("--mode", choices=["id", "gd", "both"])
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.set_defaults(fn=cmd_run)

    p_verify = sub.add_parser("verify", help="run the verification suite")
    p_verify.add_argument("--full", action="store_true",
                          help="full-size stationary-density check (slower)")
    p_verify.set_defaults(fn=cmd_verify)

    p_plot = sub.add_parser("plot", help="render SVG plots from run artifacts")
    p_plot.add_argument("--trajectory", nargs="*", help="trajectory csv file(s)")
    p_plot.add_argument("--energy", nargs="*", help="energy trace csv file(s)")
    p_plot.add_argument("--shape", required=True, help="shape point file")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--iterations", nargs="*", help="snapshot iterations")
    p_plot.add_argument("--domain", type=float, default=6.0)
    p_plot.set_defaults(fn=cmd_plot)

    p_shapes = sub.add_parser("shapes", help="built-in shape generators")
    p_shapes.add_argument("action", choices=["list", "emit"])
    p_shapes.add_argument("name", nargs="?")
    p_shapes.add_argument("--out")
    p_shapes.add_argument("--args", nargs="*", help="generator k=v arguments")
    p_shapes.set_defaults(fn=cmd_shapes)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
