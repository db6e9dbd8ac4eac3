"""On-disk artifacts: trajectory files, energy traces, metrics, summaries.

All files are deterministic plain text (no timestamps), so repeated runs
with the same seed produce byte-identical artifact sets. Floats are
written with 17 significant digits and round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .planner import RunRecord

TRAJECTORY_MAGIC = "# swarmshape trajectory v1"
ENERGY_MAGIC = "# swarmshape energy-trace v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17e")


def params_hash(record: RunRecord) -> str:
    """Stable fingerprint of everything that determines a run."""
    pot = record.pot_params
    par = record.params
    blob = "|".join([
        record.shape_name, record.mode,
        _fmt(pot.hard_radius), _fmt(pot.sensing_radius), _fmt(pot.amplitude),
        pot.kernel.value, _fmt(pot.barrier_distance),
        _fmt(par.epsilon), _fmt(par.tau), _fmt(par.dt), _fmt(par.alpha),
        _fmt(par.beta), str(par.s_max), str(par.step4_cap), str(par.outer_cap),
        _fmt(par.domain_half_width), str(par.seed), str(par.snapshot_stride),
        str(record.initial_positions.shape[0]),
    ])
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class TrajectoryFile:
    """Parsed trajectory artifact: header metadata plus position rows."""

    n_robots: int
    shape_id: str
    params_hash: str
    seed: int
    mode: str
    iterations: np.ndarray
    phases: list[str]
    robots: np.ndarray
    xy: np.ndarray


def _snapshot_rows(record: RunRecord, virtual: bool):
    """(ordinal, phase, positions) snapshots, deduplicated by ordinal."""
    if virtual:
        snaps = list(record.virtual_snapshots)
    else:
        snaps = [(0, "initial", record.initial_positions)] + list(record.snapshots)
    seen = set()
    out = []
    for ordinal, phase, pos in snaps:
        if ordinal in seen:
            continue
        seen.add(ordinal)
        out.append((ordinal, phase, pos))
    out.sort(key=lambda t: t[0])
    return out


def write_trajectory(record: RunRecord, path, virtual: bool = False) -> None:
    """Write configuration snapshots, sorted by (iteration, robot index)."""
    snaps = _snapshot_rows(record, virtual)
    lines = [
        TRAJECTORY_MAGIC,
        f"# n_robots = {record.initial_positions.shape[0]}",
        f"# shape_id = {record.shape_name}",
        f"# params_hash = {params_hash(record)}",
        f"# seed = {record.params.seed}",
        f"# mode = {record.mode}",
        "iteration,phase,robot,x,y",
    ]
    for ordinal, phase, pos in snaps:
        for robot in range(pos.shape[0]):
            lines.append(f"{ordinal},{phase},{robot},"
                         f"{_fmt(pos[robot, 0])},{_fmt(pos[robot, 1])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trajectory(path) -> TrajectoryFile:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0] != TRAJECTORY_MAGIC:
        raise ValueError(f"{path}: not a swarmshape trajectory file")
    header = {}
    body_start = None
    for k, line in enumerate(text[1:], start=1):
        if line.startswith("# "):
            key, _, val = line[2:].partition(" = ")
            header[key.strip()] = val.strip()
        else:
            body_start = k
            break
    if body_start is None or text[body_start] != "iteration,phase,robot,x,y":
        raise ValueError(f"{path}: missing column header")
    its, phases, robots, xs, ys = [], [], [], [], []
    for line in text[body_start + 1:]:
        if not line:
            continue
        it, phase, robot, x, y = line.split(",")
        its.append(int(it))
        phases.append(phase)
        robots.append(int(robot))
        xs.append(float(x))
        ys.append(float(y))
    return TrajectoryFile(
        n_robots=int(header.get("n_robots", 0)),
        shape_id=header.get("shape_id", ""),
        params_hash=header.get("params_hash", ""),
        seed=int(header.get("seed", 0)),
        mode=header.get("mode", ""),
        iterations=np.asarray(its, dtype=np.int64),
        phases=phases,
        robots=np.asarray(robots, dtype=np.int64),
        xy=np.column_stack([xs, ys]) if xs else np.zeros((0, 2)),
    )


def serialize_trajectory(traj: TrajectoryFile) -> str:
    """Inverse of :func:`read_trajectory`; used for round-trip checks."""
    lines = [
        TRAJECTORY_MAGIC,
        f"# n_robots = {traj.n_robots}",
        f"# shape_id = {traj.shape_id}",
        f"# params_hash = {traj.params_hash}",
        f"# seed = {traj.seed}",
        f"# mode = {traj.mode}",
        "iteration,phase,robot,x,y",
    ]
    for k in range(len(traj.iterations)):
        lines.append(f"{traj.iterations[k]},{traj.phases[k]},{traj.robots[k]},"
                     f"{_fmt(traj.xy[k, 0])},{_fmt(traj.xy[k, 1])}")
    return "\n".join(lines) + "\n"


def write_energy_trace(record: RunRecord, path) -> None:
    """Per-iteration energies, attraction/repulsion parts, min distance."""
    lines = [
        ENERGY_MAGIC,
        f"# seed = {record.params.seed}",
        f"# mode = {record.mode}",
        "iteration,phase,psi,f,g,min_dist",
        f"0,initial,{_fmt(record.initial_psi)},{_fmt(record.initial_f)},"
        f"{_fmt(record.initial_g)},{_fmt(record.initial_min_dist)}",
    ]
    for k in range(len(record.row_psi)):
        lines.append(f"{record.row_ordinal[k]},{record.row_phase[k]},"
                     f"{_fmt(record.row_psi[k])},{_fmt(record.row_f[k])},"
                     f"{_fmt(record.row_g[k])},{_fmt(record.row_min_dist[k])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_energy_trace(path) -> dict:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0] != ENERGY_MAGIC:
        raise ValueError(f"{path}: not a swarmshape energy trace")
    rows = {"iteration": [], "phase": [], "psi": [], "f": [], "g": [], "min_dist": []}
    header_seen = False
    meta = {}
    for line in text[1:]:
        if line.startswith("# "):
            key, _, val = line[2:].partition(" = ")
            meta[key.strip()] = val.strip()
            continue
        if not header_seen:
            header_seen = True  # column header line
            continue
        if not line:
            continue
        it, phase, psi, f, g, mind = line.split(",")
        rows["iteration"].append(int(it))
        rows["phase"].append(phase)
        rows["psi"].append(float(psi))
        rows["f"].append(float(f))
        rows["g"].append(float(g))
        rows["min_dist"].append(float(mind))
    for key in ("iteration", "psi", "f", "g", "min_dist"):
        rows[key] = np.asarray(rows[key], dtype=np.int64 if key == "iteration" else float)
    rows["meta"] = meta
    return rows


def write_metrics(metrics: dict, path) -> None:
    Path(path).write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def write_seed_table(rows: list[dict], path) -> None:
    """Per-seed outcome table, one line per (seed, mode), failures marked."""
    lines = ["seed,mode,status,terminal_psi,best_psi"]
    for row in sorted(rows, key=lambda r: (r["seed"], r["mode"])):
        if row.get("failed"):
            lines.append(f"{row['seed']},{row['mode']},FAILED,,")
        else:
            lines.append(f"{row['seed']},{row['mode']},{row['status']},"
                         f"{_fmt(row['terminal_psi'])},{_fmt(row['best_psi'])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary(hard_radius: float, n_robots: int, rows: list[dict], path) -> None:
    """Aggregate best-energy statistics across seeds per mode."""
    lines = ["hard_radius,n_robots,mode,n_seeds,n_failed,"
             "best_psi_mean,best_psi_median,best_psi_min"]
    for mode in ("id", "gd"):
        sub = [r for r in rows if r["mode"] == mode]
        if not sub:
            continue
        good = [r["best_psi"] for r in sub if not r.get("failed")]
        failed = sum(1 for r in sub if r.get("failed"))
        if good:
            stats = (_fmt(np.mean(good)), _fmt(np.median(good)), _fmt(np.min(good)))
        else:
            stats = ("", "", "")
        lines.append(f"{_fmt(hard_radius)},{n_robots},{mode},{len(sub)},{failed},"
                     + ",".join(stats))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
