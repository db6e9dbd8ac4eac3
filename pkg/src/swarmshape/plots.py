"""Static SVG rendering of snapshots and energy traces.

Hand-rolled SVG (no display server, no plotting toolkit) so outputs are
small, diffable, and byte-deterministic. Robot markers are colored by
their squared distance to the shape on a fixed two-stop ramp: steel blue
(#3182bd) at zero through crimson (#de2d26) at the snapshot's maximum.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .io import TrajectoryFile
from .shape import Shape

_BLUE = (0x31, 0x82, 0xBD)
_RED = (0xDE, 0x2D, 0x26)


def _ramp(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    rgb = tuple(round(a + t * (b - a)) for a, b in zip(_BLUE, _RED))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


class _Canvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def circle(self, x, y, r, fill, stroke=None):
        extra = f' stroke="{stroke}" stroke-width="0.5"' if stroke else ""
        self.parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" '
                          f'fill="{fill}"{extra}/>')

    def polyline(self, pts, stroke, width=1.5):
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        self.parts.append(f'<polyline points="{coords}" fill="none" '
                          f'stroke="{stroke}" stroke-width="{width}"/>')

    def line(self, x1, y1, x2, y2, stroke="#444444", width=1.0):
        self.parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" '
                          f'y2="{y2:.2f}" stroke="{stroke}" stroke-width="{width}"/>')

    def text(self, x, y, s, size=12, anchor="start", fill="#222222"):
        self.parts.append(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
                          f'font-family="sans-serif" text-anchor="{anchor}" '
                          f'fill="{fill}">{s}</text>')

    def write(self, path):
        self.parts.append("</svg>")
        Path(path).write_text("\n".join(self.parts) + "\n", encoding="utf-8")


def svg_snapshot(positions, sq_dists, shape: Shape, path,
                 domain_half_width: float = 6.0, size: int = 640) -> None:
    """One configuration over the shape; markers colored by shape distance."""
    pos = np.asarray(positions, dtype=np.float64)
    mu = np.asarray(sq_dists, dtype=np.float64)
    m = domain_half_width
    pad = 20.0
    scale = (size - 2 * pad) / (2 * m)

    def to_px(p):
        return pad + (p[0] + m) * scale, pad + (m - p[1]) * scale

    canvas = _Canvas(size, size)
    canvas.line(pad, pad, size - pad, pad)
    canvas.line(pad, size - pad, size - pad, size - pad)
    canvas.line(pad, pad, pad, size - pad)
    canvas.line(size - pad, pad, size - pad, size - pad)
    for p in shape.points:
        x, y = to_px(p)
        canvas.circle(x, y, 1.2, "#b0b0b0")
    top = float(np.sqrt(mu.max())) if mu.size and mu.max() > 0 else 1.0
    for k in range(pos.shape[0]):
        x, y = to_px(pos[k])
        canvas.circle(x, y, 3.0, _ramp(float(np.sqrt(mu[k])) / top), stroke="#333333")
    canvas.write(path)


def render_snapshots(traj: TrajectoryFile, shape: Shape, out_dir,
                     iterations=None, domain_half_width: float = 6.0
                     ) -> tuple[list[Path], list[int]]:
    """Snapshot SVGs for the requested iterations (all when None).

    Iterations absent from the trajectory are returned in the second list
    and skipped rather than failing the whole render.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    available = sorted(set(traj.iterations.tolist()))
    wanted = available if iterations is None else list(iterations)
    missing = [it for it in wanted if it not in set(available)]
    written = []
    for it in wanted:
        if it in missing:
            continue
        mask = traj.iterations == it
        pos = traj.xy[mask]
        order = np.argsort(traj.robots[mask])
        pos = pos[order]
        mu = shape.sq_distance_batch(pos)
        path = out_dir / f"snapshot_{traj.mode}_{it:08d}.svg"
        svg_snapshot(pos, mu, shape, path, domain_half_width)
        written.append(path)
    return written, missing


_SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]


def svg_energy(traces: list[tuple[str, np.ndarray, np.ndarray]], path,
               size: tuple[int, int] = (720, 420)) -> None:
    """Energy-vs-iteration line plot; one labeled polyline per trace."""
    width, height = size
    pad_l, pad_r, pad_t, pad_b = 60.0, 20.0, 20.0, 40.0
    canvas = _Canvas(width, height)
    if not traces:
        canvas.write(path)
        return
    x_max = max(1, max(int(t[1].max()) for t in traces if len(t[1])))
    y_max = max(float(np.max(t[2])) for t in traces if len(t[2]))
    y_max = y_max if y_max > 0 else 1.0
    plot_w = width - pad_l - pad_r
    plot_h = height - pad_t - pad_b

    def to_px(it, psi):
        return (pad_l + plot_w * it / x_max,
                pad_t + plot_h * (1.0 - psi / y_max))

    canvas.line(pad_l, pad_t, pad_l, height - pad_b)
    canvas.line(pad_l, height - pad_b, width - pad_r, height - pad_b)
    for k in range(5):
        frac = k / 4
        y = pad_t + plot_h * (1 - frac)
        canvas.line(pad_l - 4, y, pad_l, y)
        canvas.text(pad_l - 8, y + 4, f"{frac * y_max:.3g}", size=10, anchor="end")
        x = pad_l + plot_w * frac
        canvas.line(x, height - pad_b, x, height - pad_b + 4)
        canvas.text(x, height - pad_b + 16, f"{frac * x_max:.0f}", size=10, anchor="middle")
    canvas.text(width / 2, height - 6, "iteration", size=12, anchor="middle")
    canvas.text(12, pad_t + 10, "energy", size=12)
    for k, (label, its, psis) in enumerate(traces):
        color = _SERIES_COLORS[k % len(_SERIES_COLORS)]
        pts = [to_px(float(i), float(p)) for i, p in zip(its, psis)]
        if len(pts) == 1:
            pts = pts * 2
        canvas.polyline(pts, color)
        canvas.text(width - pad_r - 150, pad_t + 16 + 16 * k, label, size=12, fill=color)
    canvas.write(path)
