"""Target shapes as finite 2D point sets with fast nearest-point queries.

A shape is an immutable cloud of sample points. The workhorse query is
"nearest sample point and squared distance", accelerated by a k-d tree.
Ties (query points equidistant from several samples) are broken by the
lowest sample index so that repeated runs stay deterministic.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree


class ShapeError(ValueError):
    """Raised for invalid shape definitions (empty point sets, bad files)."""


class Shape:
    """A finite set of 2D points with a spatial index.

    Queries return squared distances. The squared-distance field is
    non-differentiable where two or more sample points are equally near
    (the medial axis of the sampling); there the gradient returned by
    :meth:`sq_distance_grad` is the subgradient choice induced by the
    lowest-index tie rule.
    """

    def __init__(self, points, name: str = "shape"):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ShapeError("shape needs a non-empty (n, 2) point array")
        if not np.all(np.isfinite(pts)):
            raise ShapeError("shape points must be finite")
        pts = pts.copy()
        pts.setflags(write=False)
        self.points = pts
        self.name = name
        self.index = cKDTree(pts)
        self.bounding_box = (pts.min(axis=0), pts.max(axis=0))
        self._resolution = None

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def resolution(self) -> float:
        """Median nearest-neighbor spacing of the sample points.

        Used as the sampling resolution when deriving energy tolerances.
        For a single-point shape this is 0.
        """
        if self._resolution is None:
            if self.n_points < 2:
                self._resolution = 0.0
            else:
                d, _ = self.index.query(self.points, k=2)
                self._resolution = float(np.median(d[:, 1]))
        return self._resolution

    def nearest(self, x) -> tuple[np.ndarray, float, int]:
        """Nearest sample point to ``x``: (point, squared distance, index).

        Exact ties are resolved to the lowest point index.
        """
        q = np.asarray(x, dtype=np.float64)
        k = min(2, self.n_points)
        _, idx = self.index.query(q, k=k)
        idx = np.atleast_1d(idx)
        cand_sq = np.sum((self.points[idx] - q) ** 2, axis=1)
        best = int(np.argmin(cand_sq))  # argmin already prefers the earlier candidate
        best_idx = int(idx[best])
        best_sq = float(cand_sq[best])
        if k == 2 and cand_sq[0] == cand_sq[1]:
            # A genuine tie can involve more points than the two returned.
            ball = self.index.query_ball_point(q, math.sqrt(best_sq) * (1 + 1e-12) + 1e-300)
            ball = np.sort(np.asarray(ball, dtype=np.intp))
            sq = np.sum((self.points[ball] - q) ** 2, axis=1)
            tied = ball[sq == sq.min()]
            best_idx = int(tied[0])
            best_sq = float(sq.min())
        return self.points[best_idx], best_sq, best_idx

    def nearest_batch(self, xs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized :meth:`nearest` over an (n, 2) query array."""
        q = np.asarray(xs, dtype=np.float64)
        if self.n_points == 1:
            sq = np.sum((q - self.points[0]) ** 2, axis=1)
            idx = np.zeros(len(q), dtype=np.intp)
            return self.points[idx], sq, idx
        _, idx2 = self.index.query(q, k=2, workers=-1)
        d0 = q - self.points[idx2[:, 0]]
        d1 = q - self.points[idx2[:, 1]]
        sq0 = d0[:, 0] ** 2 + d0[:, 1] ** 2
        sq1 = d1[:, 0] ** 2 + d1[:, 1] ** 2
        take1 = (sq1 < sq0) | ((sq1 == sq0) & (idx2[:, 1] < idx2[:, 0]))
        idx = np.where(take1, idx2[:, 1], idx2[:, 0])
        sq = np.where(take1, sq1, sq0)
        tied = np.nonzero(sq1 == sq0)[0]
        for i in tied:  # rare; route through the exact scalar path
            _, sq_i, idx_i = self.nearest(q[i])
            sq[i] = sq_i
            idx[i] = idx_i
        return self.points[idx], sq, idx

    def sq_distance(self, x) -> float:
        """Squared distance from ``x`` to the shape."""
        return self.nearest(x)[1]

    def sq_distance_grad(self, x) -> np.ndarray:
        """Gradient 2(x - p*) of the squared-distance field at ``x``.

        On the medial axis the field is non-differentiable; the returned
        vector uses the lowest-index nearest point (a subgradient choice).
        """
        q = np.asarray(x, dtype=np.float64)
        p, _, _ = self.nearest(q)
        return 2.0 * (q - p)

    def sq_distance_batch(self, xs) -> np.ndarray:
        return self.nearest_batch(xs)[1]


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def load_points_text(path) -> np.ndarray:
    """Read a point file: one ``x y`` (or ``x,y``) pair per line, '#' comments."""
    pts = []
    path = Path(path)
    for ln, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ShapeError(f"{path}:{ln}: expected two numbers, got {raw!r}")
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ShapeError(f"{path}:{ln}: {exc}") from None
    if not pts:
        raise ShapeError(f"{path}: no points")
    return np.asarray(pts, dtype=np.float64)


def save_points_text(path, points) -> None:
    pts = np.asarray(points, dtype=np.float64)
    lines = [f"{format(x, '.17e')} {format(y, '.17e')}" for x, y in pts]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_pgm(path, threshold: int = 128, domain_half_width: float = 6.0) -> np.ndarray:
    """Extract shape points from a binary PGM (magic ``P5``) image.

    Pixels darker than ``threshold`` become points at their pixel centers,
    scaled so the image fits centered in [-M, M]^2 with M = domain_half_width.
    """
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ShapeError(f"{path}: not a P5 portable graymap")
    # Header tokens: magic, width, height, maxval; '#' comments allowed.
    tokens: list[bytes] = []
    i = 2
    while len(tokens) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ShapeError(f"{path}: truncated header")
        tokens.append(data[start:i])
    i += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval > 255:
        raise ShapeError(f"{path}: 16-bit graymaps not supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=i)
    img = raster.reshape(height, width)
    rows, cols = np.nonzero(img < threshold)
    if len(rows) == 0:
        raise ShapeError(f"{path}: no pixels below threshold {threshold}")
    scale = 2.0 * domain_half_width / max(width, height)
    xs = (cols + 0.5 - width / 2.0) * scale
    ys = (height / 2.0 - rows - 0.5) * scale  # image row 0 is the top
    return np.column_stack([xs, ys])


# ---------------------------------------------------------------------------
# Built-in generators
# ---------------------------------------------------------------------------

def circle_points(center=(0.0, 0.0), radius: float = 5.0, n: int = 200) -> np.ndarray:
    """Evenly sampled circle (a closed loop)."""
    if radius <= 0 or n < 1:
        raise ShapeError("circle needs radius > 0 and n >= 1")
    t = 2.0 * np.pi * np.arange(n) / n
    cx, cy = center
    return np.column_stack([cx + radius * np.cos(t), cy + radius * np.sin(t)])


def segment_chain_points(vertices, spacing: float = 0.1) -> np.ndarray:
    """Polyline sampled at roughly uniform spacing, vertices included."""
    verts = np.asarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[0] < 2:
        raise ShapeError("segment chain needs at least two vertices")
    if spacing <= 0:
        raise ShapeError("spacing must be positive")
    pts = [verts[0]]
    for a, b in zip(verts[:-1], verts[1:]):
        length = float(np.linalg.norm(b - a))
        steps = max(1, int(math.ceil(length / spacing)))
        for k in range(1, steps + 1):
            pts.append(a + (b - a) * (k / steps))
    return np.asarray(pts)


def _point_in_polygon(px, py, verts) -> np.ndarray:
    """Even-odd rule for arrays of query points against one polygon."""
    inside = np.zeros_like(px, dtype=bool)
    n = len(verts)
    for k in range(n):
        x0, y0 = verts[k]
        x1, y1 = verts[(k + 1) % n]
        crosses = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < xint)
    return inside


def polygon_grid_points(vertices, pitch: float = 0.1) -> np.ndarray:
    """Grid sampling of a polygon interior (even-odd fill rule)."""
    verts = np.asarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[0] < 3:
        raise ShapeError("polygon needs at least three vertices")
    if pitch <= 0:
        raise ShapeError("pitch must be positive")
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    xs = np.arange(lo[0] + pitch / 2, hi[0], pitch)
    ys = np.arange(lo[1] + pitch / 2, hi[1], pitch)
    gx, gy = np.meshgrid(xs, ys)
    gx = gx.ravel()
    gy = gy.ravel()
    mask = _point_in_polygon(gx, gy, verts)
    if not mask.any():
        raise ShapeError("polygon grid produced no interior points")
    return np.column_stack([gx[mask], gy[mask]])


def ring_band_points(center=(0.0, 0.0), r_inner: float = 3.7, r_outer: float = 5.0,
                     pitch: float = 0.15) -> np.ndarray:
    """Grid sampling of an annulus band (a thick closed loop)."""
    if not (0 < r_inner < r_outer):
        raise ShapeError("ring band needs 0 < r_inner < r_outer")
    cx, cy = center
    xs = np.arange(-r_outer + pitch / 2, r_outer, pitch)
    gx, gy = np.meshgrid(xs, xs)
    gx = gx.ravel()
    gy = gy.ravel()
    rr = np.hypot(gx, gy)
    mask = (rr >= r_inner) & (rr <= r_outer)
    return np.column_stack([gx[mask] + cx, gy[mask] + cy])


def q_glyph_points(center=(0.0, 0.0), r_inner: float = 3.75, r_outer: float = 5.05,
                   tail_length: float = 1.9, tail_width: float = 0.7,
                   pitch: float = 0.15) -> np.ndarray:
    """A 'Q'-like glyph: a thick closed ring plus a diagonal tail stroke.

    The tail leaves the ring at the lower-right (-45 degrees) and extends
    outward, staying inside the standard [-6, 6]^2 domain for the defaults.
    """
    band = ring_band_points(center, r_inner, r_outer, pitch)
    cx, cy = center
    r_mid = 0.5 * (r_inner + r_outer)
    u = np.array([1.0, -1.0]) / math.sqrt(2.0)  # outward tail direction
    n = np.array([1.0, 1.0]) / math.sqrt(2.0)
    start = r_mid - 0.3
    ts = np.arange(0.0, tail_length + pitch / 2, pitch)
    ws = np.arange(-tail_width / 2, tail_width / 2 + pitch / 2, pitch)
    tt, ww = np.meshgrid(ts, ws)
    tail = (np.array([cx, cy])
            + np.outer(tt.ravel() + start, u)
            + np.outer(ww.ravel(), n))
    keep = np.hypot(tail[:, 0] - cx, tail[:, 1] - cy) > r_outer
    return np.vstack([band, tail[keep]])


#: Registry used by the command-line ``shapes`` subcommand.
GENERATORS = {
    "circle": circle_points,
    "segment_chain": segment_chain_points,
    "polygon_grid": polygon_grid_points,
    "ring_band": ring_band_points,
    "q_glyph": q_glyph_points,
}
