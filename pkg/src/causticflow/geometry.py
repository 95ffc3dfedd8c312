"""Rectangular scan windows and small polyline utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Window", "polyline_length", "point_polyline_distance",
           "polyline_min_distance", "hausdorff_distance", "segment_crossings"]


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle with a per-axis grid resolution."""

    center: tuple[float, float] = (0.0, 0.0)
    half_widths: tuple[float, float] = (1.0, 1.0)
    resolution: tuple[int, int] = (64, 64)

    def __post_init__(self):
        cx, cy = (float(v) for v in self.center)
        hx, hy = (float(v) for v in self.half_widths)
        nx, ny = (int(v) for v in self.resolution)
        if not (hx > 0 and hy > 0):
            raise ValueError("half_widths must be positive")
        if nx < 16 or ny < 16:
            raise ValueError("resolution must be at least 16 per axis")
        object.__setattr__(self, "center", (cx, cy))
        object.__setattr__(self, "half_widths", (hx, hy))
        object.__setattr__(self, "resolution", (nx, ny))

    @property
    def bounds(self):
        """(xmin, xmax, ymin, ymax)."""
        (cx, cy), (hx, hy) = self.center, self.half_widths
        return (cx - hx, cx + hx, cy - hy, cy + hy)

    def axes(self):
        xmin, xmax, ymin, ymax = self.bounds
        nx, ny = self.resolution
        return np.linspace(xmin, xmax, nx + 1), np.linspace(ymin, ymax, ny + 1)

    @property
    def cell_size(self):
        nx, ny = self.resolution
        hx, hy = self.half_widths
        return (2 * hx / nx, 2 * hy / ny)

    def cell_size_for(self, n: int):
        """Cell size when this window is sampled on an n-by-n grid."""
        hx, hy = self.half_widths
        return (2 * hx / n, 2 * hy / n)

    @property
    def diameter(self) -> float:
        hx, hy = self.half_widths
        return 2.0 * float(np.hypot(hx, hy))

    def contains(self, pts, pad: float = 0.0):
        pts = np.asarray(pts, dtype=float)
        xmin, xmax, ymin, ymax = self.bounds
        return ((pts[..., 0] >= xmin - pad) & (pts[..., 0] <= xmax + pad)
                & (pts[..., 1] >= ymin - pad) & (pts[..., 1] <= ymax + pad))

    def boundary_polyline(self, points_per_side: int = 64):
        """Closed CCW rectangle boundary, last vertex == first vertex."""
        xmin, xmax, ymin, ymax = self.bounds
        t = np.linspace(0.0, 1.0, points_per_side, endpoint=False)
        bottom = np.stack([xmin + (xmax - xmin) * t, np.full_like(t, ymin)], axis=1)
        right = np.stack([np.full_like(t, xmax), ymin + (ymax - ymin) * t], axis=1)
        top = np.stack([xmax - (xmax - xmin) * t, np.full_like(t, ymax)], axis=1)
        left = np.stack([np.full_like(t, xmin), ymax - (ymax - ymin) * t], axis=1)
        loop = np.concatenate([bottom, right, top, left, [[xmin, ymin]]], axis=0)
        return loop

    def scaled(self, factor: float) -> "Window":
        hx, hy = self.half_widths
        return Window(self.center, (hx * factor, hy * factor), self.resolution)


def polyline_length(pts) -> float:
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def point_polyline_distance(p, pts) -> float:
    """Distance from point p to a polyline (its segments, not just vertices)."""
    pts = np.asarray(pts, dtype=float)
    p = np.asarray(p, dtype=float)
    if len(pts) == 1:
        return float(np.linalg.norm(p - pts[0]))
    a = pts[:-1]
    d = pts[1:] - a
    denom = np.einsum("ij,ij->i", d, d)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / denom, 0.0, 1.0)
    proj = a + t[:, None] * d
    return float(np.min(np.linalg.norm(proj - p, axis=1)))


def points_polyline_distance(ps, pts):
    """Vectorized distance from each point in ps to the polyline pts."""
    pts = np.asarray(pts, dtype=float)
    ps = np.asarray(ps, dtype=float)
    a = pts[:-1] if len(pts) > 1 else pts
    if len(pts) > 1:
        d = pts[1:] - a
        denom = np.einsum("ij,ij->i", d, d)
        denom = np.where(denom == 0.0, 1.0, denom)
        rel = ps[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", rel, d) / denom[None, :], 0.0, 1.0)
        proj = a[None, :, :] + t[..., None] * d[None, :, :]
        return np.min(np.linalg.norm(proj - ps[:, None, :], axis=2), axis=1)
    return np.linalg.norm(ps - pts[0], axis=1)


def polyline_min_distance(pts_a, pts_b) -> float:
    """Minimum distance between two polylines (vertex-to-segment, both ways)."""
    da = float(np.min(points_polyline_distance(np.asarray(pts_a, dtype=float), pts_b)))
    db = float(np.min(points_polyline_distance(np.asarray(pts_b, dtype=float), pts_a)))
    return min(da, db)


def hausdorff_distance(pts_a, pts_b) -> float:
    """Symmetric Hausdorff distance between polylines, vertices vs segments."""
    da = float(np.max(points_polyline_distance(np.asarray(pts_a, dtype=float), pts_b)))
    db = float(np.max(points_polyline_distance(np.asarray(pts_b, dtype=float), pts_a)))
    return max(da, db)


def segment_crossings(chords_a, chords_b, seg):
    """Crossing parameters of polyline chords with one segment.

    chords_a, chords_b: (N, 2) arrays of chord endpoints; seg: ((2,), (2,)).
    Returns (idx, t_chord, u_seg) for every properly crossing chord.
    """
    a = np.asarray(chords_a, dtype=float)
    b = np.asarray(chords_b, dtype=float)
    p, q = (np.asarray(v, dtype=float) for v in seg)
    r = b - a
    s = q - p
    denom = r[:, 0] * s[1] - r[:, 1] * s[0]
    ok = np.abs(denom) > 1e-300
    denom_safe = np.where(ok, denom, 1.0)
    ap = p[None, :] - a
    t = (ap[:, 0] * s[1] - ap[:, 1] * s[0]) / denom_safe
    u = (ap[:, 0] * r[:, 1] - ap[:, 1] * r[:, 0]) / denom_safe
    hit = ok & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)
    idx = np.nonzero(hit)[0]
    return idx, t[idx], u[idx]
