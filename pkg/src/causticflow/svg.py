"""Self-contained SVG renderings of caustics, portraits and diagrams.

Coordinates map the scan window onto a fixed viewBox; styling lives in CSS
classes embedded in the file so downstream tools can restyle the layers.
"""

from __future__ import annotations

import numpy as np

__all__ = ["render_caustic", "render_portrait", "render_diagram"]

_SIZE = 720.0

_STYLE = """
  .axes { stroke: #c8c8c8; stroke-width: 1; }
  .fold { stroke: #1f4e79; stroke-width: 2; fill: none; }
  .locus { stroke: #7aa6c2; stroke-width: 1; fill: none; stroke-dasharray: 4 3; }
  .cusp { fill: #c23b22; }
  .non-morse { fill: #7a1fa2; }
  .separatrix-unstable { stroke: #b3402a; stroke-width: 1.2; fill: none; }
  .separatrix-stable { stroke: #2a6fb3; stroke-width: 1.2; fill: none; }
  .cp-unstable-node { fill: #e06666; stroke: #000; stroke-width: 0.5; }
  .cp-stable-node { fill: #6fa8dc; stroke: #000; stroke-width: 0.5; }
  .cp-saddle { fill: #f1c232; stroke: #000; stroke-width: 0.5; }
  .cp-degenerate { fill: #999; stroke: #000; stroke-width: 0.5; }
  .stratum { stroke: #38761d; stroke-width: 2; fill: none; }
  .codim2 { fill: #38761d; stroke: #000; stroke-width: 0.5; }
  .region-sample { fill: #666; }
"""


class _Mapper:
    def __init__(self, window, size=_SIZE):
        xmin, xmax, ymin, ymax = window.bounds
        self.sx = size / (xmax - xmin)
        self.sy = size / (ymax - ymin)
        self.xmin, self.ymax = xmin, ymax
        self.size = size

    def pt(self, p):
        return ((p[0] - self.xmin) * self.sx, (self.ymax - p[1]) * self.sy)

    def fmt(self, pts):
        return " ".join(f"{u:.3f},{v:.3f}" for u, v in (self.pt(p) for p in pts))


def _svg(window, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_SIZE:.0f} {_SIZE:.0f}">\n'
            f"<style>{_STYLE}</style>\n{body}</svg>\n")


def _axes(m, window):
    xmin, xmax, ymin, ymax = window.bounds
    parts = []
    if xmin < 0 < xmax:
        a, b = m.pt((0, ymin)), m.pt((0, ymax))
        parts.append(f'<line class="axes" x1="{a[0]:.3f}" y1="{a[1]:.3f}" x2="{b[0]:.3f}" y2="{b[1]:.3f}"/>')
    if ymin < 0 < ymax:
        a, b = m.pt((xmin, 0)), m.pt((xmax, 0))
        parts.append(f'<line class="axes" x1="{a[0]:.3f}" y1="{a[1]:.3f}" x2="{b[0]:.3f}" y2="{b[1]:.3f}"/>')
    return parts


def _window_for_points(pts_list, fallback=None):
    from .geometry import Window
    pts = [p for ps in pts_list for p in (ps if len(ps) else [])]
    if not pts:
        return fallback or Window((0, 0), (1, 1), (16, 16))
    arr = np.asarray(pts)
    lo, hi = arr.min(axis=0), arr.max(axis=0)
    c = 0.5 * (lo + hi)
    h = np.maximum(0.6 * (hi - lo), 1e-3)
    return Window((c[0], c[1]), (float(h[0]), float(h[1])), (16, 16))


def render_caustic(curve, window=None) -> str:
    w = window or _window_for_points(curve.components)
    m = _Mapper(w)
    parts = _axes(m, w)
    for comp in curve.components:
        if len(comp) >= 2:
            parts.append(f'<polyline class="fold" points="{m.fmt(comp)}"/>')
    for p in curve.cusp_points:
        u, v = m.pt(p)
        parts.append(f'<circle class="cusp" cx="{u:.3f}" cy="{v:.3f}" r="4"/>')
    for p in curve.non_morse_points:
        u, v = m.pt(p)
        parts.append(f'<circle class="non-morse" cx="{u:.3f}" cy="{v:.3f}" r="4"/>')
    return _svg(w, "\n".join(parts) + "\n")


def render_portrait(p, window) -> str:
    m = _Mapper(window)
    parts = _axes(m, window)
    for s in p.separatrices:
        cls = "separatrix-unstable" if s.is_unstable else "separatrix-stable"
        if len(s.trajectory) >= 2:
            parts.append(f'<polyline class="{cls}" points="{m.fmt(s.trajectory)}"/>')
    for c in p.critical_points:
        u, v = m.pt(c.position)
        parts.append(f'<circle class="cp-{c.kind}" cx="{u:.3f}" cy="{v:.3f}" r="5"/>')
    return _svg(window, "\n".join(parts) + "\n")


def render_diagram(d) -> str:
    w = d.base_window
    m = _Mapper(w)
    parts = _axes(m, w)
    for comp in d.caustic.components:
        if len(comp) >= 2:
            parts.append(f'<polyline class="fold" points="{m.fmt(comp)}"/>')
    for p in d.caustic.cusp_points:
        u, v = m.pt(p)
        parts.append(f'<circle class="cusp" cx="{u:.3f}" cy="{v:.3f}" r="4"/>')
    for p in d.caustic.non_morse_points:
        u, v = m.pt(p)
        parts.append(f'<circle class="non-morse" cx="{u:.3f}" cy="{v:.3f}" r="4"/>')
    for cv in d.strata:
        if len(cv.points) >= 2:
            parts.append(f'<polyline class="stratum" points="{m.fmt(cv.points)}"/>')
    for p, _, _ in d.codim2_points:
        u, v = m.pt(p)
        parts.append(f'<circle class="codim2" cx="{u:.3f}" cy="{v:.3f}" r="4"/>')
    for r in d.regions:
        u, v = m.pt(r.sample_x)
        parts.append(f'<circle class="region-sample" cx="{u:.3f}" cy="{v:.3f}" r="2">'
                     f"<title>region {r.id}: {r.signature}</title></circle>")
    return _svg(w, "\n".join(parts) + "\n")
