"""Critical locus extraction and caustic classification.

The critical locus is the zero set of det Hf in the fiber plane; its image
under the Lagrangian map y -> grad f(y) is the caustic.  Regular caustic
points are folds; cusps sit where the Hessian kernel direction becomes
tangent to the critical locus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field import GeneratingFunction, pyramid_slice
from .geometry import Window, point_polyline_distance

__all__ = ["CriticalLocus", "CausticCurve", "critical_locus", "push_forward",
           "classify_caustic", "pyramid_slices", "TOL_LOCUS"]

TOL_LOCUS = 1e-9
_DEGENERATE_DET2 = 1e-12  # threshold on (det H)^2 for isolated zeros
_CUSP_ARC_TOL = 1e-10

# marching-squares pairing: case bit k set when corner k is positive;
# corners ordered (i,j), (i+1,j), (i+1,j+1), (i,j+1); edges 0=bottom,
# 1=right, 2=top, 3=left.  Cases 5 and 10 are resolved by the center sample.
_MS_TABLE = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)],
    6: [(0, 2)], 7: [(3, 2)], 8: [(2, 3)], 9: [(0, 2)],
    11: [(1, 2)], 12: [(1, 3)], 13: [(0, 1)], 14: [(3, 0)],
}
_MS_SADDLE = {
    (5, True): [(0, 1), (2, 3)], (5, False): [(3, 0), (1, 2)],
    (10, True): [(3, 0), (1, 2)], (10, False): [(0, 1), (2, 3)],
}


@dataclass
class CriticalLocus:
    """Polyline components of {det Hf = 0} plus isolated degenerate zeros."""

    components: list = field(default_factory=list)  # list of (Mi, 2) arrays
    closed: list = field(default_factory=list)  # per-component loop flag
    degenerate_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    warnings: list = field(default_factory=list)
    window: Window | None = None

    def vertex_count(self) -> int:
        return int(sum(len(c) for c in self.components))


@dataclass
class CausticCurve:
    """Caustic polylines in the base plane with fold/cusp labels."""

    components: list = field(default_factory=list)  # list of (Mi, 2) arrays
    closed: list = field(default_factory=list)
    labels: list | None = None  # per-component list of 'fold'/'cusp' strings
    cusp_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    cusp_fiber_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    non_morse_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    warnings: list = field(default_factory=list)

    def all_vertices(self):
        if not self.components:
            return np.zeros((0, 2))
        return np.concatenate(self.components, axis=0)


def _refine_onto_locus(f: GeneratingFunction, pts, iters=30):
    """Newton-project points onto {det Hf = 0} along grad(det Hf)."""
    y = np.array(pts, dtype=float)
    if len(y) == 0:
        return y, np.zeros(0)
    best = y.copy()
    best_d = np.abs(f.det_hessian_many(y))
    for _ in range(iters):
        d = f.det_hessian_many(y)
        g = f.det_hessian_grad_many(y)
        g2 = np.einsum("ij,ij->i", g, g)
        step = (d / np.maximum(g2, 1e-300))[:, None] * g
        y = y - step
        ad = np.abs(f.det_hessian_many(y))
        better = ad < best_d
        best[better] = y[better]
        best_d[better] = ad[better]
        if np.max(best_d) < 1e-300:
            break
    return best, best_d


def _grid_signs(det):
    # exact zeros count as positive so curve points pin to grid nodes
    return np.where(det < 0.0, -1, 1).astype(np.int8)


def critical_locus(f: GeneratingFunction, w: Window, tol_locus: float = TOL_LOCUS) -> CriticalLocus:
    """Extract the critical locus over a window by contouring det Hf."""
    y1s, y2s = w.axes()
    nx, ny = w.resolution
    Y1, Y2 = np.meshgrid(y1s, y2s, indexing="ij")
    det = f.det_hessian_many(np.stack([Y1, Y2], axis=-1))
    sgn = _grid_signs(det)
    warnings: list[str] = []

    # crossing points on grid edges
    n_h = nx * (ny + 1)
    edge_pt = {}
    points = []

    hx_mask = sgn[:-1, :] != sgn[1:, :]
    vx_mask = sgn[:, :-1] != sgn[:, 1:]

    hi, hj = np.nonzero(hx_mask)
    d1 = det[hi, hj]
    d2 = det[hi + 1, hj]
    t = d1 / (d1 - d2)
    px = y1s[hi] + t * (y1s[hi + 1] - y1s[hi])
    py = y2s[hj]
    for k in range(hi.size):
        eid = hi[k] * (ny + 1) + hj[k]
        edge_pt[eid] = len(points)
        points.append((px[k], py[k]))

    vi, vj = np.nonzero(vx_mask)
    d1 = det[vi, vj]
    d2 = det[vi, vj + 1]
    t = d1 / (d1 - d2)
    px = y1s[vi]
    py = y2s[vj] + t * (y2s[vj + 1] - y2s[vj])
    for k in range(vi.size):
        eid = n_h + vi[k] * ny + vj[k]
        edge_pt[eid] = len(points)
        points.append((px[k], py[k]))

    # per-cell segment pairing
    case = ((sgn[:-1, :-1] > 0).astype(np.int8)
            + 2 * (sgn[1:, :-1] > 0).astype(np.int8)
            + 4 * (sgn[1:, 1:] > 0).astype(np.int8)
            + 8 * (sgn[:-1, 1:] > 0).astype(np.int8))

    ambiguous = (case == 5) | (case == 10)
    center_pos = np.zeros_like(ambiguous)
    if np.any(ambiguous):
        ai, aj = np.nonzero(ambiguous)
        cx = 0.5 * (y1s[ai] + y1s[ai + 1])
        cy = 0.5 * (y2s[aj] + y2s[aj + 1])
        cvals = f.det_hessian_many(np.stack([cx, cy], axis=-1))
        center_pos[ai, aj] = cvals >= 0.0
        warnings.append(f"{ai.size} ambiguous saddle cells resolved by midpoint sample")

    def cell_edges(i, j):
        return (i * (ny + 1) + j,  # bottom
                n_h + (i + 1) * ny + j,  # right
                i * (ny + 1) + (j + 1),  # top
                n_h + i * ny + j)  # left

    segments = []
    ci, cj = np.nonzero((case != 0) & (case != 15))
    for i, j in zip(ci, cj):
        c = int(case[i, j])
        if c in (5, 10):
            pairing = _MS_SADDLE[(c, bool(center_pos[i, j]))]
        else:
            pairing = _MS_TABLE[c]
        edges = cell_edges(i, j)
        for ea, eb in pairing:
            pa = edge_pt.get(edges[ea])
            pb = edge_pt.get(edges[eb])
            if pa is not None and pb is not None and pa != pb:
                segments.append((pa, pb))

    components, closed = _chain_segments(len(points), segments)
    pts = np.asarray(points) if points else np.zeros((0, 2))

    hx, hy = w.cell_size
    comp_arrays = []
    comp_closed = []
    for comp, is_closed in zip(components, closed):
        arr = pts[np.asarray(comp, dtype=int)]
        arr, resid = _refine_onto_locus(f, arr)
        keep = resid <= tol_locus
        if not np.all(keep):
            warnings.append("dropped vertices not refinable onto the locus")
            arr = arr[keep]
        if len(arr) < 2:
            continue
        # point-like loops are isolated-zero artifacts, not 1D components
        diam = float(np.max(arr.max(axis=0) - arr.min(axis=0)))
        if diam < 0.5 * min(hx, hy):
            continue
        arr = _subdivide(f, arr, is_closed, tol_locus)
        comp_arrays.append(arr)
        comp_closed.append(is_closed)

    if comp_arrays:
        keys = [(round(c[0, 0], 9), round(c[0, 1], 9), len(c)) for c in comp_arrays]
        order = sorted(range(len(keys)), key=lambda k: keys[k])
        comp_arrays = [comp_arrays[k] for k in order]
        comp_closed = [comp_closed[k] for k in order]

    degen = _isolated_zeros(f, w, det, sgn, y1s, y2s, comp_arrays)

    return CriticalLocus(components=comp_arrays, closed=comp_closed,
                         degenerate_points=degen, warnings=warnings, window=w)


def _chain_segments(n_points, segments):
    """Walk edge-sharing segments into maximal open chains and loops."""
    adj = [[] for _ in range(n_points)]
    for si, (a, b) in enumerate(segments):
        adj[a].append((si, b))
        adj[b].append((si, a))
    used = [False] * len(segments)
    chains, closed = [], []

    def walk(start):
        chain = [start]
        cur = start
        while True:
            nxt = None
            for si, other in adj[cur]:
                if not used[si]:
                    used[si] = True
                    nxt = other
                    break
            if nxt is None:
                return chain, False
            chain.append(nxt)
            cur = nxt
            if cur == start:
                return chain[:-1], True

    endpoints = sorted(p for p in range(n_points) if len(adj[p]) == 1)
    for p in endpoints:
        if any(not used[si] for si, _ in adj[p]):
            chain, is_closed = walk(p)
            if len(chain) >= 2:
                chains.append(chain)
                closed.append(is_closed)
    for p in range(n_points):
        if any(not used[si] for si, _ in adj[p]):
            chain, is_closed = walk(p)
            if len(chain) >= 2:
                chains.append(chain)
                closed.append(is_closed)
    return chains, closed


def _subdivide(f, arr, is_closed, tol_locus, max_passes=8, dev_frac=0.02):
    """Insert refined midpoints where the chord misrepresents the locus."""
    min_len = 1e-9
    for _ in range(max_passes):
        a = arr
        b = np.roll(arr, -1, axis=0) if is_closed else arr[1:]
        if not is_closed:
            a = arr[:-1]
        chord = b - a
        clen = np.linalg.norm(chord, axis=1)
        mids = 0.5 * (a + b)
        refined, resid = _refine_onto_locus(f, mids)
        # distance from refined midpoint to the chord
        t = np.einsum("ij,ij->i", refined - a, chord) / np.maximum(clen**2, 1e-300)
        proj = a + np.clip(t, 0, 1)[:, None] * chord
        dev = np.linalg.norm(refined - proj, axis=1)
        need = (dev > dev_frac * np.maximum(clen, 1e-300)) & (clen > min_len) & (resid <= tol_locus)
        if not np.any(need):
            break
        pieces = []
        n = len(arr)
        for i in range(n if is_closed else n - 1):
            pieces.append(arr[i][None, :])
            if need[i]:
                pieces.append(refined[i][None, :])
        if not is_closed:
            pieces.append(arr[-1][None, :])
        arr = np.concatenate(pieces, axis=0)
    return arr


def _isolated_zeros(f, w, det, sgn, y1s, y2s, components):
    """Isolated zeros of det Hf: definite critical points with value ~ 0."""
    absd = np.abs(det)
    nx1, ny1 = absd.shape
    if nx1 < 3 or ny1 < 3:
        return np.zeros((0, 2))
    interior = absd[1:-1, 1:-1]
    neigh = np.stack([
        absd[:-2, 1:-1], absd[2:, 1:-1], absd[1:-1, :-2], absd[1:-1, 2:],
        absd[:-2, :-2], absd[:-2, 2:], absd[2:, :-2], absd[2:, 2:],
    ])
    is_min = np.all(interior <= neigh, axis=0)
    true_sign = np.sign(det)
    patch_sign = np.stack([
        true_sign[:-2, 1:-1], true_sign[2:, 1:-1], true_sign[1:-1, :-2],
        true_sign[1:-1, 2:], true_sign[:-2, :-2], true_sign[:-2, 2:],
        true_sign[2:, :-2], true_sign[2:, 2:], true_sign[1:-1, 1:-1],
    ])
    # a genuine sign change needs strictly positive and strictly negative values
    no_flip = ~(np.any(patch_sign > 0, axis=0) & np.any(patch_sign < 0, axis=0))
    hx, hy = w.cell_size
    coarse = interior <= max(1e-8, 1e-3 * float(absd.max()))
    cand_i, cand_j = np.nonzero(is_min & no_flip & coarse)
    if cand_i.size > 64:
        order = np.argsort(interior[cand_i, cand_j])[:64]
        cand_i, cand_j = cand_i[order], cand_j[order]

    found = []
    for i, j in zip(cand_i, cand_j):
        y = np.array([y1s[i + 1], y2s[j + 1]])
        for _ in range(40):
            g = f.det_hessian_grad(y)
            if np.linalg.norm(g) < 1e-16:
                break
            H = f.det_hessian_hess(y)
            try:
                step = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(H, g, rcond=None)[0]
            if not np.all(np.isfinite(step)):
                break
            y = y + step
            if np.linalg.norm(step) < 1e-14:
                break
        if not (np.all(np.isfinite(y)) and w.contains(y, pad=hx)):
            continue
        val = f.det_hessian(y)
        if val * val > _DEGENERATE_DET2:
            continue
        H = f.det_hessian_hess(y)
        evals = np.linalg.eigvalsh(H)
        definite = evals[0] * evals[1] > 0 and np.min(np.abs(evals)) >= 1e-9 * np.max(np.abs(evals))
        if not definite:
            # flat directions (e.g. quartic zeros): require a strict sign ring
            th = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
            ring = y[None, :] + 0.75 * min(hx, hy) * np.stack([np.cos(th), np.sin(th)], axis=1)
            ring_vals = f.det_hessian_many(ring)
            if not (np.all(ring_vals > 0) or np.all(ring_vals < 0)):
                continue
        near_comp = any(point_polyline_distance(y, c) < 2 * max(hx, hy) for c in components)
        if near_comp:
            continue
        if not any(np.linalg.norm(y - q) < 1e-8 for q in found):
            found.append(y)
    return np.asarray(found) if found else np.zeros((0, 2))


def push_forward(f: GeneratingFunction, locus: CriticalLocus) -> CausticCurve:
    """Map the critical locus through the Lagrangian map; labels left unset."""
    comps = [f.gradient_many(c) for c in locus.components]
    nm = (f.gradient_many(locus.degenerate_points)
          if len(locus.degenerate_points) else np.zeros((0, 2)))
    return CausticCurve(components=comps, closed=list(locus.closed), labels=None,
                        non_morse_points=nm, warnings=list(locus.warnings))


def _kernel_dirs(f, pts):
    """Unit eigenvector of the smaller-magnitude Hessian eigenvalue."""
    a, b, c = f.hessian_many(pts)
    m = 0.5 * (a + c)
    s = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    lam0 = m - np.sign(m + (m == 0.0)) * s
    v1 = np.stack([b, lam0 - a], axis=-1)
    v2 = np.stack([lam0 - c, b], axis=-1)
    n1 = np.linalg.norm(v1, axis=-1)
    n2 = np.linalg.norm(v2, axis=-1)
    v = np.where((n1 >= n2)[..., None], v1, v2)
    n = np.maximum(np.linalg.norm(v, axis=-1), 1e-300)
    return v / n[..., None]


def _locus_tangents(f, pts):
    g = f.det_hessian_grad_many(pts)
    t = np.stack([-g[..., 1], g[..., 0]], axis=-1)
    n = np.maximum(np.linalg.norm(t, axis=-1), 1e-300)
    return t / n[..., None]


def _align_chain(vecs):
    """Fix per-vertex sign ambiguity by transport along the chain."""
    dots = np.einsum("ij,ij->i", vecs[1:], vecs[:-1])
    flips = np.cumprod(np.where(dots < 0, -1.0, 1.0))
    out = vecs.copy()
    out[1:] *= flips[:, None]
    return out


def classify_caustic(f: GeneratingFunction, locus: CriticalLocus) -> CausticCurve:
    """Push the locus forward and label fold arcs and isolated cusps."""
    curve = push_forward(f, locus)
    labels = []
    cusp_base, cusp_fiber = [], []
    new_components = []
    for ci, comp in enumerate(locus.components):
        is_closed = locus.closed[ci]
        k = _align_chain(_kernel_dirs(f, comp))
        t = _locus_tangents(f, comp)
        delta = k[:, 0] * t[:, 1] - k[:, 1] * t[:, 0]
        sgn = np.where(delta < 0, -1, 1)

        brackets = [(i, i + 1) for i in range(len(comp) - 1) if sgn[i] * sgn[i + 1] < 0]
        if is_closed and len(comp) > 2:
            k_seam = _kernel_dirs(f, comp[:1])[0]
            if np.dot(k_seam, k[-1]) < 0:
                k_seam = -k_seam
            d_seam = k_seam[0] * t[0, 1] - k_seam[1] * t[0, 0]
            if sgn[-1] * (1 if d_seam >= 0 else -1) < 0:
                brackets.append((len(comp) - 1, 0))

        fiber_pts = []
        for ia, ib in brackets:
            y = _bisect_cusp(f, comp[ia], comp[ib], k[ia])
            if y is not None:
                fiber_pts.append((ia, y))

        verts = [comp[i] for i in range(len(comp))]
        labs = ["fold"] * len(comp)
        for ia, y in sorted(fiber_pts, key=lambda p: p[0], reverse=True):
            verts.insert(ia + 1, y)
            labs.insert(ia + 1, "cusp")
            cusp_fiber.append(y)
            cusp_base.append(f.gradient(y))
        new_components.append(f.gradient_many(np.asarray(verts)))
        labels.append(labs)

    curve.components = new_components
    curve.labels = labels
    if cusp_base:
        order = sorted(range(len(cusp_base)),
                       key=lambda i: (round(cusp_base[i][0], 9), round(cusp_base[i][1], 9)))
        curve.cusp_points = np.asarray([cusp_base[i] for i in order])
        curve.cusp_fiber_points = np.asarray([cusp_fiber[i] for i in order])
    return curve


def _bisect_cusp(f: GeneratingFunction, ya, yb, k_ref):
    """Bisect the kernel/tangent alignment zero between two locus points."""
    seg = np.linalg.norm(yb - ya)
    if seg == 0.0:
        return None

    def tangency(pt):
        y, resid = _refine_onto_locus(f, pt[None, :])
        y = y[0]
        k = _kernel_dirs(f, y[None, :])[0]
        if np.dot(k, k_ref) < 0:
            k = -k
        t = _locus_tangents(f, y[None, :])[0]
        return y, k[0] * t[1] - k[1] * t[0]

    _, da = tangency(ya)
    sa = 1 if da >= 0 else -1
    lo, hi = 0.0, 1.0
    y_mid = None
    while (hi - lo) * seg > _CUSP_ARC_TOL:
        mid = 0.5 * (lo + hi)
        y_mid, dm = tangency(ya + mid * (yb - ya))
        if (1 if dm >= 0 else -1) == sa:
            lo = mid
        else:
            hi = mid
    if y_mid is None:
        y_mid, _ = tangency(ya + 0.5 * (lo + hi) * (yb - ya))
    return y_mid


def pyramid_slices(t_values, resolution: int = 256) -> list[CausticCurve]:
    """Caustics of the elliptic-umbilic slice family f + t*y1^2."""
    out = []
    for t in t_values:
        f = pyramid_slice(float(t))
        if t == 0.0:
            w = Window((0.0, 0.0), (1.0, 1.0), (resolution, resolution))
        else:
            s = 1.1 * abs(float(t))
            w = Window((-float(t) / 2.0, 0.0), (s, s), (resolution, resolution))
        out.append(classify_caustic(f, critical_locus(f, w)))
    return out
