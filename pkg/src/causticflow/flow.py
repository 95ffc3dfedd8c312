"""Gradient-flow phase portraits of f_x(y) = f(y) - x.y at fixed base points.

Critical points of y' = grad f_x are the fiber preimages of x under the
Lagrangian map; off the caustic they are hyperbolic and the portrait is
described by the four separatrix branches of every saddle together with
the node-to-saddle gradient lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field import GeneratingFunction
from .geometry import Window
from .integrate import Outcome, StopSet, integrate_batch

__all__ = ["CriticalPoint", "Separatrix", "PhasePortrait", "classify",
           "solve_critical_points", "solve_critical_points_batch",
           "poincare_index", "separatrices", "portrait", "portrait_batch",
           "moduli_dimension", "FlowOptions"]

TOL_ROOT = 1e-10
TOL_DEGENERATE = 1e-7
TOL_CAPTURE = 1e-4
TOL_ALIGN_DEG = 5.0
DELTA0_FACTOR = 1e-5

UNSTABLE_NODE = "unstable-node"
SADDLE = "saddle"
STABLE_NODE = "stable-node"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class FlowOptions:
    """Numerical knobs for root solving and separatrix integration."""

    tol_root: float = TOL_ROOT
    tol_degenerate: float = TOL_DEGENERATE
    tol_capture: float = TOL_CAPTURE
    tol_align_deg: float = TOL_ALIGN_DEG
    delta0_factor: float = DELTA0_FACTOR
    rtol: float = 1e-9
    atol: float = 1e-12
    max_steps: int = 1_000_000
    seed_resolution: int = 12
    dedupe_radius: float = 1e-6
    arc_budget_diams: float = 20.0


@dataclass(frozen=True)
class CriticalPoint:
    position: np.ndarray
    hessian_eigenvalues: tuple[float, float]  # ascending
    morse_index: int | None
    kind: str
    id: int
    eigenvectors: np.ndarray | None = None  # columns match eigenvalue order

    @property
    def degenerate(self) -> bool:
        return self.kind == DEGENERATE

    def unstable_dir(self):
        """Unit eigenvector of the positive eigenvalue (saddles)."""
        return self.eigenvectors[:, 1]

    def stable_dir(self):
        return self.eigenvectors[:, 0]


@dataclass
class Separatrix:
    saddle_id: int
    branch: str  # 'unstable+', 'unstable-', 'stable+', 'stable-'
    trajectory: np.ndarray
    limit: tuple  # ('node', id) | ('saddle', id) | ('window-exit',) | ('max-steps',)

    @property
    def is_unstable(self) -> bool:
        return self.branch.startswith("unstable")


@dataclass
class PhasePortrait:
    x: np.ndarray
    critical_points: list
    separatrices: list
    connections: list  # ordered saddle id pairs (i, j)
    signature: str
    flags: list = field(default_factory=list)

    @property
    def on_caustic(self) -> bool:
        return "on-caustic" in self.flags

    def saddles(self):
        return [c for c in self.critical_points if c.kind == SADDLE]

    def nodes(self):
        return [c for c in self.critical_points if c.kind in (UNSTABLE_NODE, STABLE_NODE)]


def _eig_sym2(a, b, c):
    """Eigenvalues (ascending) and unit eigenvectors of [[a, b], [b, c]]."""
    m = 0.5 * (a + c)
    s = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    lam1, lam2 = m - s, m + s
    v2 = np.stack([np.where(np.abs(b) + np.abs(lam2 - a) > 0, b, 1.0), lam2 - a], axis=-1)
    alt = np.stack([lam2 - c, b], axis=-1)
    pick = np.linalg.norm(alt, axis=-1) > np.linalg.norm(v2, axis=-1)
    v2 = np.where(pick[..., None], alt, v2)
    n = np.linalg.norm(v2, axis=-1)
    n = np.where(n == 0, 1.0, n)
    v2 = v2 / n[..., None]
    v1 = np.stack([-v2[..., 1], v2[..., 0]], axis=-1)
    return lam1, lam2, v1, v2


def classify(eigenvalues, tol_degenerate: float = TOL_DEGENERATE):
    """Morse index (# negative eigenvalues) and node/saddle kind.

    Under the flow y' = +grad f_x, index 0 is an unstable node, 1 a saddle
    and 2 a stable node; eigenvalues within tol_degenerate of zero mean the
    base point is on or next to the caustic.
    """
    lam1, lam2 = sorted(float(v) for v in eigenvalues)
    if min(abs(lam1), abs(lam2)) < tol_degenerate:
        return None, DEGENERATE
    index = int(lam1 < 0) + int(lam2 < 0)
    kind = {0: UNSTABLE_NODE, 1: SADDLE, 2: STABLE_NODE}[index]
    return index, kind


def _canonical_sign(v):
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        return -v
    return v


def _make_critical_points(f, roots, tol_degenerate, tol_root=TOL_ROOT):
    """Classify and canonically order solved roots of grad f(y) = x.

    Roots closer together than the Newton conditioning radius sqrt(tol_root)
    are one nearly-multiple root of a base point on or next to the caustic;
    they collapse to a single critical point flagged degenerate.
    """
    band = 10.0 * np.sqrt(tol_root)
    merged = []
    for y in roots:
        y = np.asarray(y, dtype=float)
        for cluster in merged:
            if np.linalg.norm(y - cluster[0]) < band:
                cluster.append(y)
                break
        else:
            merged.append([y])

    entries = []
    for cluster in merged:
        y = np.mean(cluster, axis=0)
        H = f.hessian(y)
        lam1, lam2, v1, v2 = _eig_sym2(H[0, 0], H[0, 1], H[1, 1])
        if len(cluster) > 1:
            index, kind = None, DEGENERATE
        else:
            index, kind = classify((lam1, lam2), tol_degenerate)
        vecs = np.stack([_canonical_sign(np.asarray(v1)), _canonical_sign(np.asarray(v2))], axis=1)
        entries.append((y, (float(lam1), float(lam2)), index, kind, vecs))

    entries.sort(key=lambda e: (round(e[0][0], 9), round(e[0][1], 9)))
    return [CriticalPoint(position=y, hessian_eigenvalues=lams, morse_index=index,
                          kind=kind, id=new_id, eigenvectors=vecs)
            for new_id, (y, lams, index, kind, vecs) in enumerate(entries)]


def _seed_grid(w: Window, res: int):
    xmin, xmax, ymin, ymax = w.bounds
    t = (np.arange(res) + 0.5) / res
    s1 = xmin + (xmax - xmin) * t
    s2 = ymin + (ymax - ymin) * t
    S1, S2 = np.meshgrid(s1, s2, indexing="ij")
    return np.stack([S1.ravel(), S2.ravel()], axis=-1)


def _newton_batch(f, xs, seeds, tol_root, iters=40):
    """Newton on grad f(y) - x for every (sample, seed) pair.

    Rows leave the active set as soon as they converge or diverge, so the
    per-iteration cost tracks the hard stragglers only.
    """
    m, s = len(xs), len(seeds)
    Y = np.broadcast_to(seeds[None, :, :], (m, s, 2)).reshape(m * s, 2).copy()
    X = np.repeat(xs, s, axis=0)
    dead = np.zeros(m * s, dtype=bool)
    act = np.arange(m * s)
    for _ in range(iters):
        if act.size == 0:
            break
        G = f.gradient_many(Y[act]) - X[act]
        resid = np.max(np.abs(G), axis=-1)
        settled = resid <= 0.1 * tol_root
        a, b, c = f.hessian_many(Y[act])
        det = a * c - b * b
        bad = np.abs(det) < 1e-300
        det = np.where(bad, 1.0, det)
        d1 = (c * G[:, 0] - b * G[:, 1]) / det
        d2 = (a * G[:, 1] - b * G[:, 0]) / det
        step = np.stack([d1, d2], axis=-1)
        move = ~(settled | bad)
        Y[act[move]] -= step[move]
        gone = bad | (np.max(np.abs(Y[act]), axis=-1) >= 1e8)
        dead[act[gone]] = True
        act = act[~(settled | gone)]
    G = f.gradient_many(Y) - X
    ok = ~dead & (np.max(np.abs(G), axis=-1) <= tol_root) & np.all(np.isfinite(Y), axis=-1)
    return Y.reshape(m, s, 2), ok.reshape(m, s)


def solve_critical_points_batch(f, xs, w: Window, opts: FlowOptions = FlowOptions(),
                                check_index=True):
    """All solutions of grad f(y) = x inside w, for a batch of base points.

    The count of each sample is cross-checked against the boundary winding
    number (+1 per node, -1 per saddle); mismatches retry on a finer seed
    grid and finally flag the sample.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    m = len(xs)
    results = [None] * m
    flags = [[] for _ in range(m)]

    pending = np.arange(m)
    res = opts.seed_resolution
    for attempt in range(3):
        if pending.size == 0:
            break
        seeds = _seed_grid(w, res)
        Y, ok = _newton_batch(f, xs[pending], seeds, opts.tol_root)
        inside = w.contains(Y, pad=1e-9)
        ok &= inside
        for row, mi in enumerate(pending):
            roots = _dedupe(Y[row][ok[row]], opts.dedupe_radius)
            results[mi] = _make_critical_points(f, roots, opts.tol_degenerate, opts.tol_root)
        if check_index:
            wind, wind_ok = _winding_batch(f, xs[pending], w)
            bad_rows = []
            for row, mi in enumerate(pending):
                cps = results[mi]
                if any(c.degenerate for c in cps):
                    continue  # index check is not meaningful on the caustic
                census = sum(1 if c.kind in (UNSTABLE_NODE, STABLE_NODE) else -1 for c in cps)
                if not wind_ok[row]:
                    flags[mi].append("winding-unresolved")
                elif census != wind[row]:
                    bad_rows.append(row)
            if attempt == 2:
                for row in bad_rows:
                    flags[pending[row]].append("index-mismatch")
                pending = np.array([], dtype=int)
            else:
                pending = pending[np.array(bad_rows, dtype=int)] if bad_rows else np.array([], dtype=int)
        else:
            pending = np.array([], dtype=int)
        res *= 2
    return results, flags


def _dedupe(pts, radius):
    if len(pts) == 0:
        return []
    keys = np.round(pts / radius).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    reps = pts[np.sort(first)]
    out = []
    for p in reps:
        if not any(np.linalg.norm(p - q) < radius for q in out):
            out.append(p)
    return out


def solve_critical_points(f, x, w: Window, opts: FlowOptions = FlowOptions(), check_index=True):
    res, flags = solve_critical_points_batch(f, np.asarray(x, dtype=float)[None, :], w,
                                             opts, check_index)
    return res[0], flags[0]


def _winding_batch(f, xs, w: Window, n0=256, n_max=4096, block=512):
    """Winding number of grad f_x around the window boundary, per sample."""
    m = len(xs)
    wind = np.zeros(m, dtype=int)
    ok = np.zeros(m, dtype=bool)
    n = n0
    todo = np.arange(m)
    while todo.size and n <= n_max:
        loop = w.boundary_polyline(points_per_side=n // 4)
        V0 = f.gradient_many(loop)  # shared across samples
        for start in range(0, todo.size, block):
            rows = todo[start:start + block]
            V = V0[None, :, :] - xs[rows][:, None, :]
            a = V[:, :-1, :]
            b = V[:, 1:, :]
            cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
            dot = np.einsum("mlj,mlj->ml", a, b)
            dth = np.arctan2(cross, dot)
            fine = np.max(np.abs(dth), axis=1) < 0.5 * np.pi
            total = np.sum(dth, axis=1) / (2 * np.pi)
            rounded = np.round(total).astype(int)
            good = fine & (np.abs(total - rounded) < 0.05)
            wind[rows[good]] = rounded[good]
            ok[rows[good]] = True
        todo = np.nonzero(~ok)[0]
        n *= 2
    return wind, ok


def poincare_index(f, x, loop, n_refine=14) -> int:
    """Winding number of grad f_x along a closed polyline loop.

    Aborts if angle increments stay >= pi/2 after maximal refinement, which
    means the loop passes too close to a zero of the field.
    """
    pts = np.asarray(loop, dtype=float)
    if np.linalg.norm(pts[0] - pts[-1]) > 0:
        pts = np.concatenate([pts, pts[:1]], axis=0)
    x = np.asarray(x, dtype=float)
    for _ in range(n_refine):
        V = f.gradient_many(pts) - x
        a, b = V[:-1], V[1:]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        dot = np.einsum("ij,ij->i", a, b)
        dth = np.arctan2(cross, dot)
        big = np.abs(dth) >= 0.5 * np.pi
        if not np.any(big):
            total = float(np.sum(dth) / (2 * np.pi))
            rounded = int(np.round(total))
            if abs(total - rounded) > 0.05:
                raise ValueError("winding accumulation did not close to an integer")
            return rounded
        # insert chord midpoints on offending segments
        ins = np.nonzero(big)[0]
        mids = 0.5 * (pts[ins] + pts[ins + 1])
        pts = np.insert(pts, ins + 1, mids, axis=0)
    raise ValueError("loop passes too close to a zero of the field")


def _branch_specs(cps):
    """(saddle, branch name, direction, unit offset) for every separatrix."""
    specs = []
    for cp in cps:
        if cp.kind != SADDLE:
            continue
        eu = cp.unstable_dir()
        es = cp.stable_dir()
        specs.append((cp, "unstable+", +1.0, eu))
        specs.append((cp, "unstable-", +1.0, -eu))
        specs.append((cp, "stable+", -1.0, es))
        specs.append((cp, "stable-", -1.0, -es))
    return specs


def _stop_arrays(cps_list, traj_sample, traj_dir, traj_own, kmax):
    """Padded StopSet rows for a batch of trajectories.

    Forward trajectories capture at stable nodes and saddles approached
    along the target's stable direction; backward trajectories at unstable
    nodes and saddles approached along the unstable direction.
    """
    t = len(traj_sample)
    pos = np.zeros((t, kmax, 2))
    kinds = np.zeros((t, kmax), dtype=np.int8)
    aligns = np.zeros((t, kmax, 2))
    excl = np.zeros((t, kmax), dtype=bool)
    for row in range(t):
        cps = cps_list[traj_sample[row]]
        d = traj_dir[row]
        for k, cp in enumerate(cps):
            pos[row, k] = cp.position
            if cp.kind == SADDLE:
                kinds[row, k] = 2
                aligns[row, k] = cp.stable_dir() if d > 0 else cp.unstable_dir()
            elif cp.kind == STABLE_NODE and d > 0:
                kinds[row, k] = 1
            elif cp.kind == UNSTABLE_NODE and d < 0:
                kinds[row, k] = 1
            else:
                kinds[row, k] = 0
            excl[row, k] = k == traj_own[row]
    return StopSet(positions=pos, kinds=kinds, align_dirs=aligns, exclude=excl)


def _limit_of(outcome, limit_index, cps):
    if outcome == Outcome.CAPTURED_NODE:
        return ("node", cps[limit_index].id)
    if outcome == Outcome.CAPTURED_SADDLE:
        return ("saddle", cps[limit_index].id)
    if outcome == Outcome.WINDOW_EXIT:
        return ("window-exit",)
    return ("max-steps",)


def separatrices(f, x, cps, w: Window, opts: FlowOptions = FlowOptions(), record=True):
    """All four separatrix branches of every saddle in one portrait."""
    ports = _separatrices_batch(f, np.asarray(x, dtype=float)[None, :], [cps], w, opts, record)
    return ports[0]


def _separatrices_batch(f, xs, cps_list, w: Window, opts: FlowOptions, record):
    """Integrate the separatrices of many portraits in one batch."""
    m = len(xs)
    specs = []  # (sample, cp, branch, direction, offset_dir, own_index)
    for mi in range(m):
        cps = cps_list[mi]
        if any(c.degenerate for c in cps):
            continue
        index_of = {cp.id: k for k, cp in enumerate(cps)}
        for cp, branch, d, u in _branch_specs(cps):
            specs.append((mi, cp, branch, d, u, index_of[cp.id]))
    per_sample = [[] for _ in range(m)]
    if not specs:
        return per_sample

    scale = w.diameter
    delta0 = opts.delta0_factor * scale
    seeds = np.array([cp.position + delta0 * u for _, cp, _, _, u, _ in specs])
    dirs = np.array([d for _, _, _, d, _, _ in specs])
    sample_ids = np.array([mi for mi, *_ in specs], dtype=int)
    own = np.array([o for *_, o in specs], dtype=int)
    kmax = max(len(cps_list[mi]) for mi in set(sample_ids))
    stops = _stop_arrays(cps_list, sample_ids, dirs, own, kmax)

    X = xs[sample_ids]
    D = dirs[:, None]

    def rhs(ys, idx):
        return (f.gradient_many(ys) - X[idx]) * D[idx]

    res = integrate_batch(
        rhs, seeds, bounds=w.bounds, stops=stops,
        rtol=opts.rtol, atol=opts.atol, max_steps=opts.max_steps,
        arc_budget=opts.arc_budget_diams * scale,
        tol_capture=opts.tol_capture,
        align_cos=np.cos(np.deg2rad(opts.tol_align_deg)),
        record=record,
    )

    for row, (mi, cp, branch, d, u, _) in enumerate(specs):
        cps = cps_list[mi]
        limit = _limit_of(res.outcomes[row], res.limit_index[row], cps)
        traj = res.trajectories[row] if record else np.array([seeds[row], res.final[row]])
        per_sample[mi].append(Separatrix(saddle_id=cp.id, branch=branch,
                                         trajectory=traj, limit=limit))
    return per_sample


_BRANCH_ORDER = {"unstable+": 0, "unstable-": 1, "stable+": 2, "stable-": 3}


def _signature(cps, seps) -> str:
    if not cps:
        return "∅"
    census = "/".join(f"{k}:{sum(1 for c in cps if c.kind == k)}"
                      for k in (UNSTABLE_NODE, SADDLE, STABLE_NODE, DEGENERATE)
                      if any(c.kind == k for c in cps))
    records = sorted((s.saddle_id, _BRANCH_ORDER[s.branch], s.branch, s.limit) for s in seps)
    parts = [f"s{sid}.{br}->{'|'.join(str(v) for v in lim)}" for sid, _, br, lim in records]
    return census + (";" + ";".join(parts) if parts else "")


def portrait(f, x, w: Window, opts: FlowOptions = FlowOptions(), record=True) -> PhasePortrait:
    """Critical points, separatrices, connections and signature at one x."""
    return portrait_batch(f, np.asarray(x, dtype=float)[None, :], w, opts, record)[0]


def portrait_batch(f, xs, w: Window, opts: FlowOptions = FlowOptions(), record=False):
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    cps_list, flags_list = solve_critical_points_batch(f, xs, w, opts)
    seps_list = _separatrices_batch(f, xs, cps_list, w, opts, record)
    out = []
    for mi in range(len(xs)):
        cps = cps_list[mi]
        seps = seps_list[mi]
        flags = list(flags_list[mi])
        if any(c.degenerate for c in cps):
            flags.append("on-caustic")
        connections = sorted({(s.saddle_id, s.limit[1]) for s in seps
                              if s.is_unstable and s.limit[0] == "saddle"})
        sig = _signature(cps, seps)
        out.append(PhasePortrait(x=xs[mi], critical_points=cps, separatrices=seps,
                                 connections=connections, signature=sig, flags=flags))
    return out


def moduli_dimension(cp_from: CriticalPoint, cp_to: CriticalPoint) -> int:
    """Dimension of the space of unparametrized connecting gradient lines.

    Uses unstable-manifold dimensions u = #positive Hessian eigenvalues:
    dim = u(from) - u(to) - 1.  Saddle-to-saddle gives -1, the codimension-1
    bifurcation event; node-to-saddle gives 0, the generic stable situation.
    """
    if cp_from.degenerate or cp_to.degenerate:
        raise ValueError("moduli dimension requires nondegenerate critical points")
    u_from = 2 - cp_from.morse_index
    u_to = 2 - cp_to.morse_index
    return u_from - u_to - 1
