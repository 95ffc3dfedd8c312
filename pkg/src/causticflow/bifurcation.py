"""Separatrix-splitting function, bifurcation curves and diagram assembly.

The signed splitting value psi_ij measures, on a fixed transversal between
two tracked saddles, the offset between the crossing of an unstable branch
of s_i and a stable branch of s_j; its zero set is the stratum B_ij of base
points whose gradient flow has a saddle-to-saddle separatrix.  An ordered
pair stratum and its reverse can never meet (the Poincare index of a loop
around two mutually connected saddles would have to be both -1 and -2),
which is enforced at runtime and re-checked during validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .caustic import CausticCurve, classify_caustic, critical_locus
from .field import GeneratingFunction
from .flow import (SADDLE, STABLE_NODE, UNSTABLE_NODE, FlowOptions,
                   _separatrices_batch, solve_critical_points_batch)
from .geometry import Window, point_polyline_distance, points_polyline_distance, \
    polyline_min_distance, segment_crossings
from .integrate import Outcome, StopSet, integrate_batch

__all__ = ["SplittingSample", "BifurcationCurve", "BifurcationDiagram",
           "TrackingContext", "TrackingError", "ExclusionError", "BifurcationOptions",
           "splitting", "locate_on_segment", "trace_curve", "assemble_diagram",
           "validate_diagram", "default_fiber_window"]

TOL_PSI = 1e-8


class TrackingError(RuntimeError):
    """Saddle labels could not be continued to the requested base point."""


class ExclusionError(AssertionError):
    """Both psi_ij and psi_ji vanished with valid sections at one point."""


@dataclass(frozen=True)
class BifurcationOptions:
    tol_psi: float = TOL_PSI
    trace_tol: float = 1e-8
    step_min: float = 1e-3
    step_max: float = 1e-2
    bisect_width: float = 1e-10
    caustic_standoff: float = 1e-3
    grid: int = 64
    jitter: float = 0.2  # fraction of a grid cell
    seed: int = 0
    max_curve_points: int = 4000
    psi_budget_diams: float = 4.0
    exclusion_check_stride: int = 8
    flow: FlowOptions = field(default_factory=FlowOptions)


@dataclass
class SplittingSample:
    x: np.ndarray
    pair: tuple
    value: float | None
    valid: bool
    section: np.ndarray | None  # (2, 2) transversal endpoints
    branch_selection: tuple | None  # (unstable sign, stable sign)
    reason: str = ""


@dataclass
class BifurcationCurve:
    pair: tuple
    points: np.ndarray
    psi_residuals: np.ndarray
    endpoints: tuple  # (start tag, end tag) in {caustic-contact, window-exit, stratum-intersection}
    branch_selection: tuple
    seed_point: np.ndarray | None = None
    pair_positions: np.ndarray | None = None  # (2, 2) saddle positions at the seed
    engaged_dirs: np.ndarray | None = None  # (2, 2) unstable/stable unit dirs at the seed
    flags: list = field(default_factory=list)


@dataclass
class RegionInfo:
    id: int
    sample_x: np.ndarray
    signature: str
    sample_count: int
    signature_consistent: bool


@dataclass
class ValidationCheck:
    name: str
    passed: bool
    details: str
    witnesses: list = field(default_factory=list)


@dataclass
class BifurcationDiagram:
    label: str
    base_window: Window
    fiber_window: Window
    caustic: CausticCurve
    strata: list
    codim2_points: list  # (point, pair_a, pair_b)
    regions: list
    report: list = field(default_factory=list)
    exclusion_events: list = field(default_factory=list)
    unresolved_edges: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def all_checks_passed(self) -> bool:
        return all(c.passed for c in self.report)


def default_fiber_window(base_window: Window, resolution=64) -> Window:
    """Fiber window wide enough to hold every preimage of the base window."""
    xmin, xmax, ymin, ymax = base_window.bounds
    r = 2.0 + 1.6 * np.sqrt(max(abs(xmin), abs(xmax), abs(ymin), abs(ymax), 1.0))
    return Window((0.0, 0.0), (r, r), (resolution, resolution))


# ---------------------------------------------------------------------------
# saddle tracking


@dataclass
class TrackState:
    x: np.ndarray
    positions: dict  # label -> (2,) saddle position
    eigvecs: dict  # label -> (stable unit vec, unstable unit vec), sign-transported
    eigvals: dict  # label -> (lam1, lam2)
    node_positions: list
    node_kinds: list
    n_cps: int


class TrackingContext:
    """Continues saddle labels, eigenvector signs and branch choices in x.

    Labels are assigned at the seed point in canonical position order and
    transported by nearest-neighbour matching with a jump bound of 1/4 of
    the smallest pairwise saddle distance.
    """

    def __init__(self, f: GeneratingFunction, fiber_window: Window,
                 opts: BifurcationOptions = BifurcationOptions(),
                 caustic: CausticCurve | None = None):
        self.f = f
        self.w = fiber_window
        self.opts = opts
        self.caustic = caustic
        self.state: TrackState | None = None
        self.branch_selection: dict = {}
        self.exclusion_events: list = []

    def seed(self, x) -> TrackState:
        x = np.asarray(x, dtype=float)
        cps_list, _ = solve_critical_points_batch(self.f, x[None, :], self.w, self.opts.flow)
        cps = cps_list[0]
        if any(c.degenerate for c in cps):
            raise TrackingError(f"degenerate critical point at seed {x.tolist()}")
        positions, eigvecs, eigvals = {}, {}, {}
        label = 0
        for c in cps:
            if c.kind == SADDLE:
                positions[label] = c.position.copy()
                eigvecs[label] = (c.stable_dir().copy(), c.unstable_dir().copy())
                eigvals[label] = c.hessian_eigenvalues
                label += 1
        nodes = [c for c in cps if c.kind in (UNSTABLE_NODE, STABLE_NODE)]
        self.state = TrackState(x=x, positions=positions, eigvecs=eigvecs, eigvals=eigvals,
                                node_positions=[c.position.copy() for c in nodes],
                                node_kinds=[c.kind for c in nodes], n_cps=len(cps))
        return self.state

    def goto(self, x) -> TrackState:
        """Move the tracked state to x, substepping to respect jump bounds.

        Substep lengths shrink adaptively where the critical points move
        fast (near the caustic) and recover afterwards.
        """
        x = np.asarray(x, dtype=float)
        if self.state is None:
            return self.seed(x)
        shrink = 1.0
        guard = 0
        while True:
            dx = x - self.state.x
            dist = float(np.linalg.norm(dx))
            if dist == 0.0:
                return self.state
            guard += 1
            if guard > 100_000:
                raise TrackingError("tracking did not converge to the target point")
            cap = max(0.25 * self._min_saddle_gap() * shrink, 1e-15)
            step = min(dist, cap)
            target = self.state.x + dx * (step / dist)
            try:
                self.state = self._step(self.state, target)
                shrink = min(1.0, shrink * 1.5)
            except TrackingError:
                shrink *= 0.25
                if shrink < 1e-10:
                    raise

    def _min_saddle_gap(self) -> float:
        pos = list(self.state.positions.values())
        best = self.w.diameter
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                best = min(best, float(np.linalg.norm(pos[i] - pos[j])))
        return best

    def _step(self, st: TrackState, x_new) -> TrackState:
        pts = np.array([st.positions[k] for k in sorted(st.positions)]
                       + st.node_positions)
        labels = sorted(st.positions)
        y = pts.copy()
        for _ in range(30):
            g = self.f.gradient_many(y) - x_new[None, :]
            if np.max(np.abs(g)) <= self.opts.flow.tol_root:
                break
            a, b, c = self.f.hessian_many(y)
            det = a * c - b * b
            if np.any(np.abs(det) < 1e-14):
                raise TrackingError(f"degenerate Hessian while tracking to {x_new.tolist()}")
            d1 = (c * g[:, 0] - b * g[:, 1]) / det
            d2 = (a * g[:, 1] - b * g[:, 0]) / det
            y = y - np.stack([d1, d2], axis=1)
        else:
            raise TrackingError(f"root polish failed while tracking to {x_new.tolist()}")

        jump_cap = 0.25 * self._min_saddle_gap()
        if np.max(np.linalg.norm(y - pts, axis=1)) > max(jump_cap, 1e-12):
            raise TrackingError(f"saddle moved beyond the continuation bound near {x_new.tolist()}")

        positions, eigvecs, eigvals = {}, {}, {}
        for row, lab in enumerate(labels):
            H = self.f.hessian(y[row])
            from .flow import _eig_sym2
            lam1, lam2, v1, v2 = _eig_sym2(H[0, 0], H[0, 1], H[1, 1])
            if lam1 >= -self.opts.flow.tol_degenerate or lam2 <= self.opts.flow.tol_degenerate:
                raise TrackingError(f"tracked saddle {lab} became degenerate near {x_new.tolist()}")
            es_prev, eu_prev = st.eigvecs[lab]
            v1 = np.asarray(v1)
            v2 = np.asarray(v2)
            if np.dot(v1, es_prev) < 0:
                v1 = -v1
            if np.dot(v2, eu_prev) < 0:
                v2 = -v2
            positions[lab] = y[row]
            eigvecs[lab] = (v1, v2)
            eigvals[lab] = (float(lam1), float(lam2))
        node_pos = [y[len(labels) + k] for k in range(len(st.node_positions))]
        return TrackState(x=x_new.copy(), positions=positions, eigvecs=eigvecs,
                          eigvals=eigvals, node_positions=node_pos,
                          node_kinds=list(st.node_kinds), n_cps=st.n_cps)

    def fork(self) -> "TrackingContext":
        """Independent copy sharing the branch-selection table."""
        other = TrackingContext(self.f, self.w, self.opts, self.caustic)
        if self.state is not None:
            other.state = TrackState(x=self.state.x.copy(),
                                     positions={k: v.copy() for k, v in self.state.positions.items()},
                                     eigvecs={k: (a.copy(), b.copy()) for k, (a, b) in self.state.eigvecs.items()},
                                     eigvals=dict(self.state.eigvals),
                                     node_positions=[p.copy() for p in self.state.node_positions],
                                     node_kinds=list(self.state.node_kinds),
                                     n_cps=self.state.n_cps)
        other.branch_selection = self.branch_selection  # shared on purpose
        other.exclusion_events = self.exclusion_events
        return other


def _saddle_value(f: GeneratingFunction, st: TrackState, label) -> float:
    p = st.positions[label]
    return float(f.eval(p) - np.dot(st.x, p))


def _transversal(p_i, p_j):
    """Segment perpendicular to the saddle chord at its midpoint.

    The total length is half the saddle distance, so offsets live in
    [-L/4, +L/4] with positive sign along the 90-degree-left normal.
    """
    d = p_j - p_i
    length = float(np.linalg.norm(d))
    tdir = np.array([-d[1], d[0]]) / length
    mid = 0.5 * (p_i + p_j)
    return np.array([mid - 0.25 * length * tdir, mid + 0.25 * length * tdir]), mid, tdir


def _branch_offsets(ctx: TrackingContext, st: TrackState, rows, section, mid, tdir):
    """Signed transversal offsets for several branches, integrated together.

    rows: list of (label, branch_sign, stable); returns one offset (or None)
    per row, taken at the branch's first crossing of the section.
    """
    f, w, fopts = ctx.f, ctx.w, ctx.opts.flow
    m = len(rows)
    delta0 = fopts.delta0_factor * w.diameter
    seeds = np.zeros((m, 2))
    dirs = np.zeros(m)
    for r, (label, sign, stable) in enumerate(rows):
        es, eu = st.eigvecs[label]
        seeds[r] = st.positions[label] + sign * delta0 * (es if stable else eu)
        dirs[r] = -1.0 if stable else +1.0

    k = max(1, len(st.positions) - 1 + len(st.node_positions))
    pos = np.zeros((m, k, 2))
    kinds = np.zeros((m, k), dtype=np.int8)
    aligns = np.zeros((m, k, 2))
    excl = np.zeros((m, k), dtype=bool)
    for r, (label, sign, stable) in enumerate(rows):
        col = 0
        for lab, p in st.positions.items():
            if lab == label:
                continue
            pos[r, col] = p
            kinds[r, col] = 2
            aligns[r, col] = st.eigvecs[lab][0] if not stable else st.eigvecs[lab][1]
            col += 1
        want = UNSTABLE_NODE if stable else STABLE_NODE
        for p, kind in zip(st.node_positions, st.node_kinds):
            pos[r, col] = p
            kinds[r, col] = 1 if kind == want else 0
            col += 1
    stops = StopSet(positions=pos, kinds=kinds, align_dirs=aligns, exclude=excl)

    def rhs(ys, idx):
        return (f.gradient_many(ys) - st.x[None, :]) * dirs[idx, None]

    res = integrate_batch(rhs, seeds, bounds=w.bounds, stops=stops,
                          section=np.broadcast_to(section[None, :, :], (m, 2, 2)),
                          rtol=fopts.rtol, atol=fopts.atol, max_steps=fopts.max_steps,
                          arc_budget=ctx.opts.psi_budget_diams * w.diameter,
                          tol_capture=fopts.tol_capture,
                          align_cos=np.cos(np.deg2rad(fopts.tol_align_deg)))
    out, pts = [], []
    for r in range(m):
        if res.outcomes[r] != Outcome.SECTION_HIT:
            out.append(None)
            pts.append(None)
        else:
            out.append(float(np.dot(res.section_points[r] - mid, tdir)))
            pts.append(res.section_points[r].copy())
    return out, pts


def splitting(f: GeneratingFunction, x, pair, ctx: TrackingContext,
              check_exclusion=False) -> SplittingSample:
    """Signed transversal offset between the engaged branches of a saddle pair.

    The sample is invalid when a required branch misses the transversal,
    which signals that the local separatrix topology changed and the branch
    selection must be re-seeded.
    """
    x = np.asarray(x, dtype=float)
    st = ctx.goto(x)
    i, j = pair
    if i not in st.positions or j not in st.positions:
        return SplittingSample(x=x, pair=pair, value=None, valid=False, section=None,
                               branch_selection=None, reason="missing tracked saddle")
    # f_x increases strictly along gradient lines, so a connection i -> j
    # needs f_x(s_i) < f_x(s_j); this also rules out symmetric false zeros
    vi = _saddle_value(ctx.f, st, i)
    vj = _saddle_value(ctx.f, st, j)
    if not vi < vj:
        return SplittingSample(x=x, pair=pair, value=None, valid=False, section=None,
                               branch_selection=None,
                               reason="saddle values ordered against the flow")
    section, mid, tdir = _transversal(st.positions[i], st.positions[j])

    sel = ctx.branch_selection.get(pair)
    if sel is None:
        offs, _ = _branch_offsets(ctx, st, [(i, +1.0, False), (i, -1.0, False),
                                            (j, +1.0, True), (j, -1.0, True)],
                                  section, mid, tdir)
        best = None
        for su, off_u in zip((+1.0, -1.0), offs[:2]):
            if off_u is None:
                continue
            for ss, off_s in zip((+1.0, -1.0), offs[2:]):
                if off_s is None:
                    continue
                v = off_u - off_s
                if best is None or abs(v) < abs(best[0]):
                    best = (v, (su, ss))
        if best is None:
            return SplittingSample(x=x, pair=pair, value=None, valid=False, section=section,
                                   branch_selection=None, reason="no branch crosses the transversal")
        ctx.branch_selection[pair] = best[1]
        value, sel = best
    else:
        (off_u, off_s), _ = _branch_offsets(ctx, st, [(i, sel[0], False), (j, sel[1], True)],
                                            section, mid, tdir)
        if off_u is None or off_s is None:
            return SplittingSample(x=x, pair=pair, value=None, valid=False, section=section,
                                   branch_selection=sel, reason="engaged branch misses the transversal")
        value = off_u - off_s

    sample = SplittingSample(x=x, pair=pair, value=float(value), valid=True,
                             section=section, branch_selection=sel)
    if check_exclusion and abs(value) <= ctx.opts.tol_psi:
        rev = splitting(f, x, (j, i), ctx, check_exclusion=False)
        if rev.valid and abs(rev.value) <= ctx.opts.tol_psi:
            ctx.exclusion_events.append((x.copy(), pair))
            raise ExclusionError(
                f"psi{pair} and psi{(j, i)} both vanish at {x.tolist()}")
    return sample


def _segment_avoids_caustic(caustic: CausticCurve | None, x0, x1, standoff):
    if caustic is None:
        return True
    seg = np.linspace(0.0, 1.0, 9)[:, None]
    pts = np.asarray(x0)[None, :] * (1 - seg) + np.asarray(x1)[None, :] * seg
    for comp in caustic.components:
        if np.min(points_polyline_distance(pts, comp)) < standoff:
            return False
    for p in caustic.non_morse_points:
        if np.min(np.linalg.norm(pts - p[None, :], axis=1)) < standoff:
            return False
    return True


def locate_on_segment(f: GeneratingFunction, x0, x1, pair, ctx: TrackingContext):
    """Bisect a straddling segment down to a bracket of width <= 1e-10.

    Returns the located base point, or None when the endpoint values do not
    straddle zero.  Invalid samples and caustic-crossing segments are
    rejected with an error naming the offending input.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if np.array_equal(x0, x1):
        raise ValueError("degenerate segment: x0 == x1")
    if not _segment_avoids_caustic(ctx.caustic, x0, x1, ctx.opts.caustic_standoff):
        raise ValueError(f"segment {x0.tolist()} -> {x1.tolist()} crosses the caustic")

    s0 = splitting(f, x0, pair, ctx)
    if not s0.valid:
        raise ValueError(f"invalid splitting sample at {x0.tolist()}: {s0.reason}")
    s1 = splitting(f, x1, pair, ctx)
    if not s1.valid:
        raise ValueError(f"invalid splitting sample at {x1.tolist()}: {s1.reason}")
    if np.sign(s0.value) == np.sign(s1.value):
        return None

    a, b = x0, x1
    va = s0.value
    while np.linalg.norm(b - a) > ctx.opts.bisect_width:
        mid = 0.5 * (a + b)
        sm = splitting(f, mid, pair, ctx)
        if not sm.valid:
            raise ValueError(f"invalid splitting sample at {mid.tolist()}: {sm.reason}")
        if np.sign(sm.value) == np.sign(va):
            a, va = mid, sm.value
        else:
            b = mid
    mid = 0.5 * (a + b)
    final = splitting(f, mid, pair, ctx, check_exclusion=True)
    return mid, final


def _psi_and_gradient(f, x, pair, ctx, h):
    s = splitting(f, x, pair, ctx)
    if not s.valid:
        return None, None
    gx = splitting(f, x + np.array([h, 0.0]), pair, ctx)
    gy = splitting(f, x + np.array([0.0, h]), pair, ctx)
    if not (gx.valid and gy.valid):
        return s.value, None
    return s.value, np.array([(gx.value - s.value) / h, (gy.value - s.value) / h])


def trace_curve(f: GeneratingFunction, seed, pair, ctx: TrackingContext,
                base_window: Window) -> BifurcationCurve:
    """Pseudo-arclength continuation of {psi_ij = 0} from a located seed."""
    opts = ctx.opts
    seed = np.asarray(seed, dtype=float)
    s = splitting(f, seed, pair, ctx)
    if not s.valid or abs(s.value) > 10 * opts.tol_psi:
        raise ValueError(f"seed {seed.tolist()} is not on the stratum (psi={s.value})")
    h_fd = 1e-6 * base_window.diameter
    _, grad = _psi_and_gradient(f, seed, pair, ctx, h_fd)
    if grad is None or np.linalg.norm(grad) < 1e-12:
        raise ValueError("splitting gradient unavailable at the seed")
    tangent0 = np.array([-grad[1], grad[0]])
    tangent0 /= np.linalg.norm(tangent0)

    halves = []
    end_tags = []
    for sgn in (+1.0, -1.0):
        fork = ctx.fork()
        pts, res = [], []
        tau = sgn * tangent0
        x_cur = seed.copy()
        h = opts.step_min * 3
        tag = "stratum-intersection"
        while len(pts) < opts.max_curve_points:
            x_pred = np.asarray(x_cur + h * tau)
            if not _segment_avoids_caustic(ctx.caustic, x_cur, x_pred,
                                           opts.caustic_standoff):
                tag = "caustic-contact"
                break
            nu = np.array([-tau[1], tau[0]])
            ok = False
            try:
                for _ in range(8):
                    sp = splitting(f, x_pred, pair, fork)
                    if not sp.valid:
                        break
                    if abs(sp.value) <= opts.trace_tol:
                        ok = True
                        break
                    sd = splitting(f, x_pred + h_fd * nu, pair, fork)
                    if not sd.valid or abs(sd.value - sp.value) < 1e-300:
                        break
                    slope = (sd.value - sp.value) / h_fd
                    x_pred = x_pred - (sp.value / slope) * nu
            except TrackingError:
                fork = ctx.fork()
                fork.goto(x_cur)
                ok = False
            if not ok:
                if h > opts.step_min * 1.01:
                    h = max(opts.step_min, 0.5 * h)
                    continue
                tag = "stratum-intersection"
                break
            step_dir = x_pred - x_cur
            nrm = np.linalg.norm(step_dir)
            if nrm < 1e-14:
                tag = "stratum-intersection"
                break
            step_dir /= nrm
            if np.dot(step_dir, tau) < 0.2:
                if h > opts.step_min * 1.01:
                    h = max(opts.step_min, 0.5 * h)
                    continue
                tag = "stratum-intersection"
                break
            if not base_window.contains(x_pred):
                tag = "window-exit"
                break
            if not _segment_avoids_caustic(ctx.caustic, x_cur, x_pred, opts.caustic_standoff):
                tag = "caustic-contact"
                break
            pts.append(np.asarray(x_pred))
            res.append(abs(sp.value))
            if (len(pts) % opts.exclusion_check_stride) == 0:
                rev = splitting(f, x_pred, (pair[1], pair[0]), fork)
                if rev.valid and abs(rev.value) <= opts.tol_psi:
                    fork.exclusion_events.append((x_pred.copy(), pair))
                    raise ExclusionError(
                        f"psi{pair} and psi{(pair[1], pair[0])} both vanish at {x_pred.tolist()}")
            tau = step_dir
            x_cur = x_pred
            h = min(h * 1.4, opts.step_max) if abs(sp.value) < 0.1 * opts.trace_tol \
                else max(opts.step_min, h)
        else:
            tag = "stratum-intersection"
        halves.append((pts, res))
        end_tags.append(tag)

    back_pts, back_res = halves[1]
    fwd_pts, fwd_res = halves[0]
    pts = back_pts[::-1] + [seed] + fwd_pts
    res = back_res[::-1] + [abs(s.value)] + fwd_res

    st = ctx.goto(seed)
    sel = ctx.branch_selection.get(pair)
    i, j = pair
    pair_positions = np.array([st.positions[i], st.positions[j]])
    engaged = None
    if sel is not None:
        engaged = np.array([sel[0] * st.eigvecs[i][1], sel[1] * st.eigvecs[j][0]])
    return BifurcationCurve(pair=pair, points=np.asarray(pts),
                            psi_residuals=np.asarray(res),
                            endpoints=(end_tags[1], end_tags[0]),
                            branch_selection=sel,
                            seed_point=seed.copy(),
                            pair_positions=pair_positions,
                            engaged_dirs=engaged,
                            flags=[])


# ---------------------------------------------------------------------------
# diagram assembly


def _grid_samples(w: Window, n: int, jitter: float, seed: int):
    xmin, xmax, ymin, ymax = w.bounds
    dx, dy = (xmax - xmin) / n, (ymax - ymin) / n
    rng = np.random.default_rng(seed)
    jx = rng.uniform(-jitter, jitter, size=(n, n)) * dx
    jy = rng.uniform(-jitter, jitter, size=(n, n)) * dy
    cx = xmin + (np.arange(n) + 0.5) * dx
    cy = ymin + (np.arange(n) + 0.5) * dy
    X = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1)
    X[..., 0] += jx
    X[..., 1] += jy
    return X  # (n, n, 2)


def _caustic_distance(caustic: CausticCurve, pts):
    pts = np.atleast_2d(pts)
    d = np.full(len(pts), np.inf)
    for comp in caustic.components:
        d = np.minimum(d, points_polyline_distance(pts, comp))
    for p in caustic.non_morse_points:
        d = np.minimum(d, np.linalg.norm(pts - p[None, :], axis=1))
    return d


def _segment_hits_caustic(caustic: CausticCurve, a, b):
    for comp in caustic.components:
        idx, _, _ = segment_crossings(comp[:-1], comp[1:], (a, b))
        if idx.size:
            return True
    return False


@dataclass
class _ScanSample:
    x: np.ndarray
    ok: bool
    cps: list = None
    saddle_labels: dict = None  # label -> canonical cp id
    eu_signs: dict = None  # label -> +-1 relative to canonical unstable_dir
    es_signs: dict = None
    signature: str = ""
    psi: dict = None  # (i, j) -> (value, (su, ss)) or None
    region: int = -1


def _component_bfs(samples, n, caustic):
    """Group valid samples into caustic-bounded components; propagate labels.

    Components follow geometric adjacency only.  Label transport can fail
    to close up around non-simply-connected components (the saddles of the
    outside region swap when carried once around the caustic); edges whose
    two labelings disagree are collected as seams and handled during edge
    comparison by explicit relabeling.
    """
    comp_id = -np.ones((n, n), dtype=int)
    next_comp = 0
    for si in range(n):
        for sj in range(n):
            s = samples[si][sj]
            if not s.ok or comp_id[si, sj] >= 0:
                continue
            comp_id[si, sj] = next_comp
            queue = [(si, sj)]
            while queue:
                ci, cj = queue.pop(0)
                cur = samples[ci][cj]
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ni, nj = ci + di, cj + dj
                    if not (0 <= ni < n and 0 <= nj < n):
                        continue
                    nb = samples[ni][nj]
                    if not nb.ok or comp_id[ni, nj] >= 0:
                        continue
                    if len(nb.cps) != len(cur.cps):
                        continue
                    if _segment_hits_caustic(caustic, cur.x, nb.x):
                        continue
                    comp_id[ni, nj] = next_comp
                    _match_labels(cur, nb)  # best effort; seams found later
                    queue.append((ni, nj))
            next_comp += 1

    seams = []
    for si in range(n):
        for sj in range(n):
            a = samples[si][sj]
            if not a.ok:
                continue
            for di, dj in ((1, 0), (0, 1)):
                ni, nj = si + di, sj + dj
                if not (0 <= ni < n and 0 <= nj < n):
                    continue
                b = samples[ni][nj]
                if not b.ok or comp_id[si, sj] != comp_id[ni, nj]:
                    continue
                sigma = _label_sigma(a, b)
                if sigma is None or any(sigma[k] != k for k in sigma):
                    seams.append(((si, sj), (ni, nj)))
    return comp_id, next_comp, seams


def _label_sigma(a: _ScanSample, b: _ScanSample):
    """Map a's saddle labels onto b's by nearest position, or None."""
    if a.saddle_labels is None or b.saddle_labels is None:
        return None
    if len(a.saddle_labels) != len(b.saddle_labels):
        return None
    pos_a = {lab: a.cps[k].position for lab, k in a.saddle_labels.items()}
    pos_b = {lab: b.cps[k].position for lab, k in b.saddle_labels.items()}
    if not pos_a:
        return {}
    gaps = [np.linalg.norm(p - q) for p in pos_a.values() for q in pos_a.values()]
    cap = 0.45 * min((g for g in gaps if g > 0), default=np.inf)
    used = set()
    sigma = {}
    for lab, p in pos_a.items():
        cands = [(float(np.linalg.norm(q - p)), lb) for lb, q in pos_b.items() if lb not in used]
        if not cands:
            return None
        d, lb = min(cands)
        if d > cap:
            return None
        used.add(lb)
        sigma[lab] = lb
    return sigma


def _match_labels(src: _ScanSample, dst: _ScanSample) -> bool:
    """Transport labels and eigenvector signs from src onto dst."""
    src_sad = {lab: src.cps[k].position for lab, k in src.saddle_labels.items()}
    dst_sads = [(k, c) for k, c in enumerate(dst.cps) if c.kind == SADDLE]
    if len(src_sad) != len(dst_sads):
        return False
    used = set()
    mapping = {}
    if src_sad:
        gaps = [np.linalg.norm(a - b) for a in src_sad.values() for b in src_sad.values()]
        cap = 0.35 * min((g for g in gaps if g > 0), default=np.inf)
    for lab, p in src_sad.items():
        dists = [(np.linalg.norm(c.position - p), k) for k, c in dst_sads if k not in used]
        if not dists:
            return False
        d, k = min(dists)
        if d > cap:
            return False
        used.add(k)
        mapping[lab] = k
    dst.saddle_labels = mapping
    dst.eu_signs, dst.es_signs = {}, {}
    for lab, k in mapping.items():
        src_k = src.saddle_labels[lab]
        su = src.eu_signs[lab] * (1.0 if np.dot(dst.cps[k].unstable_dir(),
                                                src.cps[src_k].unstable_dir()) >= 0 else -1.0)
        ss = src.es_signs[lab] * (1.0 if np.dot(dst.cps[k].stable_dir(),
                                                src.cps[src_k].stable_dir()) >= 0 else -1.0)
        dst.eu_signs[lab] = su
        dst.es_signs[lab] = ss
    return True


def _tracked_signature(s: _ScanSample, seps) -> str:
    """Signature under tracked labels and transported branch signs."""
    inv = {k: lab for lab, k in s.saddle_labels.items()}
    idmap = {c.id: k for k, c in enumerate(s.cps)}
    recs = []
    for sep in seps:
        k = idmap[sep.saddle_id]
        if k not in inv:
            continue
        lab = inv[k]
        sign = s.eu_signs[lab] if sep.is_unstable else s.es_signs[lab]
        name = sep.branch
        if sign < 0:
            name = name[:-1] + ("-" if name.endswith("+") else "+")
        lim = sep.limit
        if lim and lim[0] in ("node", "saddle"):
            tgt = idmap[lim[1]]
            lim = (lim[0], inv.get(tgt, f"c{tgt}"))
        recs.append((lab, name, lim))
    census = "/".join(f"{kind}:{sum(1 for c in s.cps if c.kind == kind)}"
                      for kind in (UNSTABLE_NODE, SADDLE, STABLE_NODE)
                      if any(c.kind == kind for c in s.cps))
    if not s.cps:
        return "∅"
    body = ";".join(f"s{lab}.{nm}->{'|'.join(str(v) for v in lim)}"
                    for lab, nm, lim in sorted(recs))
    return census + (";" + body if body else "")


def _psi_table(f: GeneratingFunction, s: _ScanSample, seps):
    """Detection-grade psi for every ordered tracked pair, from trajectories."""
    out = {}
    inv = {k: lab for lab, k in s.saddle_labels.items()}
    idmap = {c.id: k for k, c in enumerate(s.cps)}
    by_label = {}
    for sep in seps:
        k = idmap[sep.saddle_id]
        if k in inv:
            by_label.setdefault(inv[k], []).append(sep)
    labs = sorted(s.saddle_labels)
    values = {lab: float(f.eval(s.cps[s.saddle_labels[lab]].position)
                         - np.dot(s.x, s.cps[s.saddle_labels[lab]].position))
              for lab in labs}
    for i in labs:
        for j in labs:
            if i == j:
                continue
            if not values[i] < values[j]:
                continue
            cp_i = s.cps[s.saddle_labels[i]]
            cp_j = s.cps[s.saddle_labels[j]]
            section, mid, tdir = _transversal(cp_i.position, cp_j.position)
            best = None
            for sep_u in by_label.get(i, []):
                if not sep_u.is_unstable:
                    continue
                off_u = _first_crossing(sep_u.trajectory, section, mid, tdir)
                if off_u is None:
                    continue
                u_dir = (1.0 if sep_u.branch.endswith("+") else -1.0) * cp_i.unstable_dir()
                for sep_s in by_label.get(j, []):
                    if sep_s.is_unstable:
                        continue
                    off_s = _first_crossing(sep_s.trajectory, section, mid, tdir)
                    if off_s is None:
                        continue
                    s_dir = (1.0 if sep_s.branch.endswith("+") else -1.0) * cp_j.stable_dir()
                    v = off_u - off_s
                    if best is None or abs(v) < abs(best[0]):
                        best = (v, (u_dir, s_dir))
            if best is not None:
                out[(i, j)] = best
    return out


def _first_crossing(traj, section, mid, tdir):
    if len(traj) < 2:
        return None
    idx, t, _ = segment_crossings(traj[:-1], traj[1:], (section[0], section[1]))
    if idx.size == 0:
        return None
    k = idx[0]
    c = traj[k] + t[0] * (traj[k + 1] - traj[k])
    return float(np.dot(c - mid, tdir))


def assemble_diagram(f: GeneratingFunction, w: Window,
                     opts: BifurcationOptions = BifurcationOptions(),
                     fiber_window: Window | None = None,
                     progress=None) -> BifurcationDiagram:
    """Caustic, strata, codimension-2 points, regions and validation report.

    The base window is scanned on a jittered grid; saddle labels are
    transported sample-to-sample, splitting values are extracted from the
    recorded separatrices, and every sign change seeds a traced curve.
    """
    fw = fiber_window or default_fiber_window(w)
    locus = critical_locus(f, fw)
    caustic = classify_caustic(f, locus)

    n = opts.grid
    X = _grid_samples(w, n, opts.jitter, opts.seed)
    flat = X.reshape(-1, 2)
    near = _caustic_distance(caustic, flat) < max(opts.caustic_standoff,
                                                  0.45 * max(w.cell_size_for(n)))

    samples = [[None] * n for _ in range(n)]
    cps_all, _flags = solve_critical_points_batch(f, flat, fw, opts.flow)
    for k in range(n * n):
        si, sj = divmod(k, n)
        cps = cps_all[k]
        ok = (not near[k]) and not any(c.degenerate for c in cps)
        s = _ScanSample(x=flat[k], ok=ok, cps=cps)
        if ok:
            sads = [kk for kk, c in enumerate(cps) if c.kind == SADDLE]
            s.saddle_labels = {lab: kk for lab, kk in enumerate(sads)}
            s.eu_signs = {lab: 1.0 for lab in s.saddle_labels}
            s.es_signs = {lab: 1.0 for lab in s.saddle_labels}
        samples[si][sj] = s

    comp_id, n_comp, seams = _component_bfs(samples, n, caustic)

    # separatrices chunk-by-chunk; extract signatures and psi tables
    chunk = max(1, 4096 // max(n, 1))
    order = [(si, sj) for si in range(n) for sj in range(n) if samples[si][sj].ok]
    for c0 in range(0, len(order), chunk * n):
        block = order[c0:c0 + chunk * n]
        xs = np.array([samples[si][sj].x for si, sj in block])
        cl = [samples[si][sj].cps for si, sj in block]
        seps = _separatrices_batch(f, xs, cl, fw, opts.flow, record=True)
        for (si, sj), sp in zip(block, seps):
            s = samples[si][sj]
            s.signature = _tracked_signature(s, sp)
            s.psi = _psi_table(f, s, sp)
        if progress:
            progress(min(c0 + chunk * n, len(order)), len(order))

    # stratum seeds from psi sign changes along grid edges; all comparisons
    # are made label-free (nearest-position relabeling, direction dot tests)
    # so label monodromy around non-simply-connected components is harmless
    seam_set = set()
    for a, b in seams:
        seam_set.add((a, b))
        seam_set.add((b, a))
    brackets = []
    unresolved = []
    for si in range(n):
        for sj in range(n):
            a = samples[si][sj]
            if not a.ok:
                continue
            for di, dj in ((1, 0), (0, 1)):
                ni, nj = si + di, sj + dj
                if not (0 <= ni < n and 0 <= nj < n):
                    continue
                b = samples[ni][nj]
                if not b.ok or comp_id[si, sj] != comp_id[ni, nj]:
                    continue
                sigma = _label_sigma(a, b)
                if sigma is None:
                    continue
                hit = False
                for pair, (va, (ua, sa)) in (a.psi or {}).items():
                    tpair = (sigma[pair[0]], sigma[pair[1]])
                    vb_cb = (b.psi or {}).get(tpair)
                    if vb_cb is None:
                        continue
                    vb, (ub, sb) = vb_cb
                    if np.dot(ua, ub) <= 0 or np.dot(sa, sb) <= 0:
                        continue
                    if np.sign(va) != np.sign(vb):
                        ia, ja = (a.saddle_labels[pair[0]], a.saddle_labels[pair[1]])
                        brackets.append((a.x, b.x,
                                         np.array([a.cps[ia].position, a.cps[ja].position]),
                                         np.array([ua, sa])))
                        hit = True
                is_seam = ((si, sj), (ni, nj)) in seam_set
                if a.signature != b.signature and not hit and not is_seam:
                    unresolved.append((a.x.copy(), b.x.copy()))

    # locate and trace, deduplicating seeds against already-traced strata;
    # brackets far from the caustic are the most stable seeds, so go first
    if brackets:
        mids = np.array([0.5 * (xa + xb) for xa, xb, *_ in brackets])
        dist = _caustic_distance(caustic, mids)
        brackets = [brackets[k] for k in np.argsort(-dist, kind="stable")]
    strata = []
    exclusion_events = []
    cell = 2.5 * max(w.cell_size_for(n))
    for xa, xb, pair_pos, dirs in brackets:
        mid = 0.5 * (xa + xb)
        if any(len(cv.points) >= 2 and point_polyline_distance(mid, cv.points) < cell
               for cv in strata):
            continue
        ctx = TrackingContext(f, fw, opts, caustic)
        try:
            ctx.seed(xa)
            pair, sel = _anchor_pair(ctx.state, pair_pos, dirs)
            ctx.branch_selection[pair] = sel
            located = locate_on_segment(f, xa, xb, pair, ctx)
            if located is None:
                continue
            x_star, _ = located
            curve = trace_curve(f, x_star, pair, ctx, w)
            strata.append(curve)
        except ExclusionError:
            raise
        except (TrackingError, ValueError):
            unresolved.append((np.asarray(xa), np.asarray(xb)))
        exclusion_events.extend(ctx.exclusion_events)

    # drop duplicate traces of one stratum reached from different seeds
    strata = _dedupe_strata(strata, cell)

    codim2 = _codim2_points(strata)

    regions = _regions(samples, comp_id, n, caustic, strata)

    diagram = BifurcationDiagram(
        label=f.label, base_window=w, fiber_window=fw, caustic=caustic,
        strata=strata, codim2_points=codim2, regions=regions,
        exclusion_events=exclusion_events,
        unresolved_edges=[(a.tolist(), b.tolist()) for a, b in unresolved],
        meta={"grid": n, "seed": opts.seed, "seams": len(seams)},
    )
    diagram.report = validate_diagram(diagram, f=f, opts=opts)
    return diagram


def _anchor_pair(st: TrackState, pair_pos, dirs):
    """Resolve recorded saddle positions/directions into context labels."""
    labs = []
    for p in pair_pos:
        d, lab = min((float(np.linalg.norm(pos - p)), lab)
                     for lab, pos in st.positions.items())
        labs.append(lab)
    i, j = labs
    if i == j:
        raise TrackingError("bracket saddles collapse onto one tracked label")
    su = 1.0 if np.dot(st.eigvecs[i][1], dirs[0]) >= 0 else -1.0
    ss = 1.0 if np.dot(st.eigvecs[j][0], dirs[1]) >= 0 else -1.0
    return (i, j), (su, ss)


def _dedupe_strata(strata, tol):
    kept = []
    for cv in sorted(strata, key=lambda c: -len(c.points)):
        dup = False
        for other in kept:
            if len(cv.points) >= 2 and len(other.points) >= 2:
                da = float(np.max(points_polyline_distance(cv.points, other.points)))
                if da < tol:
                    dup = True
                    break
        if not dup:
            kept.append(cv)
    return kept


def _codim2_points(strata):
    out = []
    for a in range(len(strata)):
        for b in range(a + 1, len(strata)):
            ca, cb = strata[a], strata[b]
            if len(ca.points) < 2 or len(cb.points) < 2:
                continue
            for k in range(len(cb.points) - 1):
                idx, t, _ = segment_crossings(ca.points[:-1], ca.points[1:],
                                              (cb.points[k], cb.points[k + 1]))
                for i2, t2 in zip(idx, t):
                    pt = ca.points[i2] + t2 * (ca.points[i2 + 1] - ca.points[i2])
                    out.append((pt, ca.pair, cb.pair))
    return out


def _regions(samples, comp_id, n, caustic, strata):
    """Connected components of the window minus caustic and strata."""
    region_id = -np.ones((n, n), dtype=int)
    next_id = 0
    infos = []
    for si in range(n):
        for sj in range(n):
            s = samples[si][sj]
            if not s.ok or region_id[si, sj] >= 0:
                continue
            members = []
            queue = [(si, sj)]
            region_id[si, sj] = next_id
            while queue:
                ci, cj = queue.pop(0)
                members.append((ci, cj))
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ni, nj = ci + di, cj + dj
                    if not (0 <= ni < n and 0 <= nj < n):
                        continue
                    nb = samples[ni][nj]
                    if not nb.ok or region_id[ni, nj] >= 0:
                        continue
                    if comp_id[ci, cj] != comp_id[ni, nj]:
                        continue
                    a, b = samples[ci][cj].x, nb.x
                    if _segment_hits_caustic(caustic, a, b):
                        continue
                    if any(_segment_hits_stratum(cv, a, b) for cv in strata):
                        continue
                    region_id[ni, nj] = region_id[ci, cj]
                    queue.append((ni, nj))
            mid = members[len(members) // 2]
            rep = samples[mid[0]][mid[1]]
            sigs = [samples[ci][cj].signature for ci, cj in members]
            consistent = len(set(sigs)) == 1
            infos.append(RegionInfo(id=next_id, sample_x=rep.x, signature=rep.signature,
                                    sample_count=len(members), signature_consistent=consistent))
            next_id += 1
    return infos


def _segment_hits_stratum(curve: BifurcationCurve, a, b):
    if len(curve.points) < 2:
        return False
    idx, _, _ = segment_crossings(curve.points[:-1], curve.points[1:], (a, b))
    return bool(idx.size)


# ---------------------------------------------------------------------------
# validation


def validate_diagram(d: BifurcationDiagram, f: GeneratingFunction | None = None,
                     opts: BifurcationOptions = BifurcationOptions()):
    """Run the structural checks; failures become report entries, not errors."""
    report = []
    report.append(_check_no_reversed_overlap(d, opts))
    report.append(_check_same_pair_intersections(d, opts))
    report.append(_check_connections_admissible(d, f, opts))
    report.append(_check_no_triple_points(d, opts))
    report.append(_check_signature_toggles(d, f, opts))
    report.append(_check_codim2_closure(d, opts))
    return report


def _polylines_touch(a, b, tol=1e-6):
    """True when two polylines cross or come within tol of each other."""
    if len(a) < 2 or len(b) < 2:
        return False
    for k in range(len(b) - 1):
        idx, _, _ = segment_crossings(a[:-1], a[1:], (b[k], b[k + 1]))
        if idx.size:
            return True
    return polyline_min_distance(a, b) < tol


def _check_no_reversed_overlap(d, opts):
    witnesses = []
    for a in range(len(d.strata)):
        for b in range(len(d.strata)):
            ca, cb = d.strata[a], d.strata[b]
            if ca.pair != (cb.pair[1], cb.pair[0]) or a >= b:
                continue
            if _polylines_touch(ca.points, cb.points):
                witnesses.append({"pair": list(ca.pair),
                                  "point": ca.points[0].tolist()})
    for x, pair in d.exclusion_events:
        witnesses.append({"pair": list(pair), "point": np.asarray(x).tolist(),
                          "distance": 0.0})
    ok = not witnesses
    return ValidationCheck("no-reversed-pair-overlap", ok,
                           "B_ij and B_ji never meet", witnesses)


def _check_same_pair_intersections(d, opts):
    witnesses = []
    for a in range(len(d.strata)):
        for b in range(a + 1, len(d.strata)):
            ca, cb = d.strata[a], d.strata[b]
            if ca.pair != cb.pair:
                continue
            if _polylines_touch(ca.points, cb.points) \
                    and ca.branch_selection != cb.branch_selection:
                witnesses.append({"pair": list(ca.pair),
                                  "selections": [list(ca.branch_selection or ()),
                                                 list(cb.branch_selection or ())]})
    return ValidationCheck("same-pair-intersection-selection", not witnesses,
                           "same-pair strata meet only with matching branch selections",
                           witnesses)


def _check_connections_admissible(d, f, opts):
    if f is None:
        return ValidationCheck("connection-admissible", True,
                               "skipped: no generating function bound", [])
    witnesses = []
    for cv in d.strata:
        if len(cv.points) == 0:
            continue
        x_star = cv.points[len(cv.points) // 2]
        try:
            ok = _verify_connection_orbit(f, d.fiber_window, x_star, cv, opts)
        except TrackingError as e:
            ok = False
        if not ok:
            witnesses.append({"pair": list(cv.pair), "point": np.asarray(x_star).tolist()})
    return ValidationCheck("connection-admissible", not witnesses,
                           "certified connecting orbit exists on every stratum", witnesses)


def _anchor_labels(st: TrackState, curve: BifurcationCurve):
    """Labels in st matching the saddles recorded at the curve's seed."""
    labs = []
    for p in curve.pair_positions:
        d, lab = min((float(np.linalg.norm(pos - p)), lab)
                     for lab, pos in st.positions.items())
        labs.append(lab)
    if labs[0] == labs[1]:
        raise TrackingError("could not re-anchor the curve's saddle pair")
    return labs


def _verify_connection_orbit(f, fw, x_star, curve, opts):
    """Matched-half-orbit certificate for a connection on a stratum vertex.

    The unstable branch of s_i integrated forward and the stable branch of
    s_j integrated backward must cross the transversal at the same point
    (within tolerance) with aligned field directions there; concatenating
    the halves yields the connecting orbit.  Direct long-orbit capture is
    not used because seed errors amplify exponentially along connections.
    """
    ctx = TrackingContext(f, fw, opts)
    ctx.seed(curve.seed_point if curve.seed_point is not None else x_star)
    i, j = _anchor_labels(ctx.state, curve)
    st = ctx.goto(x_star)
    vi, vj = _saddle_value(f, st, i), _saddle_value(f, st, j)
    if not vi < vj:
        return False
    section, mid, tdir = _transversal(st.positions[i], st.positions[j])
    sel = curve.branch_selection or (1.0, 1.0)
    su, ss = sel
    if curve.engaged_dirs is not None:
        if np.dot(su * st.eigvecs[i][1], curve.engaged_dirs[0]) < 0:
            su = -su
        if np.dot(ss * st.eigvecs[j][0], curve.engaged_dirs[1]) < 0:
            ss = -ss
    offs, pts = _branch_offsets(ctx, st, [(i, su, False), (j, ss, True)],
                                section, mid, tdir)
    if offs[0] is None or offs[1] is None:
        return False
    if abs(offs[0] - offs[1]) > 100 * opts.tol_psi:
        return False
    v_u = f.gradient(pts[0]) - np.asarray(x_star)
    v_s = f.gradient(pts[1]) - np.asarray(x_star)
    return float(np.dot(v_u, v_s)) > 0.0


def _check_no_triple_points(d, opts):
    witnesses = []
    pts = [np.asarray(p) for p, _, _ in d.codim2_points]
    for k, p in enumerate(pts):
        through = set()
        for cv in d.strata:
            if len(cv.points) >= 2 and point_polyline_distance(p, cv.points) < 1e-6:
                through.add((cv.pair, tuple(np.round(cv.points[0], 6))))
        if len(through) >= 3:
            witnesses.append({"point": p.tolist(), "strata": len(through)})
    # also catch >= 3 pairwise codim-2 coincidences
    for a in range(len(pts)):
        close = [b for b in range(len(pts)) if b != a
                 and np.linalg.norm(pts[a] - pts[b]) < 1e-8]
        if len(close) >= 2:
            pairs = {tuple(d.codim2_points[a][1]), tuple(d.codim2_points[a][2])}
            for b in close:
                pairs |= {tuple(d.codim2_points[b][1]), tuple(d.codim2_points[b][2])}
            if len(pairs) >= 3:
                witnesses.append({"point": pts[a].tolist(), "pairs": sorted(map(list, pairs))})
    return ValidationCheck("no-triple-connection", not witnesses,
                           "no point carries three simultaneous connections", witnesses)


def _check_signature_toggles(d, f, opts):
    if f is None:
        return ValidationCheck("stratum-signature-toggle", True,
                               "skipped: no generating function bound", [])
    witnesses = []
    notes = []
    for cv in d.strata:
        if len(cv.points) < 2:
            continue
        mid_k = len(cv.points) // 2
        x_star = cv.points[mid_k]
        a = cv.points[min(mid_k + 1, len(cv.points) - 1)]
        b = cv.points[max(mid_k - 1, 0)]
        tang = a - b
        nt = np.linalg.norm(tang)
        if nt == 0:
            continue
        nrm = np.array([-tang[1], tang[0]]) / nt
        delta = 2e-3 * d.base_window.diameter
        try:
            diff = _side_signature_diff(f, d.fiber_window, x_star, nrm, delta, cv, opts)
        except TrackingError:
            witnesses.append({"pair": list(cv.pair), "point": x_star.tolist(),
                              "error": "tracking failed beside the stratum"})
            continue
        if diff is None:
            witnesses.append({"pair": list(cv.pair), "point": x_star.tolist(),
                              "error": "side portraits unavailable"})
            continue
        changed, gamma_toggled, (i, j) = diff
        foreign = [c for c in changed if c[0] not in (i, j)]
        if foreign:
            witnesses.append({"pair": list(cv.pair), "point": x_star.tolist(),
                              "foreign-changes": [list(map(str, c)) for c in foreign]})
        if not changed:
            notes.append(f"stratum {cv.pair}: winding-type crossing (no record toggles)")
    detail = "stratum crossings toggle only engaged-branch records"
    if notes:
        detail += "; " + "; ".join(notes)
    return ValidationCheck("stratum-signature-toggle", not witnesses, detail, witnesses)


def _side_signature_diff(f, fw, x_star, nrm, delta, curve, opts):
    """Records differing between the two sides of a stratum, with the pair
    labels re-anchored to the curve's recorded saddle positions."""
    ctx = TrackingContext(f, fw, opts)
    ctx.seed(curve.seed_point if curve.seed_point is not None else x_star)
    pair_labels = _anchor_labels(ctx.state, curve)
    try:
        ctx.goto(np.asarray(x_star) + delta * nrm)
    except TrackingError:
        return None
    sideA = _tracked_records(f, fw, ctx, opts)
    ctx2 = ctx.fork()
    try:
        ctx2.goto(np.asarray(x_star) - delta * nrm)
    except TrackingError:
        return None
    sideB = _tracked_records(f, fw, ctx2, opts)
    if sideA is None or sideB is None:
        return None
    changed = sorted(set(sideA.items()) ^ set(sideB.items()))
    changed_keys = sorted({k for k, _ in changed})
    gamma_toggled = any(
        key[1].startswith("stable")
        and ("node" in str(sideA.get(key, "")) or "node" in str(sideB.get(key, "")))
        for key in changed_keys)
    return changed_keys, gamma_toggled, pair_labels


def _tracked_records(f, fw, ctx: TrackingContext, opts):
    """(label, branch) -> limit mapping at the context's current point."""
    st = ctx.state
    cps_list, _ = solve_critical_points_batch(f, st.x[None, :], fw, opts.flow)
    cps = cps_list[0]
    if any(c.degenerate for c in cps):
        return None
    seps = _separatrices_batch(f, st.x[None, :], [cps], fw, opts.flow, record=False)[0]
    # map canonical ids to tracked labels by position
    lab_of = {}
    for lab, p in st.positions.items():
        dists = [(np.linalg.norm(c.position - p), c.id) for c in cps if c.kind == SADDLE]
        if dists:
            _, cid = min(dists)
            lab_of[cid] = lab
    recs = {}
    for sep in seps:
        lab = lab_of.get(sep.saddle_id)
        if lab is None:
            continue
        cp = next(c for c in cps if c.id == sep.saddle_id)
        ref = ctx.state.eigvecs[lab][1] if sep.is_unstable else ctx.state.eigvecs[lab][0]
        cur = cp.unstable_dir() if sep.is_unstable else cp.stable_dir()
        sign = 1.0 if np.dot(cur, ref) >= 0 else -1.0
        name = sep.branch
        if sign < 0:
            name = name[:-1] + ("-" if name.endswith("+") else "+")
        lim = sep.limit
        if lim[0] in ("node", "saddle"):
            lim = (lim[0], lab_of.get(lim[1], f"c{lim[1]}"))
        recs[(lab, name)] = tuple(str(v) for v in lim)
    return recs


def _check_codim2_closure(d, opts):
    witnesses = []
    cell = max(d.base_window.cell_size_for(d.meta.get("grid", opts.grid)))
    for p, pa, pb in d.codim2_points:
        chained = None
        if pa[1] == pb[0]:
            chained = (pa[0], pb[1])
        elif pb[1] == pa[0]:
            chained = (pb[0], pa[1])
        if chained is None or chained[0] == chained[1]:
            continue
        near = [cv for cv in d.strata if cv.pair == chained and len(cv.points) >= 2
                and point_polyline_distance(np.asarray(p), cv.points) < 10 * cell]
        if not near:
            witnesses.append({"point": np.asarray(p).tolist(),
                              "pairs": [list(pa), list(pb)],
                              "expected-near": list(chained)})
    return ValidationCheck("codim2-closure", not witnesses,
                           "chained codimension-2 points lie near the composite stratum",
                           witnesses)
