"""Batched adaptive Cash-Karp integration of many planar trajectories at once.

All separatrix and splitting-function work integrates y' = +/-grad(f_x)(y).
Trajectories across a scan differ only in their base point and seed, so the
whole bundle advances together; each trajectory carries its own step size,
capture set and termination state, and finished rows drop out of the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

__all__ = ["Outcome", "StopSet", "BatchResult", "integrate_batch"]

# Cash-Karp 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
_A = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([3 / 10, -9 / 10, 6 / 5]),
    np.array([-11 / 54, 5 / 2, -70 / 27, 35 / 27]),
    np.array([1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096]),
]
_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])
_BE = _B5 - _B4


class Outcome(IntEnum):
    RUNNING = 0
    CAPTURED_NODE = 1
    CAPTURED_SADDLE = 2
    WINDOW_EXIT = 3
    MAX_STEPS = 4
    SECTION_HIT = 5


@dataclass
class StopSet:
    """Per-trajectory capture targets, padded to a common count K.

    kinds: 0 = padding, 1 = attracting endpoint (plain radius capture),
    2 = saddle (requires approach aligned with align_dirs within align_cos).
    """

    positions: np.ndarray  # (M, K, 2)
    kinds: np.ndarray  # (M, K) int8
    align_dirs: np.ndarray  # (M, K, 2), unit vectors where kinds == 2
    exclude: np.ndarray  # (M, K) bool, e.g. the branch's own saddle


@dataclass
class BatchResult:
    outcomes: np.ndarray  # (M,) Outcome values
    limit_index: np.ndarray  # (M,) index into the trajectory's StopSet, -1 if n/a
    final: np.ndarray  # (M, 2) last accepted state
    steps: np.ndarray  # (M,) accepted step counts
    arclength: np.ndarray  # (M,)
    section_points: np.ndarray  # (M, 2) crossing point where SECTION_HIT
    section_params: np.ndarray  # (M,) parameter along the section in [0, 1]
    trajectories: list | None = field(default=None)


def integrate_batch(
    rhs,
    y0,
    *,
    bounds,
    stops: StopSet | None = None,
    section=None,
    rtol=1e-9,
    atol=1e-12,
    max_steps=1_000_000,
    arc_budget=None,
    tol_capture=1e-4,
    align_cos=np.cos(np.deg2rad(5.0)),
    step_clamp_frac=0.25,
    record=False,
) -> BatchResult:
    """Advance every trajectory until capture, window exit or budget.

    rhs(ys, idx) must return the velocity for rows ``idx`` of the batch.
    bounds is (xmin, xmax, ymin, ymax) shared by the batch; section is an
    optional (M, 2, 2) array of per-trajectory segments whose first crossing
    terminates the trajectory.
    """
    y = np.array(y0, dtype=float)
    m = len(y)
    xmin, xmax, ymin, ymax = bounds
    scale = max(xmax - xmin, ymax - ymin)
    max_jump = 0.5 * scale

    outcomes = np.zeros(m, dtype=np.int8)
    limit_index = np.full(m, -1, dtype=int)
    steps = np.zeros(m, dtype=int)
    arclen = np.zeros(m)
    section_points = np.full((m, 2), np.nan)
    section_params = np.full(m, np.nan)
    budget = np.inf if arc_budget is None else float(arc_budget)
    h = np.full(m, np.nan)
    h_floor = 1e-14 * scale

    traj_chunks = [(np.arange(m), y.copy())] if record else None

    if stops is not None:
        stop_pos = stops.positions
        stop_kind = stops.kinds
        stop_align = stops.align_dirs
        stop_excl = stops.exclude

    active = np.arange(m)
    while active.size:
        idx = active
        yi = y[idx]
        k0 = rhs(yi, idx)
        speed = np.maximum(np.linalg.norm(k0, axis=1), 1e-300)

        # step limits: fraction of the distance to the nearest capture target,
        # and never more than half the window diameter
        lim = max_jump / speed
        if stops is not None:
            d = np.linalg.norm(stop_pos[idx] - yi[:, None, :], axis=2)
            d = np.where((stop_kind[idx] == 0) | stop_excl[idx], np.inf, d)
            dmin = d.min(axis=1)
            lim = np.minimum(lim, step_clamp_frac
                             * np.maximum(dmin, 0.2 * tol_capture) / speed)
        if section is not None:
            # shrink steps near the section line so the crossing chord is short
            p = section[idx, 0]
            q = section[idx, 1]
            sd = q - p
            slen = np.maximum(np.linalg.norm(sd, axis=1), 1e-300)
            nrm = np.stack([-sd[:, 1], sd[:, 0]], axis=1) / slen[:, None]
            dist_line = np.abs(np.einsum("ij,ij->i", yi - 0.5 * (p + q), nrm))
            lim = np.minimum(lim, np.maximum(0.5 * dist_line, 1e-3 * slen) / speed)
        hi = h[idx]
        hi = np.where(np.isnan(hi), 1e-3 * scale / speed, hi)
        hi = np.minimum(np.maximum(hi, h_floor), lim)

        k = [k0]
        for srow in _A:
            acc = srow[0] * k[0]
            for a, kk in zip(srow[1:], k[1:]):
                acc = acc + a * kk
            k.append(rhs(yi + hi[:, None] * acc, idx))
        incr5 = sum(b * kk for b, kk in zip(_B5, k) if b != 0.0)
        err = sum(b * kk for b, kk in zip(_BE, k) if b != 0.0)
        ynew = yi + hi[:, None] * incr5
        err_abs = hi[:, None] * err
        tol = atol + rtol * np.maximum(np.abs(yi), np.abs(ynew))
        ratio = np.max(np.abs(err_abs) / tol, axis=1)

        accept = ratio <= 1.0
        fac = np.clip(0.9 * np.maximum(ratio, 1e-16) ** -0.2, 0.2, 5.0)
        h[idx] = hi * fac

        stalled = (~accept) & (hi <= 2 * h_floor)
        if np.any(stalled):
            outcomes[idx[stalled]] = Outcome.MAX_STEPS

        aidx = idx[accept]
        if aidx.size:
            ya = ynew[accept]
            prev = yi[accept]
            steps[aidx] += 1
            arclen[aidx] += np.linalg.norm(ya - prev, axis=1)

            done = np.zeros(aidx.size, dtype=bool)

            if section is not None:
                p = section[aidx, 0]
                q = section[aidx, 1]
                r = ya - prev
                s = q - p
                denom = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
                ok = np.abs(denom) > 1e-300
                denom = np.where(ok, denom, 1.0)
                ap = p - prev
                t = (ap[:, 0] * s[:, 1] - ap[:, 1] * s[:, 0]) / denom
                u = (ap[:, 0] * r[:, 1] - ap[:, 1] * r[:, 0]) / denom
                hit = ok & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)
                if np.any(hit):
                    w = np.nonzero(hit)[0]
                    gids = aidx[w]
                    v0 = k[0][accept][w] * hi[accept][w, None]
                    v1 = rhs(ya[w], gids) * hi[accept][w, None]
                    cross, upar = _hermite_section_crossing(
                        prev[w], v0, ya[w], v1, p[w], q[w],
                        prev[w] + t[w, None] * (ya[w] - prev[w]), u[w])
                    outcomes[gids] = Outcome.SECTION_HIT
                    section_points[gids] = cross
                    section_params[gids] = upar
                    ya[w] = cross
                    done |= hit

            if stops is not None:
                rel = stop_pos[aidx] - ya[:, None, :]
                d = np.linalg.norm(rel, axis=2)
                d = np.where((stop_kind[aidx] == 0) | stop_excl[aidx], np.inf, d)
                near = d < tol_capture
                if np.any(near):
                    unit = rel / np.maximum(d[..., None], 1e-300)
                    aligned = np.abs(np.einsum("mkj,mkj->mk", unit, stop_align[aidx])) >= align_cos
                    captured = near & ((stop_kind[aidx] == 1) | ((stop_kind[aidx] == 2) & aligned))
                    captured &= ~done[:, None]
                    any_cap = captured.any(axis=1)
                    if np.any(any_cap):
                        w = np.nonzero(any_cap)[0]
                        first = np.argmax(captured[w], axis=1)
                        gids = aidx[w]
                        kinds = stop_kind[gids, first]
                        outcomes[gids] = np.where(kinds == 1, Outcome.CAPTURED_NODE,
                                                  Outcome.CAPTURED_SADDLE)
                        limit_index[gids] = first
                        done[w] = True

            out = ((ya[:, 0] < xmin) | (ya[:, 0] > xmax)
                   | (ya[:, 1] < ymin) | (ya[:, 1] > ymax)) & ~done
            if np.any(out):
                outcomes[aidx[out]] = Outcome.WINDOW_EXIT
                done |= out

            exhausted = ((steps[aidx] >= max_steps) | (arclen[aidx] >= budget)) & ~done
            if np.any(exhausted):
                outcomes[aidx[exhausted]] = Outcome.MAX_STEPS

            y[aidx] = ya
            if record:
                traj_chunks.append((aidx, ya.copy()))

        active = np.nonzero(outcomes == Outcome.RUNNING)[0]

    trajectories = _assemble_trajectories(m, traj_chunks) if record else None

    return BatchResult(
        outcomes=outcomes,
        limit_index=limit_index,
        final=y,
        steps=steps,
        arclength=arclen,
        section_points=section_points,
        section_params=section_params,
        trajectories=trajectories,
    )


def _hermite_section_crossing(y0, v0, y1, v1, p, q, linear_pt, linear_u):
    """Refine chord/section crossings with the cubic Hermite interpolant.

    v0, v1 are velocities pre-scaled by the step size.  Falls back to the
    linear crossing when the refined point slips off the section segment.
    """
    s = q - p
    slen2 = np.maximum(np.einsum("ij,ij->i", s, s), 1e-300)
    nrm = np.stack([-s[:, 1], s[:, 0]], axis=1) / np.sqrt(slen2)[:, None]

    def eval_h(tau):
        t2 = tau * tau
        t3 = t2 * tau
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + tau
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        return (h00[:, None] * y0 + h10[:, None] * v0
                + h01[:, None] * y1 + h11[:, None] * v1)

    def g(tau):
        return np.einsum("ij,ij->i", eval_h(tau) - p, nrm)

    lo = np.zeros(len(y0))
    hi = np.ones(len(y0))
    glo = g(lo)
    bracket = np.sign(glo) != np.sign(g(hi))
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        takes_lo = np.sign(gm) == np.sign(glo)
        lo = np.where(takes_lo, mid, lo)
        glo = np.where(takes_lo, gm, glo)
        hi = np.where(takes_lo, hi, mid)
    pt = eval_h(0.5 * (lo + hi))
    u = np.einsum("ij,ij->i", pt - p, s) / slen2
    good = bracket & (u >= -1e-9) & (u <= 1.0 + 1e-9)
    pt = np.where(good[:, None], pt, linear_pt)
    u = np.clip(np.where(good, u, linear_u), 0.0, 1.0)
    return pt, u


def _assemble_trajectories(m, chunks):
    """Regroup per-iteration snapshots into one polyline per trajectory."""
    ids = np.concatenate([i for i, _ in chunks])
    pts = np.concatenate([p for _, p in chunks])
    order = np.argsort(ids, kind="stable")
    ids, pts = ids[order], pts[order]
    counts = np.bincount(ids, minlength=m)
    return np.split(pts, np.cumsum(counts)[:-1])
