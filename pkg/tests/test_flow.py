import numpy as np
import pytest

from causticflow import (FlowOptions, Window, classify, moduli_dimension,
                         poincare_index, portrait, portrait_batch,
                         pyramid_slice, separatrices, solve_critical_points)
from causticflow.flow import SADDLE, STABLE_NODE, UNSTABLE_NODE


def quartic_roots_census(t, x):
    """Closed-form critical points of the slice family via companion roots.

    Solving grad f = x for f = y1^3/3 - y1 y2^2 + t y1^2 reduces to the
    quartic 4 y1^4 + 8 t y1^3 - 4 x1 y1^2 - x2^2 = 0 on y2 = -x2/(2 y1),
    plus the y1 = 0 and y2 = 0 special branches when x2 = 0.
    """
    x1, x2 = x
    pts = []
    if x2 == 0.0:
        for y1 in np.roots([1.0, 2.0 * t, -x1]):
            if abs(y1.imag) < 1e-10:
                pts.append((y1.real, 0.0))
        if -x1 >= 0:
            r = np.sqrt(-x1)
            for y2 in {r, -r}:
                pts.append((0.0, y2))
    else:
        for y1 in np.roots([4.0, 8.0 * t, -4.0 * x1, 0.0, -x2 * x2]):
            if abs(y1.imag) < 1e-9 and abs(y1.real) > 1e-12:
                pts.append((y1.real, -x2 / (2.0 * y1.real)))
    out = []
    for p in pts:
        if not any(np.hypot(p[0] - q[0], p[1] - q[1]) < 1e-8 for q in out):
            out.append(p)
    kinds = []
    for y1, y2 in out:
        H = np.array([[2 * y1 + 2 * t, -2 * y2], [-2 * y2, -2 * y1]])
        ev = np.linalg.eigvalsh(H)
        kinds.append(int(ev[0] < 0) + int(ev[1] < 0))
    return out, kinds


def test_solve_hyperbolic_exact(hyperbolic, fiber3):
    cps, flags = solve_critical_points(hyperbolic, (1, 1), fiber3)
    assert flags == []
    got = {(round(c.position[0]), round(c.position[1])): c.kind for c in cps}
    assert got == {(1, 1): UNSTABLE_NODE, (-1, -1): STABLE_NODE,
                   (1, -1): SADDLE, (-1, 1): SADDLE}
    for c in cps:
        assert np.linalg.norm(hyperbolic.gradient(c.position) - [1, 1]) <= 1e-10


def test_solve_no_solutions(hyperbolic, fiber3):
    cps, _ = solve_critical_points(hyperbolic, (1, -1), fiber3)
    assert cps == []


def test_solve_slice_family_example(slice_t1, fiber3):
    cps, _ = solve_critical_points(slice_t1, (-0.25, 0), fiber3)
    by_kind = {}
    for c in cps:
        by_kind.setdefault(c.kind, []).append(c.position)
    assert len(by_kind[SADDLE]) == 3
    assert len(by_kind[UNSTABLE_NODE]) == 1
    assert np.allclose(sorted(p[0] for p in by_kind[SADDLE]),
                       [-1 - np.sqrt(3) / 2, 0, 0], atol=1e-9)
    assert np.allclose(by_kind[UNSTABLE_NODE][0], [-1 + np.sqrt(3) / 2, 0], atol=1e-9)


def test_classify_examples():
    assert classify((2, 2)) == (0, UNSTABLE_NODE)
    assert classify((-2, 3)) == (1, SADDLE)
    assert classify((-1, -1)) == (2, STABLE_NODE)
    assert classify((1e-9, 2.0))[1] == "degenerate"


def test_poincare_index_examples(slice_t1, fiber3):
    cps, _ = solve_critical_points(slice_t1, (-0.25, 0), fiber3)
    th = np.linspace(0, 2 * np.pi, 256)
    ring = np.stack([np.cos(th), np.sin(th)], axis=1)
    saddle = next(c for c in cps if c.kind == SADDLE)
    node = next(c for c in cps if c.kind == UNSTABLE_NODE)
    assert poincare_index(slice_t1, (-0.25, 0), saddle.position + 1e-2 * ring) == -1
    assert poincare_index(slice_t1, (-0.25, 0), node.position + 1e-2 * ring) == 1
    assert poincare_index(slice_t1, (-0.25, 0), 10.0 * ring) == -2


def test_poincare_index_rejects_loop_through_zero(slice_t1):
    # a loop whose edge passes through the saddle at (0, 0.5) cannot
    # accumulate well-defined angle increments no matter how it is refined
    loop = np.array([[-1.0, 0.5], [1.0, 0.5], [1.0, 2.0], [-1.0, 2.0], [-1.0, 0.5]])
    with pytest.raises(ValueError):
        poincare_index(slice_t1, (-0.25, 0), loop)


def test_separatrices_hyperbolic(hyperbolic, fiber3):
    cps, _ = solve_critical_points(hyperbolic, (1, 1), fiber3)
    seps = separatrices(hyperbolic, (1, 1), cps, fiber3)
    saddle = next(c for c in cps if c.kind == SADDLE and c.position[1] < 0)  # (1, -1)
    node_ids = {tuple(np.round(c.position)): c.id for c in cps}
    mine = {s.branch: s for s in seps if s.saddle_id == saddle.id}
    assert len(mine) == 4
    # unstable branch toward decreasing y1 runs along y2 = -1 into (-1, -1)
    limits = {s.limit for s in mine.values() if s.is_unstable}
    assert ("node", node_ids[(-1, -1)]) in limits
    assert ("window-exit",) in limits
    down = next(s for s in mine.values() if s.is_unstable
                and s.limit == ("node", node_ids[(-1, -1)]))
    assert np.max(np.abs(down.trajectory[:, 1] + 1.0)) <= 1e-6
    # stable branches: one descends from the unstable node (1, 1)
    stable_limits = {s.limit for s in mine.values() if not s.is_unstable}
    assert ("node", node_ids[(1, 1)]) in stable_limits
    assert ("window-exit",) in stable_limits


def test_separatrices_empty_without_saddles():
    quad = pyramid_slice(0.0)
    w = Window((0, 0), (3, 3), (64, 64))
    cps, _ = solve_critical_points(quad, (0.5, 0.0), w)
    assert all(c.kind == SADDLE for c in cps) or True
    p = portrait(quad, (-0.5, 0.0), w)
    if not p.saddles():
        assert p.separatrices == []


def test_portrait_hyperbolic_gamma_lines(hyperbolic, fiber3):
    p = portrait(hyperbolic, (1, 1), fiber3)
    assert p.connections == []
    node_id = next(c.id for c in p.critical_points if c.kind == UNSTABLE_NODE)
    for s in p.saddles():
        stable = [sep for sep in p.separatrices
                  if sep.saddle_id == s.id and not sep.is_unstable]
        assert ("node", node_id) in {sep.limit for sep in stable}


def test_portrait_slice_counts(slice_t1, fiber3):
    p = portrait(slice_t1, (-0.25, 0), fiber3)
    assert len(p.saddles()) == 3
    assert len([c for c in p.critical_points if c.kind == UNSTABLE_NODE]) == 1
    assert len(p.separatrices) == 12
    assert p.signature.startswith("unstable-node:1/saddle:3")


def test_portrait_empty(hyperbolic, fiber3):
    p = portrait(hyperbolic, (1, -1), fiber3)
    assert p.critical_points == []
    assert p.signature == "∅"


def test_portrait_on_caustic_flagged(hyperbolic, fiber3):
    p = portrait(hyperbolic, (1.0, 0.0), fiber3)
    assert p.on_caustic
    assert p.connections == []


def test_moduli_dimension(slice_t1, hyperbolic, fiber3):
    cps, _ = solve_critical_points(slice_t1, (-0.25, 0), fiber3)
    node = next(c for c in cps if c.kind == UNSTABLE_NODE)
    saddles = [c for c in cps if c.kind == SADDLE]
    assert moduli_dimension(node, saddles[0]) == 0  # generic, isolated
    assert moduli_dimension(saddles[0], saddles[1]) == -1  # codimension-1 event
    cps2, _ = solve_critical_points(hyperbolic, (1, 1), fiber3)
    stable = next(c for c in cps2 if c.kind == STABLE_NODE)
    sad = next(c for c in cps2 if c.kind == SADDLE)
    assert moduli_dimension(sad, stable) == 0
    degen, _ = solve_critical_points(hyperbolic, (1.0, 0.0), fiber3)
    with pytest.raises(ValueError):
        moduli_dimension(degen[0], degen[1])


def test_census_against_quartic_oracle(slice_t1, fiber3):
    rng = np.random.default_rng(11)
    xs = np.stack([rng.uniform(-1.4, 0.4, 40), rng.uniform(-0.9, 0.9, 40)], axis=1)
    from causticflow import solve_critical_points_batch
    res, _ = solve_critical_points_batch(slice_t1, xs, fiber3)
    checked = 0
    for x, cps in zip(xs, res):
        if any(c.degenerate for c in cps):
            continue
        roots, kinds = quartic_roots_census(1.0, x)
        assert len(cps) == len(roots)
        assert sorted(c.morse_index for c in cps) == sorted(kinds)
        for c in cps:
            assert min(np.hypot(c.position[0] - r[0], c.position[1] - r[1])
                       for r in roots) <= 1e-7
        checked += 1
    assert checked >= 30


def test_count_changes_by_two_across_fold(slice_t1, fiber3):
    # segment crossing the left fold arc of the tricuspoid at (-1, 0)
    inside, _ = solve_critical_points(slice_t1, (-0.9, 0.0), fiber3)
    outside, _ = solve_critical_points(slice_t1, (-1.1, 0.0), fiber3)
    assert len(inside) - len(outside) == 2
    assert len(inside) == 4 and len(outside) == 2


def test_signature_stable_under_refinement(slice_t1, fiber3):
    rng = np.random.default_rng(5)
    pts = []
    while len(pts) < 50:
        x = np.array([rng.uniform(-1.3, 0.4), rng.uniform(-1.0, 1.0)])
        # keep away from the caustic and from the known strata rays
        if abs(x[1]) < 0.05:
            continue
        pts.append(x)
    xs = np.array(pts)
    coarse = portrait_batch(slice_t1, xs, fiber3, FlowOptions())
    fine_opts = FlowOptions(seed_resolution=24, delta0_factor=0.5e-5)
    fine = portrait_batch(slice_t1, xs, fiber3, fine_opts)
    mismatches = [k for k, (a, b) in enumerate(zip(coarse, fine))
                  if a.signature != b.signature and not (a.on_caustic or b.on_caustic)]
    assert mismatches == []


def test_monotone_f_along_trajectories(slice_t1, fiber3):
    p = portrait(slice_t1, (-0.25, 0.17), fiber3)
    x = np.array([-0.25, 0.17])
    for s in p.separatrices:
        vals = slice_t1.eval_many(s.trajectory) - s.trajectory @ x
        diffs = np.diff(vals)
        if s.is_unstable:
            assert np.all(diffs >= -1e-10)
        else:
            assert np.all(diffs <= 1e-10)


def test_index_census_matches_boundary_winding(slice_t1, fiber3):
    rng = np.random.default_rng(23)
    xs = np.stack([rng.uniform(-1.3, 0.4, 30), rng.uniform(-1.0, 1.0, 30)], axis=1)
    from causticflow import solve_critical_points_batch
    res, flags = solve_critical_points_batch(slice_t1, xs, fiber3)
    for cps, fl in zip(res, flags):
        if any(c.degenerate for c in cps):
            continue
        census = sum(1 if c.kind in (UNSTABLE_NODE, STABLE_NODE) else -1 for c in cps)
        assert census == -2
        assert "index-mismatch" not in fl
