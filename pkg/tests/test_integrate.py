import numpy as np
import pytest

from causticflow.integrate import Outcome, StopSet, integrate_batch


def _node_stops(target, kind=1, align=(1.0, 0.0), m=1):
    pos = np.tile(np.asarray(target, dtype=float), (m, 1, 1))
    kinds = np.full((m, 1), kind, dtype=np.int8)
    aligns = np.tile(np.asarray(align, dtype=float), (m, 1, 1))
    return StopSet(pos, kinds, aligns, np.zeros((m, 1), dtype=bool))


def test_linear_contraction_captures_node():
    # y' = -(y - c): exact solution spirals straight into c
    c = np.array([0.3, -0.2])

    def rhs(ys, idx):
        return -(ys - c)

    res = integrate_batch(rhs, np.array([[2.0, 2.0]]), bounds=(-5, 5, -5, 5),
                          stops=_node_stops([c]))
    assert res.outcomes[0] == Outcome.CAPTURED_NODE
    assert np.linalg.norm(res.final[0] - c) < 1e-4


def test_accuracy_against_exact_exponential():
    # y' = y with y(0) = (1e-3, 2e-3); exiting at y1 = 1 fixes the time
    def rhs(ys, idx):
        return ys

    res = integrate_batch(rhs, np.array([[1e-3, 2e-3]]), bounds=(-1, 1, -4, 4),
                          record=True)
    assert res.outcomes[0] == Outcome.WINDOW_EXIT
    tr = res.trajectories[0]
    # along the flow, y2/y1 is conserved
    ratio = tr[:, 1] / tr[:, 0]
    assert np.max(np.abs(ratio - 2.0)) < 1e-7


def test_saddle_capture_needs_alignment():
    # y' = (x, -y): saddle at origin, stable direction along e2
    def rhs(ys, idx):
        return np.stack([ys[:, 0], -ys[:, 1]], axis=1)

    stops = _node_stops([[0.0, 0.0]], kind=2, align=(0.0, 1.0))
    res = integrate_batch(rhs, np.array([[1e-12, 1.0]]), bounds=(-2, 2, -2, 2),
                          stops=stops)
    assert res.outcomes[0] == Outcome.CAPTURED_SADDLE
    # same field, seed far from the stable manifold: passes by and exits
    res2 = integrate_batch(rhs, np.array([[0.5, 1.0]]), bounds=(-2, 2, -2, 2),
                           stops=stops)
    assert res2.outcomes[0] == Outcome.WINDOW_EXIT


def test_section_hit_accuracy():
    # y' = (1, cos(y1)): crossing of x = 1 happens at y2 = sin(1)
    def rhs(ys, idx):
        return np.stack([np.ones(len(ys)), np.cos(ys[:, 0])], axis=1)

    section = np.array([[[1.0, -2.0], [1.0, 2.0]]])
    res = integrate_batch(rhs, np.array([[0.0, 0.0]]), bounds=(-3, 3, -3, 3),
                          section=section)
    assert res.outcomes[0] == Outcome.SECTION_HIT
    assert res.section_points[0][1] == pytest.approx(np.sin(1.0), abs=1e-8)
    # params run along the section from its first endpoint
    assert res.section_params[0] == pytest.approx((np.sin(1.0) + 2.0) / 4.0, abs=1e-8)


def test_max_steps_reported():
    def rhs(ys, idx):
        return np.stack([-ys[:, 1], ys[:, 0]], axis=1)  # circular orbit, never exits

    res = integrate_batch(rhs, np.array([[1.0, 0.0]]), bounds=(-2, 2, -2, 2),
                          max_steps=50)
    assert res.outcomes[0] == Outcome.MAX_STEPS
    assert res.steps[0] == 50


def test_arc_budget_terminates():
    def rhs(ys, idx):
        return np.stack([-ys[:, 1], ys[:, 0]], axis=1)

    res = integrate_batch(rhs, np.array([[1.0, 0.0]]), bounds=(-2, 2, -2, 2),
                          arc_budget=1.0)
    assert res.outcomes[0] == Outcome.MAX_STEPS
    assert res.arclength[0] >= 1.0


def test_batch_mixed_outcomes():
    c = np.array([0.0, 0.0])

    def rhs(ys, idx):
        out = -(ys - c)
        out[idx >= 1] = ys[idx >= 1]  # second trajectory expands instead
        return out

    seeds = np.array([[1.0, 1.0], [1.0, 1.0]])
    stops = _node_stops([c], m=2)
    stops.kinds[1, 0] = 0  # no capture for the expanding row
    res = integrate_batch(rhs, seeds, bounds=(-4, 4, -4, 4), stops=stops)
    assert res.outcomes[0] == Outcome.CAPTURED_NODE
    assert res.outcomes[1] == Outcome.WINDOW_EXIT
