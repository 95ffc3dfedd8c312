import numpy as np
import pytest

from causticflow import Window
from causticflow.geometry import (hausdorff_distance, point_polyline_distance,
                                  polyline_length, polyline_min_distance,
                                  segment_crossings)


def test_window_invariants():
    with pytest.raises(ValueError):
        Window((0, 0), (0.0, 1.0), (64, 64))
    with pytest.raises(ValueError):
        Window((0, 0), (1.0, 1.0), (8, 64))
    w = Window((1, 2), (3, 4), (32, 16))
    assert w.bounds == (-2, 4, -2, 6)
    assert w.cell_size == (6 / 32, 8 / 16)
    assert w.cell_size_for(10) == (0.6, 0.8)


def test_boundary_polyline_closed_ccw():
    w = Window((0, 0), (1, 1), (16, 16))
    loop = w.boundary_polyline(8)
    assert np.allclose(loop[0], loop[-1])
    # shoelace area positive for counter-clockwise orientation
    x, y = loop[:-1, 0], loop[:-1, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert area > 0


def test_point_polyline_distance():
    line = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert point_polyline_distance((0.5, 0.3), line) == pytest.approx(0.3)
    assert point_polyline_distance((2.0, 0.0), line) == pytest.approx(1.0)
    assert polyline_length(line) == pytest.approx(1.0)


def test_hausdorff_and_min_distance():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[0.0, 0.5], [1.0, 0.5]])
    assert polyline_min_distance(a, b) == pytest.approx(0.5)
    assert hausdorff_distance(a, b) == pytest.approx(0.5)
    c = np.array([[0.0, 0.0], [2.0, 0.0]])
    assert hausdorff_distance(a, c) == pytest.approx(1.0)


def test_segment_crossings():
    chords_a = np.array([[0.0, -1.0], [5.0, -1.0]])
    chords_b = np.array([[0.0, 1.0], [5.0, 1.0]])
    idx, t, u = segment_crossings(chords_a, chords_b, ((-1.0, 0.0), (6.0, 0.0)))
    assert list(idx) == [0, 1]
    assert np.allclose(t, 0.5)
    # parallel chord never crosses
    idx, _, _ = segment_crossings(np.array([[0.0, 2.0]]), np.array([[1.0, 2.0]]),
                                  ((0.0, 0.0), (1.0, 0.0)))
    assert idx.size == 0
