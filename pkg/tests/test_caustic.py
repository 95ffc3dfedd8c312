import numpy as np
import pytest

from causticflow import (QuadraticPerturbation, Window, classify_caustic,
                         critical_locus, normal_form, perturb, push_forward,
                         pyramid_slice, pyramid_slices)
from causticflow.geometry import points_polyline_distance


def _fit_circle(pts):
    """Algebraic least-squares circle fit (independent of the extraction)."""
    x, y = pts[:, 0], pts[:, 1]
    A = np.stack([x, y, np.ones_like(x)], axis=1)
    b = x * x + y * y
    (ca, cb, cc), *_ = np.linalg.lstsq(A, b, rcond=None)
    cx, cy = ca / 2, cb / 2
    r = np.sqrt(cc + cx * cx + cy * cy)
    return np.array([cx, cy]), r


def test_perturbed_elliptic_locus_is_the_predicted_circle(elliptic):
    eps, a, b, c = 0.3, 1.2, -0.8, 0.5
    f = perturb(elliptic, QuadraticPerturbation(eps, a, b, c))
    w = Window((0, 0), (2.2 * eps, 2.2 * eps), (320, 320))
    loc = critical_locus(f, w)
    assert len(loc.components) == 1
    assert loc.closed == [True]
    centre, radius = _fit_circle(loc.components[0])
    assert np.allclose(centre, [-(eps / 4) * (a - c), (eps / 4) * b], atol=1e-8)
    assert radius == pytest.approx((eps / 4) * abs(a + c), abs=1e-8)
    # every vertex sits on the zero set
    assert np.max(np.abs(f.det_hessian_many(loc.components[0]))) <= 1e-9


def test_pyramid_slice_circle_example():
    ft = pyramid_slice(1.0)
    w = Window((-0.5, 0.0), (1.1, 1.1), (256, 256))
    loc = critical_locus(ft, w)
    assert len(loc.components) == 1
    r = np.linalg.norm(loc.components[0] - np.array([-0.5, 0.0]), axis=1)
    assert np.max(np.abs(r - 0.5)) <= 1e-6


def test_unperturbed_elliptic_has_isolated_degenerate_origin(elliptic):
    loc = critical_locus(elliptic, Window((0, 0), (1, 1), (256, 256)))
    assert len(loc.components) == 0
    assert loc.degenerate_points.shape == (1, 2)
    assert np.allclose(loc.degenerate_points[0], [0, 0], atol=1e-10)
    curve = classify_caustic(elliptic, loc)
    assert len(curve.cusp_points) == 0
    assert np.allclose(curve.non_morse_points, [[0, 0]], atol=1e-10)


def test_hyperbolic_locus_is_the_axes(hyperbolic):
    loc = critical_locus(hyperbolic, Window((0, 0), (2, 2), (64, 64)))
    assert len(loc.components) == 2
    for comp in loc.components:
        assert np.max(np.abs(comp[:, 0] * comp[:, 1])) <= 1e-12
    # both axes are covered: extreme coordinates reach the window edge
    allv = np.concatenate(loc.components)
    assert allv[:, 0].min() <= -1.9 and allv[:, 0].max() >= 1.9
    assert allv[:, 1].min() <= -1.9 and allv[:, 1].max() >= 1.9


def test_hyperbolic_caustic_is_the_positive_quadrant_rays(hyperbolic):
    loc = critical_locus(hyperbolic, Window((0, 0), (2, 2), (64, 64)))
    curve = classify_caustic(hyperbolic, loc)
    assert len(curve.cusp_points) == 0
    V = curve.all_vertices()
    assert np.all(V >= -1e-12)  # images (y1^2, y2^2) fill the closed quadrant
    d = np.minimum(np.abs(V[:, 0]), np.abs(V[:, 1]))
    assert np.max(d) <= 1e-9  # every vertex on one of the two rays


def test_perturbed_hyperbolic_two_components_one_cusp(hyperbolic):
    f = perturb(hyperbolic, QuadraticPerturbation(eps=0.1, a=1, b=1, c=2))
    loc = critical_locus(f, Window((0, 0), (2, 2), (256, 256)))
    assert len(loc.components) == 2
    curve = classify_caustic(f, loc)
    # frozen from the independent tangency-scan oracle over both branches
    assert len(curve.cusp_points) == 1
    assert np.allclose(curve.cusp_fiber_points[0], [-0.025, -0.075], atol=1e-3)


def test_push_forward_examples(hyperbolic):
    ft = pyramid_slice(1.0)
    loc = critical_locus(ft, Window((-0.5, 0), (1.1, 1.1), (128, 128)))
    curve = push_forward(ft, loc)
    assert curve.labels is None
    # vertex (-1, 0) lies on the critical circle and maps to (-1, 0)
    assert np.allclose(ft.gradient((-1.0, 0.0)), [-1.0, 0.0])
    assert np.allclose(hyperbolic.gradient((2.0, 0.0)), [4.0, 0.0])
    for comp_loc, comp_base in zip(loc.components, curve.components):
        assert np.allclose(ft.gradient_many(comp_loc), comp_base)


def test_caustic_vertices_have_singular_preimages(slice_t1):
    # every emitted caustic vertex is the image of a locus point with
    # vanishing Hessian determinant
    loc = critical_locus(slice_t1, Window((-0.5, 0), (1.1, 1.1), (256, 256)))
    curve = push_forward(slice_t1, loc)
    for comp_loc, comp_base in zip(loc.components, curve.components):
        assert np.max(np.abs(slice_t1.det_hessian_many(comp_loc))) <= 1e-9
        gap = np.linalg.norm(slice_t1.gradient_many(comp_loc) - comp_base, axis=1)
        assert np.max(gap) <= 1e-8


@pytest.mark.parametrize("t", [0.25, 0.5, 1.0, -0.25, -0.5, -1.0])
def test_tricuspoid_three_cusps(t):
    curve = pyramid_slices([t])[0]
    assert len(curve.cusp_points) == 3
    # cusp positions from the exact parametrized-circle image oracle:
    # (0, 0) and (-9/8, +-3*sqrt(3)/8) scaled by t^2
    expect = np.array([[0.0, 0.0],
                       [-9 / 8, 3 * np.sqrt(3) / 8],
                       [-9 / 8, -3 * np.sqrt(3) / 8]]) * t * t
    got = curve.cusp_points
    for e in expect:
        assert np.min(np.linalg.norm(got - e, axis=1)) <= 1e-6


def test_tricuspoid_degenerate_slice_at_zero():
    curve = pyramid_slices([0.0])[0]
    assert len(curve.cusp_points) == 0
    assert len(curve.components) == 0
    assert np.allclose(curve.non_morse_points, [[0.0, 0.0]], atol=1e-10)


def test_cusp_distances_scale_quadratically():
    ts = [0.25, 0.5, 1.0]
    curves = pyramid_slices(ts)
    for t, curve in zip(ts, curves):
        cen = curve.cusp_points.mean(axis=0)
        d = np.linalg.norm(curve.cusp_points - cen, axis=1)
        assert np.allclose(d / t**2, 0.75, rtol=0.05)


def test_opposite_slices_give_the_same_caustic_set():
    # substituting y1 -> -y1 carries the slice at t to the slice at -t while
    # flipping x2; the caustic is symmetric about the x1-axis, so the two
    # caustics coincide as sets
    a, b = pyramid_slices([1.0, -1.0])
    va, vb = a.all_vertices(), b.all_vertices()
    assert np.max(points_polyline_distance(va, vb)) <= 1e-6
    assert np.max(points_polyline_distance(vb, va)) <= 1e-6
    mirrored = va.copy()
    mirrored[:, 1] *= -1
    assert np.max(points_polyline_distance(mirrored, vb)) <= 1e-6


def test_coarse_resolution_sets_warning_not_failure(hyperbolic):
    f = perturb(hyperbolic, QuadraticPerturbation(eps=0.1, a=1, b=1, c=2))
    loc = critical_locus(f, Window((0, 0), (2, 2), (16, 16)))
    # the two hyperbola branches cannot be separated at this resolution;
    # the ambiguous cells are reported, the call still succeeds
    assert isinstance(loc.warnings, list)
    assert len(loc.components) >= 1
