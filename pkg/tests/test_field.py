import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causticflow import (FamilySpec, GeneratingFunction, Poly2,
                         QuadraticPerturbation, elliptic_umbilic_versal,
                         format_poly, normal_form, parse_poly, perturb,
                         pyramid_slice)
from conftest import fd_gradient, fd_hessian


def test_eval_examples(elliptic, hyperbolic):
    assert elliptic.eval((1, 0)) == pytest.approx(1 / 3)
    assert hyperbolic.eval((1, 2)) == pytest.approx(3.0)
    zero = GeneratingFunction(Poly2(), "zero")
    assert zero.eval((0.7, -1.3)) == 0.0


def test_gradient_examples(elliptic, hyperbolic):
    # the induced Lagrangian map: (y1^2 - y2^2, -2 y1 y2) for the elliptic form
    assert np.allclose(elliptic.gradient((1, 1)), [0.0, -2.0])
    assert np.allclose(hyperbolic.gradient((2, 3)), [4.0, 9.0])
    identity = GeneratingFunction(Poly2(((2, 0, 0.5), (0, 2, 0.5))), "quad")
    a, b = 0.37, -1.2
    assert np.allclose(identity.gradient((a, b)), [a, b])


def test_hessian_examples(elliptic, hyperbolic):
    assert np.allclose(elliptic.hessian((0, 0)), np.zeros((2, 2)))
    assert np.allclose(hyperbolic.hessian((1, 2)), [[2, 0], [0, 4]])
    ft = pyramid_slice(1.0)
    assert np.allclose(ft.hessian((0, 0)), [[2, 0], [0, 0]])


def test_normal_forms():
    assert format_poly(normal_form("hyperbolic-umbilic").poly).count("y1^3") == 1
    hu = normal_form("hyperbolic-umbilic")
    assert hu.eval((1, 1)) == pytest.approx(2 / 3)
    eu = normal_form("elliptic-umbilic")
    assert eu.poly.terms == ((1, 2, -1.0), (3, 0, pytest.approx(1 / 3)))
    fold = normal_form("fold")
    assert fold.eval((1, 0)) == pytest.approx(1.0)
    assert fold.eval((0, 1)) == pytest.approx(0.5)
    for kind in ("cusp-plus", "cusp-minus"):
        g = normal_form(kind)
        sign = 1.0 if kind == "cusp-plus" else -1.0
        assert g.eval((1, 0)) == pytest.approx(sign)
    with pytest.raises(ValueError):
        normal_form("butterfly")


def test_perturb(elliptic):
    q = QuadraticPerturbation(eps=0.2, a=1, b=0, c=1)
    f = perturb(elliptic, q)
    # adds 0.1*(y1^2 + y2^2)
    assert f.eval((1, 0)) - elliptic.eval((1, 0)) == pytest.approx(0.1)
    assert f.eval((0, 1)) - elliptic.eval((0, 1)) == pytest.approx(0.1)
    same = perturb(elliptic, Poly2())
    assert same.poly.terms == elliptic.poly.terms
    ft = perturb(elliptic, Poly2(((2, 0, 1.0),)))
    assert ft.eval((1, 1)) == pytest.approx(pyramid_slice(1.0).eval((1, 1)))


def test_quadratic_perturbation_requires_positive_eps():
    with pytest.raises(ValueError):
        QuadraticPerturbation(eps=-1.0, a=1, b=0, c=1)


def test_family_spec(elliptic):
    fam = elliptic_umbilic_versal()
    assert fam.parameter_names() == ("a0", "a1", "a2", "a3")
    g = fam.at({"a1": 2.0, "a3": -0.5})
    expect = elliptic.eval((1, 1)) + 2.0 * 1 - 0.5 * 1
    assert g.eval((1, 1)) == pytest.approx(expect)
    with pytest.raises(KeyError):
        fam.at({"nope": 1.0})


@pytest.mark.parametrize("kind", ["fold", "cusp-plus", "cusp-minus",
                                  "elliptic-umbilic", "hyperbolic-umbilic"])
def test_formal_derivatives_match_finite_differences(kind):
    f = normal_form(kind)
    rng = np.random.default_rng(7)
    pts = rng.uniform(-2, 2, size=(100, 2))
    for y in pts:
        g = f.gradient(y)
        g_fd = fd_gradient(f, y)
        assert np.allclose(g, g_fd, rtol=1e-6, atol=1e-6)
        H = f.hessian(y)
        H_fd = fd_hessian(f, y)
        assert np.allclose(H, H_fd, rtol=1e-6, atol=1e-5)
        assert H[0, 1] == H[1, 0]


def test_det_hessian_grad_matches_fd(slice_t1):
    rng = np.random.default_rng(3)
    h = 1e-6
    for y in rng.uniform(-2, 2, size=(25, 2)):
        g = slice_t1.det_hessian_grad(y)
        fd = np.array([
            (slice_t1.det_hessian((y[0] + h, y[1])) - slice_t1.det_hessian((y[0] - h, y[1]))) / (2 * h),
            (slice_t1.det_hessian((y[0], y[1] + h)) - slice_t1.det_hessian((y[0], y[1] - h))) / (2 * h),
        ])
        assert np.allclose(g, fd, rtol=1e-6, atol=1e-6)


def test_parse_format_roundtrip():
    p = parse_poly("0.3333333333333333*y1^3 + -1*y1*y2^2")
    assert p.terms == ((1, 2, -1.0), (3, 0, 0.3333333333333333))
    assert parse_poly(format_poly(p)).terms == p.terms


@pytest.mark.parametrize("text,terms", [
    ("y1", ((1, 0, 1.0),)),
    ("-y2^3", ((0, 3, -1.0),)),
    ("2", ((0, 0, 2.0),)),
    ("y1^2 - 3*y2", ((0, 1, -3.0), (2, 0, 1.0))),
    ("1.5e-3*y1 - y2^2", ((1, 0, 0.0015), (0, 2, -1.0))),
    ("  + -3*y1 +2*y1 ", ((1, 0, -1.0),)),
    ("y1*y2", ((1, 1, 1.0),)),
])
def test_parse_lenient(text, terms):
    assert parse_poly(text).terms == tuple(sorted(terms, key=lambda t: (t[0] + t[1], t[0], t[1])))


@pytest.mark.parametrize("bad", ["", "y3", "1..2*y1", "*", "y1^-2"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_poly(bad)


coeffs = st.floats(min_value=-10, max_value=10, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-6)
monos = st.tuples(st.integers(0, 4), st.integers(0, 4), coeffs)
polys = st.lists(monos, max_size=6).map(lambda ts: Poly2(tuple(ts)))


@given(polys, polys)
@settings(max_examples=60, deadline=None)
def test_addition_commutes(p, q):
    assert (p + q).terms == (q + p).terms


@given(polys, polys, polys)
@settings(max_examples=60, deadline=None)
def test_addition_associates(p, q, r):
    left = ((p + q) + r).terms
    right = (p + (q + r)).terms
    assert {(i, j) for i, j, _ in left} == {(i, j) for i, j, _ in right}
    lc = dict(((i, j), c) for i, j, c in left)
    rc = dict(((i, j), c) for i, j, c in right)
    for key in lc:
        assert lc[key] == pytest.approx(rc[key], rel=1e-12, abs=1e-12)


@given(polys)
@settings(max_examples=60, deadline=None)
def test_serialization_roundtrip(p):
    assert parse_poly(format_poly(p)).terms == p.terms


@given(polys)
@settings(max_examples=40, deadline=None)
def test_partial_drops_degree(p):
    for var in (1, 2):
        d = p.partial(var)
        if not d.is_zero():
            assert d.total_degree <= max(p.total_degree - 1, 0)


def test_perturb_commutes_with_poly_addition(elliptic):
    p = Poly2(((2, 0, 0.3),))
    q = Poly2(((1, 1, -0.7),))
    a = perturb(perturb(elliptic, p), q)
    b = perturb(perturb(elliptic, q), p)
    assert a.poly.terms == b.poly.terms
    c = perturb(elliptic, p + q)
    assert a.poly.terms == c.poly.terms
