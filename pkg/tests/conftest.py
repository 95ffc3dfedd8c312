import numpy as np
import pytest

from causticflow import (GeneratingFunction, Poly2, Window, normal_form,
                         pyramid_slice)


@pytest.fixture
def elliptic():
    return normal_form("elliptic-umbilic")


@pytest.fixture
def hyperbolic():
    return normal_form("hyperbolic-umbilic")


@pytest.fixture
def slice_t1():
    return pyramid_slice(1.0)


@pytest.fixture
def channel():
    """Quintic with a saddle connection pinned on {x2 = 0, x1 > -1}.

    f = y1^5/5 - y1 - y1*y2^2/2 is even in y2, so for x2 = 0 the y1-axis is
    invariant; its two on-axis saddles are joined by the axis orbit, and the
    single degenerate caustic point sits at (-1, 0) where they collide.
    """
    return GeneratingFunction(Poly2(((5, 0, 0.2), (1, 0, -1.0), (1, 2, -0.5))),
                              "quintic-channel")


@pytest.fixture
def fiber3():
    return Window((0.0, 0.0), (3.0, 3.0), (64, 64))


def fd_gradient(f, y, h=1e-6):
    y1, y2 = y
    return np.array([
        (f.eval((y1 + h, y2)) - f.eval((y1 - h, y2))) / (2 * h),
        (f.eval((y1, y2 + h)) - f.eval((y1, y2 - h))) / (2 * h),
    ])


def fd_hessian(f, y, h=1e-5):
    y1, y2 = y
    g = fd_gradient
    gx1 = g(f, (y1 + h, y2), h)
    gx0 = g(f, (y1 - h, y2), h)
    gy1 = g(f, (y1, y2 + h), h)
    gy0 = g(f, (y1, y2 - h), h)
    return np.array([
        [(gx1[0] - gx0[0]) / (2 * h), (gy1[0] - gy0[0]) / (2 * h)],
        [(gx1[1] - gx0[1]) / (2 * h), (gy1[1] - gy0[1]) / (2 * h)],
    ])
