import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chemotaxis_lab.grid import (
    Grid,
    chemo_divergence,
    grad_sq_integral,
    inner,
    integrate,
    laplacian_neumann,
)


def test_grid_basics():
    g = Grid.uniform(2, 8, 2.0)
    assert g.shape == (8, 8) and g.h == (0.25, 0.25)
    assert g.measure == 4.0 and g.cell_volume == 0.0625 and g.size == 64
    x, y = g.centers
    assert x[0, 0] == 0.125 and x[-1, 0] == 1.875 and y[0, -1] == 1.875


@pytest.mark.parametrize("shape, lengths", [((3,), (1.0,)), ((8,), (0.0,)), ((4, 4, 4), (1, 1, 1))])
def test_grid_rejects_bad_input(shape, lengths):
    with pytest.raises(ValueError):
        Grid(shape, lengths)


def test_check_rejects_wrong_shape():
    g = Grid.uniform(1, 8, 1.0)
    with pytest.raises(ValueError):
        g.check(np.zeros(9))


@pytest.mark.parametrize("dim", [1, 2])
def test_constants_are_in_kernel(dim):
    g = Grid.uniform(dim, 16, 1.0)
    c = g.constant(3.7)
    assert np.all(laplacian_neumann(g, c) == 0)
    assert np.all(chemo_divergence(g, c, c) == 0)
    assert grad_sq_integral(g, c) == 0


def test_cosine_is_discrete_eigenfunction():
    L = 2.0
    g = Grid.uniform(1, 32, L)
    (x,) = g.centers
    f = np.cos(math.pi * x / L)
    h = g.h[0]
    lam = -4 * math.sin(math.pi * h / (2 * L)) ** 2 / h**2
    assert np.max(np.abs(laplacian_neumann(g, f) - lam * f)) < 1e-12


def _laplacian_error(n):
    g = Grid.uniform(1, n, 1.0)
    (x,) = g.centers
    f = np.cos(math.pi * x)
    return np.max(np.abs(laplacian_neumann(g, f) + math.pi**2 * f))


def _chemo_error(n):
    g = Grid.uniform(1, n, 1.0)
    (x,) = g.centers
    u = 2 + np.cos(math.pi * x)
    w = np.cos(math.pi * x)
    exact = math.pi**2 * np.sin(math.pi * x) ** 2 - math.pi**2 * u * np.cos(math.pi * x)
    return np.max(np.abs(chemo_divergence(g, u, w) - exact))


@pytest.mark.parametrize("err", [_laplacian_error, _chemo_error])
def test_second_order(err):
    e = [err(n) for n in (32, 64, 128, 256)]
    ratios = [a / b for a, b in zip(e, e[1:])]
    assert all(3.5 < r < 4.5 for r in ratios), ratios


def test_laplacian_2d_separable():
    g = Grid.uniform(2, 24, 1.0)
    x, y = g.centers
    f = np.cos(math.pi * x) * np.cos(2 * math.pi * y)
    h = g.h[0]
    lam = -4 / h**2 * (math.sin(math.pi * h / 2) ** 2 + math.sin(math.pi * h) ** 2)
    assert np.max(np.abs(laplacian_neumann(g, f) - lam * f)) < 1e-10


@settings(max_examples=50)
@given(arrays(np.float64, 12, elements=st.floats(0, 10)), arrays(np.float64, 12, elements=st.floats(-5, 5)))
def test_discrete_conservation(u, w):
    g = Grid.uniform(1, 12, 1.0)
    scale = max(1.0, float(np.abs(u).max()) * float(np.abs(w).max()) / g.h[0] ** 2)
    assert abs(integrate(g, chemo_divergence(g, u, w))) < 1e-12 * scale * g.size
    assert abs(integrate(g, laplacian_neumann(g, w))) < 1e-12 * scale * g.size


@settings(max_examples=50)
@given(arrays(np.float64, (6, 6), elements=st.floats(-3, 3)))
def test_summation_by_parts(f):
    g = Grid.uniform(2, 6, 1.5)
    lhs = -inner(g, f, laplacian_neumann(g, f))
    assert lhs == pytest.approx(grad_sq_integral(g, f), rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("dim, n", [(1, 8), (1, 100), (2, 13)])
def test_integrate_constant(dim, n):
    g = Grid.uniform(dim, n, 1.3)
    assert abs(integrate(g, g.constant(2.5)) - 2.5 * g.measure) < 1e-15


def test_grad_sq_linear_profile_is_one_minus_h():
    for n in (16, 64):
        g = Grid.uniform(1, n, 1.0)
        (x,) = g.centers
        assert grad_sq_integral(g, x) == pytest.approx(1 - 1 / n, rel=1e-12)


def test_grad_sq_cosine_second_order():
    e = []
    for n in (32, 64, 128):
        g = Grid.uniform(1, n, 1.0)
        (x,) = g.centers
        e.append(abs(grad_sq_integral(g, np.cos(math.pi * x)) - math.pi**2 / 2))
    assert 3.5 < e[0] / e[1] < 4.5 and 3.5 < e[1] / e[2] < 4.5


def test_chemo_divergence_with_constant_density():
    g = Grid.uniform(2, 10, 1.0)
    w = np.random.default_rng(3).normal(size=g.shape)
    assert np.max(np.abs(chemo_divergence(g, g.constant(2.5), w) - 2.5 * laplacian_neumann(g, w))) < 1e-12


def test_integrate_midpoint_exactness():
    g = Grid.uniform(1, 64, 1.0)
    (x,) = g.centers
    assert integrate(g, x) == 0.5
    g = Grid.uniform(1, 128, 3.0)
    (x,) = g.centers
    assert abs(integrate(g, np.cos(math.pi * x / 3.0))) < 1e-13


@settings(max_examples=50)
@given(arrays(np.float64, (5, 7), elements=st.floats(-3, 3)), arrays(np.float64, (5, 7), elements=st.floats(-3, 3)))
def test_laplacian_self_adjoint(f, h):
    g = Grid((5, 7), (1.0, 2.0))
    a = inner(g, laplacian_neumann(g, f), h)
    b = inner(g, f, laplacian_neumann(g, h))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-10)


@given(arrays(np.float64, 9, elements=st.floats(-1e3, 1e3)))
def test_grad_sq_nonnegative(f):
    assert grad_sq_integral(Grid.uniform(1, 9, 1.0), f) >= 0
