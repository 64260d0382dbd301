import numpy as np
import pytest

from sanc.curvature import (
    GRADIENT,
    NEGATIVE_CURVATURE,
    CurvatureProbe,
    curvature_probe,
    gradient_decrease_surrogate,
    nc_decrease_surrogate,
    nc_direction,
)
from sanc.lanczos import lanczos_expand
from sanc.linalg import LinearOperator


def probe_for(B, g, eps=1e-3, j=5):
    op = LinearOperator.from_matrix(B)
    return curvature_probe(lanczos_expand(op, g, j), op, g, eps), op


def test_probe_examples():
    p, _ = probe_for(np.eye(3), np.array([1.0, 2.0, 3.0]))
    assert p.curvature == pytest.approx(1.0)
    B = np.diag([-2.0, 1.0, 3.0])
    p, op = probe_for(B, np.array([0.3, 0.9, -0.5]), j=3)
    assert p.curvature == pytest.approx(-2.0, abs=1e-8)
    assert abs(np.linalg.norm(p.v) - 1.0) <= 1e-12
    assert abs(p.v @ op(p.v) - p.curvature) <= 1e-10
    p, _ = probe_for(np.eye(2), np.array([0.04, 0.0]), eps=0.1)
    assert p.eps_prime == pytest.approx(0.05)
    p, _ = probe_for(np.eye(2), np.array([3.0, 4.0]), eps=0.1)
    assert p.eps_prime == pytest.approx(2.5)


def test_direction_examples():
    v = np.array([1.0, 0.0])
    g = np.array([2.0, 0.0])
    d, kind = nc_direction(CurvatureProbe(v, 0.0, 0.5), g, 1.0, 1.0, 0.0, 0.0, 1)
    assert kind == GRADIENT
    np.testing.assert_array_equal(d, -g)

    for z in (1, -1):
        d, kind = nc_direction(CurvatureProbe(v, -1.0, 0.5), np.zeros(2), 1.0, 1.0, 0.0, 0.0, z)
        assert kind == NEGATIVE_CURVATURE
        np.testing.assert_allclose(d, -2.0 * z * v)
        assert np.linalg.norm(d) == pytest.approx(2.0)

    g = np.array([6.0, 8.0])
    d, kind = nc_direction(CurvatureProbe(v, -1.0, 5.0), g, 1.0, 1.0, 0.0, 0.0, 1)
    assert kind == GRADIENT
    np.testing.assert_array_equal(d, -g)


def test_flat_zero_gradient_returns_zero_step():
    d, kind = nc_direction(CurvatureProbe(np.array([0.0, 1.0]), 0.5, 0.0), np.zeros(2), 1.0, 1.0, 1e-3, 1e-4, 1)
    assert kind == GRADIENT and not np.any(d)


def test_direction_errors():
    p = CurvatureProbe(np.array([1.0]), -1.0, 0.0)
    with pytest.raises(ValueError):
        nc_direction(p, np.ones(1), 0.0, 1.0, 0.0, 0.0, 1)
    with pytest.raises(ValueError):
        nc_direction(p, np.ones(1), 1.0, -1.0, 0.0, 0.0, 1)
    with pytest.raises(ValueError):
        nc_direction(p, np.ones(1), 1.0, 1.0, 0.0, 0.0, 0)


def test_branch_selection_and_norms(rng):
    for _ in range(200):
        c = rng.uniform(-3, 3)
        g = rng.standard_normal(4) * 10 ** rng.uniform(-3, 1)
        L1, L2 = 10 ** rng.uniform(-1, 1, size=2)
        eps, eps_g = 10 ** rng.uniform(-4, -1), 10 ** rng.uniform(-5, -2)
        v = rng.standard_normal(4)
        v /= np.linalg.norm(v)
        z = int(rng.choice((-1, 1)))
        d, kind = nc_direction(CurvatureProbe(v, c, 0.0), g, L1, L2, eps, eps_g, z)
        nc = 2 * (-c) ** 3 / (3 * L2**2) - eps * c**2 / (6 * L2**2)
        gr = np.linalg.norm(g) ** 2 / (4 * L1) - eps_g**2 / L1
        assert nc == pytest.approx(nc_decrease_surrogate(c, L2, eps), rel=1e-14, abs=1e-300)
        assert gr == pytest.approx(gradient_decrease_surrogate(np.linalg.norm(g), L1, eps_g), rel=1e-14, abs=1e-300)
        if nc > gr:
            assert kind == NEGATIVE_CURVATURE
            assert np.linalg.norm(d) == pytest.approx(2 * abs(c) / L2, rel=1e-14)
            d2, _ = nc_direction(CurvatureProbe(v, c, 0.0), g, L1, L2, eps, eps_g, -z)
            np.testing.assert_array_equal(d2, -d)
        else:
            assert kind == GRADIENT
            assert np.linalg.norm(d) == pytest.approx(np.linalg.norm(g) / L1, rel=1e-14)


def test_both_signs_decrease_quadratic_saddle_equally():
    c, L2 = -1.5, 3.0
    v = np.array([0.0, 1.0, 0.0])
    f = lambda w: 0.5 * c * (w @ v) ** 2 + 0.5 * (w[0] ** 2 + w[2] ** 2)
    values = []
    for z in (1, -1):
        d, kind = nc_direction(CurvatureProbe(v, c, 0.0), np.zeros(3), 1.0, L2, 0.0, 0.0, z)
        assert kind == NEGATIVE_CURVATURE
        values.append(f(d))
    assert values[0] == values[1] < f(np.zeros(3))
