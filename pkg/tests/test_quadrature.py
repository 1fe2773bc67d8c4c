from math import factorial

import numpy as np
import pytest

from isosv.errors import ConfigurationError
from isosv.quadrature import MAX_DEGREE, gauss_interval, quadrature_rule


def monomial_integral(a, b):
    """Integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def test_degree_one_integrates_one():
    rule = quadrature_rule(1)
    assert rule.all_weights.sum() == pytest.approx(0.5, abs=1e-15)


def test_degree_six_monomial():
    rule = quadrature_rule(6)
    x, y = rule.all_points.T
    assert rule.all_weights @ (x**3 * y**2) == pytest.approx(monomial_integral(3, 2), rel=1e-13)


@pytest.mark.parametrize("degree", range(1, MAX_DEGREE + 1))
def test_exact_for_all_monomials_up_to_degree(degree):
    rule = quadrature_rule(degree)
    assert np.all(rule.weights > 0)
    assert np.allclose(rule.weights.sum(axis=1), 1.0 / 6.0, atol=1e-15)
    x, y = rule.all_points.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = rule.all_weights @ (x**a * y**b)
            assert got == pytest.approx(monomial_integral(a, b), rel=1e-12, abs=1e-16)


def test_exact_per_subtriangle():
    # compared against the degree-12 rule on each sub-triangle separately
    rule, fine = quadrature_rule(5), quadrature_rule(12)
    f = lambda p: p[:, 0] ** 2 * p[:, 1] ** 2 + p[:, 0] ** 3 * p[:, 1] ** 2
    for k in range(3):
        assert rule.weights[k] @ f(rule.points[k]) == pytest.approx(fine.weights[k] @ f(fine.points[k]), rel=1e-13)


@pytest.mark.parametrize("bad", [0, MAX_DEGREE + 1, 2.5, "6"])
def test_unsupported_degree(bad):
    with pytest.raises(ConfigurationError):
        quadrature_rule(bad)


def test_gauss_interval():
    s, w = gauss_interval(8)
    assert w.sum() == pytest.approx(1.0)
    assert w @ s**15 == pytest.approx(1 / 16, rel=1e-13)
