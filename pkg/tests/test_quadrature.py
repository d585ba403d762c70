from math import factorial

import numpy as np
import pytest

from forchheimer_afem.exceptions import UnsupportedDegreeError
from forchheimer_afem.quadrature import (MAX_DEGREE, line_quadrature, subdivided_rule,
                                         triangle_quadrature)


def moment(i, j):
    return factorial(i) * factorial(j) / factorial(i + j + 2)


def integrate_ref(rule, i, j):
    x, y = rule.points[:, 1], rule.points[:, 2]
    return 0.5 * np.sum(rule.weights * x ** i * y ** j)


@pytest.mark.parametrize("degree", range(1, MAX_DEGREE + 1))
def test_exact_for_all_monomials(degree):
    rule = triangle_quadrature(degree)
    assert rule.exact_degree >= degree
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            exact = moment(i, j)
            assert abs(integrate_ref(rule, i, j) - exact) <= 1e-12 * max(1.0, exact)


def test_reference_area():
    assert integrate_ref(triangle_quadrature(19), 0, 0) == pytest.approx(0.5, abs=1e-15)


def test_degree_19_moment_10_9():
    rule = triangle_quadrature(19)
    exact = factorial(10) * factorial(9) / factorial(21)
    assert integrate_ref(rule, 10, 9) == pytest.approx(exact, rel=1e-12)


def test_rule_is_positive_and_interior():
    rule = triangle_quadrature(19)
    assert np.all(rule.weights > 0)
    assert np.all(rule.points > 0)
    assert np.allclose(rule.points.sum(axis=1), 1.0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("degree", [0, 20, 25])
def test_unsupported_degree(degree):
    with pytest.raises(UnsupportedDegreeError):
        triangle_quadrature(degree)


def test_subdivided_rule_keeps_exactness():
    rule = subdivided_rule(19, 2)
    assert rule.size == 16 * triangle_quadrature(19).size
    for i, j in [(0, 0), (5, 7), (10, 9), (19, 0)]:
        assert integrate_ref(rule, i, j) == pytest.approx(moment(i, j), rel=1e-12)


def test_subdivision_resolves_point_singularity_better():
    # int over the reference triangle of r**0.5 around the origin vertex, in polar form
    from scipy.integrate import quad

    exact = quad(lambda t: (1.0 / (np.cos(t) + np.sin(t))) ** 2.5 / 2.5, 0, np.pi / 2,
                 epsabs=1e-14)[0]

    def approx(rule):
        x, y = rule.points[:, 1], rule.points[:, 2]
        return 0.5 * np.sum(rule.weights * np.hypot(x, y) ** 0.5)

    plain = abs(approx(triangle_quadrature(19)) - exact)
    fine = abs(approx(subdivided_rule(19, 2)) - exact)
    assert fine < plain


def test_line_rule():
    s, w = line_quadrature(10)
    for k in range(11):
        assert np.sum(w * s ** k) == pytest.approx(1.0 / (k + 1), rel=1e-13)
