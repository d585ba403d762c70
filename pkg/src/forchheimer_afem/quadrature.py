"""Quadrature rules on the reference triangle and on segments.

Triangle rules are conical (collapsed) products of Gauss-Legendre and
Gauss-Jacobi rules.  They have strictly positive weights, every node lies
in the open triangle, and a rule built from ``n`` points per direction is
exact for all polynomials of total degree ``2n - 1``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .exceptions import UnsupportedDegreeError

MAX_DEGREE = 19


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on a triangle in barycentric coordinates.

    ``weights`` sum to one, so an integral over a triangle ``K`` is
    ``|K| * sum(weights * f(points))``.
    """

    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def size(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def triangle_quadrature(degree):
    """Return a rule exact for polynomials of total degree ``<= degree``."""
    degree = int(degree)
    if degree < 1 or degree > MAX_DEGREE:
        raise UnsupportedDegreeError(
            f"triangle quadrature available for degrees 1..{MAX_DEGREE}, got {degree}")
    n = degree // 2 + 1
    s, ws = roots_legendre(n)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    # weight (1 - x)^1 on [-1, 1] absorbs the Duffy Jacobian
    t, wt = roots_jacobi(n, 1.0, 0.0)
    t = 0.5 * (t + 1.0)
    wt = 0.25 * wt
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    xi = (S * (1.0 - T)).ravel()
    eta = T.ravel()
    lam = np.column_stack([1.0 - xi - eta, xi, eta])
    w = W.ravel()
    w = w / w.sum()
    lam.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(lam, w, degree)


@lru_cache(maxsize=None)
def subdivided_rule(degree, levels):
    """Composite rule on ``4**levels`` congruent midpoint subtriangles."""
    base = triangle_quadrature(degree)
    tris = [np.eye(3)]
    for _ in range(levels):
        new = []
        for v in tris:
            m01 = 0.5 * (v[0] + v[1])
            m12 = 0.5 * (v[1] + v[2])
            m20 = 0.5 * (v[2] + v[0])
            new += [np.array([v[0], m01, m20]), np.array([m01, v[1], m12]),
                    np.array([m20, m12, v[2]]), np.array([m12, m20, m01])]
        tris = new
    pts = np.concatenate([base.points @ v for v in tris])
    w = np.tile(base.weights, len(tris)) / len(tris)
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)


@lru_cache(maxsize=None)
def line_quadrature(degree):
    """Gauss-Legendre rule on [0, 1]; weights sum to one."""
    n = int(degree) // 2 + 1
    s, w = roots_legendre(n)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w
