"""Power and composite point-source weights and weighted norms."""

from dataclasses import dataclass

import numpy as np

from .exceptions import SingularEvaluationError
from .mesh import BARY_TOL, boundary_distance
from .quadrature import subdivided_rule, triangle_quadrature

QUAD_DEGREE = 19
NEAR_SOURCE_LEVELS = 2


@dataclass(frozen=True)
class WeightSpec:
    """Weight ``|x - z|**(sign*alpha)`` (power), the composite weight built
    from a finite source set (equal to the power weight inside the balls
    ``B(z, d_Z/2)`` and to one elsewhere), or the constant one."""

    kind: str = "unweighted"
    alpha: float = 0.0
    sign: int = 1
    sources: tuple = ()
    d_Z: float = None

    @property
    def exponent(self):
        return self.sign * self.alpha

    @property
    def source_array(self):
        return np.asarray(self.sources, dtype=float).reshape(-1, 2)


def unweighted():
    return WeightSpec()


def power_weight(z, alpha, sign=1):
    alpha = float(alpha)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not (-2.0 < alpha < 2.0 and -2.0 < sign * alpha < 2.0):
        raise ValueError(f"power weight exponent must lie in (-2, 2), got {sign * alpha}")
    z = tuple(float(c) for c in z)
    return WeightSpec("power", alpha, sign, (z,))


def separation_radius(Z, polygon):
    """``min(dist(Z, boundary), min pairwise |z - z'|)``."""
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    d = min(boundary_distance(polygon, z) for z in Z)
    for i in range(len(Z)):
        for j in range(i + 1, len(Z)):
            d = min(d, float(np.hypot(*(Z[i] - Z[j]))))
    return d


def composite_weight(Z, alpha, polygon, sign=1):
    Z = [tuple(float(c) for c in z) for z in Z]
    if not Z:
        raise ValueError("composite weight needs a nonempty source set")
    alpha = float(alpha)
    if not -2.0 < sign * alpha < 2.0:
        raise ValueError(f"weight exponent must lie in (-2, 2), got {sign * alpha}")
    dz = separation_radius(Z, np.asarray(polygon, dtype=float))
    if dz <= 0:
        raise ValueError("sources must be distinct interior points")
    return WeightSpec("composite", alpha, sign, tuple(Z), dz)


def weight_value(w, x):
    """Evaluate the weight at points ``x`` of shape ``(..., 2)``."""
    x = np.asarray(x, dtype=float)
    if w.kind == "unweighted" or w.exponent == 0.0:
        return np.ones(x.shape[:-1])
    Z = w.source_array
    if w.kind == "power":
        r = np.linalg.norm(x - Z[0], axis=-1)
        if w.exponent < 0 and np.any(r == 0.0):
            raise SingularEvaluationError("negative-power weight evaluated at its source")
        return r ** w.exponent
    r = np.linalg.norm(x[..., None, :] - Z, axis=-1)
    near = r < 0.5 * w.d_Z
    inside = near.any(axis=-1)
    rz = np.where(near, r, np.inf).min(axis=-1)
    if w.exponent < 0 and np.any(inside & (rz == 0.0)):
        raise SingularEvaluationError("negative-power weight evaluated at its source")
    out = np.ones(x.shape[:-1])
    out[inside] = rz[inside] ** w.exponent
    return out


# ---------------------------------------------------------------- integration

def elements_touching(mesh, points):
    """Boolean mask of elements whose closure contains any of ``points``."""
    mask = np.zeros(mesh.n_elements, dtype=bool)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return mask
    allel = np.arange(mesh.n_elements)
    for z in pts:
        lam = mesh.barycentric(allel, np.broadcast_to(z, (mesh.n_elements, 1, 2)))
        mask |= np.all(lam[:, 0] >= -BARY_TOL, axis=1)
    return mask


def _nudge(mesh, elems, lam, w):
    """Move quadrature nodes that coincide with a source off it."""
    if w.kind == "unweighted" or len(elems) == 0:
        return lam
    x = mesh.physical_points(lam, elems)
    for z in w.source_array:
        hit = np.linalg.norm(x - z, axis=-1) <= 1e-14
        if np.any(hit):
            lam = np.array(np.broadcast_to(lam, hit.shape + (3,)))
            t, q = np.nonzero(hit)
            h = mesh.diameters[elems][t]
            lam[t, q] += 1e-12 * h[:, None] * (1.0 / 3.0 - lam[t, q])
    return lam


def integrate_elements(mesh, integrand, w, degree=QUAD_DEGREE):
    """Per-element integrals of ``integrand(elems, lam) * weight``.

    ``integrand`` returns pointwise values of shape ``(n, nq)``.  Elements
    touching a weight source use a rule subdivided ``NEAR_SOURCE_LEVELS``
    times.
    """
    out = np.zeros(mesh.n_elements)
    near = elements_touching(mesh, w.source_array) if w.kind != "unweighted" else \
        np.zeros(mesh.n_elements, dtype=bool)
    groups = [(np.flatnonzero(~near), triangle_quadrature(degree)),
              (np.flatnonzero(near), subdivided_rule(degree, NEAR_SOURCE_LEVELS))]
    for elems, rule in groups:
        if len(elems) == 0:
            continue
        lam = _nudge(mesh, elems, rule.points, w)
        vals = integrand(elems, lam)
        wt = weight_value(w, mesh.physical_points(lam, elems))
        out[elems] = mesh.areas[elems] * np.einsum("tq,q->t", vals * wt, rule.weights)
    return out


def _as_field(field):
    if hasattr(field, "evaluate"):
        return field
    return AnalyticField(field)


@dataclass
class AnalyticField:
    """Wraps ``value(points)`` (and optionally ``gradient(points)``) callables."""

    value: object
    gradient: object = None

    def evaluate(self, mesh, elems, lam):
        return np.asarray(self.value(mesh.physical_points(lam, elems)), dtype=float)

    def evaluate_gradient(self, mesh, elems, lam):
        if self.gradient is None:
            raise ValueError("analytic field has no gradient")
        return np.asarray(self.gradient(mesh.physical_points(lam, elems)), dtype=float)


def _sq(v, nlead=2):
    v = np.asarray(v)
    return (v ** 2).reshape(v.shape[:nlead] + (-1,)).sum(axis=-1)


def weighted_l2_norm(field, w, mesh):
    """``(sum_K int_K |field|^2 w)^(1/2)`` for scalar or vector fields."""
    f = _as_field(field)
    vals = integrate_elements(mesh, lambda e, lam: _sq(f.evaluate(mesh, e, lam)), w)
    return float(np.sqrt(vals.sum()))


def weighted_h1_seminorm(field, w, mesh):
    """``(sum_K int_K |grad field|^2 w)^(1/2)``."""
    f = _as_field(field)
    vals = integrate_elements(mesh, lambda e, lam: _sq(f.evaluate_gradient(mesh, e, lam)), w)
    return float(np.sqrt(vals.sum()))

