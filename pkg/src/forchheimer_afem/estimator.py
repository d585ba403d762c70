"""Weighted residual a posteriori error indicators and maximum marking.

For an element ``K`` with diameter ``h_K`` and distance ``D_K`` to the
source (or the nearest of several sources) the squared indicator is

    h_K^2 D_K^a ||R_K||^2  +  ||div u||^2_{w,K}  +  h_K D_K^a ||J||^2_{dK \\ dOmega}
    + sum over sources z in K of h_K^a |F_z|^2

where ``R_K`` is the strong residual of the momentum equation, ``J`` the
jump of the normal stress ``(grad u - p I) n`` and ``w`` the power weight
(one source) or the composite weight (several sources).
"""

from dataclasses import dataclass

import numpy as np

from .mesh import BARY_TOL, element_distances, locate_point
from .quadrature import line_quadrature, triangle_quadrature
from .spaces import FEFunction, velocity_basis, velocity_basis_gradients, velocity_basis_laplacians
from .weights import composite_weight, integrate_elements, power_weight, unweighted

QUAD_DEGREE = 19
EDGE_DEGREE = 10
COMPONENTS = ("residual", "divergence", "jump", "dirac")


@dataclass(frozen=True, eq=False)
class IndicatorField:
    """Per-element indicators with their squared contributions.

    ``components[:, j]`` holds the squared residual, divergence, jump and
    Dirac parts; ``values = sqrt(components.sum(axis=1))``.
    """

    values: np.ndarray
    components: np.ndarray

    @property
    def global_value(self):
        return global_estimator(self)

    def breakdown(self, K):
        return dict(zip(COMPONENTS, self.components[K].tolist()))


def global_estimator(indicators):
    """Root of the sum of squared local indicators."""
    vals = getattr(indicators, "values", indicators)
    return float(np.sqrt(np.sum(np.square(vals))))


# ---------------------------------------------------------------- residuals

def element_residuals(space, solution, elems=None, nonlinear=True):
    """Squared ``L2(K)`` norms of the strong momentum residual per element.

    With ``nonlinear=False`` the convective and Forchheimer contributions
    are left out (Brinkman residual).
    """
    mesh = space.mesh
    elems = np.arange(mesh.n_elements) if elems is None else np.atleast_1d(elems)
    rule = triangle_quadrature(QUAD_DEGREE)
    lam = rule.points
    glam = mesh.barycentric_gradients[elems]
    loc = space.local_velocity(solution.u, elems)
    phi = velocity_basis(space.pair_kind, lam)
    dphi = velocity_basis_gradients(space.pair_kind, lam, glam)
    lap = velocity_basis_laplacians(space.pair_kind, lam, glam)
    u = np.einsum("qb,tbc->tqc", phi, loc)
    G = np.einsum("tqbk,tbc->tqck", dphi, loc)
    R = np.einsum("tqb,tbc->tqc", lap, loc) - u
    if nonlinear:
        div = G[..., 0, 0] + G[..., 1, 1]
        R -= np.einsum("tqck,tqk->tqc", G, u)
        R -= u * div[..., None]
        R -= np.linalg.norm(u, axis=-1)[..., None] * u
    pl = solution.p[mesh.elements[elems]]
    R -= np.einsum("ti,tid->td", pl, glam)[:, None, :]
    return mesh.areas[elems] * np.einsum("q,tq->t", rule.weights, (R ** 2).sum(axis=-1))


def element_residual_norm(space, solution, K, nonlinear=True):
    return float(np.sqrt(element_residuals(space, solution, [K], nonlinear)[0]))


def _side(mesh, elems, edges, s):
    """Barycentric coordinates of edge points and outward unit normals."""
    tri = mesh.elements[elems]
    a, b = mesh.edges[edges, 0], mesh.edges[edges, 1]
    ia = np.argmax(tri == a[:, None], axis=1)
    ib = np.argmax(tri == b[:, None], axis=1)
    n = len(elems)
    lam = np.zeros((n, len(s), 3))
    rows, cols = np.arange(n)[:, None], np.arange(len(s))[None, :]
    lam[rows, cols, ia[:, None]] = 1.0 - s[None, :]
    lam[rows, cols, ib[:, None]] = s[None, :]
    xa, xb = mesh.vertices[a], mesh.vertices[b]
    d = xb - xa
    L = np.hypot(d[:, 0], d[:, 1])
    nrm = np.column_stack([d[:, 1], -d[:, 0]]) / L[:, None]
    opp = mesh.coords[elems].sum(axis=1) - xa - xb
    flip = np.einsum("td,td->t", nrm, xa - opp) < 0
    nrm[flip] *= -1
    return lam, nrm, L


def edge_jumps(space, solution, edges=None, pressure=None):
    """Squared ``L2(gamma)`` norms of the normal-stress jump (interior edges).

    ``pressure`` optionally replaces the continuous pressure by
    element-wise vertex values of shape ``(n_elements, 3)``, e.g. for a
    discontinuous pressure.
    """
    mesh = space.mesh
    interior = ~mesh.boundary_edge_flags
    if edges is None:
        edges = np.flatnonzero(interior)
    edges = np.atleast_1d(edges)
    s, w = line_quadrature(EDGE_DEGREE)
    vel = FEFunction(space, solution.u, "velocity")
    if pressure is None:
        pressure = solution.p[mesh.elements]
    flux = 0.0
    for side in (0, 1):
        el = mesh.edge_elements[edges, side]
        lam, nrm, L = _side(mesh, el, edges, s)
        G = vel.evaluate_gradient(mesh, el, lam)
        p = np.einsum("tqi,ti->tq", lam, pressure[el])
        flux = flux + np.einsum("tqck,tk->tqc", G, nrm) - p[..., None] * nrm[:, None, :]
    return L * np.einsum("q,tq->t", w, (flux ** 2).sum(axis=-1))


def edge_jump_norm(space, solution, edge, pressure=None):
    if space.mesh.boundary_edge_flags[edge]:
        raise ValueError("jump is only defined on interior edges")
    return float(np.sqrt(edge_jumps(space, solution, [edge], pressure)[0]))


# ---------------------------------------------------------------- indicators

def _divergence_sq(space, solution, w):
    vel = FEFunction(space, solution.u, "velocity")
    mesh = space.mesh

    def div2(elems, lam):
        G = vel.evaluate_gradient(mesh, elems, lam)
        return (G[..., 0, 0] + G[..., 1, 1]) ** 2

    return integrate_elements(mesh, div2, w)


def _dirac_terms(mesh, alpha, sources):
    out = np.zeros(mesh.n_elements)
    h = mesh.diameters
    for z, F in sources:
        F2 = float(np.dot(F, F))
        for t in locate_point(mesh, z, BARY_TOL):
            out[t] += h[t] ** alpha * F2
    return out


def _assemble(space, solution, alpha, sources, weight, nonlinear):
    mesh = space.mesh
    h = mesh.diameters
    if sources:
        D = element_distances(mesh, [z for z, _ in sources])
    else:
        D = np.ones(mesh.n_elements)
    Da = D ** alpha
    res = h ** 2 * Da * element_residuals(space, solution, nonlinear=nonlinear)
    div = _divergence_sq(space, solution, weight)
    jumps = np.zeros(mesh.n_edges)
    interior = np.flatnonzero(~mesh.boundary_edge_flags)
    jumps[interior] = edge_jumps(space, solution, interior)
    jmp = h * Da * jumps[mesh.element_edges].sum(axis=1)
    dirac = _dirac_terms(mesh, alpha, sources)
    comps = np.column_stack([res, div, jmp, dirac])
    return IndicatorField(np.sqrt(comps.sum(axis=1)), comps)


def error_indicators(space, solution, alpha, sources, nonlinear=True):
    """Indicators for a single point source ``sources = [(z, F)]``.

    An empty source list gives the unweighted indicator with ``D_K = 1``.
    """
    if len(sources) > 1:
        raise ValueError("use multi_source_indicators for several sources")
    w = power_weight(sources[0][0], alpha) if sources else unweighted()
    return _assemble(space, solution, alpha, list(sources), w, nonlinear)


def multi_source_indicators(space, solution, alpha, sources, nonlinear=True, weight=None):
    """Indicators for several sources with the composite weight.

    ``weight`` overrides the composite weight built from the sources and
    the domain.
    """
    if not sources:
        raise ValueError("source set must be nonempty")
    w = weight or composite_weight([z for z, _ in sources], alpha, space.mesh.polygon)
    return _assemble(space, solution, alpha, list(sources), w, nonlinear)


def local_indicator(space, solution, K, alpha, sources, nonlinear=True):
    """Indicator of element ``K`` and its breakdown."""
    if len(sources) > 1:
        ind = multi_source_indicators(space, solution, alpha, sources, nonlinear)
    else:
        ind = error_indicators(space, solution, alpha, sources, nonlinear)
    return float(ind.values[K]), ind.breakdown(K)


def mark(indicators, fraction=0.5):
    """Elements whose indicator strictly exceeds ``fraction * max``.

    Falls back to the maximising element when nothing qualifies but the
    indicators are not all zero.
    """
    vals = np.asarray(getattr(indicators, "values", indicators), dtype=float)
    if vals.size == 0:
        return np.array([], dtype=np.int64)
    top = vals.max()
    marked = np.flatnonzero(vals > fraction * top)
    if marked.size == 0 and top > 0:
        marked = np.array([int(np.argmax(vals))])
    return marked
