"""Assembly of the discrete Brinkman-Darcy-Forchheimer forms.

Element routines work on raw vertex coordinates ``(n, 3, 2)`` so they can
be checked on arbitrary triangles; the global routines scatter them into
sparse matrices over a :class:`~forchheimer_afem.spaces.MixedSpace`.

Velocity matrices act on the component-blocked vector; every form used
here couples a component only with itself, so they are ``diag(S, S)`` for
a scalar block ``S``.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict

import numpy as np
import scipy.sparse as sp

from .exceptions import IncompatibleDataError, SourcePlacementError
from .mesh import BARY_TOL, _segment_distance, locate_point, signed_areas
from .quadrature import triangle_quadrature
from .spaces import velocity_basis, velocity_basis_gradients

POLY_DEGREE = 6  # exact for every polynomial bilinear form of both pairs
QUAD_DEGREE = 19


def element_geometry(coords):
    """Areas and barycentric gradients of triangles ``coords`` (n, 3, 2)."""
    coords = np.asarray(coords, dtype=float)
    areas = signed_areas(coords)
    jac = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=2)
    inv = np.linalg.inv(jac)
    g = np.empty((len(coords), 3, 2))
    g[:, 1] = inv[:, 0]
    g[:, 2] = inv[:, 1]
    g[:, 0] = -g[:, 1] - g[:, 2]
    return areas, g


# ---------------------------------------------------------------- element level

def local_brinkman(pair, coords):
    """Element matrices of ``a0``, ``a1`` and ``b`` plus pressure means.

    Returns ``stiff (n,nb,nb)``, ``mass (n,nb,nb)``, ``div (n,3,nb,2)`` with
    ``div[t,q,j,c] = -int psi_q d_c phi_j`` and ``mean (n,3)``.
    """
    areas, glam = element_geometry(coords)
    rule = triangle_quadrature(POLY_DEGREE)
    w = rule.weights
    phi = velocity_basis(pair, rule.points)
    dphi = velocity_basis_gradients(pair, rule.points, glam)
    stiff = areas[:, None, None] * np.einsum("q,tqik,tqjk->tij", w, dphi, dphi)
    mass = areas[:, None, None] * np.einsum("q,qi,qj->ij", w, phi, phi)[None]
    div = -areas[:, None, None, None] * np.einsum("q,qa,tqjc->tajc", w, rule.points, dphi)
    mean = np.repeat(areas[:, None] / 3.0, 3, axis=1)
    return stiff, mass, div, mean


def _velocity_at(pair, coords, u, lam, glam):
    """Advecting field at quadrature points: local coefficients or callable."""
    if callable(u):
        x = np.einsum("qi,tid->tqd", lam, np.asarray(coords, dtype=float))
        return np.asarray(u(x), dtype=float)
    phi = velocity_basis(pair, lam)
    return np.einsum("qb,tbc->tqc", phi, np.asarray(u, dtype=float))


def local_convection(pair, coords, u):
    """Scalar block of ``c(u, phi_j; phi_i) = -int (u . grad phi_i) phi_j``.

    ``u`` is either element coefficients ``(n, nb, 2)`` or a callable of
    physical points ``(n, nq, 2) -> (n, nq, 2)``.
    """
    areas, glam = element_geometry(coords)
    rule = triangle_quadrature(QUAD_DEGREE)
    phi = velocity_basis(pair, rule.points)
    dphi = velocity_basis_gradients(pair, rule.points, glam)
    uq = _velocity_at(pair, coords, u, rule.points, glam)
    adv = np.einsum("tqc,tqic->tqi", uq, dphi)
    return -areas[:, None, None] * np.einsum("q,tqi,qj->tij", rule.weights, adv, phi)


def local_forchheimer(pair, coords, u):
    """Scalar block of ``d(u, phi_j; phi_i) = int |u| phi_j phi_i``."""
    areas, glam = element_geometry(coords)
    rule = triangle_quadrature(QUAD_DEGREE)
    phi = velocity_basis(pair, rule.points)
    uq = _velocity_at(pair, coords, u, rule.points, glam)
    mag = np.linalg.norm(uq, axis=-1)
    return areas[:, None, None] * np.einsum("q,tq,qi,qj->tij", rule.weights, mag, phi, phi)


# ---------------------------------------------------------------- scattering

def _vector_block(space, local):
    """Scatter scalar element blocks ``(n, nb, nb)`` into ``diag(S, S)``."""
    ns = space.n_scalar
    cd = space.cell_dofs
    nb = cd.shape[1]
    rows = np.broadcast_to(cd[:, :, None], (len(cd), nb, nb)).ravel()
    cols = np.broadcast_to(cd[:, None, :], (len(cd), nb, nb)).ravel()
    data = np.asarray(local).ravel()
    S = sp.csr_matrix((data, (rows, cols)), shape=(ns, ns))
    return sp.block_diag([S, S], format="csr")


def assemble_brinkman(space):
    """Global ``A0``, ``A1`` (velocity), ``B`` (pressure x velocity) and ``m``."""
    mesh = space.mesh
    stiff, mass, div, mean = local_brinkman(space.pair_kind, mesh.coords)
    A0 = _vector_block(space, stiff)
    A1 = _vector_block(space, mass)
    ns = space.n_scalar
    cd = space.cell_dofs
    nb = cd.shape[1]
    nt = mesh.n_elements
    prow = np.broadcast_to(mesh.elements[:, :, None, None], (nt, 3, nb, 2))
    vcol = cd[:, None, :, None] + ns * np.arange(2)[None, None, None, :]
    vcol = np.broadcast_to(vcol, (nt, 3, nb, 2))
    B = sp.csr_matrix((div.ravel(), (prow.ravel(), vcol.ravel())),
                      shape=(space.n_pressure, space.n_velocity))
    m = np.bincount(mesh.elements.ravel(), weights=mean.ravel(), minlength=space.n_pressure)
    return A0, A1, B, m


def _coefficients(space, u_prev):
    if callable(u_prev):
        return u_prev
    u_prev = np.asarray(u_prev, dtype=float)
    if u_prev.shape != (space.n_velocity,):
        raise ValueError(f"velocity vector has shape {u_prev.shape}, "
                         f"expected ({space.n_velocity},)")
    return space.local_velocity(u_prev)


def assemble_convection(space, u_prev):
    u = _coefficients(space, u_prev)
    return _vector_block(space, local_convection(space.pair_kind, space.mesh.coords, u))


def assemble_forchheimer(space, u_prev):
    u = _coefficients(space, u_prev)
    return _vector_block(space, local_forchheimer(space.pair_kind, space.mesh.coords, u))


def _check_source(mesh, z):
    z = np.asarray(z, dtype=float)
    found = locate_point(mesh, z)
    if not found:
        raise SourcePlacementError(f"source {tuple(z)} lies outside the domain")
    bnd = mesh.edges[mesh.boundary_edge_flags]
    a, b = mesh.vertices[bnd[:, 0]], mesh.vertices[bnd[:, 1]]
    scale = mesh.diameters.max()
    for p, q in zip(a, b):
        if _segment_distance(z[None], p, q)[0] <= BARY_TOL * scale:
            raise SourcePlacementError(f"source {tuple(z)} lies on the boundary")
    return min(found)


def assemble_dirac_load(space, sources):
    """``rhs[i] = sum_z F_z . phi_i(z)`` for point sources ``[(z, F), ...]``."""
    mesh = space.mesh
    rhs = np.zeros(space.n_velocity)
    for z, F in sources:
        t = _check_source(mesh, z)
        lam = mesh.barycentric(np.array([t]), np.asarray(z, dtype=float)[None, None])[0, 0]
        lam = np.clip(lam, 0.0, None)
        lam /= lam.sum()
        phi = velocity_basis(space.pair_kind, lam[None])[0]
        for c in range(2):
            np.add.at(rhs, c * space.n_scalar + space.cell_dofs[t], F[c] * phi)
    return rhs


def assemble_smooth_load(space, f):
    """``rhs[i] = int f . phi_i`` with ``f(points (n, nq, 2)) -> (n, nq, 2)``."""
    mesh = space.mesh
    rule = triangle_quadrature(QUAD_DEGREE)
    x = mesh.physical_points(rule.points)
    fq = np.asarray(f(x), dtype=float)
    phi = velocity_basis(space.pair_kind, rule.points)
    loc = mesh.areas[:, None, None] * np.einsum("q,tqc,qb->tbc", rule.weights, fq, phi)
    rhs = np.zeros(space.n_velocity)
    for c in range(2):
        rhs[c * space.n_scalar:(c + 1) * space.n_scalar] = np.bincount(
            space.cell_dofs.ravel(), weights=loc[..., c].ravel(), minlength=space.n_scalar)
    return rhs


# ---------------------------------------------------------------- boundary data

def _zero(x):
    return np.zeros(np.shape(x)[:-1] + (2,))


@dataclass(frozen=True)
class DirichletData:
    """Velocity boundary values per polygon side; missing sides get zero."""

    segments: Dict[int, Callable] = field(default_factory=dict)

    def for_tag(self, tag):
        return self.segments.get(int(tag), _zero)


def parabolic_inflow(x):
    x = np.asarray(x, dtype=float)
    y = x[..., 1]
    return np.stack([y * (1.0 - y), np.zeros_like(y)], axis=-1)


def t_shape_inflow(polygon):
    """``u = (y(1-y), 0)`` on the two lateral sides ``x = +-1.5``."""
    poly = np.asarray(polygon, dtype=float)
    n = len(poly)
    sides = [s for s in range(n)
             if np.isclose(abs(poly[s, 0]), 1.5) and np.isclose(poly[s, 0], poly[(s + 1) % n, 0])]
    return DirichletData({s: parabolic_inflow for s in sides})


def dirichlet_values(space, g):
    """Boundary values of the velocity dofs (zero on interior dofs)."""
    mesh = space.mesh
    ns = space.n_scalar
    vals = np.zeros((ns, 2))
    bnd = np.flatnonzero(mesh.boundary_edge_flags)
    tags = mesh.boundary_segment_tags[bnd]
    seen = {}
    for e, tag in zip(bnd, tags):
        fn = g.for_tag(tag)
        ends = mesh.edges[e]
        ev = np.asarray(fn(mesh.vertices[ends]), dtype=float).reshape(2, 2)
        for v, val in zip(ends, ev):
            if v in seen:
                if np.max(np.abs(seen[v] - val)) > 1e-12:
                    raise IncompatibleDataError(
                        f"Dirichlet data disagree at corner {tuple(mesh.vertices[v])}")
            else:
                seen[v] = val
                vals[v] = val
        if space.pair_kind == "taylor_hood":
            mid = mesh.vertices[ends].mean(axis=0)
            vals[mesh.n_vertices + e] = np.asarray(fn(mid[None]), dtype=float).reshape(2)
    return np.concatenate([vals[:, 0], vals[:, 1]])


# ---------------------------------------------------------------- saddle system

@dataclass(frozen=True, eq=False)
class SaddleSystem:
    A: sp.csr_matrix
    B: sp.csr_matrix
    m: np.ndarray
    rhs_u: np.ndarray
    rhs_p: np.ndarray
    fixed: np.ndarray = None
    fixed_values: np.ndarray = None


def apply_dirichlet(system, space, g):
    """Symmetric elimination of boundary velocity dofs with lifting."""
    mask = space.dirichlet_flags
    gv = dirichlet_values(space, g) if not isinstance(g, np.ndarray) else g
    gv = np.where(mask, gv, 0.0)
    free = sp.diags((~mask).astype(float))
    A = system.A.tocsr()
    rhs_u = system.rhs_u - A @ gv
    rhs_u[mask] = gv[mask]
    rhs_p = system.rhs_p - system.B @ gv
    A = (free @ A @ free + sp.diags(mask.astype(float))).tocsr()
    B = (system.B @ free).tocsr()
    A.eliminate_zeros()
    B.eliminate_zeros()
    return replace(system, A=A, B=B, rhs_u=rhs_u, rhs_p=rhs_p, fixed=mask, fixed_values=gv)


def build_saddle(system):
    """``[[A, B^T, 0], [B, 0, m], [0, m^T, 0]]`` and the stacked right-hand side.

    The trailing scalar unknown is the multiplier enforcing ``int p = 0``.
    """
    m = sp.csr_matrix(system.m[:, None])
    K = sp.bmat([[system.A, system.B.T, None],
                 [system.B, None, m],
                 [None, m.T, None]], format="csc")
    rhs = np.concatenate([system.rhs_u, system.rhs_p, [0.0]])
    return K, rhs
