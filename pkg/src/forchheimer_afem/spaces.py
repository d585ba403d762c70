"""Shape functions and the mixed velocity/pressure dof layout.

Velocity uses one scalar basis per component: P2 (Taylor-Hood) or
P1 plus the cubic bubble ``27 l0 l1 l2`` (mini).  Pressure is P1 on the
vertices.  Scalar velocity nodes are numbered vertices first, then edges
(Taylor-Hood) or element bubbles (mini).  The global velocity vector is
component-blocked: ``[u_x nodes..., u_y nodes...]``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mesh import LOCAL_EDGES

PAIRS = ("taylor_hood", "mini")
PAIR_ALIASES = {"th": "taylor_hood", "taylor_hood": "taylor_hood", "mini": "mini"}


def canonical_pair(name):
    try:
        return PAIR_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown element pair {name!r}") from None


def n_local(pair):
    return 6 if canonical_pair(pair) == "taylor_hood" else 4


# ---------------------------------------------------------------- basis

def velocity_basis(pair, lam):
    """Scalar velocity basis values at barycentric points, shape ``(..., nb)``."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    if canonical_pair(pair) == "taylor_hood":
        return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                         4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1], axis=-1)
    return np.stack([l0, l1, l2, 27 * l0 * l1 * l2], axis=-1)


def _broadcast(lam, glam):
    if lam.ndim == 2:
        lam = np.broadcast_to(lam, (len(glam),) + lam.shape)
    return lam


def velocity_basis_gradients(pair, lam, glam):
    """Gradients, shape ``(n, nq, nb, 2)``; ``glam`` is ``(n, 3, 2)``."""
    lam = _broadcast(lam, glam)
    g = glam[:, None, :, :]
    L = lam[..., :, None]
    if canonical_pair(pair) == "taylor_hood":
        vert = (4 * L - 1) * g
        i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
        edge = 4 * (L[:, :, i] * g[:, :, j] + L[:, :, j] * g[:, :, i])
        return np.concatenate([vert, edge], axis=2)
    vert = np.broadcast_to(g, lam.shape[:2] + (3, 2))
    l0, l1, l2 = L[:, :, 0], L[:, :, 1], L[:, :, 2]
    bub = 27 * (l1 * l2 * g[:, :, 0] + l0 * l2 * g[:, :, 1] + l0 * l1 * g[:, :, 2])
    return np.concatenate([vert, bub[:, :, None]], axis=2)


def velocity_basis_laplacians(pair, lam, glam):
    """Laplacians of the scalar basis, shape ``(n, nq, nb)``."""
    lam = _broadcast(lam, glam)
    gg = np.einsum("tid,tjd->tij", glam, glam)
    n, nq = lam.shape[:2]
    if canonical_pair(pair) == "taylor_hood":
        i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
        lap = np.concatenate([4 * np.diagonal(gg, axis1=1, axis2=2), 8 * gg[:, i, j]], axis=1)
        return np.broadcast_to(lap[:, None, :], (n, nq, 6))
    bub = 54 * (lam[..., 0] * gg[:, None, 1, 2] + lam[..., 1] * gg[:, None, 0, 2]
                + lam[..., 2] * gg[:, None, 0, 1])
    return np.concatenate([np.zeros((n, nq, 3)), bub[..., None]], axis=2)


def shape_eval(pair_kind, component, K, x):
    """Values and gradients of the local basis of one element at ``x``.

    ``component`` is ``"velocity"`` (scalar velocity basis) or
    ``"pressure"`` (P1).
    """
    K = np.asarray(K, dtype=float)
    x = np.asarray(x, dtype=float)
    jac = np.column_stack([K[1] - K[0], K[2] - K[0]])
    inv = np.linalg.inv(jac)
    glam = np.array([-inv[0] - inv[1], inv[0], inv[1]])
    xi = inv @ (x - K[0])
    lam = np.array([1.0 - xi.sum(), xi[0], xi[1]])
    if component == "pressure":
        return lam, glam
    vals = velocity_basis(pair_kind, lam[None])[0]
    grads = velocity_basis_gradients(pair_kind, lam[None], glam[None])[0, 0]
    return vals, grads


# ---------------------------------------------------------------- dof layout

@dataclass(frozen=True, eq=False)
class MixedSpace:
    mesh: object
    pair_kind: str
    cell_dofs: np.ndarray
    n_scalar: int

    @property
    def n_local(self):
        return self.cell_dofs.shape[1]

    @property
    def n_velocity(self):
        return 2 * self.n_scalar

    @property
    def n_pressure(self):
        return self.mesh.n_vertices

    @property
    def ndof_total(self):
        return self.n_velocity + self.n_pressure

    @property
    def velocity_dofs(self):
        """Global velocity dof ids, shape ``(2, n_scalar)`` (one row per component)."""
        return np.arange(self.n_velocity).reshape(2, self.n_scalar)

    @property
    def pressure_dofs(self):
        return np.arange(self.n_pressure)

    @cached_property
    def node_coords(self):
        m = self.mesh
        if self.pair_kind == "taylor_hood":
            extra = m.vertices[m.edges].mean(axis=1)
        else:
            extra = m.coords.mean(axis=1)
        return np.vstack([m.vertices, extra])

    @cached_property
    def boundary_nodes(self):
        """Scalar node ids on the boundary."""
        m = self.mesh
        nodes = np.flatnonzero(m.boundary_vertex_flags)
        if self.pair_kind == "taylor_hood":
            nodes = np.concatenate([nodes, m.n_vertices + np.flatnonzero(m.boundary_edge_flags)])
        return nodes

    @cached_property
    def dirichlet_flags(self):
        flags = np.zeros(self.n_scalar, dtype=bool)
        flags[self.boundary_nodes] = True
        return np.concatenate([flags, flags])

    def local_velocity(self, u, elems=None):
        """Element-local velocity coefficients, shape ``(n, nb, 2)``."""
        cd = self.cell_dofs if elems is None else self.cell_dofs[elems]
        U = np.asarray(u).reshape(2, self.n_scalar)
        return np.stack([U[0, cd], U[1, cd]], axis=-1)


def build_space(mesh, pair_kind):
    pair = canonical_pair(pair_kind)
    nv = mesh.n_vertices
    if pair == "taylor_hood":
        cell = np.hstack([mesh.elements, nv + mesh.element_edges])
        ns = nv + mesh.n_edges
    else:
        cell = np.hstack([mesh.elements, nv + np.arange(mesh.n_elements)[:, None]])
        ns = nv + mesh.n_elements
    cell.setflags(write=False)
    return MixedSpace(mesh, pair, cell, int(ns))


# ---------------------------------------------------------------- fields

class FEFunction:
    """A discrete field over a :class:`MixedSpace`.

    ``kind`` is ``"velocity"`` (vector, ``2*n_scalar`` coefficients),
    ``"scalar"`` (one velocity component, ``n_scalar`` coefficients) or
    ``"pressure"`` (P1, one coefficient per vertex).
    """

    def __init__(self, space, coeffs, kind="velocity"):
        self.space = space
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.kind = kind
        expected = {"velocity": space.n_velocity, "scalar": space.n_scalar,
                    "pressure": space.n_pressure}[kind]
        if self.coeffs.shape != (expected,):
            raise ValueError(f"{kind} field needs {expected} coefficients, got {self.coeffs.shape}")

    def _local(self, elems):
        sp = self.space
        if self.kind == "velocity":
            return sp.local_velocity(self.coeffs, elems)
        if self.kind == "scalar":
            return self.coeffs[sp.cell_dofs[elems]]
        return self.coeffs[sp.mesh.elements[elems]]

    def evaluate(self, mesh, elems, lam):
        """Values at barycentric points ``lam`` of elements ``elems``."""
        loc = self._local(elems)
        if self.kind == "pressure":
            if lam.ndim == 2:
                return np.einsum("qi,ti->tq", lam, loc)
            return np.einsum("tqi,ti->tq", lam, loc)
        phi = velocity_basis(self.space.pair_kind, lam)
        sub = "qb" if lam.ndim == 2 else "tqb"
        if self.kind == "velocity":
            return np.einsum(f"{sub},tbc->tqc", phi, loc)
        return np.einsum(f"{sub},tb->tq", phi, loc)

    def evaluate_gradient(self, mesh, elems, lam):
        """Gradients; for velocity ``G[..., c, k] = d u_c / d x_k``."""
        loc = self._local(elems)
        glam = mesh.barycentric_gradients[elems]
        if self.kind == "pressure":
            g = np.einsum("ti,tid->td", loc, glam)
            nq = lam.shape[-2]
            return np.broadcast_to(g[:, None, :], (len(g), nq, 2))
        dphi = velocity_basis_gradients(self.space.pair_kind, lam, glam)
        if self.kind == "velocity":
            return np.einsum("tqbk,tbc->tqck", dphi, loc)
        return np.einsum("tqbk,tb->tqk", dphi, loc)


def interpolate_scalar(space, fn):
    """Nodal interpolant of a scalar function ``fn(points) -> values``."""
    vals = np.asarray(fn(space.node_coords), dtype=float)
    if space.pair_kind == "mini":
        m = space.mesh
        nv = m.n_vertices
        vals[nv:] -= vals[:nv][m.elements].mean(axis=1)
    return vals


def interpolate_velocity(space, fn):
    """Interpolant of ``fn(points) -> (n, 2)`` as a component-blocked vector."""
    pts = space.node_coords
    vals = np.asarray(fn(pts), dtype=float).reshape(len(pts), 2)
    out = []
    for c in range(2):
        out.append(interpolate_scalar(space, lambda p, c=c: vals[:, c].copy()))
    return np.concatenate(out)


def interpolate_pressure(space, fn):
    return np.asarray(fn(space.mesh.vertices), dtype=float)
