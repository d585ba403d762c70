"""Conforming triangular meshes and longest-edge bisection.

A :class:`Mesh` is immutable.  :func:`bisect` returns a new mesh whose
``parent`` array maps every element to the element of the input mesh that
contains it.

Local conventions: element ``t`` has vertices ``elements[t] = (v0, v1, v2)``
in counterclockwise order, and local edge ``k`` is the edge opposite local
vertex ``k``.
"""

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from math import gcd

import numpy as np

from .exceptions import GeometryError

LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])
BARY_TOL = 1e-12
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class DomainSpec:
    """Polygonal domain description.

    ``kind`` is one of ``unit_square``, ``l_shape``, ``t_shape`` or
    ``polygon``; the last one takes an explicit, axis-aligned ``polygon``.
    ``cell`` is the edge length of the grid cells of the initial mesh.
    """

    kind: str
    polygon: tuple = None
    cell: float = None

    def vertices(self):
        if self.kind == "polygon":
            if self.polygon is None:
                raise GeometryError("kind 'polygon' needs a vertex list")
            return np.asarray(self.polygon, dtype=float)
        try:
            return np.asarray(_PRESETS[self.kind][0], dtype=float)
        except KeyError:
            raise GeometryError(f"unknown domain kind {self.kind!r}") from None

    def cell_size(self):
        if self.cell is not None:
            return float(self.cell)
        if self.kind in _PRESETS:
            return _PRESETS[self.kind][1]
        return _lattice_spacing(self.vertices())


_PRESETS = {
    "unit_square": ([(0, 0), (1, 0), (1, 1), (0, 1)], 0.5),
    "l_shape": ([(-1, -1), (0, -1), (0, 0), (1, 0), (1, 1), (-1, 1)], 1.0),
    "t_shape": ([(-0.5, -2), (0.5, -2), (0.5, 0), (1.5, 0), (1.5, 1),
                 (-1.5, 1), (-1.5, 0), (-0.5, 0)], 1.0),
}


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    elements: np.ndarray
    polygon: np.ndarray = None
    parent: np.ndarray = None
    _conn: dict = field(default=None, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.elements, dtype=np.int64)
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "elements", t)
        if self.polygon is not None:
            p = np.asarray(self.polygon, dtype=float)
            p.setflags(write=False)
            object.__setattr__(self, "polygon", p)
        object.__setattr__(self, "_conn", _connectivity(t))

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def edges(self):
        """Vertex pairs ``(a, b)`` with ``a < b``, shape ``(n_edges, 2)``."""
        return self._conn["edges"]

    @property
    def element_edges(self):
        """Global edge id of local edge ``k`` of each element."""
        return self._conn["element_edges"]

    @property
    def edge_elements(self):
        """Incident elements per edge; second column is -1 on the boundary."""
        return self._conn["edge_elements"]

    @property
    def boundary_edge_flags(self):
        return self.edge_elements[:, 1] < 0

    @cached_property
    def boundary_segment_tags(self):
        """Polygon side index per edge (-1 for interior edges)."""
        tags = np.full(self.n_edges, -1, dtype=np.int64)
        bnd = np.flatnonzero(self.boundary_edge_flags)
        if self.polygon is None:
            tags[bnd] = 0
            return tags
        a = self.vertices[self.edges[bnd, 0]]
        b = self.vertices[self.edges[bnd, 1]]
        npoly = len(self.polygon)
        scale = np.ptp(self.polygon, axis=0).max()
        for s in range(npoly):
            p, q = self.polygon[s], self.polygon[(s + 1) % npoly]
            on = (_segment_distance(a, p, q) <= 1e-10 * scale) & \
                 (_segment_distance(b, p, q) <= 1e-10 * scale)
            tags[bnd[on & (tags[bnd] < 0)]] = s
        return tags

    @cached_property
    def boundary_vertex_flags(self):
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[self.edges[self.boundary_edge_flags].ravel()] = True
        return flags

    @cached_property
    def coords(self):
        """Vertex coordinates per element, shape ``(n_elements, 3, 2)``."""
        return self.vertices[self.elements]

    @cached_property
    def areas(self):
        return signed_areas(self.coords)

    @cached_property
    def edge_lengths(self):
        """Lengths of local edges, shape ``(n_elements, 3)``."""
        c = self.coords
        d = c[:, LOCAL_EDGES[:, 1]] - c[:, LOCAL_EDGES[:, 0]]
        return np.hypot(d[..., 0], d[..., 1])

    @cached_property
    def diameters(self):
        """``h_K``, the longest edge length of each element."""
        return self.edge_lengths.max(axis=1)

    @cached_property
    def refinement_edge(self):
        """Local index of the longest edge (ties: smallest opposite vertex)."""
        return np.array([_longest_local_edge(self.vertices, tri)
                         for tri in self.elements], dtype=np.int64)

    @cached_property
    def barycentric_gradients(self):
        """Gradients of the barycentric coordinates, shape ``(nt, 3, 2)``."""
        c = self.coords
        jac = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=2)
        inv = np.linalg.inv(jac)
        g = np.empty((len(c), 3, 2))
        g[:, 1] = inv[:, 0]
        g[:, 2] = inv[:, 1]
        g[:, 0] = -g[:, 1] - g[:, 2]
        return g

    def physical_points(self, lam, elems=None):
        """Map barycentric points (``(nq, 3)`` or ``(n, nq, 3)``) to ``x``."""
        c = self.coords if elems is None else self.coords[elems]
        if lam.ndim == 2:
            return np.einsum("qi,tid->tqd", lam, c)
        return np.einsum("tqi,tid->tqd", lam, c)

    def barycentric(self, elems, x):
        """Barycentric coordinates of points ``x`` (``(n, m, 2)``) in ``elems``."""
        c = self.coords[elems]
        g = self.barycentric_gradients[elems]
        lam = np.empty(x.shape[:-1] + (3,))
        d = x - c[:, None, 0]
        lam[..., 1] = np.einsum("tqd,td->tq", d, g[:, 1])
        lam[..., 2] = np.einsum("tqd,td->tq", d, g[:, 2])
        lam[..., 0] = 1.0 - lam[..., 1] - lam[..., 2]
        return lam

    def domain_area(self):
        if self.polygon is None:
            return float(self.areas.sum())
        return polygon_area(self.polygon)


# ---------------------------------------------------------------- geometry

def signed_areas(coords):
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segment_distance(x, p, q):
    d = q - p
    s = np.clip(((x - p) @ d) / (d @ d), 0.0, 1.0)
    proj = p + s[:, None] * d
    return np.hypot(*(x - proj).T)


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-14 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - 1e-14 <= c[0] <= max(a[0], b[0]) + 1e-14 and
                min(a[1], b[1]) - 1e-14 <= c[1] <= max(a[1], b[1]) + 1e-14)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2)) or
            (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def check_simple_polygon(poly):
    poly = np.asarray(poly, dtype=float)
    n = len(poly)
    if n < 3:
        raise GeometryError("polygon needs at least 3 vertices")
    if len(np.unique(poly, axis=0)) != n:
        raise GeometryError("polygon repeats a vertex")
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]):
                raise GeometryError(f"polygon sides {i} and {j} intersect")
    if abs(polygon_area(poly)) == 0.0:
        raise GeometryError("polygon has zero area")


def _point_in_polygon(pts, poly):
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for i in range(n):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
        crosses = (y1 > pts[:, 1]) != (y2 > pts[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x1 + (pts[:, 1] - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (pts[:, 0] < xc)
    return inside


def _lattice_spacing(poly):
    fr = [Fraction(float(c)).limit_denominator(10**6) for c in np.ravel(poly - poly.min(axis=0))]
    den = reduce(lambda a, b: a * b // gcd(a, b), (f.denominator for f in fr), 1)
    num = reduce(gcd, (int(f * den) for f in fr), 0)
    if num == 0:
        raise GeometryError("degenerate polygon")
    return num / den


# ---------------------------------------------------------------- building

def _connectivity(elements):
    nt = len(elements)
    loc = np.sort(elements[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
    edges, inv = np.unique(loc, axis=0, return_inverse=True)
    inv = inv.ravel()
    element_edges = inv.reshape(nt, 3)
    counts = np.bincount(inv, minlength=len(edges))
    if np.any(counts > 2):
        raise GeometryError("edge shared by more than two elements")
    owner = np.repeat(np.arange(nt), 3)
    order = np.argsort(inv, kind="stable")
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    edge_elements = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_elements[:, 0] = owner[order[start]]
    two = counts == 2
    edge_elements[two, 1] = owner[order[start[two] + 1]]
    for a in (edges, element_edges, edge_elements):
        a.setflags(write=False)
    return {"edges": edges, "element_edges": element_edges, "edge_elements": edge_elements}


def build_initial_mesh(domain):
    """Criss-cross mesh: every grid cell inside the domain is split into four
    triangles through its centroid."""
    poly = domain.vertices()
    check_simple_polygon(poly)
    if polygon_area(poly) < 0:
        poly = poly[::-1]
    h = domain.cell_size()
    lo = poly.min(axis=0)
    nx, ny = np.rint(np.ptp(poly, axis=0) / h).astype(int)
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    centers = lo + h * np.column_stack([i + 0.5, j + 0.5])
    keep = _point_in_polygon(centers, poly)
    i, j, centers = i[keep], j[keep], centers[keep]
    if not np.isclose(len(i) * h * h, polygon_area(poly), rtol=1e-12, atol=0):
        raise GeometryError("polygon is not a union of grid cells of size %g" % h)

    corner_ids = {}
    verts = []

    def corner(a, b):
        key = (a, b)
        if key not in corner_ids:
            corner_ids[key] = len(verts)
            verts.append(lo + h * np.array([a, b], dtype=float))
        return corner_ids[key]

    tris = []
    for ci, cj, cc in zip(i, j, centers):
        p00, p10 = corner(ci, cj), corner(ci + 1, cj)
        p11, p01 = corner(ci + 1, cj + 1), corner(ci, cj + 1)
        c = len(verts)
        verts.append(cc)
        tris += [(p00, p10, c), (p10, p11, c), (p11, p01, c), (p01, p00, c)]
    mesh = Mesh(np.array(verts), np.array(tris), polygon=poly)
    check_conformity(mesh)
    return mesh


def check_conformity(mesh):
    """Raise :class:`GeometryError` unless the mesh satisfies its invariants."""
    if np.any(mesh.areas <= 0):
        raise GeometryError("non-positive element area")
    bnd = mesh.boundary_edge_flags
    if mesh.polygon is not None:
        if np.any(mesh.boundary_segment_tags[bnd] < 0):
            raise GeometryError("boundary edge off the domain boundary (hanging node)")
        area = mesh.domain_area()
        if abs(mesh.areas.sum() - area) > 1e-12 * abs(area):
            raise GeometryError("element areas do not add up to the domain area")
    euler = mesh.n_vertices - mesh.n_edges + mesh.n_elements
    if euler != 1:
        raise GeometryError(f"Euler characteristic {euler} != 1")
    return True


# ---------------------------------------------------------------- refinement

def _longest_local_edge(vertices, tri):
    p = vertices[list(tri)]
    d = p[[2, 0, 1]] - p[[1, 2, 0]]
    l2 = np.einsum("ij,ij->i", d, d)
    cand = np.flatnonzero(l2 >= l2.max() * (1.0 - _TIE_TOL))
    if len(cand) == 1:
        return int(cand[0])
    return int(min(cand, key=lambda k: tri[k]))


def bisect(mesh, marked):
    """Longest-edge bisection of ``marked`` elements with conformity closure.

    Every element that has a split edge is itself bisected across its
    longest edge (which is split in turn), until no hanging node remains.
    """
    marked = sorted({int(k) for k in marked})
    if not marked:
        return Mesh(mesh.vertices, mesh.elements, mesh.polygon,
                    parent=np.arange(mesh.n_elements))
    if marked[0] < 0 or marked[-1] >= mesh.n_elements:
        raise IndexError("marked element id out of range")

    coords = list(mesh.vertices)
    elems = [tuple(int(a) for a in t) for t in mesh.elements]
    origin = list(range(len(elems)))
    alive = [True] * len(elems)
    edge_map = {}
    for t, tri in enumerate(elems):
        for k in range(3):
            edge_map.setdefault(_key(tri[(k + 1) % 3], tri[(k + 2) % 3]), set()).add(t)
    split = set()
    midpoint = {}
    queue = deque()

    def longest_fast(tri):
        p = np.array([coords[tri[0]], coords[tri[1]], coords[tri[2]]])
        d = p[[2, 0, 1]] - p[[1, 2, 0]]
        l2 = (d * d).sum(axis=1)
        cand = np.flatnonzero(l2 >= l2.max() * (1.0 - _TIE_TOL))
        if len(cand) == 1:
            return int(cand[0])
        return int(min(cand, key=lambda k: tri[k]))

    for t in marked:
        tri = elems[t]
        k = longest_fast(tri)
        e = _key(tri[(k + 1) % 3], tri[(k + 2) % 3])
        split.add(e)
        queue.extend(sorted(edge_map[e]))

    while queue:
        t = queue.popleft()
        if not alive[t]:
            continue
        tri = elems[t]
        own = [_key(tri[(k + 1) % 3], tri[(k + 2) % 3]) for k in range(3)]
        if not any(e in split for e in own):
            continue
        k = longest_fast(tri)
        e = own[k]
        if e not in split:
            split.add(e)
            queue.extend(sorted(edge_map[e] - {t}))
        m = midpoint.get(e)
        if m is None:
            m = len(coords)
            a, b = e
            coords.append(0.5 * (coords[a] + coords[b]))
            midpoint[e] = m
        a, b, c = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
        alive[t] = False
        for ed in own:
            edge_map[ed].discard(t)
        for child in ((a, b, m), (a, m, c)):
            cid = len(elems)
            elems.append(child)
            origin.append(origin[t])
            alive.append(True)
            for j in range(3):
                edge_map.setdefault(_key(child[(j + 1) % 3], child[(j + 2) % 3]), set()).add(cid)
            queue.append(cid)

    keep = [t for t in range(len(elems)) if alive[t]]
    new = Mesh(np.array(coords), np.array([elems[t] for t in keep]), mesh.polygon,
               parent=np.array([origin[t] for t in keep], dtype=np.int64))
    return new


def _key(a, b):
    return (a, b) if a < b else (b, a)


def refine_uniform(mesh):
    """Bisect every element twice (four children each, ``h`` halved)."""
    once = bisect(mesh, range(mesh.n_elements))
    twice = bisect(once, range(once.n_elements))
    return Mesh(twice.vertices, twice.elements, twice.polygon,
                parent=once.parent[twice.parent])


def compose_parents(*meshes):
    """Ancestor map from the last mesh's elements into the first mesh.

    ``meshes`` is a refinement chain where each mesh's ``parent`` refers to
    the preceding one.
    """
    anc = np.arange(meshes[-1].n_elements)
    for m in reversed(meshes[1:]):
        anc = m.parent[anc]
    return anc


# ---------------------------------------------------------------- queries

def locate_point(mesh, x, tol=BARY_TOL):
    """Ids of all closed elements containing ``x`` (empty if outside)."""
    x = np.asarray(x, dtype=float)
    lam = mesh.barycentric(np.arange(mesh.n_elements), np.broadcast_to(x, (mesh.n_elements, 1, 2)))
    return set(np.flatnonzero(np.all(lam[:, 0] >= -tol, axis=1)).tolist())


def patches(mesh, K):
    """Return ``(N_K, N_K_star)``: edge neighbours and vertex neighbours of
    element ``K``, both including ``K``."""
    nk = {int(K)}
    for e in mesh.element_edges[K]:
        a, b = mesh.edge_elements[e]
        if b >= 0:
            nk.update((int(a), int(b)))
    star = np.flatnonzero(np.isin(mesh.elements, mesh.elements[K]).any(axis=1))
    return nk, set(star.tolist())


def local_distance(K, z):
    """Largest distance from the closed triangle ``K`` (3x2 vertices) to ``z``."""
    K = np.asarray(K, dtype=float)
    return float(np.max(np.hypot(*(K - np.asarray(z, dtype=float)).T)))


def multi_source_distance(K, Z):
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    if len(Z) == 0:
        raise ValueError("source set Z must be nonempty")
    return min(local_distance(K, z) for z in Z)


def element_distances(mesh, Z):
    """Vectorised :func:`multi_source_distance` over all elements."""
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    if len(Z) == 0:
        raise ValueError("source set Z must be nonempty")
    d = np.linalg.norm(mesh.coords[:, None, :, :] - Z[None, :, None, :], axis=3)
    return d.max(axis=2).min(axis=1)


def boundary_distance(polygon, x):
    """Distance from point ``x`` to the polygon boundary."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(polygon)
    return min(float(_segment_distance(x, polygon[s], polygon[(s + 1) % n])[0]) for s in range(n))
