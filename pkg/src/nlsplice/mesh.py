"""Simplicial meshes, region predicates, subdomain partitions and DOF sets.

Meshes are plain vertex/element arrays. A :class:`DomainPartition` records
which elements belong to the local subdomain, the nonlocal subdomain and the
two collars of the nonlocal problem; a :class:`DofPartition` turns this into
the index sets used to assemble and splice the two discrete problems.
"""
import csv
from dataclasses import dataclass, field
from functools import cached_property
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay, cKDTree

EPS = 1e-10


# --------------------------------------------------------------------------
# meshes
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh in one or two dimensions.

    Attributes
    ----------
    vertices : ndarray, shape (nv, d)
    elements : ndarray of int, shape (ne, d + 1)
        Triangles are stored counter-clockwise, segments left to right.
    """

    vertices: np.ndarray
    elements: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        e = np.asarray(self.elements, dtype=np.int64)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "elements", e)
        if e.shape[1] != v.shape[1] + 1:
            raise ValueError("elements must have d + 1 vertices")
        if np.any(self.volumes <= 0):
            raise ValueError("degenerate or negatively oriented element")

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_elements(self):
        return self.elements.shape[0]

    @cached_property
    def element_coords(self):
        """Vertex coordinates per element, shape (ne, d + 1, d)."""
        return self.vertices[self.elements]

    @cached_property
    def volumes(self):
        c = self.vertices[self.elements]
        if self.dim == 1:
            return c[:, 1, 0] - c[:, 0, 0]
        e1 = c[:, 1] - c[:, 0]
        e2 = c[:, 2] - c[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def centroids(self):
        return self.element_coords.mean(axis=1)

    @cached_property
    def diameters(self):
        c = self.element_coords
        k = c.shape[1]
        d = np.zeros(len(c))
        for i in range(k):
            for j in range(i + 1, k):
                d = np.maximum(d, np.linalg.norm(c[:, i] - c[:, j], axis=1))
        return d

    @cached_property
    def vertex_element_incidence(self):
        """Sparse (nv, ne) 0/1 matrix."""
        ne, k = self.elements.shape
        rows = self.elements.ravel()
        cols = np.repeat(np.arange(ne), k)
        return sp.csr_matrix((np.ones(ne * k), (rows, cols)),
                             shape=(self.num_vertices, ne))

    @cached_property
    def facets(self):
        """Unique facets and the (up to two) elements sharing each.

        Returns ``(facet_vertices, owners)`` with ``owners[:, 1] == -1`` on
        the mesh boundary.
        """
        e = self.elements
        if self.dim == 1:
            local = [(0,), (1,)]
        else:
            local = [(0, 1), (1, 2), (2, 0)]
        allf = np.vstack([np.sort(e[:, list(l)], axis=1) for l in local])
        owner = np.tile(np.arange(len(e)), len(local))
        uniq, inv = np.unique(allf, axis=0, return_inverse=True)
        inv = inv.ravel()
        owners = -np.ones((len(uniq), 2), dtype=np.int64)
        order = np.argsort(inv, kind="stable")
        counts = np.bincount(inv, minlength=len(uniq))
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        owners[:, 0] = owner[order[starts]]
        two = counts == 2
        owners[two, 1] = owner[order[starts[two] + 1]]
        return uniq, owners

    @property
    def boundary_facets(self):
        f, owners = self.facets
        return f[owners[:, 1] < 0]

    def submesh_vertices(self, elems):
        """Sorted vertex ids used by the element subset ``elems``."""
        return np.unique(self.elements[elems].ravel())


def uniform_interval_mesh(a, b, h):
    """Uniform segment mesh of [a, b] with ``ceil((b - a) / h)`` elements."""
    if not all(np.isfinite(t) for t in (a, b, h)):
        raise ValueError("non-finite mesh parameters")
    if not (a < b and h > 0):
        raise ValueError("need a < b and h > 0")
    n = int(np.ceil((b - a) / h - 1e-9))
    x = np.linspace(a, b, n + 1)
    el = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(x[:, None], el)


def structured_triangle_mesh(x0, x1, y0, y1, h, pattern="right"):
    """Triangulate a uniform grid of the box [x0, x1] x [y0, y1].

    ``pattern="right"`` splits each cell along its rising diagonal,
    ``pattern="crisscross"`` adds the cell centre and four triangles.
    """
    if not all(np.isfinite(t) for t in (x0, x1, y0, y1, h)):
        raise ValueError("non-finite mesh parameters")
    if not (x0 < x1 and y0 < y1 and h > 0):
        raise ValueError("empty box or non-positive h")
    nx = int(np.ceil((x1 - x0) / h - 1e-9))
    ny = int(np.ceil((y1 - y0) / h - 1e-9))
    return tensor_triangle_mesh(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1),
                                pattern)


def tensor_triangle_mesh(xs, ys, pattern="right"):
    """Triangulate the tensor grid with strictly increasing lines ``xs`` and ``ys``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or len(ys) < 2 or np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise ValueError("grid lines must be strictly increasing")
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    vid = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    v00 = vid[:-1, :-1].ravel()
    v10 = vid[1:, :-1].ravel()
    v11 = vid[1:, 1:].ravel()
    v01 = vid[:-1, 1:].ravel()
    if pattern == "right":
        tris = np.vstack([np.column_stack([v00, v10, v11]),
                          np.column_stack([v00, v11, v01])])
    elif pattern == "crisscross":
        cx = 0.5 * (X[:-1, :-1] + X[1:, 1:]).ravel()
        cy = 0.5 * (Y[:-1, :-1] + Y[1:, 1:]).ravel()
        c = len(verts) + np.arange(nx * ny)
        verts = np.vstack([verts, np.column_stack([cx, cy])])
        tris = np.vstack([np.column_stack([v00, v10, c]),
                          np.column_stack([v10, v11, c]),
                          np.column_stack([v11, v01, c]),
                          np.column_stack([v01, v00, c])])
    else:
        raise ValueError("unknown pattern %r" % pattern)
    # deterministic element order: by centroid, x then y
    cen = verts[tris].mean(axis=1)
    order = np.lexsort((cen[:, 1], cen[:, 0]))
    return Mesh(verts, tris[order])


def padded_interval_mesh(h, delta, half=1.0):
    """Uniform mesh of ``(-half, half)`` extended by whole elements covering a ``delta`` collar."""
    k = int(np.ceil(delta / h - 1e-9))
    return uniform_interval_mesh(-half - k * h, half + k * h, h)


def padded_square_mesh(h, delta, half=1.0, pattern="right"):
    """Structured mesh of ``(-half, half)^2`` extended by whole cells covering a ``delta`` collar."""
    k = int(np.ceil(delta / h - 1e-9))
    e = half + k * h
    return structured_triangle_mesh(-e, e, -e, e, h, pattern)


def graded_square_mesh(h, delta, h_core, core_half, half=1.0, pattern="right"):
    """Like :func:`padded_square_mesh` but with spacing ``h_core`` inside ``(-core_half, core_half)^2``."""
    k = int(np.ceil(delta / h - 1e-9))
    e = half + k * h
    n_out = int(round((e - core_half) / h))
    n_in = int(round(2 * core_half / h_core))
    if not (np.isclose(n_out * h, e - core_half) and np.isclose(n_in * h_core, 2 * core_half)):
        raise ValueError("core_half must be a multiple of both h and h_core")
    left = np.linspace(-e, -core_half, n_out + 1)
    core = np.linspace(-core_half, core_half, n_in + 1)
    xs = np.concatenate([left, core[1:], -left[-2::-1]])
    return tensor_triangle_mesh(xs, xs, pattern)


def refine_uniform(mesh):
    """Split every element into 2 (1D) or 4 (2D) similar children."""
    if mesh.dim == 1:
        x = np.sort(np.concatenate([mesh.vertices[:, 0], mesh.centroids[:, 0]]))
        n = len(x) - 1
        return Mesh(x[:, None], np.column_stack([np.arange(n), np.arange(1, n + 1)]))
    e = mesh.elements
    edges = np.vstack([np.sort(e[:, [0, 1]], 1), np.sort(e[:, [1, 2]], 1),
                       np.sort(e[:, [2, 0]], 1)])
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    nv = mesh.num_vertices
    ne = len(e)
    m01, m12, m20 = (nv + inv[:ne], nv + inv[ne:2 * ne], nv + inv[2 * ne:])
    verts = np.vstack([mesh.vertices, mids])
    tris = np.vstack([np.column_stack([e[:, 0], m01, m20]),
                      np.column_stack([m01, e[:, 1], m12]),
                      np.column_stack([m20, m12, e[:, 2]]),
                      np.column_stack([m01, m12, m20])])
    cen = verts[tris].mean(axis=1)
    order = np.lexsort((cen[:, 1], cen[:, 0]))
    return Mesh(verts, tris[order])


def write_mesh(path, mesh):
    """Plain text: vertex count, vertex lines, element count, element lines."""
    with open(path, "w") as fh:
        fh.write("%d %d\n" % (mesh.num_vertices, mesh.dim))
        for v in mesh.vertices:
            fh.write(" ".join("%.17g" % t for t in v) + "\n")
        fh.write("%d\n" % mesh.num_elements)
        for el in mesh.elements:
            fh.write(" ".join(str(int(t)) for t in el) + "\n")


def read_mesh(path):
    with open(path) as fh:
        nv, d = (int(t) for t in fh.readline().split())
        verts = np.array([[float(t) for t in fh.readline().split()] for _ in range(nv)])
        ne = int(fh.readline())
        els = np.array([[int(t) for t in fh.readline().split()] for _ in range(ne)])
    return Mesh(verts.reshape(nv, d), els.reshape(ne, d + 1))


# --------------------------------------------------------------------------
# region predicates
# --------------------------------------------------------------------------

class Region:
    """Open subset of R^d given by a predicate on points."""

    def contains(self, pts):
        raise NotImplementedError

    def closure(self, pts):
        raise NotImplementedError

    def __or__(self, other):
        return Union(self, other)

    def __sub__(self, other):
        return Difference(self, other)


def _as_points(pts):
    pts = np.asarray(pts, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


class Box(Region):
    """Open axis-aligned box ``prod_i (lo_i, hi_i)``; bounds may be infinite."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))

    def contains(self, pts):
        p = _as_points(pts)
        return np.all((p > self.lo + EPS) & (p < self.hi - EPS), axis=1)

    def closure(self, pts):
        p = _as_points(pts)
        return np.all((p >= self.lo - EPS) & (p <= self.hi + EPS), axis=1)

    def __repr__(self):
        return "Box(%s, %s)" % (self.lo.tolist(), self.hi.tolist())


class Union(Region):
    def __init__(self, *parts):
        self.parts = parts

    def contains(self, pts):
        return np.any([r.contains(pts) for r in self.parts], axis=0)

    def closure(self, pts):
        return np.any([r.closure(pts) for r in self.parts], axis=0)

    def __repr__(self):
        return " | ".join(repr(r) for r in self.parts)


class Difference(Region):
    """``a`` minus the closure of ``b``."""

    def __init__(self, a, b):
        self.a, self.b = a, b

    def contains(self, pts):
        return self.a.contains(pts) & ~self.b.closure(pts)

    def closure(self, pts):
        return self.a.closure(pts) & ~self.b.contains(pts)

    def __repr__(self):
        return "(%r) - (%r)" % (self.a, self.b)


class EmptyRegion(Region):
    def contains(self, pts):
        return np.zeros(len(_as_points(pts)), dtype=bool)

    closure = contains


def classify_elements(mesh, region, name="region"):
    """Boolean mask of elements inside ``region``.

    Raises if the region boundary cuts through an element interior.
    """
    inside = region.contains(mesh.centroids)
    vc = mesh.element_coords.reshape(-1, mesh.dim)
    k = mesh.elements.shape[1]
    v_in = region.contains(vc).reshape(-1, k)
    v_cl = region.closure(vc).reshape(-1, k)
    cut = (inside & ~np.all(v_cl, axis=1)) | (~inside & np.any(v_in, axis=1))
    if np.any(cut):
        raise ValueError("%s boundary cuts through %d element(s)" % (name, cut.sum()))
    return inside


# --------------------------------------------------------------------------
# geometry of element pairs
# --------------------------------------------------------------------------

def _point_segment_distance(p, a, b):
    ab = b - a
    t = np.einsum("...i,...i->...", p - a, ab) / np.einsum("...i,...i->...", ab, ab)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def element_distances(mesh, ia, ib):
    """Exact distance between the closures of element pairs ``(ia[k], ib[k])``."""
    ca = mesh.element_coords[ia]
    cb = mesh.element_coords[ib]
    if mesh.dim == 1:
        return np.maximum(0.0, np.maximum(cb[:, 0, 0] - ca[:, 1, 0],
                                          ca[:, 0, 0] - cb[:, 1, 0]))
    d = np.full(len(ia), np.inf)
    for X, Y in ((ca, cb), (cb, ca)):
        for i in range(3):
            for j in range(3):
                d = np.minimum(d, _point_segment_distance(X[:, i], Y[:, j], Y[:, (j + 1) % 3]))
    # overlapping interiors only happen for identical elements
    d[ia == ib] = 0.0
    return d


def element_max_distances(mesh, ia, ib):
    ca = mesh.element_coords[ia]
    cb = mesh.element_coords[ib]
    diff = ca[:, :, None, :] - cb[:, None, :, :]
    return np.sqrt((diff ** 2).sum(-1)).reshape(len(ia), -1).max(axis=1)


def candidate_pairs(mesh, ia, ib, delta):
    """All pairs (a in ia, b in ib) whose closures are closer than ``delta``.

    Returns arrays ``(a, b, dist)`` sorted lexicographically.
    """
    ia = np.asarray(ia, dtype=np.int64)
    ib = np.asarray(ib, dtype=np.int64)
    if len(ia) == 0 or len(ib) == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z, np.zeros(0)
    cen = mesh.centroids
    rad = np.max(np.linalg.norm(mesh.element_coords - cen[:, None, :], axis=2))
    ta = cKDTree(cen[ia])
    tb = cKDTree(cen[ib])
    sdm = ta.sparse_distance_matrix(tb, delta + 2.0 * rad + EPS, output_type="ndarray")
    a = ia[sdm["i"]]
    b = ib[sdm["j"]]
    dist = element_distances(mesh, a, b)
    keep = dist < delta
    a, b, dist = a[keep], b[keep], dist[keep]
    order = np.lexsort((b, a))
    return a[order], b[order], dist[order]


def distance_to_set(mesh, elems, target, delta):
    """Distance (capped at ``delta``) from each element of ``elems`` to ``target``."""
    out = np.full(len(elems), np.inf)
    a, b, dist = candidate_pairs(mesh, elems, target, delta)
    pos = {e: i for i, e in enumerate(elems)}
    idx = np.array([pos[e] for e in a], dtype=np.int64)
    if len(idx):
        np.minimum.at(out, idx, dist)
    return out


# --------------------------------------------------------------------------
# subdomain partition
# --------------------------------------------------------------------------

@dataclass(eq=False)
class DomainPartition:
    """Element sets of the local/nonlocal splitting of ``omega``.

    All ``elems_*`` are sorted element indices of ``mesh``.
    """

    mesh: Mesh
    omega: Region
    delta: float
    elems_L: np.ndarray
    elems_N: np.ndarray
    elems_NI: np.ndarray
    elems_gI: np.ndarray
    gamma_facets: np.ndarray
    gamma_given_facets: np.ndarray
    degenerate: bool = False
    omega_L: Region = None

    @property
    def elems_nonlocal_space(self):
        """Elements carrying the nonlocal finite element space."""
        return np.unique(np.concatenate([self.elems_N, self.elems_NI, self.elems_gI]))

    @cached_property
    def elems_omega(self):
        return np.flatnonzero(self.omega.contains(self.mesh.centroids))


def _collars(mesh, in_omega, elems_N, delta):
    others = np.flatnonzero(~np.isin(np.arange(mesh.num_elements), elems_N))
    dist = distance_to_set(mesh, others, elems_N, delta)
    near = others[dist < delta]
    return np.sort(near[in_omega[near]]), np.sort(near[~in_omega[near]])


def build_domain_partition(mesh, omega, omega_L, delta):
    """Split the elements of ``omega`` into overlapping local/nonlocal sets.

    The nonlocal set holds every element whose closure meets the closure of
    ``omega - omega_L``; the overlap with the local set is therefore one
    element layer. ``mesh`` must cover ``omega`` plus a collar of width
    ``delta``; collars are found with exact element-to-element distances.
    """
    in_omega = classify_elements(mesh, omega, "domain")
    in_L = in_omega & classify_elements(mesh, omega_L, "local subdomain")
    out = in_omega & ~in_L
    degenerate = not np.any(out)
    inc = mesh.vertex_element_incidence
    if degenerate:
        warnings.warn("local subdomain covers the whole domain; "
                      "coupling degenerates to a boundary layer", RuntimeWarning)
        seed = np.flatnonzero(_on_boundary(mesh, omega))
    else:
        seed = mesh.submesh_vertices(np.flatnonzero(out))
    seed_mask = np.zeros(mesh.num_vertices, dtype=bool)
    seed_mask[seed] = True
    touches = np.asarray(inc[seed_mask].sum(axis=0)).ravel() > 0
    elems_N = np.flatnonzero(in_omega & touches)
    elems_NI, elems_gI = _collars(mesh, in_omega, elems_N, delta)
    gamma, gamma_g = _local_boundary_facets(mesh, in_L, in_omega)
    return DomainPartition(mesh=mesh, omega=omega, delta=delta,
                           elems_L=np.flatnonzero(in_L), elems_N=elems_N,
                           elems_NI=elems_NI, elems_gI=elems_gI,
                           gamma_facets=gamma, gamma_given_facets=gamma_g,
                           degenerate=degenerate, omega_L=omega_L)


def _on_boundary(mesh, omega):
    v = mesh.vertices
    return omega.closure(v) & ~omega.contains(v)


def _local_boundary_facets(mesh, in_L, in_omega):
    f, owners = mesh.facets
    o0, o1 = owners[:, 0], owners[:, 1]
    l0 = in_L[o0]
    l1 = np.where(o1 >= 0, in_L[np.maximum(o1, 0)], False)
    w1 = np.where(o1 >= 0, in_omega[np.maximum(o1, 0)], False)
    w0 = in_omega[o0]
    on_bdry = l0 ^ l1
    other_in_omega = np.where(l0, w1, w0)
    return f[on_bdry & other_in_omega], f[on_bdry & ~other_in_omega]


# --------------------------------------------------------------------------
# degrees of freedom
# --------------------------------------------------------------------------

def _lex(coords, ids):
    ids = np.asarray(ids, dtype=np.int64)
    c = coords[ids]
    keys = tuple(c[:, j] for j in reversed(range(c.shape[1])))
    return ids[np.lexsort(keys)]


def match_coordinates(a, b, tol=1e-9):
    """Index into ``b`` of the point equal to each point of ``a``.

    Raises if a point of ``a`` has no exact (to ``tol``) partner in ``b``.
    """
    if len(a) == 0:
        return np.zeros(0, dtype=np.int64)
    tree = cKDTree(b)
    dist, idx = tree.query(a)
    if np.any(dist > tol):
        raise ValueError("%d DOF(s) are not collocated" % np.sum(dist > tol))
    return idx.astype(np.int64)


@dataclass(eq=False)
class DofPartition:
    """The six DOF index sets and the global ordering of the spliced system.

    Local-space sets index vertices of ``local_mesh``; nonlocal-space sets
    index vertices (P1) or elements (P0) of ``nonlocal_mesh``. The global
    unknown vector is ``[u at I_L ; u at I_N]``.
    """

    local_mesh: Mesh
    local_elements: np.ndarray
    I_L: np.ndarray
    I_Gamma: np.ndarray
    I_GammaGiven: np.ndarray
    nonlocal_mesh: Mesh
    nonlocal_elements: np.ndarray
    nonlocal_space: str
    I_N: np.ndarray
    I_NI: np.ndarray
    I_gI: np.ndarray
    gamma_global: np.ndarray = field(default=None)
    ni_global: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.gamma_global is None:
            self.gamma_global = self.n_L + match_coordinates(
                self.local_coords[self.I_Gamma], self.nonlocal_coords[self.I_N])
        if self.ni_global is None:
            self.ni_global = match_coordinates(
                self.nonlocal_coords[self.I_NI], self.local_coords[self.I_L])

    @property
    def n_L(self):
        return len(self.I_L)

    @property
    def n_N(self):
        return len(self.I_N)

    @property
    def n(self):
        return self.n_L + self.n_N

    @property
    def local_coords(self):
        return self.local_mesh.vertices

    @property
    def nonlocal_coords(self):
        if self.nonlocal_space == "P0":
            return self.nonlocal_mesh.centroids
        return self.nonlocal_mesh.vertices

    @property
    def coords(self):
        """Coordinates of the global unknowns, shape (n, d)."""
        return np.vstack([self.local_coords[self.I_L], self.nonlocal_coords[self.I_N]])

    @property
    def n_local_space(self):
        return self.local_mesh.num_vertices

    @property
    def n_nonlocal_space(self):
        if self.nonlocal_space == "P0":
            return self.nonlocal_mesh.num_elements
        return self.nonlocal_mesh.num_vertices

    def labels(self):
        """Rows ``(x, y, label)`` for every DOF of both spaces."""
        rows = []
        for name, ids, c in (("I_L", self.I_L, self.local_coords),
                             ("I_Gamma", self.I_Gamma, self.local_coords),
                             ("I_GammaGiven", self.I_GammaGiven, self.local_coords),
                             ("I_N", self.I_N, self.nonlocal_coords),
                             ("I_NI", self.I_NI, self.nonlocal_coords),
                             ("I_gI", self.I_gI, self.nonlocal_coords)):
            for i in ids:
                p = c[i]
                rows.append((int(i), float(p[0]), float(p[1]) if len(p) > 1 else 0.0, name))
        return rows


def export_dofs_csv(path, dofs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dof_id", "x", "y", "set_label"])
        for r in dofs.labels():
            w.writerow(r)


def classify_dofs(partition, nonlocal_space="P1"):
    """DOF sets for matching P1 local and P0/P1 nonlocal spaces on one mesh.

    For P1 the vertices of the parent mesh are split into interior-of-local
    (``I_L``), the remaining interior vertices (``I_N``, which includes the
    local interface ``I_Gamma``) and boundary/exterior vertices. Nonlocal P0
    DOFs on a shared parent mesh are not collocated with local vertices; use
    :func:`build_p0p1_meshes` for that pairing.
    """
    if nonlocal_space != "P1":
        raise ValueError("matching DOF sets require P1; use build_p0p1_meshes for P0")
    mesh = partition.mesh
    nv = mesh.num_vertices
    on_bdry = _on_boundary(mesh, partition.omega)
    interior = partition.omega.contains(mesh.vertices)
    not_L = np.ones(mesh.num_elements, dtype=bool)
    not_L[partition.elems_L] = False
    inc = mesh.vertex_element_incidence
    touches_non_L = np.asarray(inc @ not_L.astype(float)).ravel() > 0
    int_L = interior & ~touches_non_L
    vL = np.zeros(nv, dtype=bool)
    vL[mesh.submesh_vertices(partition.elems_L)] = True
    vN = np.zeros(nv, dtype=bool)
    vN[mesh.submesh_vertices(partition.elems_nonlocal_space)] = True
    coords = mesh.vertices
    I_L = _lex(coords, np.flatnonzero(vL & int_L))
    I_G = _lex(coords, np.flatnonzero(vL & interior & ~int_L))
    I_Gg = _lex(coords, np.flatnonzero(vL & ~interior))
    I_N = _lex(coords, np.flatnonzero(interior & ~int_L))
    I_NI = _lex(coords, np.flatnonzero(vN & int_L))
    I_gI = _lex(coords, np.flatnonzero(vN & ~interior))
    if not np.all(vN[I_N]):
        raise ValueError("nonlocal DOF outside the nonlocal mesh")
    pos_N = -np.ones(nv, dtype=np.int64)
    pos_N[I_N] = np.arange(len(I_N))
    pos_L = -np.ones(nv, dtype=np.int64)
    pos_L[I_L] = np.arange(len(I_L))
    return DofPartition(local_mesh=mesh, local_elements=partition.elems_L,
                        I_L=I_L, I_Gamma=I_G, I_GammaGiven=I_Gg,
                        nonlocal_mesh=mesh,
                        nonlocal_elements=partition.elems_nonlocal_space,
                        nonlocal_space="P1", I_N=I_N, I_NI=I_NI, I_gI=I_gI,
                        gamma_global=len(I_L) + pos_N[I_G],
                        ni_global=pos_L[I_NI])


def build_p0p1_meshes(omega_N, mesh, delta, omega):
    """Non-matching P0 (nonlocal) / P1 (local) construction.

    The nonlocal subdomain is chosen first. The local mesh gets a vertex at
    the centroid of every element outside ``omega_N`` and of every element of
    ``omega_N`` sharing a facet with one, plus the parent vertices on the
    boundary of ``omega`` that belong to elements outside ``omega_N``. The
    local mesh is then the sorted segment mesh (1D) or a Delaunay
    triangulation with the nonlocal core removed (2D).

    Returns ``(local_mesh, partition, dofs)``.
    """
    in_omega = classify_elements(mesh, omega, "domain")
    in_N = in_omega & classify_elements(mesh, omega_N, "nonlocal subdomain")
    out = in_omega & ~in_N
    elems_N = np.flatnonzero(in_N)
    if len(elems_N) == 0:
        raise ValueError("empty nonlocal subdomain")
    elems_NI, elems_gI = _collars(mesh, in_omega, elems_N, delta)
    # elements of omega_N sharing a facet with an element outside omega_N
    f, owners = mesh.facets
    both = owners[:, 1] >= 0
    o0, o1 = owners[both, 0], owners[both, 1]
    ring_mask = np.zeros(mesh.num_elements, dtype=bool)
    ring_mask[o0[in_N[o0] & out[o1]]] = True
    ring_mask[o1[in_N[o1] & out[o0]]] = True
    ring = np.flatnonzero(ring_mask)
    outer = np.flatnonzero(out)
    bverts = mesh.submesh_vertices(outer) if len(outer) else np.zeros(0, dtype=np.int64)
    bverts = bverts[_on_boundary(mesh, omega)[bverts]]
    pts_L = mesh.centroids[outer]
    pts_G = mesh.centroids[ring]
    pts_B = mesh.vertices[bverts]
    pts = np.vstack([pts_L, pts_G, pts_B])
    kind = np.concatenate([np.zeros(len(pts_L), int), np.ones(len(pts_G), int),
                           2 * np.ones(len(pts_B), int)])
    if mesh.dim == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        pts, kind = pts[order], kind[order]
        n = len(pts) - 1
        local = Mesh(pts, np.column_stack([np.arange(n), np.arange(1, n + 1)]))
    else:
        local = _triangulate_local(pts, kind, omega_N)
    I_L = _lex(local.vertices, np.flatnonzero(kind == 0))
    I_G = _lex(local.vertices, np.flatnonzero(kind == 1))
    I_Gg = _lex(local.vertices, np.flatnonzero(kind == 2))
    partition = DomainPartition(mesh=mesh, omega=omega, delta=delta,
                                elems_L=outer, elems_N=elems_N, elems_NI=elems_NI,
                                elems_gI=elems_gI,
                                gamma_facets=np.zeros((0, mesh.dim), dtype=np.int64),
                                gamma_given_facets=np.zeros((0, mesh.dim), dtype=np.int64))
    cen = mesh.centroids
    dofs = DofPartition(local_mesh=local, local_elements=np.arange(local.num_elements),
                        I_L=I_L, I_Gamma=I_G, I_GammaGiven=I_Gg,
                        nonlocal_mesh=mesh,
                        nonlocal_elements=partition.elems_nonlocal_space,
                        nonlocal_space="P0",
                        I_N=_lex(cen, elems_N), I_NI=_lex(cen, elems_NI),
                        I_gI=_lex(cen, elems_gI))
    return local, partition, dofs


def _triangulate_local(pts, kind, omega_N):
    tri = Delaunay(pts)
    simp = tri.simplices
    c = pts[simp]
    area = 0.5 * ((c[:, 1, 0] - c[:, 0, 0]) * (c[:, 2, 1] - c[:, 0, 1])
                  - (c[:, 1, 1] - c[:, 0, 1]) * (c[:, 2, 0] - c[:, 0, 0]))
    flip = area < 0
    simp[flip] = simp[flip][:, [0, 2, 1]]
    scale = np.ptp(pts, axis=0).max()
    keep = np.abs(area) > 1e-12 * scale ** 2
    # drop triangles spanning the nonlocal core (all corners on the interface)
    core = np.all(kind[simp] == 1, axis=1) & omega_N.contains(c.mean(axis=1))
    simp = simp[keep & ~core]
    used = np.unique(simp)
    if len(used) != len(pts):
        raise ValueError("triangulation dropped %d prescribed vertices" % (len(pts) - len(used)))
    return Mesh(pts, simp)
